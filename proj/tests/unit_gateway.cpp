// Providers, engine, evaluation harness, game sessions, HTTP API, Street View
// client and the command line.

#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>
#include <thread>

#include "countryguess/cli.hpp"
#include "support.hpp"

using namespace countryguess;
using namespace testsupport;

static const fs::path data_dir = COUNTRYGUESS_DATA_DIR;
static const fs::path test_dir = COUNTRYGUESS_TEST_DIR;

namespace {

SyntheticOptions small_synthetic() {
    SyntheticOptions o;
    o.countries = 4;
    o.train_per_country = 3;
    o.query_per_country = 2;
    o.width = 128;
    o.seed = 7;
    return o;
}

/// One small synthetic corpus shared by the suites that only read it.
const SyntheticCorpus& shared_corpus() {
    static TempDir dir("corpus");
    static SyntheticCorpus corpus = generate_synthetic_corpus(dir.path(), small_synthetic());
    return corpus;
}

int cli(std::vector<std::string> args, std::string* out = nullptr, std::string* err = nullptr) {
    args.insert(args.begin(), "countryguess");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream o, e;
    int rc = run_cli(static_cast<int>(argv.size()), argv.data(), o, e);
    if (out) *out = o.str();
    if (err) *err = e.str();
    return rc;
}

/// Structural JSON equality with a relative tolerance on numbers.
::testing::AssertionResult json_near(const Json& a, const Json& b, const std::string& where = "$") {
    if (a.is_number() && b.is_number()) {
        double x = a.get<double>(), y = b.get<double>();
        if (std::fabs(x - y) <= 1e-9 * std::max(1.0, std::fabs(y))) return ::testing::AssertionSuccess();
        return ::testing::AssertionFailure() << where << ": " << x << " vs " << y;
    }
    if (a.type() != b.type()) return ::testing::AssertionFailure() << where << ": type differs";
    if (a.is_object()) {
        if (a.size() != b.size()) return ::testing::AssertionFailure() << where << ": key count differs";
        for (const auto& [k, v] : a.items()) {
            if (!b.contains(k)) return ::testing::AssertionFailure() << where << ": missing " << k;
            if (auto r = json_near(v, b[k], where + "." + k); !r) return r;
        }
        return ::testing::AssertionSuccess();
    }
    if (a.is_array()) {
        if (a.size() != b.size()) return ::testing::AssertionFailure() << where << ": length differs";
        for (std::size_t i = 0; i < a.size(); ++i)
            if (auto r = json_near(a[i], b[i], where + "[" + std::to_string(i) + "]"); !r) return r;
        return ::testing::AssertionSuccess();
    }
    if (a == b) return ::testing::AssertionSuccess();
    return ::testing::AssertionFailure() << where << ": " << a.dump() << " vs " << b.dump();
}

} // namespace

// ---------------------------------------------------------------------------
// providers

TEST(ProviderParsing, OcrAndObjects) {
    RgbImage img(100, 50);
    auto ocr = parse_ocr_result(Json::parse(R"([{"text":"Straße","confidence":0.9},
                                               {"text":"noise","confidence":0.1,"box":[0,0,5,5]}])"),
                                img, 0.3);
    ASSERT_EQ(ocr.size(), 1u);
    EXPECT_EQ(ocr[0].text, "Straße");
    EXPECT_EQ(ocr[0].box.w, 100);
    EXPECT_THROW(parse_ocr_result(Json::parse(R"([{"text":"x","confidence":1.5}])"), img, 0.3), ProtocolError);
    EXPECT_THROW(parse_ocr_result(Json::parse(R"([{"text":"x","confidence":0.5,"box":[90,0,20,5]}])"), img, 0.3),
                 ProtocolError);
    EXPECT_THROW(parse_ocr_result(Json::parse(R"({"text":"x"})"), img, 0.3), ProtocolError);

    auto objs = parse_objects_result(Json::parse(R"([{"label":"Car","confidence":0.8,"box":[1,2,3,4]}])"), img, 0.4);
    ASSERT_EQ(objs.size(), 1u);
    EXPECT_EQ(objs[0].label, "car");
    EXPECT_EQ(objs[0].box.y, 2);
    EXPECT_THROW(parse_objects_result(Json::parse(R"([{"label":"car","confidence":-0.1}])"), img, 0.4), ProtocolError);
}

TEST(ProviderParsing, Caption) {
    EXPECT_EQ(parse_caption_result(Json("a red car on a street")).text, "a red car on a street");
    EXPECT_EQ(parse_caption_result(Json::parse(R"(["a red car on a street"])")).text, "a red car on a street");
    EXPECT_THROW(parse_caption_result(Json("   ")), ProtocolError);
    EXPECT_THROW(parse_caption_result(Json::parse(R"(["a","b"])")), ProtocolError);
}

TEST(FixtureProvider, EchoesByDigestAndIsDeterministic) {
    TempDir dir("fix");
    RgbImage img(8, 4, Rgb{1, 2, 3});
    ProviderImage pimg(img);
    write_json(dir / (pimg.digest() + ".json"),
               Json::parse(R"({"ocr":[{"text":"Straße","confidence":0.9}],"caption":["a red car on a street"],
                               "objects":{"error":"detector offline"}})"));
    FixtureProvider p(dir.path());
    auto a = run_ocr(p, pimg);
    ASSERT_EQ(a.size(), 1u);
    EXPECT_EQ(a[0].text, "Straße");
    EXPECT_EQ(run_caption(p, pimg).text, "a red car on a street");
    EXPECT_THROW(run_objects(p, pimg), ProviderError);
    EXPECT_EQ(p.request("ocr", pimg), p.request("ocr", pimg));

    // Same pixels, different instance: same digest, same response.
    RgbImage copy = img;
    ProviderImage other(copy);
    EXPECT_EQ(other.digest(), pimg.digest());
    RgbImage changed = img;
    changed.at(0, 0) = {9, 9, 9};
    ProviderImage third(changed);
    EXPECT_THROW(p.request("ocr", third), ProviderError);
    EXPECT_THROW(FixtureProvider(dir / "missing"), ConfigError);
}

TEST(ProviderImage, MaterializedFileHasSamePixels) {
    std::mt19937_64 rng(30);
    auto img = random_image(40, 20, rng);
    fs::path written;
    {
        ProviderImage p(img);
        written = p.path();
        EXPECT_EQ(p.path(), written);
        auto back = decode_image(read_bytes(written));
        EXPECT_EQ(back, img);
        EXPECT_EQ(image_digest(back), p.digest());
    }
    EXPECT_FALSE(fs::exists(written));
}

namespace {
const char* echo_loop = R"(while IFS= read -r line; do
  id=$(printf '%s' "$line" | sed 's/.*"request_id":\([0-9]*\).*/\1/')
  RESPONSE
done
)";

std::string script_body(const std::string& response) {
    std::string s = echo_loop;
    s.replace(s.find("RESPONSE"), 8, response);
    return s;
}
} // namespace

TEST(SubprocessProvider, SpeaksLineProtocol) {
    TempDir dir("sub");
    auto script = write_script(dir / "ok.sh", script_body(R"(printf '{"request_id":%s,"result":[{"text":"Straße","confidence":0.9}]}\n' "$id")"));
    SubprocessProvider p(script.string());
    RgbImage img(8, 4);
    ProviderImage pimg(img);
    for (int i = 0; i < 3; ++i) {
        auto r = run_ocr(p, pimg);
        ASSERT_EQ(r.size(), 1u);
        EXPECT_EQ(r[0].text, "Straße");
    }
}

TEST(SubprocessProvider, ConfidenceOutOfRangeIsProtocolError) {
    TempDir dir("sub");
    auto script = write_script(dir / "bad.sh", script_body(R"(printf '{"request_id":%s,"result":[{"text":"x","confidence":1.5}]}\n' "$id")"));
    SubprocessProvider p(script.string());
    RgbImage img(8, 4);
    ProviderImage pimg(img);
    EXPECT_THROW(run_ocr(p, pimg), ProtocolError);
}

TEST(SubprocessProvider, MismatchedIdAndGarbage) {
    TempDir dir("sub");
    RgbImage img(8, 4);
    ProviderImage pimg(img);
    SubprocessProvider wrong(write_script(dir / "w.sh", script_body(R"(printf '{"request_id":999,"result":[]}\n')")).string());
    EXPECT_THROW(wrong.request("ocr", pimg), ProtocolError);
    SubprocessProvider junk(write_script(dir / "j.sh", script_body("echo not-json")).string());
    EXPECT_THROW(junk.request("ocr", pimg), ProtocolError);
    SubprocessProvider err(write_script(dir / "e.sh", script_body(R"(printf '{"request_id":%s,"error":"model missing"}\n' "$id")")).string());
    EXPECT_THROW(err.request("ocr", pimg), ProviderError);
}

TEST(SubprocessProvider, DeadlineExceeded) {
    TempDir dir("sub");
    SubprocessProvider p(write_script(dir / "slow.sh", "sleep 5\n").string(), std::chrono::milliseconds(200));
    RgbImage img(8, 4);
    ProviderImage pimg(img);
    auto t0 = std::chrono::steady_clock::now();
    try {
        p.request("ocr", pimg);
        FAIL() << "expected a timeout";
    } catch (const ProviderError& e) {
        EXPECT_TRUE(e.timed_out());
    }
    EXPECT_LT(std::chrono::steady_clock::now() - t0, std::chrono::seconds(3));
}

TEST(SubprocessProvider, CrashCarriesStderrAndRestarts) {
    TempDir dir("sub");
    auto marker = dir / "crashed-once";
    auto script = write_script(dir / "crash.sh", "if [ ! -e '" + marker.string() + "' ]; then touch '" + marker.string() +
                                                     "'; echo 'segfault in model loader' >&2; exit 3; fi\n" +
                                                     script_body(R"(printf '{"request_id":%s,"result":["fine"]}\n' "$id")"));
    SubprocessProvider p(script.string());
    RgbImage img(8, 4);
    ProviderImage pimg(img);
    try {
        p.request("caption", pimg);
        FAIL() << "expected a provider error";
    } catch (const ProviderError& e) {
        EXPECT_FALSE(e.timed_out());
        EXPECT_NE(e.stderr_excerpt().find("segfault in model loader"), std::string::npos);
    }
    EXPECT_EQ(run_caption(p, pimg).text, "fine");
}

// ---------------------------------------------------------------------------
// engine

TEST(Engine, ConfigErrors) {
    EXPECT_THROW(Engine::from_config(Json::array(), "."), ConfigError);
    EXPECT_THROW(Engine::from_config(Json::object(), "."), ConfigError);
    auto cfg = read_json(data_dir / "config.json");
    auto bad = cfg;
    bad["modules"] = {"color", "sonar"};
    EXPECT_THROW(Engine::from_config(bad, data_dir), ConfigError);
    bad = cfg;
    bad["modules"] = {"color", "color"};
    EXPECT_THROW(Engine::from_config(bad, data_dir), ConfigError);
    bad = cfg;
    bad["weights"] = {{"color", 1.0}};
    EXPECT_THROW(Engine::from_config(bad, data_dir), ConfigError);
    bad = cfg;
    bad["providers"] = {{"ocr", {{"url", "http://x"}}}};
    EXPECT_THROW(Engine::from_config(bad, data_dir), ConfigError);
    EXPECT_THROW(Engine::from_config_file(data_dir / "nope.json"), ConfigError);
}

TEST(Engine, BundledConfigurationLoads) {
    auto engine = Engine::from_config_file(data_dir / "config.json");
    EXPECT_GE(engine.registry().size(), 10u);
    double total = 0;
    for (const auto& id : engine.weights().ids()) total += engine.weights().at(id);
    EXPECT_NEAR(total, 1.0, 1e-12);
    // No providers and no trained image profiles: only solar can speak.
    RgbImage img(256, 128, Rgb{30, 30, 30});
    draw_sun(img, 180, 40, 0, 12);
    auto report = engine.guess(Panorama(img, 0.0));
    EXPECT_EQ(report.ranking.entries.size(), engine.registry().size());
    EXPECT_EQ(report.weights_used.count("solar"), 1u);
    EXPECT_TRUE(report.abstentions.count("color"));
    EXPECT_TRUE(report.abstentions.count("textlang"));
    auto de = rank_of_truth(report.ranking, CountryCode("DE"));
    auto nz = rank_of_truth(report.ranking, CountryCode("NZ"));
    EXPECT_LT(de, nz);
}

TEST(Engine, MissingColorProfilesAbstain) {
    const auto& c = shared_corpus();
    TempDir dir("nocolor");
    auto cfg = read_json(c.config);
    cfg["profiles"]["color"] = "does-not-exist";
    auto engine = Engine::from_config(cfg, c.config.parent_path());
    auto q = load_manifest(c.query_manifest);
    auto report = engine.guess(load_panorama(q.items[0].path, q.items[0].north_offset_deg), q.items[0].path);
    EXPECT_TRUE(report.abstentions.count("color"));
    EXPECT_EQ(report.weights_used.count("color"), 0u);
    EXPECT_FALSE(report.per_module.at("color").notes.empty());
}

TEST(Engine, ProviderFailureDegradesToAbstention) {
    const auto& c = shared_corpus();
    TempDir dir("crashcfg");
    auto crash = write_script(dir / "crash.sh", "echo 'CUDA out of memory' >&2\nexit 1\n");
    auto cfg = read_json(c.config);
    cfg["providers"]["ocr"] = {{"command", crash.string()}};
    auto engine = Engine::from_config(cfg, c.config.parent_path());
    auto q = load_manifest(c.query_manifest);
    auto report = engine.guess(load_panorama(q.items[0].path, q.items[0].north_offset_deg), q.items[0].path);
    ASSERT_TRUE(report.abstentions.count("textlang"));
    bool mentions_stderr = false;
    for (const auto& n : report.per_module.at("textlang").notes)
        mentions_stderr |= n.find("CUDA out of memory") != std::string::npos;
    EXPECT_TRUE(mentions_stderr);
    EXPECT_EQ(report.ranking.entries.size(), engine.registry().size());
}

TEST(Engine, GoldenReport) {
    const auto& c = shared_corpus();
    auto engine = Engine::from_config_file(c.config);
    auto q = load_manifest(c.query_manifest);
    auto report = to_json(engine.guess(load_panorama(q.items[0].path, q.items[0].north_offset_deg), q.items[0].path));
    auto actual = Json::parse(report.dump());
    const auto golden_file = test_dir / "golden" / "guess_report.json";
    if (std::getenv("COUNTRYGUESS_UPDATE_GOLDEN")) write_file(golden_file, report.dump(2) + "\n");
    auto golden = read_json(golden_file);
    EXPECT_TRUE(json_near(actual, golden));
    // Byte-identical across repeated runs in one process.
    EXPECT_EQ(to_json(engine.guess(load_panorama(q.items[0].path, q.items[0].north_offset_deg), q.items[0].path)).dump(),
              report.dump());
}

TEST(Engine, UndecodableImage) {
    std::vector<unsigned char> junk(100, 0x42);
    EXPECT_THROW(decode_panorama(junk, 0.0), DecodeError);
    TempDir dir("corrupt");
    write_file(dir / "bad.png", std::string("\x89PNG\r\n\x1a\n garbage", 17));
    EXPECT_THROW(load_panorama(dir / "bad.png", 0.0), DecodeError);
}

// ---------------------------------------------------------------------------
// evaluation

namespace {

/// Caption-only engine over AA, BB, CC with fixture answers chosen per image.
struct CaptionWorld {
    TempDir dir{"capworld"};
    std::shared_ptr<CountryRegistry> registry;
    DatasetManifest manifest;
    std::unique_ptr<Engine> engine;

    CaptionWorld(const std::vector<std::pair<std::string, std::string>>& items) {
        registry = std::make_shared<CountryRegistry>(
            CountryRegistry::from_sheets({sheet("AA", 40, 50), sheet("BB", 40, 50), sheet("CC", 40, 50)}));
        fs::create_directories(dir / "fx");
        for (std::size_t i = 0; i < items.size(); ++i) {
            RgbImage img(64, 32, Rgb{static_cast<std::uint8_t>(10 * i), 0, 0});
            auto path = dir / ("p" + std::to_string(i) + ".png");
            save_png(path, img);
            write_json(dir / ("fx/" + image_digest(img) + ".json"), Json{{"caption", Json::array({items[i].second})}});
            manifest.items.push_back({path, CountryCode(items[i].first), 0.0});
        }
        EngineParts p;
        p.registry = registry;
        p.modules = {"caption"};
        p.captioner = std::make_shared<FixtureProvider>(dir / "fx");
        p.caption_profiles = {
            build_frequency_profile(CountryCode("AA"), FrequencyKind::caption_words, {{{"ant", 1}}}),
            build_frequency_profile(CountryCode("BB"), FrequencyKind::caption_words, {{{"bee", 1}}}),
            build_frequency_profile(CountryCode("CC"), FrequencyKind::caption_words, {{{"cow", 1}}})};
        engine = std::make_unique<Engine>(std::move(p));
    }
};

} // namespace

TEST(RunEvaluation, RanksOneTwoOne) {
    CaptionWorld w({{"AA", "an ant"}, {"AA", "a bee"}, {"CC", "the cow"}});
    auto r = run_evaluation(w.manifest, *w.engine, 1);
    ASSERT_TRUE(r.metrics);
    std::vector<std::size_t> ranks;
    for (const auto& it : r.items) ranks.push_back(it.rank);
    EXPECT_EQ(ranks, (std::vector<std::size_t>{1, 2, 1}));
    EXPECT_NEAR(r.metrics->mean_rank, 4.0 / 3.0, 1e-12);
    EXPECT_EQ(r.metrics->top1_count, 2u);
    EXPECT_EQ(r.failures, 0u);
}

TEST(RunEvaluation, UnreadableItemIsCountedNotScored) {
    CaptionWorld w({{"AA", "an ant"}, {"CC", "the cow"}});
    w.manifest.items.push_back({w.dir / "missing.png", CountryCode("BB"), 0.0});
    auto r = run_evaluation(w.manifest, *w.engine, 2);
    ASSERT_TRUE(r.metrics);
    EXPECT_EQ(r.metrics->n, 2u);
    EXPECT_EQ(r.failures, 1u);
    ASSERT_EQ(r.items.size(), 3u);
    EXPECT_FALSE(r.items[2].ok);
    EXPECT_FALSE(r.items[2].error.empty());
}

TEST(RunEvaluation, EmptyManifestAndUnknownTruth) {
    CaptionWorld w({});
    EXPECT_THROW(run_evaluation(w.manifest, *w.engine), ArgumentError);
    w.manifest.items.push_back({w.dir / "x.png", CountryCode("ZZ"), 0.0});
    EXPECT_THROW(run_evaluation(w.manifest, *w.engine), ValidationError);
}

TEST(RunEvaluation, DeterministicAcrossRunsAndThreadCounts) {
    const auto& c = shared_corpus();
    auto engine = Engine::from_config_file(c.config);
    auto q = load_manifest(c.query_manifest);
    auto a = to_json(run_evaluation(q, engine, 1)).dump();
    auto b = to_json(run_evaluation(q, engine, 4)).dump();
    EXPECT_EQ(a, b);
}

TEST(RunAblation, Structure) {
    const auto& c = shared_corpus();
    auto engine = Engine::from_config_file(c.config);
    auto q = load_manifest(c.query_manifest);
    auto ev = collect_evidence(q, engine, 0);
    auto one = ablate_evidence(ev, engine, {});
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(one[0].modules, engine.modules());

    std::vector<std::string> order{"plate", "textlang", "object", "solar", "color"};
    auto rows = ablate_evidence(ev, engine, order);
    ASSERT_EQ(rows.size(), 6u);
    for (std::size_t k = 1; k < rows.size(); ++k) {
        std::set<std::string> prev(rows[k - 1].modules.begin(), rows[k - 1].modules.end());
        std::set<std::string> cur(rows[k].modules.begin(), rows[k].modules.end());
        EXPECT_EQ(cur.size() + 1, prev.size());
        EXPECT_FALSE(cur.count(order[k - 1]));
        for (const auto& m : cur) EXPECT_TRUE(prev.count(m));
    }
    // Row 0 equals a plain evaluation.
    auto full = run_evaluation(q, engine, 0);
    EXPECT_DOUBLE_EQ(rows[0].metrics->mean_rank, full.metrics->mean_rank);
    EXPECT_THROW(ablate_evidence(ev, engine, {"sonar"}), ArgumentError);
    EXPECT_THROW(ablate_evidence(ev, engine, {"color", "color"}), ArgumentError);
    EXPECT_FALSE(format_ablation_table(rows).empty());
}

// ---------------------------------------------------------------------------
// game

TEST(GameScoring, Examples) {
    CountryRanking r{{{CountryCode("DE"), 0.5}, {CountryCode("AT"), 0.3}, {CountryCode("FR"), 0.2}}};
    auto a = score_round(CountryCode("FR"), r, CountryCode("FR"));
    EXPECT_EQ(a.user_points, 100);
    EXPECT_EQ(a.system_points, 80);
    auto b = score_round(CountryCode("AT"), r, CountryCode("DE"));
    EXPECT_EQ(b.user_points, 0);
    EXPECT_EQ(b.system_points, 100);
    EXPECT_EQ(system_points_for_rank(11), 0);
    EXPECT_EQ(system_points_for_rank(30), 0);
}

TEST(GameService, SessionLifecycle) {
    const auto& c = shared_corpus();
    auto engine = Engine::from_config_file(c.config);
    auto pool = load_manifest(c.query_manifest);
    GameService games(engine, pool, 42);
    auto s = games.create(2);
    const std::string id = s["id"];
    EXPECT_EQ(s["status"], "active");
    EXPECT_EQ(s["rounds"].size(), 2u);

    EXPECT_THROW(games.state("feedface"), NotFoundError);
    EXPECT_THROW(games.submit_guess(id, 1, CountryCode("XA")), StateError);  // out of order
    auto after = games.submit_guess(id, 0, CountryCode("XA"));
    EXPECT_TRUE(after["rounds"][0]["resolved"].get<bool>());
    EXPECT_FALSE(after["rounds"][1].contains("truth"));
    EXPECT_THROW(games.submit_guess(id, 0, CountryCode("XA")), StateError);  // double submission
    EXPECT_THROW(games.submit_guess(id, 1, CountryCode("QQ")), ArgumentError);
    games.submit_guess(id, 1, CountryCode("XB"));
    EXPECT_EQ(games.state(id)["status"], "finished");
    EXPECT_THROW(games.submit_guess(id, 1, CountryCode("XB")), StateError);
    EXPECT_THROW(games.submit_guess(id, 5, CountryCode("XB")), NotFoundError);
    EXPECT_THROW(games.create(0), ArgumentError);
    EXPECT_THROW(games.create(pool.items.size() + 1), ArgumentError);
}

TEST(GameService, ReplayReproducesScores) {
    const auto& c = shared_corpus();
    auto engine = Engine::from_config_file(c.config);
    auto pool = load_manifest(c.query_manifest);
    auto play = [&] {
        GameService games(engine, pool, 99);
        auto s = games.create(3);
        const std::string id = s["id"];
        for (std::size_t k = 0; k < 3; ++k) s = games.submit_guess(id, k, CountryCode(k % 2 ? "XA" : "XC"));
        s.erase("id");
        for (auto& r : s["rounds"]) r.erase("image");
        return s.dump();
    };
    EXPECT_EQ(play(), play());
}

TEST(GameService, NoTruthBeforeResolution) {
    const auto& c = shared_corpus();
    auto engine = Engine::from_config_file(c.config);
    auto pool = load_manifest(c.query_manifest);
    GameService games(engine, pool, 5);
    auto s = games.create(pool.items.size());
    auto dump = s.dump();
    EXPECT_EQ(dump.find("truth"), std::string::npos);
    EXPECT_EQ(dump.find("system_top1"), std::string::npos);
    for (const auto& cty : engine.registry().codes()) EXPECT_EQ(dump.find("\"" + cty.str() + "\""), std::string::npos);
}

// ---------------------------------------------------------------------------
// HTTP API

namespace {

class LiveServer {
public:
    LiveServer(const Engine& engine, DatasetManifest pool, ApiOptions opts = {}) : api_(engine, std::move(pool), opts) {
        api_.install(svr_);
        port_ = svr_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { svr_.listen_after_bind(); });
        svr_.wait_until_ready();
    }
    ~LiveServer() {
        svr_.stop();
        thread_.join();
    }
    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port_);
        c.set_read_timeout(60);
        return c;
    }

private:
    httplib::Server svr_;
    ApiServer api_;
    int port_ = 0;
    std::thread thread_;
};

} // namespace

TEST(HttpApi, StatusMapping) {
    EXPECT_EQ(http_status_for(ErrorKind::argument), 400);
    EXPECT_EQ(http_status_for(ErrorKind::decode), 422);
    EXPECT_EQ(http_status_for(ErrorKind::not_found), 404);
    EXPECT_EQ(http_status_for(ErrorKind::state), 409);
    EXPECT_EQ(http_status_for(ErrorKind::remote), 502);
}

TEST(HttpApi, EndToEndGameWithoutTruthLeaks) {
    const auto& c = shared_corpus();
    auto engine = Engine::from_config_file(c.config);
    auto pool = load_manifest(c.query_manifest);
    ApiOptions opts;
    opts.game_seed = 11;
    LiveServer server(engine, pool, opts);
    auto cli = server.client();

    std::set<std::string> truths;
    for (const auto& it : pool.items) truths.insert(it.truth.str());
    std::vector<std::string> pre_resolution;

    auto countries = cli.Get("/api/countries");
    ASSERT_TRUE(countries);
    EXPECT_EQ(countries->status, 200);
    EXPECT_EQ(Json::parse(countries->body).size(), engine.registry().size());

    auto listing = cli.Get("/api/panoramas");
    ASSERT_TRUE(listing);
    pre_resolution.push_back(listing->body);
    auto ids = Json::parse(listing->body);
    ASSERT_EQ(ids.size(), pool.items.size());

    auto img = cli.Get(ids[0]["image"].get<std::string>());
    ASSERT_TRUE(img);
    EXPECT_EQ(img->status, 200);
    EXPECT_EQ(img->get_header_value("Content-Type"), "image/png");

    auto created = cli.Post("/api/game", R"({"rounds":3})", "application/json");
    ASSERT_TRUE(created);
    EXPECT_EQ(created->status, 201);
    pre_resolution.push_back(created->body);
    auto game = Json::parse(created->body);
    const std::string id = game["id"];

    auto state = cli.Get("/api/game/" + id);
    pre_resolution.push_back(state->body);
    auto round_img = cli.Get(game["rounds"][0]["image"].get<std::string>());
    EXPECT_EQ(round_img->status, 200);

    for (const auto& body : pre_resolution) {
        EXPECT_EQ(body.find("truth"), std::string::npos) << body;
        for (const auto& t : truths) EXPECT_EQ(body.find("\"" + t + "\""), std::string::npos) << body;
    }

    int user_total = 0, system_total = 0;
    for (int k = 0; k < 3; ++k) {
        auto res = cli.Post("/api/game/" + id + "/rounds/" + std::to_string(k) + "/guess", R"({"country":"XA"})",
                            "application/json");
        ASSERT_TRUE(res);
        ASSERT_EQ(res->status, 200) << res->body;
        auto j = Json::parse(res->body);
        auto round = j["rounds"][k];
        EXPECT_EQ(round["user_points"], round["truth"] == "XA" ? 100 : 0);
        EXPECT_EQ(round["system_points"].get<int>(), system_points_for_rank(round["system_rank"].get<std::size_t>()));
        user_total += round["user_points"].get<int>();
        system_total += round["system_points"].get<int>();
        if (k < 2) {
            EXPECT_FALSE(j["rounds"][k + 1].contains("truth"));
        } else {
            EXPECT_EQ(j["status"], "finished");
            EXPECT_EQ(j["totals"]["user"], user_total);
            EXPECT_EQ(j["totals"]["system"], system_total);
        }
    }

    auto again = cli.Post("/api/game/" + id + "/rounds/2/guess", R"({"country":"XA"})", "application/json");
    EXPECT_EQ(again->status, 409);
    EXPECT_EQ(Json::parse(again->body)["code"], "state");
    auto unknown = cli.Get("/api/game/0123abcd");
    EXPECT_EQ(unknown->status, 404);
    EXPECT_EQ(Json::parse(unknown->body)["code"], "not_found");
    auto bad_rounds = cli.Post("/api/game", R"({"rounds":0})", "application/json");
    EXPECT_EQ(bad_rounds->status, 400);
    auto bad_json = cli.Post("/api/game", "{", "application/json");
    EXPECT_EQ(bad_json->status, 400);
}

TEST(HttpApi, GuessByUploadAndById) {
    const auto& c = shared_corpus();
    auto engine = Engine::from_config_file(c.config);
    auto pool = load_manifest(c.query_manifest);
    LiveServer server(engine, pool);
    auto cli = server.client();

    const auto& item = pool.items[0];
    auto bytes = read_file(item.path);
    httplib::MultipartFormDataItems form{
        {"image", bytes, "pano.png", "image/png"},
        {"north_offset_deg", std::to_string(item.north_offset_deg.value_or(0.0)), "", ""}};
    auto up = cli.Post("/api/guess", form);
    ASSERT_TRUE(up);
    ASSERT_EQ(up->status, 200) << up->body;
    auto report = Json::parse(up->body);
    EXPECT_EQ(report["ranking"].size(), engine.registry().size());

    auto direct = to_json(engine.guess(load_panorama(item.path, item.north_offset_deg), item.path));
    auto by_id = cli.Post("/api/guess", Json{{"panorama_id", item.id()}}.dump(), "application/json");
    ASSERT_EQ(by_id->status, 200);
    EXPECT_EQ(by_id->body, direct.dump());

    httplib::MultipartFormDataItems junk{{"image", "definitely not an image", "x.png", "image/png"}};
    auto bad = cli.Post("/api/guess", junk);
    EXPECT_EQ(bad->status, 422);
    EXPECT_EQ(Json::parse(bad->body)["code"], "decode");

    auto missing = cli.Post("/api/guess", R"({"panorama_id":"nope"})", "application/json");
    EXPECT_EQ(missing->status, 404);
    auto empty = cli.Post("/api/guess", "", "application/json");
    EXPECT_EQ(empty->status, 400);
}

TEST(HttpApi, StaticAssets) {
    const auto& c = shared_corpus();
    auto engine = Engine::from_config_file(c.config);
    auto pool = load_manifest(c.query_manifest);
    {
        LiveServer server(engine, pool);
        auto res = server.client().Get("/");
        ASSERT_TRUE(res);
        EXPECT_EQ(res->status, 200);
        EXPECT_NE(res->body.find("/api/"), std::string::npos);
    }
    TempDir ui("ui");
    write_file(ui / "index.html", "<!doctype html><title>guess</title>");
    ApiOptions opts;
    opts.ui_dir = ui.path();
    LiveServer server(engine, pool, opts);
    auto res = server.client().Get("/");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(res->body, "<!doctype html><title>guess</title>");
    EXPECT_EQ(server.client().Get("/api/countries")->status, 200);
}

// ---------------------------------------------------------------------------
// Street View

TEST(StreetView, MissingCredentialsNameTheVariable) {
    ::unsetenv(streetview_key_variable);
    try {
        streetview_key_from_env();
        FAIL() << "expected a configuration error";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("STREETVIEW_API_KEY"), std::string::npos);
    }
    EXPECT_THROW(StreetViewClient(std::make_shared<ReplayTransport>(test_dir / "fixtures/streetview/ok"), ""),
                 ConfigError);
}

TEST(StreetView, ReplayAssemblesPanorama) {
    StreetViewOptions opts;
    opts.view_size = 64;
    opts.output_width = 256;
    StreetViewClient client(std::make_shared<ReplayTransport>(test_dir / "fixtures/streetview/ok"), "secret", opts);
    auto got = client.fetch(48.8584, 2.2945);
    EXPECT_EQ(got.pano_id, "FIXTUREpano01");
    EXPECT_DOUBLE_EQ(got.lat, 48.85837);
    EXPECT_EQ(got.panorama.width(), 256);
    EXPECT_EQ(got.panorama.height(), 128);
    EXPECT_TRUE(got.panorama.north_offset_known());
    EXPECT_EQ(got.panorama.north_offset_deg(), 0.0);
    // Each cube face lands in its compass direction.
    auto near = [](Rgb a, Rgb b) { return std::abs(a.r - b.r) < 12 && std::abs(a.g - b.g) < 12 && std::abs(a.b - b.b) < 12; };
    const auto& img = got.panorama.image();
    EXPECT_TRUE(near(img.at(0, 64), {220, 30, 30}));
    EXPECT_TRUE(near(img.at(64, 64), {30, 200, 40}));
    EXPECT_TRUE(near(img.at(128, 64), {30, 40, 220}));
    EXPECT_TRUE(near(img.at(192, 64), {230, 220, 20}));
    EXPECT_TRUE(near(img.at(100, 2), {250, 250, 250}));
    EXPECT_TRUE(near(img.at(100, 125), {10, 10, 10}));
}

TEST(StreetView, DeniedIsRemoteError) {
    StreetViewClient client(std::make_shared<ReplayTransport>(test_dir / "fixtures/streetview/denied"), "secret");
    try {
        client.fetch(48.8584, 2.2945);
        FAIL() << "expected a remote error";
    } catch (const RemoteError& e) {
        EXPECT_EQ(e.status(), 403);
        EXPECT_EQ(std::string(e.what()).find("secret"), std::string::npos);
    }
    EXPECT_NE(exit_code_for(ErrorKind::remote), exit_code_for(ErrorKind::decode));
    EXPECT_EQ(redact_key("/x?a=1&key=abc&b=2"), "/x?a=1&b=2");
    EXPECT_EQ(redact_key("/x?a=1&key=abc"), "/x?a=1");
}

// ---------------------------------------------------------------------------
// command line

TEST(Cli, ExitCodes) {
    TempDir dir("cli");
    const auto cfg = (data_dir / "config.json").string();
    EXPECT_EQ(cli({}), 2);
    EXPECT_EQ(cli({"frobnicate"}), 2);
    EXPECT_EQ(cli({"guess", "x.png"}), 2);  // --config missing

    write_file(dir / "corrupt.png", std::string("\x89PNG\r\n\x1a\nnope", 12));
    std::string err;
    EXPECT_EQ(cli({"guess", (dir / "corrupt.png").string(), "-c", cfg}, nullptr, &err), 4);
    EXPECT_FALSE(err.empty());
    save_png(dir / "square.png", RgbImage(64, 64));
    EXPECT_EQ(cli({"guess", (dir / "square.png").string(), "-c", cfg}), 4);
    EXPECT_EQ(cli({"guess", (dir / "absent.png").string(), "-c", cfg}), 8);
    EXPECT_EQ(cli({"guess", (dir / "square.png").string(), "-c", (dir / "nope.json").string()}), 3);

    write_file(dir / "m.jsonl", "{\"path\":\"square.png\",\"truth\":\"ZZ\"}\n");
    EXPECT_EQ(cli({"eval", "run", "-c", cfg, "--manifest", (dir / "m.jsonl").string()}), 7);

    ::unsetenv(streetview_key_variable);
    EXPECT_EQ(cli({"fetch", "--lat", "48.8584", "--lon", "2.2945", "--out", (dir / "f.png").string(), "--replay",
                   (test_dir / "fixtures/streetview/denied").string()},
                  nullptr, &err),
              3);
    EXPECT_NE(err.find("STREETVIEW_API_KEY"), std::string::npos);
    ::setenv(streetview_key_variable, "test-key", 1);
    EXPECT_EQ(cli({"fetch", "--lat", "48.8584", "--lon", "2.2945", "--out", (dir / "f.png").string(), "--replay",
                   (test_dir / "fixtures/streetview/denied").string()}),
              6);
    ::unsetenv(streetview_key_variable);
}

TEST(Cli, RegistryDumpIsDeterministic) {
    TempDir dir("dump");
    auto args = [&](const std::string& out) {
        return std::vector<std::string>{"registry", "dump", "--factsheets", (data_dir / "factsheets").string(),
                                        "--boundaries", (data_dir / "boundaries.geojson").string(), "--out", out};
    };
    ASSERT_EQ(cli(args((dir / "a.json").string())), 0);
    ASSERT_EQ(cli(args((dir / "b.json").string())), 0);
    EXPECT_EQ(read_file(dir / "a.json"), read_file(dir / "b.json"));
}

TEST(Cli, SyntheticSmoke) {
    TempDir dir("smoke");
    std::string out;
    ASSERT_EQ(cli({"synth", "--out", dir.path().string(), "--countries", "3", "--train", "2", "--queries", "1",
                   "--width", "128"},
                  &out),
              0)
        << out;
    const auto cfg = (dir / "config.json").string();
    ASSERT_EQ(cli({"eval", "run", "-c", cfg, "--manifest", (dir / "query.jsonl").string(), "--out",
                   (dir / "eval.json").string()},
                  &out),
              0);
    EXPECT_NE(out.find("mean rank"), std::string::npos);
    auto report = read_json(dir / "eval.json");
    EXPECT_TRUE(report.contains("metrics"));

    ASSERT_EQ(cli({"eval", "ablate", "-c", cfg, "--manifest", (dir / "query.jsonl").string(), "--order",
                   "plate,textlang"},
                  &out),
              0);
    EXPECT_NE(out.find("plate"), std::string::npos);

    ASSERT_EQ(cli({"weights", "optimize", "-c", cfg, "--manifest", (dir / "train.jsonl").string(), "--out",
                   (dir / "w.json").string()}),
              0);
    auto w = read_json(dir / "w.json");
    double total = 0;
    for (const auto& [_, v] : w.items()) total += v.get<double>();
    EXPECT_NEAR(total, 1.0, 1e-9);

    auto q = load_manifest(dir / "query.jsonl");
    ASSERT_EQ(cli({"guess", q.items[0].path.string(), "-c", cfg, "--north-offset",
                   std::to_string(q.items[0].north_offset_deg.value_or(0.0)), "--json"},
                  &out),
              0);
    auto report_json = Json::parse(out);
    EXPECT_EQ(report_json["ranking"].size(), 3u);
    ASSERT_EQ(cli({"guess", q.items[0].path.string(), "-c", cfg, "--explain", "--top", "2"}, &out), 0);
    EXPECT_NE(out.find("color"), std::string::npos);

    ASSERT_EQ(cli({"profiles", "build", "--kind", "color", "--manifest", (dir / "train.jsonl").string(), "--out",
                   (dir / "colors2").string()}),
              0);
    EXPECT_EQ(load_color_profiles(dir / "colors2").size(), 3u);
}
