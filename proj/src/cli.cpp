#include "countryguess/cli.hpp"

#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "countryguess/countryguess.hpp"

namespace countryguess {
namespace {

struct EngineArgs {
    std::string config;
    std::string fixtures;  // replaces every provider with a fixture directory
    std::string weights;
};

void add_engine_options(CLI::App* cmd, EngineArgs& a) {
    cmd->add_option("-c,--config", a.config, "engine configuration file")->required();
    cmd->add_option("--fixtures", a.fixtures, "answer every provider from this fixture directory");
    cmd->add_option("--weights", a.weights, "module weight file overriding the configuration");
}

Engine load_engine(const EngineArgs& a) {
    Json cfg;
    try {
        cfg = read_json(a.config);
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    const fs::path base = fs::path(a.config).parent_path();
    if (!a.fixtures.empty()) {
        auto dir = fs::absolute(a.fixtures).string();
        cfg["providers"] = {{"ocr", {{"fixtures", dir}}}, {"caption", {{"fixtures", dir}}}, {"objects", {{"fixtures", dir}}}};
    }
    auto engine = Engine::from_config(cfg, base);
    if (!a.weights.empty()) {
        try {
            engine.set_weights(weights_from_json(read_json(a.weights), a.weights));
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
    }
    return engine;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

void print_ranking(std::ostream& out, const GuessReport& g, const CountryRegistry& reg, std::size_t top) {
    out << "rank  code  score     country\n";
    for (std::size_t i = 0; i < g.ranking.size() && i < top; ++i) {
        const auto& e = g.ranking.entries[i];
        out << std::setw(4) << i + 1 << "  " << e.country.str() << "    " << std::fixed << std::setprecision(4) << e.score
            << "    " << reg.at(e.country).display_name << "\n";
    }
}

void print_explanation(std::ostream& out, const GuessReport& g) {
    out << "\nmodules:\n";
    for (const auto& [id, e] : g.per_module) {
        out << "  " << std::left << std::setw(9) << id << std::right;
        if (e.abstained) {
            out << "abstained";
        } else {
            out << "weight " << std::fixed << std::setprecision(3) << g.weights_used.at(id) << "  top:";
            std::vector<std::pair<double, CountryCode>> s;
            for (const auto& [c, v] : e.scores) s.push_back({-v, c});
            std::sort(s.begin(), s.end());
            for (std::size_t i = 0; i < s.size() && i < 3; ++i) out << " " << s[i].second.str() << "=" << -s[i].first;
        }
        out << "\n";
        for (const auto& n : e.notes) out << "             " << n << "\n";
    }
    for (const auto& n : g.notes) out << "note: " << n << "\n";
}

void print_metrics(std::ostream& out, const EvaluationReport& r) {
    if (!r.metrics) {
        out << "no item could be evaluated (" << r.failures << " failures)\n";
        return;
    }
    const auto& m = *r.metrics;
    out << std::fixed << std::setprecision(3) << "items " << m.n << "  mean rank " << m.mean_rank << "  std " << m.std_rank
        << "  median " << std::setprecision(1) << m.median_rank << "  top-1 " << m.top1_count << "/" << m.n;
    if (r.failures) out << "  failures " << r.failures;
    out << "\n";
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Rank the countries a street-level panorama may show."};
    app.name("countryguess");
    app.require_subcommand(1);

    // guess
    EngineArgs guess_engine;
    std::string guess_path;
    std::optional<double> north_offset;
    bool explain = false, as_json = false;
    std::size_t top = 10;
    auto* guess = app.add_subcommand("guess", "rank countries for one panorama");
    guess->add_option("image", guess_path, "equirectangular panorama (PNG or JPEG)")->required();
    add_engine_options(guess, guess_engine);
    guess->add_option("--north-offset", north_offset, "azimuth of column 0 relative to true north, degrees");
    guess->add_flag("--explain", explain, "show per-module evidence");
    guess->add_flag("--json", as_json, "print the full report as JSON");
    guess->add_option("--top", top, "rows to print")->check(CLI::PositiveNumber);

    // profiles build
    auto* profiles = app.add_subcommand("profiles", "offline profile building");
    profiles->require_subcommand(1);
    auto* pbuild = profiles->add_subcommand("build", "build country profiles");
    EngineArgs pb_engine;
    std::string pb_kind, pb_manifest, pb_corpus, pb_out;
    pbuild->add_option("--kind", pb_kind, "color | caption | object | language")
        ->required()
        ->check(CLI::IsMember({"color", "caption", "object", "language"}));
    pbuild->add_option("--config", pb_engine.config, "engine configuration (providers, stopwords)");
    pbuild->add_option("--fixtures", pb_engine.fixtures, "answer every provider from this fixture directory");
    pbuild->add_option("--manifest", pb_manifest, "labelled training manifest (JSONL)");
    pbuild->add_option("--corpus", pb_corpus, "directory of <lang>.txt files (language profiles)");
    pbuild->add_option("--out", pb_out, "output directory, or file for language profiles")->required();

    // eval run / ablate
    auto* eval = app.add_subcommand("eval", "evaluation harness");
    eval->require_subcommand(1);
    EngineArgs ev_engine;
    std::string ev_manifest, ev_out, ev_order;
    unsigned ev_threads = 0;
    auto* erun = eval->add_subcommand("run", "mean/median rank of truth over a manifest");
    auto* eablate = eval->add_subcommand("ablate", "cumulative module removal table");
    for (auto* cmd : {erun, eablate}) {
        add_engine_options(cmd, ev_engine);
        cmd->add_option("--manifest", ev_manifest, "labelled query manifest (JSONL)")->required();
        cmd->add_option("--threads", ev_threads, "items processed in parallel (0 = all cores)");
        cmd->add_option("--out", ev_out, "write the JSON result here");
    }
    eablate->add_option("--order", ev_order, "comma-separated removal order")->required();

    // weights optimize
    auto* weights = app.add_subcommand("weights", "module weights");
    weights->require_subcommand(1);
    auto* wopt = weights->add_subcommand("optimize", "tune weights on a development manifest");
    EngineArgs wo_engine;
    std::string wo_manifest, wo_out;
    int wo_grid = 20;
    unsigned wo_threads = 0;
    add_engine_options(wopt, wo_engine);
    wopt->add_option("--manifest", wo_manifest, "development manifest (JSONL)")->required();
    wopt->add_option("--grid", wo_grid, "grid steps per coordinate")->check(CLI::PositiveNumber);
    wopt->add_option("--threads", wo_threads, "items processed in parallel (0 = all cores)");
    wopt->add_option("--out", wo_out, "write the weight file here");

    // serve
    auto* serve = app.add_subcommand("serve", "HTTP API and UI");
    EngineArgs sv_engine;
    std::string sv_host = "127.0.0.1", sv_ui, sv_panoramas;
    int sv_port = 8080;
    long sv_ttl = 7200;
    add_engine_options(serve, sv_engine);
    serve->add_option("--host", sv_host, "bind address");
    serve->add_option("--port", sv_port, "TCP port")->check(CLI::Range(1, 65535));
    serve->add_option("--ui", sv_ui, "directory with the built browser client");
    serve->add_option("--panoramas", sv_panoramas, "manifest of panoramas offered for guessing and games");
    serve->add_option("--session-ttl", sv_ttl, "game session lifetime in seconds")->check(CLI::PositiveNumber);

    // registry dump
    auto* registry = app.add_subcommand("registry", "country knowledge base");
    registry->require_subcommand(1);
    auto* rdump = registry->add_subcommand("dump", "write the assembled registry cache");
    std::string rd_factsheets, rd_boundaries, rd_out;
    rdump->add_option("--factsheets", rd_factsheets, "fact sheet directory")->required();
    rdump->add_option("--boundaries", rd_boundaries, "GeoJSON boundaries")->required();
    rdump->add_option("--out", rd_out, "cache file (stdout if omitted)");

    // synth
    auto* synth = app.add_subcommand("synth", "generate the synthetic benchmark corpus");
    std::string sy_out;
    SyntheticOptions sy_opts;
    bool sy_color_only = false;
    synth->add_option("--out", sy_out, "output directory")->required();
    synth->add_option("--seed", sy_opts.seed, "random seed");
    synth->add_option("--countries", sy_opts.countries, "number of countries (2..26)");
    synth->add_option("--train", sy_opts.train_per_country, "training panoramas per country");
    synth->add_option("--queries", sy_opts.query_per_country, "query panoramas per country");
    synth->add_option("--width", sy_opts.width, "panorama width in pixels");
    synth->add_flag("--color-only", sy_color_only, "only the color channel carries signal");

    // fetch
    auto* fetch = app.add_subcommand("fetch", "download a Street View panorama (needs STREETVIEW_API_KEY)");
    double fe_lat = 0, fe_lon = 0;
    std::string fe_out, fe_replay;
    fetch->add_option("--lat", fe_lat, "latitude")->required();
    fetch->add_option("--lon", fe_lon, "longitude")->required();
    fetch->add_option("--out", fe_out, "PNG output path")->required();
    fetch->add_option("--replay", fe_replay, "answer from recorded responses instead of the network");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return exit_code::usage;
    }

    try {
        if (*guess) {
            auto engine = load_engine(guess_engine);
            auto pano = load_panorama(guess_path, north_offset);
            auto report = engine.guess(pano, fs::path(guess_path));
            if (as_json) {
                out << to_json(report).dump(2) << "\n";
            } else {
                print_ranking(out, report, engine.registry(), top);
                if (explain) print_explanation(out, report);
            }
        } else if (*pbuild) {
            if (pb_kind == "language") {
                if (pb_corpus.empty()) throw ArgumentError("--corpus is required for language profiles");
                auto set = build_language_profiles(pb_corpus);
                write_json(pb_out, to_json(set));
                out << "wrote " << set.profiles.size() << " language profiles to " << pb_out << "\n";
            } else {
                if (pb_manifest.empty()) throw ArgumentError("--manifest is required for " + pb_kind + " profiles");
                auto train = load_manifest(pb_manifest);
                std::size_t n = 0;
                if (pb_kind == "color") {
                    auto p = build_color_profiles(train);
                    save_color_profiles(pb_out, p);
                    n = p.size();
                } else {
                    if (pb_engine.config.empty()) throw ArgumentError("--config is required for " + pb_kind + " profiles");
                    auto engine = load_engine(pb_engine);
                    const auto& parts = engine.parts();
                    if (pb_kind == "caption") {
                        if (!parts.captioner) throw ConfigError("no caption provider configured");
                        auto p = build_caption_profiles(train, *parts.captioner, parts.stopwords);
                        save_frequency_profiles(pb_out, p);
                        n = p.size();
                    } else {
                        if (!parts.detector) throw ConfigError("no object provider configured");
                        auto p = build_object_profiles(train, *parts.detector, parts.thresholds.object_confidence_floor);
                        save_frequency_profiles(pb_out, p);
                        n = p.size();
                    }
                }
                out << "wrote " << n << " " << pb_kind << " profiles to " << pb_out << "\n";
            }
        } else if (*erun) {
            auto engine = load_engine(ev_engine);
            auto report = run_evaluation(load_manifest(ev_manifest), engine, ev_threads);
            print_metrics(out, report);
            if (!ev_out.empty()) write_json(ev_out, to_json(report));
        } else if (*eablate) {
            auto engine = load_engine(ev_engine);
            auto rows = run_ablation(load_manifest(ev_manifest), engine, split_list(ev_order), ev_threads);
            out << format_ablation_table(rows);
            if (!ev_out.empty()) write_json(ev_out, to_json(rows));
        } else if (*wopt) {
            auto engine = load_engine(wo_engine);
            auto evidence = collect_evidence(load_manifest(wo_manifest), engine, wo_threads);
            OptimizeOptions opts;
            opts.grid_steps = wo_grid;
            auto result = optimize_weights(dev_items(evidence), engine.registry(), opts);
            out << std::fixed << std::setprecision(4) << "mean rank " << result.objective << " after " << result.sweeps
                << " sweeps\n"
                << to_json(result.weights).dump(2) << "\n";
            if (!wo_out.empty()) write_json(wo_out, to_json(result.weights));
        } else if (*serve) {
            auto engine = load_engine(sv_engine);
            DatasetManifest pool;
            if (!sv_panoramas.empty()) pool = load_manifest(sv_panoramas);
            ApiOptions opts;
            if (!sv_ui.empty()) opts.ui_dir = fs::path(sv_ui);
            opts.session_ttl = std::chrono::seconds(sv_ttl);
            ApiServer api(engine, std::move(pool), opts);
            httplib::Server svr;
            api.install(svr);
            out << "listening on http://" << sv_host << ":" << sv_port << std::endl;
            if (!svr.listen(sv_host, sv_port)) throw ArgumentError("cannot listen on " + sv_host + ":" + std::to_string(sv_port));
        } else if (*rdump) {
            auto text = serialize_registry(load_registry(rd_factsheets, rd_boundaries));
            if (rd_out.empty())
                out << text;
            else
                write_file(rd_out, text);
        } else if (*synth) {
            auto opts = sy_color_only ? SyntheticOptions::color_only() : SyntheticOptions{};
            opts.seed = sy_opts.seed;
            opts.countries = sy_opts.countries;
            opts.train_per_country = sy_opts.train_per_country;
            opts.query_per_country = sy_opts.query_per_country;
            opts.width = sy_opts.width;
            auto corpus = generate_synthetic_corpus(sy_out, opts);
            out << "synthetic corpus with " << corpus.world.countries.size() << " countries in " << corpus.root.string()
                << "\nconfig " << corpus.config.string() << "\n";
        } else if (*fetch) {
            std::shared_ptr<HttpTransport> transport;
            if (fe_replay.empty())
                transport = std::make_shared<HttplibTransport>();
            else
                transport = std::make_shared<ReplayTransport>(fe_replay);
            StreetViewClient client(transport, streetview_key_from_env());
            auto got = client.fetch(fe_lat, fe_lon);
            save_png(fe_out, got.panorama.image());
            out << "panorama " << got.pano_id << " at " << got.lat << "," << got.lon << " -> " << fe_out
                << " (north offset 0)\n";
        }
    } catch (const Error& e) {
        err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
        if (auto* pe = dynamic_cast<const ProviderError*>(&e); pe && !pe->stderr_excerpt().empty())
            err << "provider stderr:\n" << pe->stderr_excerpt() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_code::failure;
    }
    return exit_code::ok;
}

} // namespace countryguess
