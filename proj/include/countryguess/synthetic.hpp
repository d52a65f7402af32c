#pragma once

// Synthetic benchmark corpus: invented countries (user-assigned codes XA, XB, ...)
// whose panoramas carry controlled signal for each evidence module, together
// with fact sheets, boundaries, language corpora, provider fixtures, manifests
// and a ready-to-use engine configuration.
//
// Layout written under the output directory:
//   factsheets/XA.json ...  boundaries.geojson  corpus/<lang>.txt  stopwords.txt
//   images/t000.png ... images/q000.png  fixtures/<digest>.json
//   train.jsonl  query.jsonl  config.json  profiles/...

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "codec.hpp"
#include "digest.hpp"
#include "engine.hpp"
#include "evalkit.hpp"
#include "image.hpp"
#include "json_io.hpp"
#include "knowledge.hpp"
#include "profiles.hpp"
#include "providers.hpp"
#include "textlang.hpp"

namespace countryguess {

struct SyntheticOptions {
    int countries = 10;
    int train_per_country = 6;
    int query_per_country = 5;
    int width = 256;  // panorama height is width / 2
    std::uint64_t seed = 20210901;

    // Which modules receive a country-specific signal. Disabled channels
    // still render, but identically for every country (or not at all).
    bool color_signal = true;
    bool solar_signal = true;
    bool text_signal = true;
    bool caption_signal = true;
    bool object_signal = true;
    bool plate_signal = true;

    static SyntheticOptions color_only() {
        SyntheticOptions o;
        o.solar_signal = o.text_signal = o.caption_signal = o.object_signal = o.plate_signal = false;
        return o;
    }
};

struct SyntheticLanguage {
    std::string code;
    std::string consonants, vowels;
    std::vector<std::string> lexicon;
};

struct SyntheticCountry {
    CountryCode code;
    std::string name;
    std::size_t language = 0;  // index into SyntheticWorld::languages
    Rgb sky, ground, accent;
    HemisphereClass hemisphere = HemisphereClass::northern;
    double lat_min = 0.0, lat_max = 0.0;
    PlateColor front = PlateColor::white, rear = PlateColor::white;
    std::vector<std::string> place_names;
    std::vector<std::string> caption_words;
    std::vector<std::string> object_labels;
};

struct SyntheticWorld {
    std::vector<SyntheticLanguage> languages;
    std::vector<SyntheticCountry> countries;
};

inline const std::vector<std::string>& synthetic_stopwords() {
    static const std::vector<std::string> words{"a", "an", "and", "near", "of", "on", "the", "with"};
    return words;
}

inline const std::vector<std::string>& synthetic_common_words() {
    static const std::vector<std::string> words{"road", "street", "building", "tree", "sky"};
    return words;
}

namespace detail {

inline Rgb hsv(double h_deg, double s, double v) {
    h_deg = wrap_degrees(h_deg);
    const double c = v * s, x = c * (1 - std::abs(std::fmod(h_deg / 60.0, 2.0) - 1)), m = v - c;
    double r = 0, g = 0, b = 0;
    switch (static_cast<int>(h_deg / 60.0)) {
    case 0: r = c, g = x; break;
    case 1: r = x, g = c; break;
    case 2: g = c, b = x; break;
    case 3: g = x, b = c; break;
    case 4: r = x, b = c; break;
    default: r = c, b = x; break;
    }
    auto to8 = [&](double u) { return static_cast<std::uint8_t>(std::lround(std::clamp(u + m, 0.0, 1.0) * 255.0)); };
    return {to8(r), to8(g), to8(b)};
}

inline std::uint8_t clamp8(int v) { return static_cast<std::uint8_t>(std::clamp(v, 0, 255)); }

inline Rgb jitter(Rgb p, int offset, int noise, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> d(-noise, noise);
    return {clamp8(p.r + offset + d(rng)), clamp8(p.g + offset + d(rng)), clamp8(p.b + offset + d(rng))};
}

template <class T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

/// A fresh word of 2-3 syllables from the given inventory, never repeating one in `used`.
inline std::string fresh_word(const std::string& consonants, const std::string& vowels, std::set<std::string>& used,
                              std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> dc(0, consonants.size() - 1), dv(0, vowels.size() - 1);
    std::uniform_int_distribution<int> syllables(2, 3), coda(0, 3);
    for (;;) {
        std::string w;
        int n = syllables(rng);
        for (int s = 0; s < n; ++s) {
            w += consonants[dc(rng)];
            w += vowels[dv(rng)];
            if (coda(rng) == 0) w += consonants[dc(rng)];
        }
        if (used.insert(w).second) return w;
    }
}

inline std::string capitalized(std::string w) {
    if (!w.empty() && w[0] >= 'a' && w[0] <= 'z') w[0] = static_cast<char>(w[0] - 'a' + 'A');
    return w;
}

} // namespace detail

inline SyntheticWorld make_synthetic_world(const SyntheticOptions& opts) {
    if (opts.countries < 2 || opts.countries > 26) throw ArgumentError("synthetic corpus needs 2..26 countries");
    std::mt19937_64 rng(opts.seed);
    std::set<std::string> used(synthetic_common_words().begin(), synthetic_common_words().end());
    used.insert(synthetic_stopwords().begin(), synthetic_stopwords().end());
    used.insert("pole");
    for (const auto& v : vehicle_labels()) used.insert(v);

    SyntheticWorld world;
    const std::vector<std::array<const char*, 3>> inventories{
        {"qa", "ktr", "ao"}, {"qb", "lmn", "ei"}, {"qc", "sfv", "ua"}, {"qd", "bdg", "oi"}, {"qe", "pzh", "eu"}};
    for (const auto& [code, cons, vow] : inventories) {
        SyntheticLanguage lang{code, cons, vow, {}};
        for (int k = 0; k < 60; ++k) lang.lexicon.push_back(detail::fresh_word(cons, vow, used, rng));
        world.languages.push_back(std::move(lang));
    }

    // Plate (front, rear) pairs as palette indices; reused cyclically.
    const std::vector<std::pair<int, int>> plates{{0, 1}, {0, 0}, {1, 1}, {2, 2}, {3, 3},
                                                  {4, 4}, {5, 5}, {2, 0}, {4, 1}, {5, 3}};
    const std::string neutral_c = "bcdfghjklmnprstvwz", neutral_v = "aeiou";
    for (int i = 0; i < opts.countries; ++i) {
        SyntheticCountry c;
        const char letter = static_cast<char>('A' + i);
        c.code = CountryCode(std::string("X") + letter);
        c.name = std::string("Synthland ") + letter;
        c.language = static_cast<std::size_t>(i) % world.languages.size();
        const double hue = 360.0 * i / opts.countries;
        c.sky = opts.color_signal ? detail::hsv(hue, 0.45, 0.45) : detail::hsv(210, 0.45, 0.45);
        c.ground = opts.color_signal ? detail::hsv(hue + 100, 0.55, 0.40) : detail::hsv(90, 0.55, 0.40);
        c.accent = opts.color_signal ? detail::hsv(hue + 200, 0.50, 0.65) : detail::hsv(30, 0.50, 0.65);
        switch (i % 3) {
        case 0: c.hemisphere = HemisphereClass::northern, c.lat_min = 35.0 + i, c.lat_max = 48.0 + i; break;
        case 1: c.hemisphere = HemisphereClass::southern, c.lat_min = -50.0 + i, c.lat_max = -30.0 + i; break;
        default: c.hemisphere = HemisphereClass::tropic, c.lat_min = -8.0, c.lat_max = 10.0; break;
        }
        auto [f, r] = plates[static_cast<std::size_t>(i) % plates.size()];
        c.front = plate_palette[static_cast<std::size_t>(f)];
        c.rear = plate_palette[static_cast<std::size_t>(r)];
        const auto& lang = world.languages[c.language];
        for (int k = 0; k < 4; ++k)
            c.place_names.push_back(detail::capitalized(detail::fresh_word(lang.consonants, lang.vowels, used, rng)));
        for (int k = 0; k < 6; ++k) c.caption_words.push_back(detail::fresh_word(neutral_c, neutral_v, used, rng));
        for (int k = 0; k < 3; ++k) c.object_labels.push_back(detail::fresh_word(neutral_c, neutral_v, used, rng));
        world.countries.push_back(std::move(c));
    }
    return world;
}

/// Paints a sun disc at the given absolute azimuth/elevation; the panorama column of
/// azimuth `a` is (a + north_offset) / 360 * width.
inline void draw_sun(RgbImage& img, double azimuth_deg, double elevation_deg, double north_offset_deg, int radius_px,
                     Rgb color = {255, 250, 230}) {
    const int W = img.width(), H = img.height();
    const double cx = wrap_degrees(azimuth_deg + north_offset_deg) / 360.0 * W;
    const double cy = (0.5 - elevation_deg / 180.0) * H;
    for (int y = std::max(0, static_cast<int>(cy) - radius_px - 1); y <= std::min(H - 1, static_cast<int>(cy) + radius_px + 1); ++y) {
        for (int dx = -radius_px - 1; dx <= radius_px + 1; ++dx) {
            const double px = std::floor(cx) + dx + 0.5, py = y + 0.5;
            if ((px - cx) * (px - cx) + (py - cy) * (py - cy) > radius_px * radius_px) continue;
            int x = (static_cast<int>(std::floor(cx)) + dx) % W;
            if (x < 0) x += W;
            img.at(x, y) = color;
        }
    }
}

struct SyntheticScene {
    RgbImage image;
    double north_offset_deg = 0.0;
    Json fixture;  // {"ocr":[...],"caption":[...],"objects":[...]}
};

inline SyntheticScene render_synthetic_scene(const SyntheticWorld& world, const SyntheticCountry& c,
                                             const SyntheticOptions& opts, std::mt19937_64& rng) {
    const int W = opts.width, H = opts.width / 2;
    if (W < 64 || W % 2) throw ArgumentError("synthetic panorama width must be even and >= 64");
    SyntheticScene scene;
    scene.north_offset_deg = std::round(std::uniform_real_distribution<double>(0.0, 360.0)(rng) * 10.0) / 10.0;
    if (scene.north_offset_deg >= 360.0) scene.north_offset_deg = 0.0;

    // Sky rows keep only per-pixel noise so every upward view has the same mean
    // luminance apart from the sun.
    const int shift = std::uniform_int_distribution<int>(-8, 8)(rng);
    RgbImage img(W, H);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) img.at(x, y) = detail::jitter(y < H / 2 ? c.sky : c.ground, shift, 4, rng);

    std::uniform_int_distribution<int> pw(W / 16, W / 6), ph(H / 16, H / 6);
    for (int k = 0; k < 4; ++k) {
        int w = pw(rng), h = ph(rng);
        int x0 = std::uniform_int_distribution<int>(0, W - 1)(rng);
        int y0 = std::uniform_int_distribution<int>(H / 2, H - h)(rng);
        for (int y = y0; y < y0 + h; ++y)
            for (int x = x0; x < x0 + w; ++x) img.at(x % W, y) = detail::jitter(c.accent, shift, 4, rng);
    }

    if (opts.solar_signal) {
        std::uniform_real_distribution<double> jit(-20.0, 20.0);
        double az = 0.0;
        switch (c.hemisphere) {
        case HemisphereClass::northern: az = 180.0 + jit(rng); break;
        case HemisphereClass::southern: az = wrap_degrees(jit(rng)); break;
        case HemisphereClass::tropic: az = (rng() % 2 ? 90.0 : 270.0) + jit(rng) / 2.0; break;
        }
        draw_sun(img, az, 40.0, scene.north_offset_deg, std::max(3, W * 12 / 256));
    }

    Json ocr = Json::array(), objects = Json::array();
    if (opts.text_signal) {
        const auto& lang = world.languages[c.language];
        int signs = std::uniform_int_distribution<int>(1, 2)(rng);
        for (int s = 0; s < signs; ++s) {
            std::string text;
            int words = std::uniform_int_distribution<int>(4, 6)(rng);
            for (int k = 0; k < words; ++k) text += (k ? " " : "") + detail::pick(lang.lexicon, rng);
            if (std::uniform_int_distribution<int>(0, 3)(rng) != 0) text += " " + detail::pick(c.place_names, rng);
            int bx = std::uniform_int_distribution<int>(0, W - W / 6)(rng);
            ocr.push_back({{"text", text}, {"confidence", 0.9}, {"box", {bx, H / 2 - H / 10, W / 6, H / 12}}});
        }
        // Low-confidence noise that the OCR floor removes.
        ocr.push_back({{"text", "zzq"}, {"confidence", 0.1}, {"box", {0, 0, 4, 4}}});
    }

    if (opts.object_signal) {
        int n = std::uniform_int_distribution<int>(2, 3)(rng);
        for (int k = 0; k < n; ++k)
            objects.push_back({{"label", detail::pick(c.object_labels, rng)}, {"confidence", 0.8}, {"box", {0, H / 2, W / 8, H / 8}}});
        objects.push_back({{"label", "pole"}, {"confidence", 0.7}, {"box", {W / 4, H / 4, 4, H / 4}}});
    }
    if (opts.plate_signal) {
        int vehicles = std::uniform_int_distribution<int>(1, 2)(rng);
        const int vw = W / 10, vh = H / 8;
        for (int v = 0; v < vehicles; ++v) {
            int x0 = v * (W / 2) + std::uniform_int_distribution<int>(0, W / 2 - vw - 1)(rng);
            int y0 = std::uniform_int_distribution<int>(H / 2 + 2, H - vh - 1)(rng);
            Box box{x0, y0, vw, vh};
            for (int y = y0; y < y0 + vh; ++y)
                for (int x = x0; x < x0 + vw; ++x) img.at(x, y) = {90, 90, 95};
            PlateColor color = rng() % 2 ? c.front : c.rear;
            Rgb proto = plate_prototypes[static_cast<std::size_t>(color)].prototype;
            auto strip = plate_strip(box);
            for (int y = strip.y; y < strip.y + strip.h; ++y)
                for (int x = strip.x; x < strip.x + strip.w; ++x) img.at(x, y) = proto;
            objects.push_back({{"label", "car"}, {"confidence", 0.85}, {"box", {box.x, box.y, box.w, box.h}}});
        }
    }

    scene.fixture = Json::object();
    scene.fixture["ocr"] = std::move(ocr);
    scene.fixture["objects"] = std::move(objects);
    if (opts.caption_signal) {
        const auto& w = c.caption_words;
        std::string caption = "a " + detail::pick(synthetic_common_words(), rng) + " with " + detail::pick(w, rng) +
                              " and " + detail::pick(w, rng) + " near the " + detail::pick(w, rng);
        scene.fixture["caption"] = Json::array({caption});
    }
    scene.image = std::move(img);
    return scene;
}

struct SyntheticCorpus {
    fs::path root;
    fs::path config;
    fs::path train_manifest;
    fs::path query_manifest;
    SyntheticWorld world;
};

/// Writes the whole corpus, then builds every profile from the training split.
inline SyntheticCorpus generate_synthetic_corpus(const fs::path& root, const SyntheticOptions& opts = {}) {
    auto world = make_synthetic_world(opts);
    std::mt19937_64 rng(opts.seed ^ 0x9E3779B97F4A7C15ull);
    fs::create_directories(root / "factsheets");
    fs::create_directories(root / "corpus");
    fs::create_directories(root / "images");
    fs::create_directories(root / "fixtures");

    Json features = Json::array();
    for (std::size_t i = 0; i < world.countries.size(); ++i) {
        const auto& c = world.countries[i];
        OrderedJson sheet;
        sheet["code"] = c.code.str();
        sheet["name"] = c.name;
        sheet["languages"] = OrderedJson::array({{{"code", world.languages[c.language].code}, {"weight", 1.0}}});
        sheet["plate_colors"] = {{"front", {to_string(c.front)}}, {"rear", {to_string(c.rear)}}};
        sheet["place_names"] = c.place_names;
        write_file(root / "factsheets" / (c.code.str() + ".json"), sheet.dump(2) + "\n");

        const double lon0 = -170.0 + 30.0 * static_cast<double>(i % 12);
        Json ring = Json::array({{lon0, c.lat_min}, {lon0 + 10, c.lat_min}, {lon0 + 10, c.lat_max}, {lon0, c.lat_max}, {lon0, c.lat_min}});
        features.push_back({{"type", "Feature"},
                            {"properties", {{"iso_a2", c.code.str()}, {"name", c.name}}},
                            {"geometry", {{"type", "Polygon"}, {"coordinates", Json::array({ring})}}}});
    }
    write_json(root / "boundaries.geojson", Json{{"type", "FeatureCollection"}, {"features", features}});

    for (const auto& lang : world.languages) {
        std::string text;
        for (int s = 0; s < 400; ++s) {
            int words = std::uniform_int_distribution<int>(5, 8)(rng);
            for (int k = 0; k < words; ++k) text += (k ? " " : "") + detail::pick(lang.lexicon, rng);
            text += "\n";
        }
        write_file(root / "corpus" / (lang.code + ".txt"), text);
    }
    std::string stop;
    for (const auto& w : synthetic_stopwords()) stop += w + "\n";
    write_file(root / "stopwords.txt", stop);

    // Interleave countries so file names say nothing about the truth.
    std::vector<std::pair<std::size_t, bool>> jobs;  // (country, is_query)
    for (std::size_t i = 0; i < world.countries.size(); ++i) {
        for (int k = 0; k < opts.train_per_country; ++k) jobs.push_back({i, false});
        for (int k = 0; k < opts.query_per_country; ++k) jobs.push_back({i, true});
    }
    std::shuffle(jobs.begin(), jobs.end(), rng);

    std::string train, query;
    int next_train = 0, next_query = 0;
    char name[32];
    for (const auto& [ci, is_query] : jobs) {
        const auto& c = world.countries[ci];
        auto scene = render_synthetic_scene(world, c, opts, rng);
        std::snprintf(name, sizeof name, "%c%03d.png", is_query ? 'q' : 't', is_query ? next_query++ : next_train++);
        fs::path image = root / "images" / name;
        save_png(image, scene.image);
        write_json(root / "fixtures" / (image_digest(scene.image) + ".json"), scene.fixture);
        ManifestItem item{image, c.code, scene.north_offset_deg};
        (is_query ? query : train) += manifest_line(item, root) + "\n";
    }
    write_file(root / "train.jsonl", train);
    write_file(root / "query.jsonl", query);

    OrderedJson cfg;
    cfg["registry"] = {{"factsheets", "factsheets"}, {"boundaries", "boundaries.geojson"}};
    cfg["modules"] = all_module_ids();
    cfg["profiles"] = {{"color", "profiles/color"},
                       {"caption", "profiles/caption"},
                       {"object", "profiles/object"},
                       {"language", "profiles/languages.json"}};
    cfg["stopwords"] = "stopwords.txt";
    cfg["providers"] = {{"ocr", {{"fixtures", "fixtures"}}},
                        {"caption", {{"fixtures", "fixtures"}}},
                        {"objects", {{"fixtures", "fixtures"}}}};
    write_json(root / "config.json", cfg);

    // Profiles come from the training split through the regular builders.
    auto engine = Engine::from_config_file(root / "config.json");
    auto train_set = load_manifest(root / "train.jsonl");
    save_color_profiles(root / "profiles" / "color", build_color_profiles(train_set));
    save_frequency_profiles(root / "profiles" / "caption",
                            build_caption_profiles(train_set, *engine.parts().captioner, engine.parts().stopwords));
    save_frequency_profiles(root / "profiles" / "object", build_object_profiles(train_set, *engine.parts().detector));
    write_json(root / "profiles" / "languages.json", to_json(build_language_profiles(root / "corpus")));

    return {root, root / "config.json", root / "train.jsonl", root / "query.jsonl", std::move(world)};
}

} // namespace countryguess
