#pragma once

// Engine configuration and the per-panorama pipeline: run every configured
// evidence module (concurrently), then fuse.
//
// Configuration file (JSON; relative paths resolve against the file's directory):
//
//   {
//     "registry":  {"factsheets": "factsheets", "boundaries": "boundaries.geojson"},
//     "modules":   ["color", "solar", "textlang", "caption", "object", "plate"],
//     "profiles":  {"color": "profiles/color", "caption": "profiles/caption",
//                   "object": "profiles/object", "language": "profiles/languages.json"},
//     "stopwords": "stopwords_en.txt",
//     "weights":   "weights.json",
//     "providers": {"ocr":     {"command": "python3 ocr_worker.py", "timeout_ms": 30000},
//                   "caption": {"fixtures": "fixtures"},
//                   "objects": {"fixtures": "fixtures"}},
//     "thresholds": {"ocr_confidence_floor": 0.3, "object_confidence_floor": 0.4,
//                    "lambda_lang": 1.0, "lambda_place": 2.0},
//     "solar": {"view_count": 8, "pitch_deg": 45, "fov_deg": 90, "view_size": 128,
//               "contrast_threshold": 8.0}
//   }
//
// Only "registry" is mandatory. A module whose profiles or provider are not
// configured abstains. Without "weights" every active module gets equal weight.

#include <algorithm>
#include <chrono>
#include <future>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "codec.hpp"
#include "color.hpp"
#include "error.hpp"
#include "evidence.hpp"
#include "freqlist.hpp"
#include "fusion.hpp"
#include "image.hpp"
#include "json_io.hpp"
#include "knowledge.hpp"
#include "plate.hpp"
#include "providers.hpp"
#include "solar.hpp"
#include "textlang.hpp"

namespace countryguess {

struct Thresholds {
    double ocr_confidence_floor = 0.3;
    double object_confidence_floor = 0.4;
    TextLangParams textlang;
};

/// Everything the pipeline needs, already loaded.
struct EngineParts {
    std::shared_ptr<const CountryRegistry> registry;
    std::vector<std::string> modules = all_module_ids();
    std::optional<WeightVector> weights;

    std::vector<ColorProfile> color_profiles;
    std::vector<FrequencyProfile> caption_profiles;
    std::vector<FrequencyProfile> object_profiles;
    LanguageProfileSet language_profiles;
    std::set<std::string> stopwords;

    std::shared_ptr<Provider> ocr;
    std::shared_ptr<Provider> captioner;
    std::shared_ptr<Provider> detector;

    Thresholds thresholds;
    SolarParams solar;
};

inline std::shared_ptr<Provider> make_provider(const Json& spec, const fs::path& base, const std::string& what) {
    if (!spec.is_object()) throw ConfigError("provider \"" + what + "\" must be an object");
    if (spec.contains("fixtures")) return std::make_shared<FixtureProvider>(base / spec["fixtures"].get<std::string>());
    if (spec.contains("command")) {
        auto ms = spec.value("timeout_ms", 30000);
        if (ms <= 0) throw ConfigError("provider \"" + what + "\" timeout must be positive");
        return std::make_shared<SubprocessProvider>(spec["command"].get<std::string>(), std::chrono::milliseconds(ms));
    }
    throw ConfigError("provider \"" + what + "\" needs \"command\" or \"fixtures\"");
}

class Engine {
public:
    explicit Engine(EngineParts parts) : parts_(std::move(parts)) {
        if (!parts_.registry || parts_.registry->empty()) throw ConfigError("engine has no country registry");
        std::set<std::string> known(all_module_ids().begin(), all_module_ids().end());
        std::set<std::string> seen;
        for (const auto& m : parts_.modules) {
            if (!known.count(m)) throw ConfigError("unknown module \"" + m + "\"");
            if (!seen.insert(m).second) throw ConfigError("module \"" + m + "\" listed twice");
        }
        if (parts_.modules.empty()) throw ConfigError("no modules configured");
        if (parts_.weights) {
            for (const auto& m : parts_.modules)
                if (!parts_.weights->contains(m)) throw ConfigError("weights file has no entry for module \"" + m + "\"");
            std::set<std::string> extra;
            for (const auto& id : parts_.weights->ids())
                if (!seen.count(id)) extra.insert(id);
            weights_ = parts_.weights->without(extra);
        } else {
            weights_ = WeightVector::uniform(parts_.modules);
        }
    }

    static Engine from_config(const Json& cfg, const fs::path& base) {
        if (!cfg.is_object()) throw ConfigError("engine configuration must be an object");
        if (!cfg.contains("registry")) throw ConfigError("engine configuration has no \"registry\" section");
        auto path = [&](const Json& j) { return base / j.get<std::string>(); };
        EngineParts p;
        try {
            const auto& reg = cfg["registry"];
            if (reg.contains("cache")) {
                auto f = path(reg["cache"]);
                p.registry = std::make_shared<CountryRegistry>(registry_from_cache(read_json(f), f.string()));
            } else {
                if (!reg.contains("factsheets") || !reg.contains("boundaries"))
                    throw ConfigError("registry needs \"factsheets\" and \"boundaries\"");
                p.registry = std::make_shared<CountryRegistry>(load_registry(path(reg["factsheets"]), path(reg["boundaries"])));
            }
            if (cfg.contains("modules")) p.modules = cfg["modules"].get<std::vector<std::string>>();
            if (cfg.contains("weights")) {
                const auto& w = cfg["weights"];
                p.weights = w.is_string() ? weights_from_json(read_json(path(w)), path(w).string()) : weights_from_json(w, "weights");
            }
            const auto prof = cfg.value("profiles", Json::object());
            auto maybe_dir = [&](const char* key) -> std::optional<fs::path> {
                if (!prof.contains(key)) return std::nullopt;
                auto d = path(prof[key]);
                return fs::exists(d) ? std::optional(d) : std::nullopt;
            };
            if (auto d = maybe_dir("color")) p.color_profiles = load_color_profiles(*d);
            if (auto d = maybe_dir("caption")) p.caption_profiles = load_frequency_profiles(*d);
            if (auto d = maybe_dir("object")) p.object_profiles = load_frequency_profiles(*d);
            if (auto d = maybe_dir("language")) p.language_profiles = load_language_profiles(*d);
            if (cfg.contains("stopwords")) p.stopwords = load_stopwords(path(cfg["stopwords"]));

            const auto prov = cfg.value("providers", Json::object());
            if (prov.contains("ocr")) p.ocr = make_provider(prov["ocr"], base, "ocr");
            if (prov.contains("caption")) p.captioner = make_provider(prov["caption"], base, "caption");
            if (prov.contains("objects")) p.detector = make_provider(prov["objects"], base, "objects");

            const auto th = cfg.value("thresholds", Json::object());
            p.thresholds.ocr_confidence_floor = th.value("ocr_confidence_floor", 0.3);
            p.thresholds.object_confidence_floor = th.value("object_confidence_floor", 0.4);
            p.thresholds.textlang.lambda_lang = th.value("lambda_lang", 1.0);
            p.thresholds.textlang.lambda_place = th.value("lambda_place", 2.0);

            const auto sol = cfg.value("solar", Json::object());
            p.solar.view_count = sol.value("view_count", 8);
            p.solar.pitch_deg = sol.value("pitch_deg", 45.0);
            p.solar.fov_deg = sol.value("fov_deg", 90.0);
            p.solar.view_size = sol.value("view_size", 128);
            p.solar.contrast_threshold = sol.value("contrast_threshold", 8.0);
        } catch (const Json::exception& e) {
            throw ConfigError(std::string("engine configuration: ") + e.what());
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::config) throw;
            throw ConfigError(std::string("engine configuration: ") + e.what());
        }
        return Engine(std::move(p));
    }

    static Engine from_config_file(const fs::path& file) {
        Json cfg;
        try {
            cfg = read_json(file);
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
        return from_config(cfg, file.parent_path());
    }

    const CountryRegistry& registry() const { return *parts_.registry; }
    const std::vector<std::string>& modules() const { return parts_.modules; }
    const WeightVector& weights() const { return weights_; }
    const EngineParts& parts() const { return parts_; }

    void set_weights(const WeightVector& w) {
        for (const auto& m : parts_.modules)
            if (!w.contains(m)) throw ArgumentError("weights have no entry for module \"" + m + "\"");
        std::set<std::string> extra;
        for (const auto& id : w.ids())
            if (std::find(parts_.modules.begin(), parts_.modules.end(), id) == parts_.modules.end()) extra.insert(id);
        weights_ = w.without(extra);
    }

    /// Runs every configured module on the panorama. Provider failures become abstentions.
    std::vector<EvidenceScores> analyze(const Panorama& pano, std::optional<fs::path> source = std::nullopt) const {
        ProviderImage image(pano.image(), std::move(source));
        auto active = [&](const char* id) {
            return std::find(parts_.modules.begin(), parts_.modules.end(), id) != parts_.modules.end();
        };

        using OcrResult = std::vector<TextObservation>;
        using ObjResult = std::vector<ObjectObservation>;
        std::future<OcrResult> ocr;
        std::future<Caption> caption;
        std::future<ObjResult> objects;
        if (active(module_ids::textlang) && parts_.ocr)
            ocr = std::async(std::launch::async,
                             [&] { return run_ocr(*parts_.ocr, image, parts_.thresholds.ocr_confidence_floor); });
        if (active(module_ids::caption) && parts_.captioner && !parts_.caption_profiles.empty())
            caption = std::async(std::launch::async, [&] { return run_caption(*parts_.captioner, image); });
        if ((active(module_ids::object) || active(module_ids::plate)) && parts_.detector)
            objects = std::async(std::launch::async, [&] {
                return run_objects(*parts_.detector, image, parts_.thresholds.object_confidence_floor);
            });
        std::future<EvidenceScores> solar;
        if (active(module_ids::solar))
            solar = std::async(std::launch::async, [&] { return solar_evidence(pano, registry(), parts_.solar); });

        // The detector output feeds both the object and plate modules.
        std::optional<ObjResult> detected;
        std::optional<ProviderError> detect_error;
        auto with_objects = [&](const std::string& id, auto&& score) -> EvidenceScores {
            if (!detected && !detect_error) {
                try {
                    detected = objects.get();
                } catch (const ProviderError& e) {
                    detect_error = e;
                }
            }
            if (detect_error) return abstain_for(id, *detect_error);
            return score(*detected);
        };

        std::vector<EvidenceScores> out;
        for (const auto& id : parts_.modules) {
            if (id == module_ids::color) {
                out.push_back(parts_.color_profiles.empty()
                                  ? EvidenceScores::abstain(id, "no color profiles loaded")
                                  : restricted(score_colors(channel_histogram(pano), parts_.color_profiles)));
            } else if (id == module_ids::solar) {
                out.push_back(solar.get());
            } else if (id == module_ids::textlang) {
                if (!parts_.ocr) {
                    out.push_back(EvidenceScores::abstain(id, "no OCR provider configured"));
                    continue;
                }
                out.push_back(with_provider(id, ocr, [&](const OcrResult& obs) {
                    return score_textlang(obs, registry(), parts_.language_profiles, parts_.thresholds.textlang);
                }));
            } else if (id == module_ids::caption) {
                if (!parts_.captioner || parts_.caption_profiles.empty()) {
                    out.push_back(EvidenceScores::abstain(id, !parts_.captioner ? "no caption provider configured"
                                                                                : "no caption profiles loaded"));
                    continue;
                }
                out.push_back(with_provider(id, caption, [&](const Caption& c) {
                    auto e = restricted(score_frequency(id, tokenize_filter(c.text, parts_.stopwords), parts_.caption_profiles));
                    e.notes.insert(e.notes.begin(), "caption: " + c.text);
                    return e;
                }));
            } else if (id == module_ids::object) {
                if (!parts_.detector || parts_.object_profiles.empty()) {
                    out.push_back(EvidenceScores::abstain(id, !parts_.detector ? "no object provider configured"
                                                                               : "no object profiles loaded"));
                    continue;
                }
                out.push_back(with_objects(id, [&](const ObjResult& objs) {
                    std::vector<std::string> labels;
                    for (const auto& o : objs) labels.push_back(o.label);
                    return restricted(score_frequency(id, count_labels(labels), parts_.object_profiles));
                }));
            } else if (id == module_ids::plate) {
                if (!parts_.detector) {
                    out.push_back(EvidenceScores::abstain(id, "no object provider configured"));
                    continue;
                }
                out.push_back(with_objects(id, [&](const ObjResult& objs) {
                    return score_plates(extract_plate_colors(pano.image(), objs), registry());
                }));
            }
        }
        return out;
    }

    GuessReport guess(const Panorama& pano, std::optional<fs::path> source = std::nullopt) const {
        return fuse(analyze(pano, std::move(source)), weights_, registry());
    }

    GuessReport fuse_results(const std::vector<EvidenceScores>& modules) const {
        return fuse(modules, weights_, registry());
    }

private:
    /// Drops profile countries the registry does not know and renormalizes.
    EvidenceScores restricted(EvidenceScores e) const {
        if (e.abstained) return e;
        std::map<CountryCode, double> kept;
        bool dropped = false;
        for (const auto& [c, s] : e.scores) {
            if (registry().contains(c))
                kept[c] = s;
            else
                dropped = true;
        }
        if (!dropped) return e;
        double total = 0.0;
        for (const auto& [_, s] : kept) total += s;
        if (!(total > 0.0)) return EvidenceScores::abstain(e.module_id, "profiles cover no registry country");
        return EvidenceScores::from_weights(e.module_id, std::move(kept), std::move(e.notes));
    }

    template <typename T, typename F>
    static EvidenceScores with_provider(const std::string& id, std::future<T>& fut, F&& score) {
        try {
            return score(fut.get());
        } catch (const ProviderError& e) {
            return abstain_for(id, e);
        }
    }

    static EvidenceScores abstain_for(const std::string& id, const ProviderError& e) {
        std::string note = std::string("provider failed: ") + e.what();
        if (!e.stderr_excerpt().empty()) note += " | stderr: " + e.stderr_excerpt();
        return EvidenceScores::abstain(id, note);
    }

    EngineParts parts_;
    WeightVector weights_;
};

} // namespace countryguess
