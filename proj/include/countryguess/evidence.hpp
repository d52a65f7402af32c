#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "error.hpp"
#include "json_io.hpp"
#include "knowledge.hpp"

namespace countryguess {

/// Module identifiers used in weight files, configuration and reports.
namespace module_ids {
inline constexpr const char* color = "color";
inline constexpr const char* solar = "solar";
inline constexpr const char* textlang = "textlang";
inline constexpr const char* caption = "caption";
inline constexpr const char* object = "object";
inline constexpr const char* plate = "plate";
} // namespace module_ids

inline const std::vector<std::string>& all_module_ids() {
    static const std::vector<std::string> ids = {module_ids::color,   module_ids::solar,  module_ids::textlang,
                                                 module_ids::caption, module_ids::object, module_ids::plate};
    return ids;
}

/// One module's per-country score distribution, or an abstention.
/// Non-abstained scores sum to 1; abstained scores are empty.
struct EvidenceScores {
    std::string module_id;
    std::map<CountryCode, double> scores;
    bool abstained = false;
    std::vector<std::string> notes;

    static EvidenceScores abstain(std::string module_id, std::string note = {}) {
        EvidenceScores e;
        e.module_id = std::move(module_id);
        e.abstained = true;
        if (!note.empty()) e.notes.push_back(std::move(note));
        return e;
    }

    /// Normalizes non-negative raw weights to a distribution. The caller guarantees a positive sum.
    static EvidenceScores from_weights(std::string module_id, std::map<CountryCode, double> raw,
                                       std::vector<std::string> notes = {}) {
        double total = 0.0;
        for (const auto& [_, w] : raw) {
            if (!(w >= 0.0) || !std::isfinite(w)) throw ArgumentError(module_id + ": raw weights must be finite and >= 0");
            total += w;
        }
        if (!(total > 0.0)) throw ArgumentError(module_id + ": raw weights sum to zero");
        for (auto& [_, w] : raw) w /= total;
        EvidenceScores e;
        e.module_id = std::move(module_id);
        e.scores = std::move(raw);
        e.notes = std::move(notes);
        return e;
    }

    static EvidenceScores uniform(std::string module_id, const std::vector<CountryCode>& countries,
                                  std::vector<std::string> notes = {}) {
        std::map<CountryCode, double> raw;
        for (const auto& c : countries) raw[c] = 1.0;
        return from_weights(std::move(module_id), std::move(raw), std::move(notes));
    }

    double score(const CountryCode& c) const {
        auto it = scores.find(c);
        return it == scores.end() ? 0.0 : it->second;
    }
};

inline OrderedJson to_json(const EvidenceScores& e) {
    OrderedJson j;
    j["module_id"] = e.module_id;
    j["abstained"] = e.abstained;
    OrderedJson s = OrderedJson::object();
    for (const auto& [c, v] : e.scores) s[c.str()] = v;
    j["scores"] = std::move(s);
    j["notes"] = e.notes;
    return j;
}

inline EvidenceScores evidence_from_json(const Json& j) {
    EvidenceScores e;
    e.module_id = require<std::string>(j, "module_id", "evidence");
    e.abstained = j.value("abstained", false);
    if (j.contains("scores"))
        for (const auto& [k, v] : j["scores"].items()) e.scores[CountryCode(k)] = v.get<double>();
    if (j.contains("notes")) e.notes = j["notes"].get<std::vector<std::string>>();
    return e;
}

} // namespace countryguess
