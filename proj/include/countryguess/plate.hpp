#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "evidence.hpp"
#include "knowledge.hpp"
#include "providers.hpp"

namespace countryguess {

/// Countries whose fact sheet lists `color` at `position` (front or rear; unknown matches either).
inline bool plate_matches(const FactSheet& sheet, PlateColor color, PlatePosition position) {
    auto has = [color](const std::vector<PlateColor>& v) { return std::find(v.begin(), v.end(), color) != v.end(); };
    switch (position) {
    case PlatePosition::front: return has(sheet.plate_colors.front);
    case PlatePosition::rear: return has(sheet.plate_colors.rear);
    case PlatePosition::unknown: return has(sheet.plate_colors.front) || has(sheet.plate_colors.rear);
    }
    return false;
}

inline EvidenceScores score_plates(const std::vector<PlateColorObservation>& observations,
                                   const CountryRegistry& registry) {
    if (observations.empty()) return EvidenceScores::abstain(module_ids::plate, "no plates observed");
    std::map<CountryCode, double> raw;
    for (const auto& code : registry.codes()) raw[code] = 0.0;
    std::vector<std::string> notes;
    double total = 0.0;
    for (const auto& obs : observations) {
        notes.push_back(std::string(to_string(obs.color)) + " plate (" + to_string(obs.position) + ", " +
                        std::to_string(obs.confidence) + ")");
        for (const auto& [code, sheet] : registry.entries()) {
            if (plate_matches(sheet, obs.color, obs.position)) {
                raw[code] += obs.confidence;
                total += obs.confidence;
            }
        }
    }
    if (registry.empty()) return EvidenceScores::abstain(module_ids::plate, "empty registry");
    if (!(total > 0.0)) {
        notes.push_back("no country matches the observed plate colors; uniform");
        return EvidenceScores::uniform(module_ids::plate, registry.codes(), std::move(notes));
    }
    return EvidenceScores::from_weights(module_ids::plate, std::move(raw), std::move(notes));
}

} // namespace countryguess
