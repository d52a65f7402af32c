#pragma once

// Sun direction from sky-pitched views, and the hemisphere rule: a sun in the
// southern sector means the northern hemisphere and vice versa, except in the tropics.

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <vector>

#include "evidence.hpp"
#include "image.hpp"
#include "knowledge.hpp"

namespace countryguess {

struct SolarParams {
    int view_count = 8;
    double pitch_deg = 45.0;
    double fov_deg = 90.0;
    int view_size = 128;
    double contrast_threshold = 8.0;
    double match_weight = 1.0;
    double tropic_weight = 0.5;
    double opposite_weight = 0.1;
};

struct SunEstimate {
    double azimuth_deg = 0.0;
    double brightest_heading_deg = 0.0;
    double contrast = 0.0;
    bool confident = false;
    std::vector<double> view_luminance;  // one entry per heading, ascending heading
};

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline SunEstimate detect_sun_azimuth(const Panorama& pano, const SolarParams& params = {}) {
    if (params.view_count < 2) throw ArgumentError("solar view grid needs at least 2 headings");
    SunEstimate est;
    const double step = 360.0 / params.view_count;
    std::size_t best = 0;
    for (int i = 0; i < params.view_count; ++i) {
        auto view = extract_view(pano, i * step, params.pitch_deg, params.fov_deg, params.view_size, params.view_size);
        est.view_luminance.push_back(mean_luminance(view));
        if (est.view_luminance.back() > est.view_luminance[best]) best = static_cast<std::size_t>(i);
    }
    const double median = median_of(est.view_luminance);
    est.contrast = est.view_luminance[best] - median;
    // Plain argmax is biased: a compact sun near the edge of a neighbouring view is
    // magnified by the perspective projection and outshines the centred view. The
    // above-median excess is symmetric about the sun, so take its circular centroid.
    double cx = 0.0, cy = 0.0;
    for (int i = 0; i < params.view_count; ++i) {
        const double w = std::max(0.0, est.view_luminance[static_cast<std::size_t>(i)] - median);
        cx += w * std::cos(i * step * detail::deg2rad);
        cy += w * std::sin(i * step * detail::deg2rad);
    }
    est.brightest_heading_deg = static_cast<double>(best) * step;
    est.azimuth_deg = (cx == 0.0 && cy == 0.0) ? est.brightest_heading_deg
                                               : wrap_degrees(std::atan2(cy, cx) * detail::rad2deg);
    est.confident = est.contrast >= params.contrast_threshold && pano.north_offset_known();
    return est;
}

/// Northern for a southern-sector sun, Southern for a northern-sector sun,
/// nothing for east/west azimuths or an unconfident estimate.
inline std::optional<HemisphereClass> infer_hemisphere(const SunEstimate& est) {
    if (!est.confident) return std::nullopt;
    const double az = wrap_degrees(est.azimuth_deg);
    if (az > 112.5 && az < 247.5) return HemisphereClass::northern;
    if (az < 67.5 || az > 292.5) return HemisphereClass::southern;
    return std::nullopt;
}

inline EvidenceScores score_solar(const std::optional<HemisphereClass>& hypothesis, const CountryRegistry& registry,
                                  const SolarParams& params = {}) {
    if (!hypothesis) return EvidenceScores::abstain(module_ids::solar, "no usable sun direction");
    if (registry.empty()) return EvidenceScores::abstain(module_ids::solar, "empty registry");
    std::map<CountryCode, double> raw;
    for (const auto& [code, sheet] : registry.entries()) {
        auto h = hemisphere_class(sheet);
        raw[code] = h == *hypothesis                 ? params.match_weight
                    : h == HemisphereClass::tropic ? params.tropic_weight
                                                   : params.opposite_weight;
    }
    return EvidenceScores::from_weights(module_ids::solar, std::move(raw),
                                        {std::string("sun position suggests the ") + to_string(*hypothesis) + " hemisphere"});
}

/// Full module: detection, rule, scoring, with an explanation of any abstention.
inline EvidenceScores solar_evidence(const Panorama& pano, const CountryRegistry& registry, const SolarParams& params = {}) {
    auto est = detect_sun_azimuth(pano, params);
    std::ostringstream why;
    why << "sun azimuth " << est.azimuth_deg << " deg (brightest view " << est.brightest_heading_deg << "), contrast " << est.contrast;
    if (!pano.north_offset_known()) return EvidenceScores::abstain(module_ids::solar, "panorama has no north offset");
    if (!est.confident) return EvidenceScores::abstain(module_ids::solar, why.str() + " (below threshold)");
    auto hyp = infer_hemisphere(est);
    if (!hyp) return EvidenceScores::abstain(module_ids::solar, why.str() + " (east/west ambiguity band)");
    auto scores = score_solar(hyp, registry, params);
    scores.notes.insert(scores.notes.begin(), why.str());
    return scores;
}

} // namespace countryguess
