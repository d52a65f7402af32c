#pragma once

// Per-country average color histograms and histogram-distance scoring.

#include <algorithm>
#include <cmath>
#include <vector>

#include "evidence.hpp"
#include "image.hpp"
#include "json_io.hpp"
#include "knowledge.hpp"

namespace countryguess {

struct ColorProfile {
    CountryCode country;
    RgbHistogram histogram;
    int image_count = 0;
};

/// Bin-wise mean of the given histograms.
inline ColorProfile build_color_profile(const CountryCode& country, const std::vector<RgbHistogram>& histograms) {
    if (histograms.empty()) throw ArgumentError("build_color_profile: no histograms for " + country.str());
    ColorProfile p;
    p.country = country;
    p.image_count = static_cast<int>(histograms.size());
    for (const auto& h : histograms)
        for (int c = 0; c < 3; ++c)
            for (int v = 0; v < RgbHistogram::bins; ++v) p.histogram.channels[c][v] += h.channels[c][v];
    const double n = static_cast<double>(histograms.size());
    for (auto& ch : p.histogram.channels)
        for (auto& v : ch) v /= n;
    return p;
}

/// Mean absolute bin difference over all 3 x 256 positions.
inline double color_distance(const RgbHistogram& a, const RgbHistogram& b) {
    double sum = 0.0;
    for (int c = 0; c < 3; ++c)
        for (int v = 0; v < RgbHistogram::bins; ++v) sum += std::abs(a.channels[c][v] - b.channels[c][v]);
    return sum / (3.0 * RgbHistogram::bins);
}

inline double color_distance(const RgbHistogram& query, const ColorProfile& profile) {
    return color_distance(query, profile.histogram);
}

/// Min-max inverted distances, normalized to a distribution. Never abstains.
inline EvidenceScores score_colors(const RgbHistogram& query, const std::vector<ColorProfile>& profiles) {
    if (profiles.empty()) throw ArgumentError("score_colors: no color profiles");
    std::vector<double> d;
    d.reserve(profiles.size());
    for (const auto& p : profiles) d.push_back(color_distance(query, p));
    const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
    const double d_min = *lo, d_max = *hi;

    std::map<CountryCode, double> raw;
    if (d_max > d_min) {
        for (std::size_t i = 0; i < profiles.size(); ++i) raw[profiles[i].country] = (d_max - d[i]) / (d_max - d_min);
    } else {
        for (const auto& p : profiles) raw[p.country] = 1.0;
    }
    auto nearest = std::distance(d.begin(), lo);
    return EvidenceScores::from_weights(module_ids::color, std::move(raw),
                                        {"closest palette: " + profiles[static_cast<std::size_t>(nearest)].country.str()});
}

// Profile file: {"format":"countryguess.color_profile","version":1,"code",
// "image_count","histogram":[[256 R],[256 G],[256 B]]}

inline constexpr int color_profile_version = 1;

inline OrderedJson to_json(const ColorProfile& p) {
    OrderedJson j;
    j["format"] = "countryguess.color_profile";
    j["version"] = color_profile_version;
    j["code"] = p.country.str();
    j["image_count"] = p.image_count;
    auto h = OrderedJson::array();
    for (const auto& ch : p.histogram.channels) h.push_back(ch);
    j["histogram"] = std::move(h);
    return j;
}

inline ColorProfile color_profile_from_json(const Json& j, const std::string& origin) {
    if (j.value("format", "") != "countryguess.color_profile" || j.value("version", 0) != color_profile_version)
        throw ParseError(origin + ": not a version " + std::to_string(color_profile_version) + " color profile");
    ColorProfile p;
    p.country = CountryCode(require<std::string>(j, "code", origin));
    p.image_count = require<int>(j, "image_count", origin);
    if (p.image_count < 1) throw ValidationError(origin + ": image_count must be >= 1");
    auto h = require<std::vector<std::vector<double>>>(j, "histogram", origin);
    if (h.size() != 3) throw ValidationError(origin + ": histogram needs 3 channels");
    for (int c = 0; c < 3; ++c) {
        if (h[c].size() != RgbHistogram::bins) throw ValidationError(origin + ": histogram channel needs 256 bins");
        double sum = 0.0;
        for (int v = 0; v < RgbHistogram::bins; ++v) {
            if (!(h[c][v] >= 0.0)) throw ValidationError(origin + ": negative histogram bin");
            p.histogram.channels[c][v] = h[c][v];
            sum += h[c][v];
        }
        if (std::abs(sum - 1.0) > 1e-6) throw ValidationError(origin + ": histogram channel does not sum to 1");
    }
    return p;
}

inline void save_color_profiles(const fs::path& dir, const std::vector<ColorProfile>& profiles) {
    for (const auto& p : profiles) write_json(dir / (p.country.str() + ".json"), to_json(p));
}

inline std::vector<ColorProfile> load_color_profiles(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw NotFoundError("color profile directory not found: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<ColorProfile> out;
    for (const auto& f : files) out.push_back(color_profile_from_json(read_json(f), f.string()));
    return out;
}

} // namespace countryguess
