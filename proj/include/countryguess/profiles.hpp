#pragma once

// Offline profile building from a labelled training manifest.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "codec.hpp"
#include "color.hpp"
#include "evalkit.hpp"
#include "freqlist.hpp"
#include "providers.hpp"

namespace countryguess {

namespace detail {

template <class F>
auto group_by_truth(const DatasetManifest& train, F&& per_item) {
    using T = decltype(per_item(train.items.front(), std::declval<const Panorama&>()));
    if (train.items.empty()) throw ArgumentError("training manifest is empty");
    std::map<CountryCode, std::vector<T>> groups;
    for (const auto& item : train.items) {
        auto pano = load_panorama(item.path, item.north_offset_deg);
        groups[item.truth].push_back(per_item(item, pano));
    }
    return groups;
}

} // namespace detail

/// One averaged histogram per country present in the manifest.
inline std::vector<ColorProfile> build_color_profiles(const DatasetManifest& train) {
    auto groups = detail::group_by_truth(train, [](const ManifestItem&, const Panorama& p) { return channel_histogram(p); });
    std::vector<ColorProfile> out;
    for (const auto& [code, hists] : groups) out.push_back(build_color_profile(code, hists));
    return out;
}

/// Average per-image caption word counts. Images whose provider call fails count as empty documents.
inline std::vector<FrequencyProfile> build_caption_profiles(const DatasetManifest& train, Provider& captioner,
                                                            const std::set<std::string>& stopwords) {
    auto groups = detail::group_by_truth(train, [&](const ManifestItem& item, const Panorama& p) {
        ProviderImage img(p.image(), item.path);
        try {
            return tokenize_filter(run_caption(captioner, img).text, stopwords);
        } catch (const ProviderError&) {
            return TermCounts{};
        }
    });
    std::vector<FrequencyProfile> out;
    for (const auto& [code, docs] : groups)
        out.push_back(build_frequency_profile(code, FrequencyKind::caption_words, docs));
    return out;
}

inline std::vector<FrequencyProfile> build_object_profiles(const DatasetManifest& train, Provider& detector,
                                                           double confidence_floor = 0.4) {
    auto groups = detail::group_by_truth(train, [&](const ManifestItem& item, const Panorama& p) {
        ProviderImage img(p.image(), item.path);
        try {
            std::vector<std::string> labels;
            for (const auto& o : run_objects(detector, img, confidence_floor)) labels.push_back(o.label);
            return count_labels(labels);
        } catch (const ProviderError&) {
            return TermCounts{};
        }
    });
    std::vector<FrequencyProfile> out;
    for (const auto& [code, docs] : groups)
        out.push_back(build_frequency_profile(code, FrequencyKind::object_labels, docs));
    return out;
}

} // namespace countryguess
