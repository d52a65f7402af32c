#pragma once

// Average term lists ("word lists" for captions, "object lists" for detector
// labels) and cosine-similarity scoring against them.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "evidence.hpp"
#include "json_io.hpp"
#include "knowledge.hpp"
#include "utf8.hpp"

namespace countryguess {

enum class FrequencyKind { caption_words, object_labels };

inline const char* to_string(FrequencyKind k) {
    return k == FrequencyKind::caption_words ? "caption_words" : "object_labels";
}

inline FrequencyKind parse_frequency_kind(std::string_view s) {
    if (s == "caption_words") return FrequencyKind::caption_words;
    if (s == "object_labels") return FrequencyKind::object_labels;
    throw ParseError("unknown frequency profile kind \"" + std::string(s) + "\"");
}

using TermCounts = std::map<std::string, long>;

struct FrequencyProfile {
    CountryCode country;
    FrequencyKind kind = FrequencyKind::caption_words;
    std::map<std::string, double> avg_freq;
    int doc_count = 0;
};

inline TermCounts tokenize_filter(std::string_view text, const std::set<std::string>& stopwords) {
    TermCounts counts;
    for (auto& w : utf8::letter_words(text)) {
        if (utf8::length(w) < 2 || stopwords.count(w)) continue;
        ++counts[w];
    }
    return counts;
}

/// Label counts of detector output; labels are taken whole.
inline TermCounts count_labels(const std::vector<std::string>& labels) {
    TermCounts counts;
    for (const auto& l : labels) {
        auto t = utf8::lower(l);
        if (!t.empty()) ++counts[t];
    }
    return counts;
}

inline FrequencyProfile build_frequency_profile(const CountryCode& country, FrequencyKind kind,
                                                const std::vector<TermCounts>& docs) {
    if (docs.empty()) throw ArgumentError("build_frequency_profile: no documents for " + country.str());
    FrequencyProfile p;
    p.country = country;
    p.kind = kind;
    p.doc_count = static_cast<int>(docs.size());
    for (const auto& d : docs)
        for (const auto& [term, n] : d) p.avg_freq[term] += static_cast<double>(n);
    for (auto& [_, v] : p.avg_freq) v /= static_cast<double>(p.doc_count);
    return p;
}

/// Cosine between sparse vectors; 0 when either is all-zero.
inline double cosine_similarity(const TermCounts& observed, const std::map<std::string, double>& profile) {
    double dot = 0.0, no = 0.0, np = 0.0;
    for (const auto& [t, n] : observed) {
        const double x = static_cast<double>(n);
        no += x * x;
        auto it = profile.find(t);
        if (it != profile.end()) dot += x * it->second;
    }
    for (const auto& [_, v] : profile) np += v * v;
    if (no == 0.0 || np == 0.0) return 0.0;
    return dot / (std::sqrt(no) * std::sqrt(np));
}

inline EvidenceScores score_frequency(const std::string& module_id, const TermCounts& observed,
                                      const std::vector<FrequencyProfile>& profiles) {
    if (profiles.empty()) throw ArgumentError("score_frequency: no profiles");
    for (const auto& p : profiles)
        if (p.kind != profiles.front().kind) throw ArgumentError("score_frequency: profiles of mixed kinds");

    bool any_term = std::any_of(observed.begin(), observed.end(), [](const auto& kv) { return kv.second > 0; });
    if (!any_term) return EvidenceScores::abstain(module_id, "no terms observed");

    std::map<CountryCode, double> raw;
    double total = 0.0;
    for (const auto& p : profiles) {
        double s = cosine_similarity(observed, p.avg_freq);
        raw[p.country] = s;
        total += s;
    }
    std::string terms;
    for (const auto& [t, n] : observed) terms += (terms.empty() ? "" : " ") + t;
    if (!(total > 0.0)) {
        for (auto& [_, v] : raw) v = 1.0;
        return EvidenceScores::from_weights(module_id, std::move(raw),
                                            {"terms [" + terms + "] match no profile; uniform"});
    }
    return EvidenceScores::from_weights(module_id, std::move(raw), {"terms: " + terms});
}

// Profile file: {"format":"countryguess.frequency_profile","version":1,"code","kind","doc_count","avg_freq":{term:avg}}

inline constexpr int frequency_profile_version = 1;

inline OrderedJson to_json(const FrequencyProfile& p) {
    OrderedJson j;
    j["format"] = "countryguess.frequency_profile";
    j["version"] = frequency_profile_version;
    j["code"] = p.country.str();
    j["kind"] = to_string(p.kind);
    j["doc_count"] = p.doc_count;
    OrderedJson f = OrderedJson::object();
    for (const auto& [t, v] : p.avg_freq) f[t] = v;
    j["avg_freq"] = std::move(f);
    return j;
}

inline FrequencyProfile frequency_profile_from_json(const Json& j, const std::string& origin) {
    if (j.value("format", "") != "countryguess.frequency_profile" || j.value("version", 0) != frequency_profile_version)
        throw ParseError(origin + ": not a version 1 frequency profile");
    FrequencyProfile p;
    p.country = CountryCode(require<std::string>(j, "code", origin));
    p.kind = parse_frequency_kind(require<std::string>(j, "kind", origin));
    p.doc_count = require<int>(j, "doc_count", origin);
    if (p.doc_count < 1) throw ValidationError(origin + ": doc_count must be >= 1");
    p.avg_freq = require<std::map<std::string, double>>(j, "avg_freq", origin);
    for (const auto& [t, v] : p.avg_freq) {
        if (t.empty() || utf8::lower(t) != t) throw ValidationError(origin + ": terms must be non-empty lowercase");
        if (!(v >= 0.0)) throw ValidationError(origin + ": negative frequency for " + t);
    }
    return p;
}

inline void save_frequency_profiles(const fs::path& dir, const std::vector<FrequencyProfile>& profiles) {
    for (const auto& p : profiles) write_json(dir / (p.country.str() + ".json"), to_json(p));
}

inline std::vector<FrequencyProfile> load_frequency_profiles(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw NotFoundError("frequency profile directory not found: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<FrequencyProfile> out;
    for (const auto& f : files) out.push_back(frequency_profile_from_json(read_json(f), f.string()));
    return out;
}

inline std::set<std::string> load_stopwords(const fs::path& path) {
    std::set<std::string> out;
    for (const auto& w : utf8::letter_words(read_file(path))) out.insert(w);
    return out;
}

} // namespace countryguess
