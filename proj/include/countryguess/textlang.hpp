#pragma once

// Character-trigram language identification and the text evidence module:
// detected language x fact-sheet language shares, plus gazetteer hits.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "evidence.hpp"
#include "json_io.hpp"
#include "knowledge.hpp"
#include "providers.hpp"
#include "utf8.hpp"

namespace countryguess {

struct LanguageGuess {
    std::string language;
    double confidence = 0.0;
};

/// language code -> (trigram -> relative frequency)
struct LanguageProfileSet {
    std::map<std::string, std::map<std::string, double>> profiles;

    bool empty() const noexcept { return profiles.empty(); }
};

inline constexpr double trigram_smoothing = 1e-6;
inline constexpr std::size_t min_trigrams = 6;

/// Space-padded character trigrams of every letter run, lowercased.
inline std::vector<std::string> extract_trigrams(std::string_view text) {
    std::vector<std::string> out;
    for (const auto& word : utf8::letter_words(text)) {
        auto cps = utf8::decode(" " + word + " ");
        for (std::size_t i = 0; i + 3 <= cps.size(); ++i) out.push_back(utf8::encode(cps.substr(i, 3)));
    }
    return out;
}

inline std::map<std::string, double> build_trigram_table(std::string_view corpus) {
    auto grams = extract_trigrams(corpus);
    if (grams.empty()) throw ArgumentError("language corpus contains no letters");
    std::map<std::string, double> table;
    for (const auto& g : grams) table[g] += 1.0;
    for (auto& [_, v] : table) v /= static_cast<double>(grams.size());
    return table;
}

inline std::optional<LanguageGuess> detect_language(std::string_view text, const LanguageProfileSet& set) {
    if (set.empty()) return std::nullopt;
    auto grams = extract_trigrams(text);
    if (grams.size() < min_trigrams) return std::nullopt;

    std::vector<std::pair<double, std::string>> mean_scores;
    for (const auto& [lang, table] : set.profiles) {
        double sum = 0.0;
        for (const auto& g : grams) {
            auto it = table.find(g);
            sum += std::log((it == table.end() ? 0.0 : it->second) + trigram_smoothing);
        }
        mean_scores.emplace_back(sum / static_cast<double>(grams.size()), lang);
    }
    // Highest score first; equal scores resolve to the alphabetically first language.
    std::sort(mean_scores.begin(), mean_scores.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    if (mean_scores.size() == 1) return LanguageGuess{mean_scores[0].second, 1.0};

    const double top = mean_scores[0].first;
    double z = 0.0;
    for (const auto& [s, _] : mean_scores) z += std::exp(s - top);
    const double p1 = 1.0 / z;
    const double p2 = std::exp(mean_scores[1].first - top) / z;
    return LanguageGuess{mean_scores[0].second, std::clamp(p1 - p2, 0.0, 1.0)};
}

struct TextLangParams {
    double lambda_lang = 1.0;
    double lambda_place = 2.0;
    std::size_t max_place_words = 3;
};

/// Unique normalized word n-grams (up to `max_words`) that hit the gazetteer.
inline std::map<std::string, std::set<CountryCode>> find_toponyms(std::string_view text, const CountryRegistry& registry,
                                                                  std::size_t max_words = 3) {
    std::map<std::string, std::set<CountryCode>> hits;
    auto words = utf8::letter_words(text);
    for (std::size_t i = 0; i < words.size(); ++i) {
        std::string phrase;
        for (std::size_t n = 0; n < max_words && i + n < words.size(); ++n) {
            if (n) phrase += ' ';
            phrase += words[i + n];
            auto key = normalize_place(phrase);
            if (hits.count(key)) continue;
            auto set = registry.lookup_place(key);
            if (!set.empty()) hits.emplace(key, std::move(set));
        }
    }
    return hits;
}

inline EvidenceScores score_textlang(const std::vector<TextObservation>& observations, const CountryRegistry& registry,
                                     const LanguageProfileSet& profiles, const TextLangParams& params = {}) {
    if (observations.empty()) return EvidenceScores::abstain(module_ids::textlang, "no text observed");
    std::string text;
    for (const auto& o : observations) {
        if (!text.empty()) text += ' ';
        text += o.text;
    }

    std::map<CountryCode, double> raw;
    for (const auto& code : registry.codes()) raw[code] = 0.0;
    std::vector<std::string> notes;

    if (auto guess = detect_language(text, profiles)) {
        notes.push_back("language " + guess->language + " (confidence " + std::to_string(guess->confidence) + ")");
        for (const auto& [code, sheet] : registry.entries())
            raw[code] += params.lambda_lang * guess->confidence * sheet.language_weight(guess->language);
    }
    for (const auto& [name, countries] : find_toponyms(text, registry, params.max_place_words)) {
        std::string who;
        for (const auto& c : countries) {
            raw[c] += params.lambda_place / static_cast<double>(countries.size());
            who += (who.empty() ? "" : ",") + c.str();
        }
        notes.push_back("place name \"" + name + "\" -> " + who);
    }

    double total = 0.0;
    for (const auto& [_, w] : raw) total += w;
    if (!(total > 0.0)) return EvidenceScores::abstain(module_ids::textlang, "text carries no language or place signal");
    return EvidenceScores::from_weights(module_ids::textlang, std::move(raw), std::move(notes));
}

// Profile file: {"format":"countryguess.language_profiles","version":1,"languages":{lang:{trigram:freq}}}

inline constexpr int language_profile_version = 1;

inline LanguageProfileSet build_language_profiles(const fs::path& corpus_dir) {
    if (!fs::is_directory(corpus_dir)) throw NotFoundError("language corpus directory not found: " + corpus_dir.string());
    LanguageProfileSet set;
    for (const auto& e : fs::directory_iterator(corpus_dir)) {
        if (!e.is_regular_file() || e.path().extension() != ".txt") continue;
        auto lang = e.path().stem().string();
        set.profiles[lang] = build_trigram_table(read_file(e.path()));
    }
    if (set.empty()) throw ArgumentError("no <lang>.txt files in " + corpus_dir.string());
    return set;
}

inline OrderedJson to_json(const LanguageProfileSet& set) {
    OrderedJson j;
    j["format"] = "countryguess.language_profiles";
    j["version"] = language_profile_version;
    OrderedJson langs = OrderedJson::object();
    for (const auto& [lang, table] : set.profiles) {
        OrderedJson t = OrderedJson::object();
        for (const auto& [g, f] : table) t[g] = f;
        langs[lang] = std::move(t);
    }
    j["languages"] = std::move(langs);
    return j;
}

inline LanguageProfileSet language_profiles_from_json(const Json& j, const std::string& origin) {
    if (j.value("format", "") != "countryguess.language_profiles" || j.value("version", 0) != language_profile_version)
        throw ParseError(origin + ": not a version 1 language profile document");
    LanguageProfileSet set;
    set.profiles = require<std::map<std::string, std::map<std::string, double>>>(j, "languages", origin);
    for (const auto& [lang, table] : set.profiles) {
        if (table.empty()) throw ValidationError(origin + ": empty profile for " + lang);
        double sum = 0.0;
        for (const auto& [_, f] : table) {
            if (!(f >= 0.0)) throw ValidationError(origin + ": negative frequency in " + lang);
            sum += f;
        }
        if (std::abs(sum - 1.0) > 1e-6) throw ValidationError(origin + ": profile " + lang + " does not sum to 1");
    }
    return set;
}

inline LanguageProfileSet load_language_profiles(const fs::path& path) {
    return language_profiles_from_json(read_json(path), path.string());
}

} // namespace countryguess
