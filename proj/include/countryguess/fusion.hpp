#pragma once

// Linear opinion pool over module distributions, producing a total ranking of
// every registry country.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "evidence.hpp"
#include "json_io.hpp"
#include "knowledge.hpp"

namespace countryguess {

/// Non-negative module weights summing to 1.
class WeightVector {
public:
    WeightVector() = default;

    /// Validates an already-normalized vector.
    explicit WeightVector(std::map<std::string, double> weights) : weights_(std::move(weights)) {
        double total = 0.0;
        for (const auto& [id, w] : weights_) {
            if (!(w >= 0.0) || !std::isfinite(w)) throw ArgumentError("weight for " + id + " must be finite and >= 0");
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-9) throw ArgumentError("weights must sum to 1");
    }

    /// Scales arbitrary non-negative weights to sum 1.
    static WeightVector normalized(std::map<std::string, double> raw) {
        double total = 0.0;
        for (const auto& [id, w] : raw) {
            if (!(w >= 0.0) || !std::isfinite(w)) throw ArgumentError("weight for " + id + " must be finite and >= 0");
            total += w;
        }
        if (!(total > 0.0)) throw ArgumentError("weights sum to zero");
        for (auto& [_, w] : raw) w /= total;
        return WeightVector(std::move(raw));
    }

    static WeightVector uniform(const std::vector<std::string>& ids) {
        std::map<std::string, double> raw;
        for (const auto& id : ids) raw[id] = 1.0;
        return normalized(std::move(raw));
    }

    const std::map<std::string, double>& weights() const noexcept { return weights_; }
    bool contains(const std::string& id) const { return weights_.count(id) != 0; }
    double at(const std::string& id) const { return weights_.at(id); }
    std::size_t size() const noexcept { return weights_.size(); }

    std::vector<std::string> ids() const {
        std::vector<std::string> out;
        for (const auto& [id, _] : weights_) out.push_back(id);
        return out;
    }

    /// Drops `removed` and renormalizes; uniform over the rest when they carry no weight.
    WeightVector without(const std::set<std::string>& removed) const {
        std::map<std::string, double> rest;
        for (const auto& [id, w] : weights_)
            if (!removed.count(id)) rest[id] = w;
        if (rest.empty()) return WeightVector();
        double total = 0.0;
        for (const auto& [_, w] : rest) total += w;
        if (!(total > 0.0)) {
            std::vector<std::string> ids;
            for (const auto& [id, _] : rest) ids.push_back(id);
            return uniform(ids);
        }
        return normalized(std::move(rest));
    }

    bool operator==(const WeightVector&) const = default;

private:
    std::map<std::string, double> weights_;
};

inline OrderedJson to_json(const WeightVector& w) {
    OrderedJson j = OrderedJson::object();
    for (const auto& [id, v] : w.weights()) j[id] = v;
    return j;
}

/// Weight file: {module_id: weight}. Values are renormalized on load.
inline WeightVector weights_from_json(const Json& j, const std::string& origin) {
    if (!j.is_object()) throw ParseError(origin + ": weight file must be an object");
    std::map<std::string, double> raw;
    for (const auto& [k, v] : j.items()) {
        if (!v.is_number()) throw ParseError(origin + ": weight for " + k + " is not a number");
        raw[k] = v.get<double>();
    }
    try {
        return WeightVector::normalized(std::move(raw));
    } catch (const ArgumentError& e) {
        throw ValidationError(origin + ": " + e.what());
    }
}

struct RankEntry {
    CountryCode country;
    double score = 0.0;

    bool operator==(const RankEntry&) const = default;
};

/// Every registry country once, scores non-increasing, ties by ascending code.
struct CountryRanking {
    std::vector<RankEntry> entries;

    std::size_t size() const noexcept { return entries.size(); }
    const CountryCode& top() const { return entries.at(0).country; }
};

struct GuessReport {
    CountryRanking ranking;
    std::map<std::string, EvidenceScores> per_module;
    /// Weights after dropping abstentions and renormalizing; empty when all modules abstained.
    std::map<std::string, double> weights_used;
    std::set<std::string> abstentions;
    std::vector<std::string> notes;
};

namespace detail {

/// Dense fusion kernel shared by `fuse` and the weight optimizer so both rank identically.
/// `scores[m][c]` is module m's score of country index c; abstained modules are skipped.
/// Returns false when no module contributes weight (caller falls back to uniform).
inline bool pool_dense(const std::vector<const std::vector<double>*>& scores, const std::vector<double>& weights,
                       const std::vector<bool>& abstained, std::size_t n_countries, std::vector<double>& out) {
    double total = 0.0;
    for (std::size_t m = 0; m < scores.size(); ++m)
        if (!abstained[m]) total += weights[m];
    out.assign(n_countries, 0.0);
    if (!(total > 0.0)) {
        std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(n_countries));
        return false;
    }
    for (std::size_t m = 0; m < scores.size(); ++m) {
        if (abstained[m]) continue;
        const double w = weights[m] / total;
        if (w == 0.0) continue;
        const auto& s = *scores[m];
        for (std::size_t c = 0; c < n_countries; ++c) out[c] += w * s[c];
    }
    return true;
}

/// 1-based rank of country index `truth` under descending score, ties by ascending index.
inline std::size_t dense_rank(const std::vector<double>& fused, std::size_t truth) {
    std::size_t rank = 1;
    const double t = fused[truth];
    for (std::size_t c = 0; c < fused.size(); ++c)
        if (fused[c] > t || (fused[c] == t && c < truth)) ++rank;
    return rank;
}

} // namespace detail

inline GuessReport fuse(const std::vector<EvidenceScores>& modules, const WeightVector& weights,
                        const CountryRegistry& registry) {
    if (registry.empty()) throw ArgumentError("fuse: empty registry");
    const auto codes = registry.codes();
    std::map<CountryCode, std::size_t> index;
    for (std::size_t i = 0; i < codes.size(); ++i) index[codes[i]] = i;

    GuessReport report;
    std::vector<std::vector<double>> dense(modules.size());
    std::vector<const std::vector<double>*> ptrs;
    std::vector<double> w;
    std::vector<bool> abstained;
    for (std::size_t m = 0; m < modules.size(); ++m) {
        const auto& e = modules[m];
        if (!weights.contains(e.module_id)) throw ArgumentError("no weight for module " + e.module_id);
        if (report.per_module.count(e.module_id)) throw ArgumentError("module " + e.module_id + " supplied twice");
        dense[m].assign(codes.size(), 0.0);
        if (!e.abstained) {
            for (const auto& [c, s] : e.scores) {
                auto it = index.find(c);
                if (it == index.end()) throw ArgumentError("module " + e.module_id + " scores unknown country " + c.str());
                dense[m][it->second] = s;
            }
        } else {
            report.abstentions.insert(e.module_id);
        }
        ptrs.push_back(&dense[m]);
        w.push_back(weights.at(e.module_id));
        abstained.push_back(e.abstained);
        report.per_module.emplace(e.module_id, e);
    }

    std::vector<double> fused;
    if (detail::pool_dense(ptrs, w, abstained, codes.size(), fused)) {
        double total = 0.0;
        for (std::size_t m = 0; m < modules.size(); ++m)
            if (!abstained[m]) total += w[m];
        for (std::size_t m = 0; m < modules.size(); ++m)
            if (!abstained[m]) report.weights_used[modules[m].module_id] = w[m] / total;
    } else {
        report.notes.push_back("no module contributed evidence; uniform ranking");
    }

    std::vector<std::size_t> order(codes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fused[a] > fused[b]; });
    for (auto i : order) report.ranking.entries.push_back({codes[i], fused[i]});
    return report;
}

inline OrderedJson to_json(const CountryRanking& r) {
    auto a = OrderedJson::array();
    for (const auto& e : r.entries) a.push_back(OrderedJson{{"code", e.country.str()}, {"score", e.score}});
    return a;
}

inline OrderedJson to_json(const GuessReport& g) {
    OrderedJson j;
    j["ranking"] = to_json(g.ranking);
    OrderedJson mods = OrderedJson::object();
    for (const auto& [id, e] : g.per_module) mods[id] = to_json(e);
    j["modules"] = std::move(mods);
    OrderedJson w = OrderedJson::object();
    for (const auto& [id, v] : g.weights_used) w[id] = v;
    j["weights_used"] = std::move(w);
    j["abstentions"] = g.abstentions;
    j["notes"] = g.notes;
    return j;
}

} // namespace countryguess
