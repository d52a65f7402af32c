#pragma once

// Module weight tuning on a development set. The objective (mean rank of the
// true country) is piecewise constant in the weights, so the search is a
// coordinate-wise grid refinement over the simplex.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "evidence.hpp"
#include "fusion.hpp"
#include "knowledge.hpp"

namespace countryguess {

struct DevItem {
    std::vector<EvidenceScores> modules;
    CountryCode truth;
};

struct OptimizeOptions {
    int grid_steps = 20;  // weight levels 0, 1/steps, ..., 1
    int max_sweeps = 20;
};

struct OptimizeResult {
    WeightVector weights;
    double objective = 0.0;
    int sweeps = 0;
};

/// Dev set flattened to dense per-module score vectors for fast re-fusion.
class DenseDevSet {
public:
    DenseDevSet(const std::vector<DevItem>& dev, const CountryRegistry& registry) {
        if (dev.empty()) throw ArgumentError("empty development set");
        const auto codes = registry.codes();
        n_countries_ = codes.size();
        std::map<CountryCode, std::size_t> cindex;
        for (std::size_t i = 0; i < codes.size(); ++i) cindex[codes[i]] = i;

        std::set<std::string> ids;
        for (const auto& item : dev)
            for (const auto& e : item.modules) ids.insert(e.module_id);
        module_ids_.assign(ids.begin(), ids.end());
        std::map<std::string, std::size_t> mindex;
        for (std::size_t m = 0; m < module_ids_.size(); ++m) mindex[module_ids_[m]] = m;

        for (const auto& item : dev) {
            auto t = cindex.find(item.truth);
            if (t == cindex.end()) throw ArgumentError("truth " + item.truth.str() + " not in registry");
            Item d;
            d.truth = t->second;
            d.scores.assign(module_ids_.size(), std::vector<double>(n_countries_, 0.0));
            d.abstained.assign(module_ids_.size(), true);
            for (const auto& e : item.modules) {
                auto m = mindex.at(e.module_id);
                if (e.abstained) continue;
                d.abstained[m] = false;
                for (const auto& [c, s] : e.scores) {
                    auto it = cindex.find(c);
                    if (it == cindex.end()) throw ArgumentError("module " + e.module_id + " scores unknown country");
                    d.scores[m][it->second] = s;
                }
            }
            items_.push_back(std::move(d));
        }
    }

    const std::vector<std::string>& module_ids() const noexcept { return module_ids_; }

    /// Mean rank of truth; `weights` is indexed like module_ids().
    double mean_rank(const std::vector<double>& weights) const {
        std::vector<double> fused;
        std::vector<const std::vector<double>*> ptrs(module_ids_.size());
        double sum = 0.0;
        for (const auto& item : items_) {
            for (std::size_t m = 0; m < ptrs.size(); ++m) ptrs[m] = &item.scores[m];
            detail::pool_dense(ptrs, weights, item.abstained, n_countries_, fused);
            sum += static_cast<double>(detail::dense_rank(fused, item.truth));
        }
        return sum / static_cast<double>(items_.size());
    }

    double mean_rank(const WeightVector& w) const {
        std::vector<double> v(module_ids_.size(), 0.0);
        for (std::size_t m = 0; m < module_ids_.size(); ++m)
            if (w.contains(module_ids_[m])) v[m] = w.at(module_ids_[m]);
        return mean_rank(v);
    }

private:
    struct Item {
        std::vector<std::vector<double>> scores;
        std::vector<bool> abstained;
        std::size_t truth = 0;
    };

    std::size_t n_countries_ = 0;
    std::vector<std::string> module_ids_;
    std::vector<Item> items_;
};

/// Sets module `i` to `v` and scales the others proportionally so the vector still sums to 1.
inline std::vector<double> rescale_on_simplex(const std::vector<double>& base, std::size_t i, double v) {
    std::vector<double> out(base.size(), 0.0);
    out[i] = v;
    if (base.size() == 1) {
        out[i] = 1.0;
        return out;
    }
    const double rest = 1.0 - base[i];
    for (std::size_t j = 0; j < base.size(); ++j) {
        if (j == i) continue;
        out[j] = rest > 0.0 ? base[j] * (1.0 - v) / rest : (1.0 - v) / static_cast<double>(base.size() - 1);
    }
    return out;
}

inline OptimizeResult optimize_weights(const std::vector<DevItem>& dev, const CountryRegistry& registry,
                                       const OptimizeOptions& opts = {}) {
    DenseDevSet dense(dev, registry);
    const auto& ids = dense.module_ids();
    if (ids.empty()) throw ArgumentError("development set has no modules");

    std::vector<double> w(ids.size(), 1.0 / static_cast<double>(ids.size()));
    double best = dense.mean_rank(w);
    int sweeps = 0;
    if (ids.size() > 1) {
        for (; sweeps < opts.max_sweeps;) {
            ++sweeps;
            bool improved = false;
            for (std::size_t i = 0; i < ids.size(); ++i) {
                const auto base = w;
                for (int k = 0; k <= opts.grid_steps; ++k) {
                    auto cand = rescale_on_simplex(base, i, static_cast<double>(k) / opts.grid_steps);
                    double obj = dense.mean_rank(cand);
                    if (obj < best) {
                        best = obj;
                        w = std::move(cand);
                        improved = true;
                    }
                }
            }
            if (!improved) break;
        }
    }

    std::map<std::string, double> out;
    for (std::size_t m = 0; m < ids.size(); ++m) out[ids[m]] = w[m];
    // Not renormalized: the vector already sums to 1 within rounding, and the
    // reported objective must be exactly the one these weights achieve.
    return {WeightVector(std::move(out)), best, sweeps};
}

} // namespace countryguess
