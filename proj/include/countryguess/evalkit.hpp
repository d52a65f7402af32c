#pragma once

// Dataset manifests, rank metrics, the evaluation run and the cumulative
// module-removal ablation.
//
// Manifest: one JSON object per line, {"path": "...", "truth": "DE", "north_offset_deg": 12.5}
// with north_offset_deg optional. Relative paths resolve against the manifest's directory.
// Blank lines and lines starting with '#' are ignored.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "codec.hpp"
#include "digest.hpp"
#include "engine.hpp"
#include "fusion.hpp"
#include "json_io.hpp"
#include "knowledge.hpp"
#include "optimize.hpp"

namespace countryguess {

struct ManifestItem {
    fs::path path;
    CountryCode truth;
    std::optional<double> north_offset_deg;

    /// Stable reference used by the HTTP API: the file stem.
    std::string id() const { return path.stem().string(); }
};

struct DatasetManifest {
    std::vector<ManifestItem> items;
};

inline DatasetManifest parse_manifest(std::string_view text, const fs::path& base, const std::string& origin) {
    DatasetManifest m;
    std::set<fs::path> seen;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto where = origin + ":" + std::to_string(lineno);
        auto j = parse_json(line, where);
        ManifestItem item;
        fs::path p = require<std::string>(j, "path", where);
        item.path = p.is_absolute() ? p : base / p;
        auto truth = require<std::string>(j, "truth", where);
        if (!CountryCode::valid(truth)) throw ValidationError(where + ": invalid truth code \"" + truth + "\"");
        item.truth = CountryCode(truth);
        if (j.contains("north_offset_deg") && !j["north_offset_deg"].is_null())
            item.north_offset_deg = require<double>(j, "north_offset_deg", where);
        if (!seen.insert(item.path.lexically_normal()).second)
            throw ValidationError(where + ": duplicate path " + item.path.string());
        m.items.push_back(std::move(item));
    }
    return m;
}

inline DatasetManifest load_manifest(const fs::path& file) {
    return parse_manifest(read_file(file), file.parent_path(), file.string());
}

inline void validate_manifest(const DatasetManifest& m, const CountryRegistry& registry) {
    for (const auto& item : m.items)
        if (!registry.contains(item.truth))
            throw ValidationError("manifest truth " + item.truth.str() + " is not in the registry");
}

inline std::string manifest_line(const ManifestItem& item, const fs::path& base) {
    OrderedJson j;
    j["path"] = item.path.lexically_relative(base).generic_string();
    j["truth"] = item.truth.str();
    if (item.north_offset_deg) j["north_offset_deg"] = *item.north_offset_deg;
    return j.dump();
}

// ---------------------------------------------------------------------------
// Metrics

struct RankMetrics {
    std::size_t n = 0;
    double mean_rank = 0.0;
    double std_rank = 0.0;  // sample (n-1); 0 for a single rank
    double median_rank = 0.0;
    std::size_t top1_count = 0;
};

inline std::size_t rank_of_truth(const CountryRanking& ranking, const CountryCode& truth) {
    for (std::size_t i = 0; i < ranking.entries.size(); ++i)
        if (ranking.entries[i].country == truth) return i + 1;
    throw ArgumentError("truth " + truth.str() + " is not in the ranking");
}

inline RankMetrics summarize(const std::vector<std::size_t>& ranks) {
    if (ranks.empty()) throw ArgumentError("summarize: no ranks");
    RankMetrics m;
    m.n = ranks.size();
    double sum = 0.0;
    for (auto r : ranks) {
        if (r < 1) throw ArgumentError("summarize: ranks are 1-based");
        sum += static_cast<double>(r);
        if (r == 1) ++m.top1_count;
    }
    m.mean_rank = sum / static_cast<double>(m.n);
    if (m.n > 1) {
        double ss = 0.0;
        for (auto r : ranks) ss += (static_cast<double>(r) - m.mean_rank) * (static_cast<double>(r) - m.mean_rank);
        m.std_rank = std::sqrt(ss / static_cast<double>(m.n - 1));
    }
    auto sorted = ranks;
    std::sort(sorted.begin(), sorted.end());
    const auto h = m.n / 2;
    m.median_rank = m.n % 2 ? static_cast<double>(sorted[h]) : 0.5 * static_cast<double>(sorted[h - 1] + sorted[h]);
    return m;
}

inline OrderedJson to_json(const RankMetrics& m) {
    return OrderedJson{{"n", m.n},
                       {"mean_rank", m.mean_rank},
                       {"std_rank", m.std_rank},
                       {"median_rank", m.median_rank},
                       {"top1_count", m.top1_count}};
}

// ---------------------------------------------------------------------------
// Evaluation

/// Module outputs for one manifest item, or why the item could not be processed.
struct ItemEvidence {
    ManifestItem item;
    std::vector<EvidenceScores> modules;
    std::optional<std::string> error;
};

/// Runs the engine's modules over every item, `threads` items at a time.
inline std::vector<ItemEvidence> collect_evidence(const DatasetManifest& manifest, const Engine& engine,
                                                  unsigned threads = 0) {
    if (manifest.items.empty()) throw ArgumentError("empty manifest");
    validate_manifest(manifest, engine.registry());
    std::vector<ItemEvidence> out(manifest.items.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < out.size(); i = next++) {
            out[i].item = manifest.items[i];
            Panorama pano;
            try {
                pano = load_panorama(manifest.items[i].path, manifest.items[i].north_offset_deg);
            } catch (const Error& e) {
                // Unreadable or undecodable items are reported, not fatal.
                if (e.kind() != ErrorKind::decode && e.kind() != ErrorKind::shape && e.kind() != ErrorKind::not_found)
                    throw;
                out[i].error = e.what();
                continue;
            }
            out[i].modules = engine.analyze(pano, manifest.items[i].path);
        }
    };
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(out.size()));
    if (threads <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(threads);
        for (unsigned t = 0; t < threads; ++t)
            pool.emplace_back([&, t] {
                try {
                    work();
                } catch (...) {
                    errors[t] = std::current_exception();
                    next = out.size();
                }
            });
        for (auto& th : pool) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
    return out;
}

struct ItemReport {
    fs::path path;
    CountryCode truth;
    bool ok = false;
    std::size_t rank = 0;
    std::optional<CountryCode> top1;
    std::string report_digest;
    std::string error;
};

struct EvaluationReport {
    std::optional<RankMetrics> metrics;  // absent when every item failed
    std::vector<ItemReport> items;
    std::size_t failures = 0;
};

inline std::string report_digest(const GuessReport& g) { return sha256_hex(to_json(g).dump()); }

/// Fuses pre-computed module outputs with `weights`, restricted to `modules`.
inline EvaluationReport evaluate_evidence(const std::vector<ItemEvidence>& evidence, const WeightVector& weights,
                                          const CountryRegistry& registry, const std::set<std::string>& modules) {
    EvaluationReport rep;
    std::vector<std::size_t> ranks;
    for (const auto& ev : evidence) {
        ItemReport ir;
        ir.path = ev.item.path;
        ir.truth = ev.item.truth;
        if (ev.error) {
            ir.error = *ev.error;
            ++rep.failures;
            rep.items.push_back(std::move(ir));
            continue;
        }
        std::vector<EvidenceScores> kept;
        for (const auto& e : ev.modules)
            if (modules.count(e.module_id)) kept.push_back(e);
        auto g = fuse(kept, weights, registry);
        ir.ok = true;
        ir.rank = rank_of_truth(g.ranking, ev.item.truth);
        ir.top1 = g.ranking.top();
        ir.report_digest = report_digest(g);
        ranks.push_back(ir.rank);
        rep.items.push_back(std::move(ir));
    }
    if (!ranks.empty()) rep.metrics = summarize(ranks);
    return rep;
}

inline EvaluationReport run_evaluation(const DatasetManifest& manifest, const Engine& engine, unsigned threads = 0) {
    auto evidence = collect_evidence(manifest, engine, threads);
    std::set<std::string> all(engine.modules().begin(), engine.modules().end());
    return evaluate_evidence(evidence, engine.weights(), engine.registry(), all);
}

inline OrderedJson to_json(const EvaluationReport& r) {
    OrderedJson j;
    j["metrics"] = r.metrics ? to_json(*r.metrics) : OrderedJson(nullptr);
    j["failures"] = r.failures;
    auto items = OrderedJson::array();
    for (const auto& it : r.items) {
        OrderedJson i;
        i["path"] = it.path.generic_string();
        i["truth"] = it.truth.str();
        i["ok"] = it.ok;
        if (it.ok) {
            i["rank"] = it.rank;
            i["top1"] = it.top1->str();
            i["report_digest"] = it.report_digest;
        } else {
            i["error"] = it.error;
        }
        items.push_back(std::move(i));
    }
    j["items"] = std::move(items);
    return j;
}

// ---------------------------------------------------------------------------
// Ablation

struct AblationRow {
    std::string description;
    std::vector<std::string> modules;  // modules still active
    std::optional<RankMetrics> metrics;
};

/// Row 0 is the full system; row k drops removal_order[k-1] from row k-1.
/// Remaining weights are renormalized (uniform if they sum to zero).
inline std::vector<AblationRow> ablate_evidence(const std::vector<ItemEvidence>& evidence, const Engine& engine,
                                                const std::vector<std::string>& removal_order) {
    std::set<std::string> active(engine.modules().begin(), engine.modules().end());
    std::set<std::string> seen;
    for (const auto& id : removal_order) {
        if (!active.count(id)) throw ArgumentError("ablation: module \"" + id + "\" is not configured");
        if (!seen.insert(id).second) throw ArgumentError("ablation: module \"" + id + "\" removed twice");
    }

    std::vector<AblationRow> rows;
    std::set<std::string> removed;
    for (std::size_t k = 0; k <= removal_order.size(); ++k) {
        AblationRow row;
        if (k == 0) {
            row.description = "Full System";
        } else {
            removed.insert(removal_order[k - 1]);
            row.description = "as above minus " + removal_order[k - 1];
        }
        std::set<std::string> remaining;
        for (const auto& m : engine.modules())
            if (!removed.count(m)) {
                remaining.insert(m);
                row.modules.push_back(m);
            }
        auto weights = engine.weights().without(removed);
        row.metrics = evaluate_evidence(evidence, weights, engine.registry(), remaining).metrics;
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::vector<AblationRow> run_ablation(const DatasetManifest& manifest, const Engine& engine,
                                             const std::vector<std::string>& removal_order, unsigned threads = 0) {
    std::set<std::string> active(engine.modules().begin(), engine.modules().end());
    for (const auto& id : removal_order)
        if (!active.count(id)) throw ArgumentError("ablation: module \"" + id + "\" is not configured");
    return ablate_evidence(collect_evidence(manifest, engine, threads), engine, removal_order);
}

inline OrderedJson to_json(const std::vector<AblationRow>& rows) {
    auto a = OrderedJson::array();
    for (const auto& r : rows) {
        OrderedJson j;
        j["variant"] = r.description;
        j["modules"] = r.modules;
        j["metrics"] = r.metrics ? to_json(*r.metrics) : OrderedJson(nullptr);
        a.push_back(std::move(j));
    }
    return a;
}

inline std::string format_ablation_table(const std::vector<AblationRow>& rows) {
    std::ostringstream os;
    os << std::left << std::setw(34) << "System Version" << std::right << std::setw(12) << "Avg. Rank" << std::setw(10)
       << "Std" << std::setw(8) << "Median" << std::setw(6) << "Top1" << "  Modules\n";
    for (const auto& r : rows) {
        os << std::left << std::setw(34) << r.description << std::right << std::fixed << std::setprecision(3);
        if (r.metrics)
            os << std::setw(12) << r.metrics->mean_rank << std::setw(10) << r.metrics->std_rank << std::setw(8)
               << std::setprecision(1) << r.metrics->median_rank << std::setw(6) << r.metrics->top1_count;
        else
            os << std::setw(12) << "n/a" << std::setw(10) << "" << std::setw(8) << "" << std::setw(6) << "";
        os << "  ";
        for (std::size_t i = 0; i < r.modules.size(); ++i) os << (i ? "," : "") << r.modules[i];
        if (r.modules.empty()) os << "(none)";
        os << "\n";
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Weight optimization on a development manifest

inline std::vector<DevItem> dev_items(const std::vector<ItemEvidence>& evidence) {
    std::vector<DevItem> dev;
    for (const auto& ev : evidence)
        if (!ev.error) dev.push_back({ev.modules, ev.item.truth});
    return dev;
}

} // namespace countryguess
