#pragma once

// Shared fixtures and independent oracles for the test suites. Oracles are
// deliberately written the long way and never call the code under test.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "countryguess/countryguess.hpp"

namespace testsupport {

namespace cg = countryguess;
namespace fs = std::filesystem;

/// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "t") {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("cgtest-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& s) const { return path_ / s; }

private:
    fs::path path_;
};

inline cg::FactSheet sheet(const std::string& code, double lat_min, double lat_max,
                           std::vector<cg::LanguageShare> langs = {{"en", 1.0}}, std::vector<std::string> places = {},
                           std::vector<cg::PlateColor> front = {cg::PlateColor::white},
                           std::vector<cg::PlateColor> rear = {cg::PlateColor::white}) {
    cg::FactSheet s;
    s.code = cg::CountryCode(code);
    s.display_name = "Country " + code;
    s.languages = std::move(langs);
    s.place_names = std::move(places);
    s.plate_colors = {std::move(front), std::move(rear)};
    s.lat_min = lat_min;
    s.lat_max = lat_max;
    return s;
}

/// Registry of `n` countries named AA, AB, ... all in the northern band.
inline cg::CountryRegistry letter_registry(std::size_t n) {
    std::vector<cg::FactSheet> sheets;
    for (std::size_t i = 0; i < n; ++i) {
        std::string code{static_cast<char>('A' + i / 26), static_cast<char>('A' + i % 26)};
        sheets.push_back(sheet(code, 40, 50));
    }
    return cg::CountryRegistry::from_sheets(std::move(sheets));
}

inline cg::RgbImage random_image(int w, int h, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> d(0, 255);
    cg::RgbImage img(w, h);
    for (auto& p : img.pixels()) p = {static_cast<std::uint8_t>(d(rng)), static_cast<std::uint8_t>(d(rng)), static_cast<std::uint8_t>(d(rng))};
    return img;
}

/// Random distribution over `codes`, with some exact zeros.
inline std::map<cg::CountryCode, double> random_distribution(const std::vector<cg::CountryCode>& codes,
                                                             std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::map<cg::CountryCode, double> raw;
    double total = 0.0;
    for (const auto& c : codes) {
        double v = u(rng) < 0.2 ? 0.0 : u(rng);
        raw[c] = v;
        total += v;
    }
    if (total == 0.0) raw[codes.front()] = total = 1.0;
    for (auto& [_, v] : raw) v /= total;
    return raw;
}

// --- oracles ---------------------------------------------------------------

/// Histogram by direct counting, one channel at a time.
inline std::vector<std::vector<double>> oracle_histogram(const cg::RgbImage& img) {
    std::vector<std::vector<double>> h(3, std::vector<double>(256, 0.0));
    const double n = static_cast<double>(img.width()) * img.height();
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            const auto& p = img.at(x, y);
            h[0][p.r] += 1.0;
            h[1][p.g] += 1.0;
            h[2][p.b] += 1.0;
        }
    for (auto& ch : h)
        for (auto& v : ch) v /= n;
    return h;
}

inline double oracle_distance(const cg::RgbHistogram& a, const cg::RgbHistogram& b) {
    double s = 0.0;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 256; ++i) s += std::fabs(a.channels[c][i] - b.channels[c][i]);
    return s / 768.0;
}

struct OracleStats {
    double mean, std, median;
    std::size_t top1;
};

/// Two-pass statistics with long double accumulation.
inline OracleStats oracle_stats(std::vector<std::size_t> ranks) {
    long double sum = 0;
    for (auto r : ranks) sum += r;
    const long double mean = sum / ranks.size();
    long double ss = 0;
    for (auto r : ranks) ss += (r - mean) * (r - mean);
    const double sd = ranks.size() > 1 ? static_cast<double>(std::sqrt(ss / (ranks.size() - 1))) : 0.0;
    std::sort(ranks.begin(), ranks.end());
    const auto n = ranks.size();
    const double med = n % 2 == 1 ? static_cast<double>(ranks[(n - 1) / 2])
                                  : (static_cast<double>(ranks[n / 2 - 1]) + static_cast<double>(ranks[n / 2])) / 2.0;
    return {static_cast<double>(mean), sd, med, static_cast<std::size_t>(std::count(ranks.begin(), ranks.end(), 1u))};
}

/// Brute-force linear pool: drop abstentions, renormalize weights, sum, rank by (score desc, code asc).
inline std::vector<std::pair<cg::CountryCode, double>> oracle_fuse(const std::vector<cg::EvidenceScores>& mods,
                                                                   const std::map<std::string, double>& w,
                                                                   const std::vector<cg::CountryCode>& codes) {
    double active = 0.0;
    for (const auto& m : mods)
        if (!m.abstained) active += w.at(m.module_id);
    std::vector<std::pair<cg::CountryCode, double>> out;
    for (const auto& c : codes) {
        double s = 0.0;
        if (active > 0.0) {
            for (const auto& m : mods) {
                if (m.abstained) continue;
                auto it = m.scores.find(c);
                s += (w.at(m.module_id) / active) * (it == m.scores.end() ? 0.0 : it->second);
            }
        } else {
            s = 1.0 / static_cast<double>(codes.size());
        }
        out.push_back({c, s});
    }
    // Insertion sort: code order already ascending, so equal scores keep it.
    for (std::size_t i = 1; i < out.size(); ++i)
        for (std::size_t j = i; j > 0 && out[j].second > out[j - 1].second; --j) std::swap(out[j], out[j - 1]);
    return out;
}

/// Mean rank of truth under weights, computed straight from score maps.
inline double oracle_mean_rank(const std::vector<cg::DevItem>& dev, const std::map<std::string, double>& w,
                               const std::vector<cg::CountryCode>& codes) {
    double total = 0.0;
    for (const auto& item : dev) {
        auto ranked = oracle_fuse(item.modules, w, codes);
        for (std::size_t i = 0; i < ranked.size(); ++i)
            if (ranked[i].first == item.truth) total += static_cast<double>(i + 1);
    }
    return total / static_cast<double>(dev.size());
}

/// Writes `body` to an executable shell script.
inline fs::path write_script(const fs::path& path, const std::string& body) {
    cg::write_file(path, "#!/bin/sh\n" + body);
    fs::permissions(path, fs::perms::owner_all);
    return path;
}

} // namespace testsupport
