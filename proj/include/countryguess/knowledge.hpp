#pragma once

// Per-country fact sheets, boundary latitude extents and the place-name
// gazetteer consulted by the evidence modules.

#include <algorithm>
#include <array>
#include <compare>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "json_io.hpp"
#include "utf8.hpp"

namespace countryguess {

/// ISO-3166-1 alpha-2 code: exactly two characters in A-Z.
class CountryCode {
public:
    CountryCode() = default;

    explicit CountryCode(std::string_view code) {
        if (!valid(code)) throw ValidationError("invalid country code \"" + std::string(code) + "\"");
        value_ = std::string(code);
    }

    static bool valid(std::string_view code) {
        return code.size() == 2 && std::all_of(code.begin(), code.end(), [](char c) { return c >= 'A' && c <= 'Z'; });
    }

    const std::string& str() const noexcept { return value_; }
    bool empty() const noexcept { return value_.empty(); }

    auto operator<=>(const CountryCode&) const = default;
    bool operator==(const CountryCode&) const = default;

private:
    std::string value_;
};

inline void to_json(Json& j, const CountryCode& c) { j = c.str(); }
inline void from_json(const Json& j, CountryCode& c) { c = CountryCode(j.get<std::string>()); }

enum class PlateColor { white, yellow, blue, red, green, black };

inline constexpr std::array<PlateColor, 6> plate_palette = {
    PlateColor::white, PlateColor::yellow, PlateColor::blue, PlateColor::red, PlateColor::green, PlateColor::black,
};

inline const char* to_string(PlateColor c) {
    switch (c) {
    case PlateColor::white: return "white";
    case PlateColor::yellow: return "yellow";
    case PlateColor::blue: return "blue";
    case PlateColor::red: return "red";
    case PlateColor::green: return "green";
    case PlateColor::black: return "black";
    }
    return "?";
}

inline std::optional<PlateColor> parse_plate_color(std::string_view s) {
    for (auto c : plate_palette)
        if (s == to_string(c)) return c;
    return std::nullopt;
}

enum class HemisphereClass { northern, southern, tropic };

inline const char* to_string(HemisphereClass h) {
    switch (h) {
    case HemisphereClass::northern: return "Northern";
    case HemisphereClass::southern: return "Southern";
    case HemisphereClass::tropic: return "Tropic";
    }
    return "?";
}

/// Approximate axial tilt; latitudes within this band see the sun on both sides.
inline constexpr double tropic_latitude_deg = 23.4;

struct LanguageShare {
    std::string code;  // ISO-639-1, lowercase
    double weight = 0.0;

    bool operator==(const LanguageShare&) const = default;
};

struct PlateColors {
    std::vector<PlateColor> front;
    std::vector<PlateColor> rear;

    bool operator==(const PlateColors&) const = default;
};

struct FactSheet {
    CountryCode code;
    std::string display_name;
    std::vector<LanguageShare> languages;
    PlateColors plate_colors;
    std::vector<std::string> place_names;
    double lat_min = 0.0;
    double lat_max = 0.0;

    /// Weight of `language` in this country, 0 if not spoken.
    double language_weight(std::string_view language) const {
        for (const auto& l : languages)
            if (l.code == language) return l.weight;
        return 0.0;
    }

    bool operator==(const FactSheet&) const = default;
};

inline HemisphereClass hemisphere_class(const FactSheet& sheet) {
    if (sheet.lat_min <= tropic_latitude_deg && sheet.lat_max >= -tropic_latitude_deg) return HemisphereClass::tropic;
    if (sheet.lat_min > tropic_latitude_deg) return HemisphereClass::northern;
    return HemisphereClass::southern;
}

inline std::string normalize_place(std::string_view token) { return utf8::normalize_name(token); }

inline constexpr std::size_t min_place_length = 3;

class CountryRegistry {
public:
    CountryRegistry() = default;

    /// Builds a registry from complete sheets. Throws ValidationError on duplicate codes.
    static CountryRegistry from_sheets(std::vector<FactSheet> sheets) {
        CountryRegistry reg;
        for (auto& sheet : sheets) {
            auto code = sheet.code;
            if (!reg.entries_.emplace(code, std::move(sheet)).second)
                throw ValidationError("duplicate country code " + code.str());
        }
        for (const auto& [code, sheet] : reg.entries_) {
            for (const auto& name : sheet.place_names) {
                auto key = normalize_place(name);
                if (utf8::length(key) < min_place_length) continue;
                reg.gazetteer_[key].insert(code);
            }
        }
        return reg;
    }

    const std::map<CountryCode, FactSheet>& entries() const noexcept { return entries_; }
    const std::map<std::string, std::set<CountryCode>>& gazetteer() const noexcept { return gazetteer_; }

    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    bool contains(const CountryCode& c) const { return entries_.count(c) != 0; }

    const FactSheet& at(const CountryCode& c) const {
        auto it = entries_.find(c);
        if (it == entries_.end()) throw NotFoundError("unknown country " + c.str());
        return it->second;
    }

    /// All codes in ascending order.
    std::vector<CountryCode> codes() const {
        std::vector<CountryCode> out;
        out.reserve(entries_.size());
        for (const auto& [code, _] : entries_) out.push_back(code);
        return out;
    }

    /// Gazetteer hit set for a raw token; empty below the length gate.
    std::set<CountryCode> lookup_place(std::string_view token) const {
        auto key = normalize_place(token);
        if (utf8::length(key) < min_place_length) return {};
        auto it = gazetteer_.find(key);
        return it == gazetteer_.end() ? std::set<CountryCode>{} : it->second;
    }

private:
    std::map<CountryCode, FactSheet> entries_;
    std::map<std::string, std::set<CountryCode>> gazetteer_;
};

inline std::set<CountryCode> lookup_place(const CountryRegistry& registry, std::string_view token) {
    return registry.lookup_place(token);
}

// ---------------------------------------------------------------------------
// Loading

/// Parses one fact-sheet document. Latitudes are left at 0 for the boundary pass.
inline FactSheet parse_fact_sheet(const Json& doc, const std::string& origin) {
    if (!doc.is_object()) throw ParseError(origin + ": fact sheet must be an object");
    FactSheet sheet;
    auto code = require<std::string>(doc, "code", origin);
    if (!CountryCode::valid(code)) throw ValidationError(origin + ": invalid country code \"" + code + "\"");
    sheet.code = CountryCode(code);
    sheet.display_name = require<std::string>(doc, "name", origin);

    auto langs = require<Json>(doc, "languages", origin);
    if (!langs.is_array() || langs.empty()) throw ValidationError(origin + ": languages must be a non-empty list");
    double total = 0.0;
    for (const auto& l : langs) {
        LanguageShare share;
        share.code = require<std::string>(l, "code", origin);
        share.weight = require<double>(l, "weight", origin);
        bool code_ok = share.code.size() == 2 &&
                       std::all_of(share.code.begin(), share.code.end(), [](char c) { return c >= 'a' && c <= 'z'; });
        if (!code_ok) throw ValidationError(origin + ": invalid language code \"" + share.code + "\"");
        if (!(share.weight > 0.0 && share.weight <= 1.0))
            throw ValidationError(origin + ": language weight for " + share.code + " outside (0,1]");
        total += share.weight;
        sheet.languages.push_back(std::move(share));
    }
    if (total > 1.000001) throw ValidationError(origin + ": language weights sum to more than 1");

    auto plates = require<Json>(doc, "plate_colors", origin);
    auto read_colors = [&](const char* key) {
        std::vector<PlateColor> out;
        for (const auto& name : require<std::vector<std::string>>(plates, key, origin)) {
            auto c = parse_plate_color(name);
            if (!c) throw ValidationError(origin + ": plate color \"" + name + "\" is not in the palette");
            out.push_back(*c);
        }
        return out;
    };
    sheet.plate_colors.front = read_colors("front");
    sheet.plate_colors.rear = read_colors("rear");

    if (doc.contains("place_names")) sheet.place_names = require<std::vector<std::string>>(doc, "place_names", origin);
    return sheet;
}

struct LatitudeExtent {
    double min = std::numeric_limits<double>::infinity();
    double max = -std::numeric_limits<double>::infinity();
};

/// Latitude extremes per iso_a2 over every polygon vertex of a GeoJSON FeatureCollection.
/// Features whose iso_a2 is not a valid code (Natural Earth uses "-99") are skipped.
inline std::map<CountryCode, LatitudeExtent> boundary_latitudes(const Json& collection, const std::string& origin) {
    if (!collection.is_object() || collection.value("type", "") != "FeatureCollection" ||
        !collection.contains("features") || !collection["features"].is_array())
        throw ParseError(origin + ": expected a GeoJSON FeatureCollection");

    std::map<CountryCode, LatitudeExtent> out;
    for (const auto& feature : collection["features"]) {
        const auto& props = feature.value("properties", Json::object());
        if (!props.is_object() || !props.contains("iso_a2") || !props["iso_a2"].is_string()) continue;
        auto iso = props["iso_a2"].get<std::string>();
        if (!CountryCode::valid(iso)) continue;
        if (!feature.contains("geometry") || !feature["geometry"].is_object())
            throw ParseError(origin + ": feature " + iso + " has no geometry");
        const auto& geom = feature["geometry"];
        auto type = geom.value("type", "");
        const auto& coords = geom.value("coordinates", Json::array());

        auto& extent = out[CountryCode(iso)];
        auto visit_ring = [&](const Json& ring) {
            for (const auto& pt : ring) {
                if (!pt.is_array() || pt.size() < 2 || !pt[1].is_number())
                    throw ParseError(origin + ": malformed coordinate in " + iso);
                double lat = pt[1].get<double>();
                extent.min = std::min(extent.min, lat);
                extent.max = std::max(extent.max, lat);
            }
        };
        if (type == "Polygon") {
            for (const auto& ring : coords) visit_ring(ring);
        } else if (type == "MultiPolygon") {
            for (const auto& poly : coords)
                for (const auto& ring : poly) visit_ring(ring);
        } else {
            throw ParseError(origin + ": unsupported geometry type \"" + type + "\" for " + iso);
        }
    }
    for (const auto& [code, ext] : out)
        if (ext.min > ext.max) throw ParseError(origin + ": feature " + code.str() + " has no vertices");
    return out;
}

/// Combines parsed sheets with boundary extents.
inline CountryRegistry assemble_registry(std::vector<FactSheet> sheets, const std::map<CountryCode, LatitudeExtent>& bounds) {
    std::set<CountryCode> seen;
    for (auto& sheet : sheets) {
        if (!seen.insert(sheet.code).second) throw ValidationError("duplicate country code " + sheet.code.str());
        auto it = bounds.find(sheet.code);
        if (it == bounds.end()) throw ValidationError("no boundary polygon for country " + sheet.code.str());
        sheet.lat_min = it->second.min;
        sheet.lat_max = it->second.max;
        if (sheet.lat_min < -90.0 || sheet.lat_max > 90.0)
            throw ValidationError("latitude out of range for country " + sheet.code.str());
    }
    return CountryRegistry::from_sheets(std::move(sheets));
}

/// Loads every *.json file under `factsheet_dir` (sorted by path) plus the boundary document.
inline CountryRegistry load_registry(const fs::path& factsheet_dir, const fs::path& boundaries_path) {
    if (!fs::is_directory(factsheet_dir)) throw NotFoundError("fact sheet directory not found: " + factsheet_dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(factsheet_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    std::vector<FactSheet> sheets;
    for (const auto& f : files) sheets.push_back(parse_fact_sheet(read_json(f), f.string()));
    auto bounds = boundary_latitudes(read_json(boundaries_path), boundaries_path.string());
    return assemble_registry(std::move(sheets), bounds);
}

// ---------------------------------------------------------------------------
// Registry cache: {"format","version","countries":[...],"gazetteer":{...}}.
// Field order is fixed; countries ascend by code, gazetteer keys ascend bytewise.

inline constexpr int registry_cache_version = 1;

inline OrderedJson registry_to_json(const CountryRegistry& reg) {
    OrderedJson doc;
    doc["format"] = "countryguess.registry";
    doc["version"] = registry_cache_version;
    auto countries = OrderedJson::array();
    for (const auto& [code, s] : reg.entries()) {
        OrderedJson c;
        c["code"] = code.str();
        c["name"] = s.display_name;
        auto langs = OrderedJson::array();
        for (const auto& l : s.languages) langs.push_back(OrderedJson{{"code", l.code}, {"weight", l.weight}});
        c["languages"] = langs;
        auto colors = [](const std::vector<PlateColor>& v) {
            auto a = OrderedJson::array();
            for (auto p : v) a.push_back(to_string(p));
            return a;
        };
        c["plate_colors"] = OrderedJson{{"front", colors(s.plate_colors.front)}, {"rear", colors(s.plate_colors.rear)}};
        c["place_names"] = s.place_names;
        c["lat_min"] = s.lat_min;
        c["lat_max"] = s.lat_max;
        countries.push_back(std::move(c));
    }
    doc["countries"] = std::move(countries);
    OrderedJson gaz = OrderedJson::object();
    for (const auto& [key, codes] : reg.gazetteer()) {
        auto a = OrderedJson::array();
        for (const auto& c : codes) a.push_back(c.str());
        gaz[key] = std::move(a);
    }
    doc["gazetteer"] = std::move(gaz);
    return doc;
}

inline std::string serialize_registry(const CountryRegistry& reg) { return registry_to_json(reg).dump(2) + "\n"; }

inline CountryRegistry registry_from_cache(const Json& doc, const std::string& origin) {
    if (!doc.is_object() || doc.value("format", "") != "countryguess.registry")
        throw ParseError(origin + ": not a registry cache");
    if (doc.value("version", 0) != registry_cache_version)
        throw ParseError(origin + ": unsupported registry cache version");
    std::vector<FactSheet> sheets;
    for (const auto& c : require<Json>(doc, "countries", origin)) {
        auto sheet = parse_fact_sheet(c, origin);
        sheet.lat_min = require<double>(c, "lat_min", origin);
        sheet.lat_max = require<double>(c, "lat_max", origin);
        if (sheet.lat_min > sheet.lat_max) throw ValidationError(origin + ": lat_min > lat_max for " + sheet.code.str());
        sheets.push_back(std::move(sheet));
    }
    return CountryRegistry::from_sheets(std::move(sheets));
}

} // namespace countryguess
