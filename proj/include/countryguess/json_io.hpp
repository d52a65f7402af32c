#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"

namespace countryguess {

using Json = nlohmann::json;
/// Insertion-ordered JSON, used where the serialized field order is part of a file format.
using OrderedJson = nlohmann::ordered_json;

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::vector<unsigned char> read_bytes(const fs::path& path) {
    auto s = read_file(path);
    return {s.begin(), s.end()};
}

inline void write_file(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ArgumentError("cannot write " + path.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw ArgumentError("short write to " + path.string());
    }
    fs::rename(tmp, path);
}

inline Json parse_json(std::string_view text, const std::string& origin) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ParseError(origin + ": " + e.what());
    }
}

inline Json read_json(const fs::path& path) { return parse_json(read_file(path), path.string()); }

template <typename J>
void write_json(const fs::path& path, const J& doc) {
    write_file(path, doc.dump(2) + "\n");
}

/// Reads `key` from `obj` as T, reporting the origin on failure.
template <typename T>
T require(const Json& obj, const char* key, const std::string& origin) {
    if (!obj.is_object() || !obj.contains(key)) throw ParseError(origin + ": missing field \"" + key + "\"");
    try {
        return obj.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw ParseError(origin + ": field \"" + key + "\": " + e.what());
    }
}

} // namespace countryguess
