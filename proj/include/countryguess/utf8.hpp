#pragma once

// Minimal UTF-8 helpers: decoding, simple case folding for Latin, Greek and
// Cyrillic, diacritic folding for Latin, and a letter predicate. Enough for
// gazetteer keys, caption tokens and trigram language profiles.

#include <string>
#include <string_view>
#include <vector>

namespace countryguess::utf8 {

inline constexpr char32_t replacement = 0xFFFD;

/// Decodes UTF-8. Invalid sequences become U+FFFD.
inline std::u32string decode(std::string_view s) {
    std::u32string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        auto b0 = static_cast<unsigned char>(s[i]);
        int len = 0;
        char32_t cp = 0;
        if (b0 < 0x80) {
            cp = b0;
            len = 1;
        } else if ((b0 & 0xE0) == 0xC0) {
            cp = b0 & 0x1F;
            len = 2;
        } else if ((b0 & 0xF0) == 0xE0) {
            cp = b0 & 0x0F;
            len = 3;
        } else if ((b0 & 0xF8) == 0xF0) {
            cp = b0 & 0x07;
            len = 4;
        } else {
            out.push_back(replacement);
            ++i;
            continue;
        }
        if (i + len > s.size()) {
            out.push_back(replacement);
            break;
        }
        bool ok = true;
        for (int k = 1; k < len; ++k) {
            auto b = static_cast<unsigned char>(s[i + k]);
            if ((b & 0xC0) != 0x80) {
                ok = false;
                break;
            }
            cp = (cp << 6) | (b & 0x3F);
        }
        if (!ok) {
            out.push_back(replacement);
            ++i;
            continue;
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

inline void append(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

inline std::string encode(std::u32string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char32_t cp : s) append(out, cp);
    return out;
}

inline char32_t to_lower(char32_t c) {
    if (c >= U'A' && c <= U'Z') return c + 32;
    if (c < 0x80) return c;
    if (c >= 0x00C0 && c <= 0x00DE && c != 0x00D7) return c + 32;
    if (c >= 0x0100 && c <= 0x017F) {
        if (c == 0x0130) return U'i';
        if (c == 0x0178) return 0x00FF;
        bool even_upper = (c <= 0x012F) || (c >= 0x0132 && c <= 0x0137) || (c >= 0x014A && c <= 0x0177);
        bool odd_upper = (c >= 0x0139 && c <= 0x0148) || (c >= 0x0179 && c <= 0x017E);
        if (even_upper && c % 2 == 0) return c + 1;
        if (odd_upper && c % 2 == 1) return c + 1;
        return c;
    }
    if (c >= 0x0218 && c <= 0x021B && c % 2 == 0) return c + 1;
    if (c >= 0x0391 && c <= 0x03A9 && c != 0x03A2) return c + 32;
    if (c == 0x0386) return 0x03AC;
    if (c >= 0x0388 && c <= 0x038A) return c + 37;
    if (c == 0x038C) return 0x03CC;
    if (c == 0x038E || c == 0x038F) return c + 63;
    if (c >= 0x0410 && c <= 0x042F) return c + 32;
    if (c >= 0x0400 && c <= 0x040F) return c + 80;
    if (((c >= 0x0460 && c <= 0x0481) || (c >= 0x048A && c <= 0x04BF)) && c % 2 == 0) return c + 1;
    return c;
}

inline bool is_combining_mark(char32_t c) { return c >= 0x0300 && c <= 0x036F; }

/// Letters of the scripts this library handles, plus anything above the
/// Cyrillic block that is not punctuation or a symbol.
inline bool is_letter(char32_t c) {
    if ((c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z')) return true;
    if (c < 0xC0) return false;
    if (c == 0xD7 || c == 0xF7) return false;
    if (c <= 0x024F) return true;
    if (is_combining_mark(c)) return false;
    if (c >= 0x0370 && c <= 0x03FF) return c != 0x037E && c != 0x0387 && c != 0x0375;
    if (c >= 0x0400 && c <= 0x052F) return !(c >= 0x0482 && c <= 0x0489);
    if (c >= 0x2000 && c <= 0x2BFF) return false;  // punctuation, symbols, arrows, shapes
    if (c >= 0x3000 && c <= 0x303F) return false;
    if (c >= 0xFE30 && c <= 0xFE4F) return false;
    if (c >= 0xFF00 && c <= 0xFF20) return false;
    if (c == replacement) return false;
    return c >= 0x0250;
}

inline bool is_space(char32_t c) {
    return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' || c == U'\v' || c == 0xA0 ||
           (c >= 0x2000 && c <= 0x200A) || c == 0x3000;
}

/// ASCII spelling of a lowercase Latin letter with diacritics; empty view if none.
inline std::u32string_view fold_diacritic(char32_t c) {
    static constexpr std::u32string_view latin1[] = {
        U"a", U"a", U"a", U"a", U"a", U"a", U"ae", U"c",  // E0-E7
        U"e", U"e", U"e", U"e", U"i", U"i", U"i", U"i",   // E8-EF
        U"d", U"n", U"o", U"o", U"o", U"o", U"o", U"",    // F0-F7
        U"o", U"u", U"u", U"u", U"u", U"y", U"th", U"y",  // F8-FF
    };
    if (c == 0xDF) return U"ss";
    if (c >= 0xE0 && c <= 0xFF) return latin1[c - 0xE0];
    struct Range {
        char32_t lo, hi;
        std::u32string_view base;
    };
    static constexpr Range ext_a[] = {
        {0x0100, 0x0105, U"a"}, {0x0106, 0x010D, U"c"}, {0x010E, 0x0111, U"d"}, {0x0112, 0x011B, U"e"},
        {0x011C, 0x0123, U"g"}, {0x0124, 0x0127, U"h"}, {0x0128, 0x0131, U"i"}, {0x0132, 0x0133, U"ij"},
        {0x0134, 0x0135, U"j"}, {0x0136, 0x0138, U"k"}, {0x0139, 0x0142, U"l"}, {0x0143, 0x014B, U"n"},
        {0x014C, 0x0151, U"o"}, {0x0152, 0x0153, U"oe"}, {0x0154, 0x0159, U"r"}, {0x015A, 0x0161, U"s"},
        {0x0162, 0x0167, U"t"}, {0x0168, 0x0173, U"u"}, {0x0174, 0x0175, U"w"}, {0x0176, 0x0178, U"y"},
        {0x0179, 0x017E, U"z"}, {0x017F, 0x017F, U"s"}, {0x0218, 0x0219, U"s"}, {0x021A, 0x021B, U"t"},
    };
    for (const auto& r : ext_a)
        if (c >= r.lo && c <= r.hi) return r.base;
    return {};
}

inline std::string lower(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char32_t c : decode(s)) append(out, to_lower(c));
    return out;
}

/// Lowercase, strip diacritics, collapse internal whitespace runs, trim.
inline std::string normalize_name(std::string_view s) {
    std::u32string folded;
    bool pending_space = false;
    for (char32_t c : decode(s)) {
        if (is_space(c)) {
            pending_space = !folded.empty();
            continue;
        }
        if (is_combining_mark(c)) continue;
        c = to_lower(c);
        if (pending_space) {
            folded.push_back(U' ');
            pending_space = false;
        }
        auto base = fold_diacritic(c);
        if (!base.empty())
            folded.append(base);
        else
            folded.push_back(c);
    }
    return encode(folded);
}

inline std::size_t length(std::string_view s) { return decode(s).size(); }

/// Maximal runs of letters, lowercased.
inline std::vector<std::string> letter_words(std::string_view s) {
    std::vector<std::string> words;
    std::string current;
    for (char32_t c : decode(s)) {
        if (is_letter(c)) {
            append(current, to_lower(c));
        } else if (is_combining_mark(c) && !current.empty()) {
            append(current, c);
        } else if (!current.empty()) {
            words.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) words.push_back(std::move(current));
    return words;
}

} // namespace countryguess::utf8
