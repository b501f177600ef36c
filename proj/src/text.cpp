#include "clincascade/text.hpp"

#include <cstdio>

namespace clincascade::text {

DecodedChar decode_at(std::string_view s, std::size_t pos) noexcept {
    const auto byte = [&](std::size_t i) { return static_cast<unsigned char>(s[i]); };
    const unsigned char lead = byte(pos);
    if (lead < 0x80) return {lead, 1};

    std::size_t len = 0;
    char32_t cp = 0;
    if ((lead & 0xE0) == 0xC0) {
        len = 2;
        cp = lead & 0x1F;
    } else if ((lead & 0xF0) == 0xE0) {
        len = 3;
        cp = lead & 0x0F;
    } else if ((lead & 0xF8) == 0xF0) {
        len = 4;
        cp = lead & 0x07;
    } else {
        return {kReplacementChar, 1};
    }
    if (pos + len > s.size()) return {kReplacementChar, 1};
    for (std::size_t i = 1; i < len; ++i) {
        const unsigned char c = byte(pos + i);
        if ((c & 0xC0) != 0x80) return {kReplacementChar, 1};
        cp = (cp << 6) | (c & 0x3F);
    }
    // Reject overlong forms, surrogates and out-of-range values.
    static constexpr char32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
        return {kReplacementChar, 1};
    }
    return {cp, len};
}

void append_utf8(std::string& out, char32_t cp) {
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

char32_t fold_case(char32_t cp) noexcept {
    if (cp >= U'A' && cp <= U'Z') return cp + 32;
    if (cp < 0xC0) return cp;
    if (cp <= 0xDE) return cp == 0xD7 ? cp : cp + 32;
    if (cp >= 0x100 && cp <= 0x137) return (cp % 2 == 0) ? cp + 1 : cp;
    if (cp >= 0x139 && cp <= 0x148) return (cp % 2 == 1) ? cp + 1 : cp;
    if (cp >= 0x14A && cp <= 0x177) return (cp % 2 == 0) ? cp + 1 : cp;
    if (cp == 0x178) return 0xFF;
    if (cp >= 0x179 && cp <= 0x17E) return (cp % 2 == 1) ? cp + 1 : cp;
    if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 32;
    if (cp >= 0x410 && cp <= 0x42F) return cp + 32;
    if (cp >= 0x400 && cp <= 0x40F) return cp + 80;
    return cp;
}

char32_t strip_accent(char32_t cp) noexcept {
    if (cp < 0xC0 || cp > 0xFF) return cp;
    switch (cp) {
        case 0xC0: case 0xC1: case 0xC2: case 0xC3: case 0xC4: case 0xC5: return U'A';
        case 0xC7: return U'C';
        case 0xC8: case 0xC9: case 0xCA: case 0xCB: return U'E';
        case 0xCC: case 0xCD: case 0xCE: case 0xCF: return U'I';
        case 0xD1: return U'N';
        case 0xD2: case 0xD3: case 0xD4: case 0xD5: case 0xD6: case 0xD8: return U'O';
        case 0xD9: case 0xDA: case 0xDB: case 0xDC: return U'U';
        case 0xDD: return U'Y';
        case 0xE0: case 0xE1: case 0xE2: case 0xE3: case 0xE4: case 0xE5: return U'a';
        case 0xE7: return U'c';
        case 0xE8: case 0xE9: case 0xEA: case 0xEB: return U'e';
        case 0xEC: case 0xED: case 0xEE: case 0xEF: return U'i';
        case 0xF1: return U'n';
        case 0xF2: case 0xF3: case 0xF4: case 0xF5: case 0xF6: case 0xF8: return U'o';
        case 0xF9: case 0xFA: case 0xFB: case 0xFC: return U'u';
        case 0xFD: case 0xFF: return U'y';
        default: return cp;
    }
}

bool is_word_char(char32_t cp) noexcept {
    if (cp < 0x80) {
        return (cp >= U'a' && cp <= U'z') || (cp >= U'A' && cp <= U'Z') || (cp >= U'0' && cp <= U'9');
    }
    if (cp < 0xC0) return cp == 0xAA || cp == 0xB5 || cp == 0xBA;
    if (cp <= 0xFF) return cp != 0xD7 && cp != 0xF7;
    if (cp >= 0x2000 && cp <= 0x2BFF) return false;  // punctuation, symbols, arrows, math
    if (cp >= 0x2E00 && cp <= 0x2E7F) return false;
    if (cp >= 0x3000 && cp <= 0x303F) return false;
    if (cp >= 0xD800 && cp <= 0xF8FF) return false;  // surrogates, private use
    if (cp >= 0xFE10 && cp <= 0xFE6F) return false;
    if (cp >= 0xFF00 && cp <= 0xFF0F) return false;
    if (cp >= 0xFF1A && cp <= 0xFF20) return false;
    if (cp >= 0xFF3B && cp <= 0xFF40) return false;
    if (cp >= 0xFF5B && cp <= 0xFF65) return false;
    if (cp >= 0xFFF0 && cp <= 0xFFFF) return false;
    if (cp >= 0x1F000 && cp <= 0x1FAFF) return false;  // emoji and pictographs
    return true;
}

bool is_decimal_digit(char32_t cp) noexcept {
    return (cp >= U'0' && cp <= U'9') || (cp >= 0x660 && cp <= 0x669) || (cp >= 0x6F0 && cp <= 0x6F9) ||
           (cp >= 0x966 && cp <= 0x96F) || (cp >= 0xFF10 && cp <= 0xFF19);
}

bool is_space(char32_t cp) noexcept {
    switch (cp) {
        case U' ': case U'\t': case U'\n': case U'\v': case U'\f': case U'\r':
        case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029: case 0x202F: case 0x205F:
        case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

std::string fold_case(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        const auto [cp, len] = decode_at(s, i);
        if (cp == kReplacementChar && len == 1 && static_cast<unsigned char>(s[i]) >= 0x80) {
            out.push_back(s[i]);  // keep malformed bytes verbatim
        } else {
            append_utf8(out, fold_case(cp));
        }
        i += len;
    }
    return out;
}

std::string fold_key(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        const auto [cp, len] = decode_at(s, i);
        i += len;
        if (cp >= 0x300 && cp <= 0x36F) continue;  // combining diacritics
        append_utf8(out, strip_accent(fold_case(cp)));
    }
    return out;
}

std::string trim(std::string_view s) {
    std::size_t begin = 0;
    std::size_t end = s.size();
    while (begin < end) {
        const auto d = decode_at(s, begin);
        if (!is_space(d.code_point)) break;
        begin += d.length;
    }
    while (end > begin) {
        // Walk back to the start of the last code point.
        std::size_t start = end - 1;
        while (start > begin && (static_cast<unsigned char>(s[start]) & 0xC0) == 0x80) --start;
        if (!is_space(decode_at(s, start).code_point)) break;
        end = start;
    }
    return std::string(s.substr(begin, end - begin));
}

std::string normalize_label(std::string_view s) {
    const std::string folded = fold_case(s);
    std::string out;
    bool pending_space = false;
    for (std::size_t i = 0; i < folded.size();) {
        const auto [cp, len] = decode_at(folded, i);
        if (is_space(cp)) {
            pending_space = !out.empty();
        } else {
            if (pending_space) out.push_back(' ');
            pending_space = false;
            out.append(folded, i, len);
        }
        i += len;
    }
    return out;
}

std::vector<WordSpan> word_spans(std::string_view s) {
    std::vector<WordSpan> spans;
    std::size_t i = 0;
    while (i < s.size()) {
        auto d = decode_at(s, i);
        if (!is_word_char(d.code_point)) {
            i += d.length;
            continue;
        }
        const std::size_t begin = i;
        while (i < s.size()) {
            d = decode_at(s, i);
            // Combining marks stay attached to the preceding letter.
            if (!is_word_char(d.code_point) && !(d.code_point >= 0x300 && d.code_point <= 0x36F)) break;
            i += d.length;
        }
        spans.push_back({begin, i});
    }
    return spans;
}

std::vector<std::string> split(std::string_view s, char delimiter) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(delimiter, start);
        parts.emplace_back(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis) noexcept {
    std::uint64_t h = basis;
    for (const char c : data) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

}  // namespace clincascade::text
