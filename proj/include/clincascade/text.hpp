#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

/// UTF-8 helpers shared by the tokenizers, the anonymizer and label handling.
///
/// Coverage is tuned for Spanish clinical text: case folding and accent
/// stripping handle Latin-1, Latin Extended-A, Greek and Cyrillic; anything
/// else passes through unchanged.
namespace clincascade::text {

inline constexpr char32_t kReplacementChar = 0xFFFD;

struct DecodedChar {
    char32_t code_point;
    std::size_t length;  // bytes consumed, always >= 1
};

/// Decodes the code point starting at `pos`; malformed input yields U+FFFD
/// and consumes one byte.
DecodedChar decode_at(std::string_view s, std::size_t pos) noexcept;
void append_utf8(std::string& out, char32_t cp);

char32_t fold_case(char32_t cp) noexcept;
char32_t strip_accent(char32_t cp) noexcept;

/// Letters and digits of any script; punctuation, symbols, whitespace and
/// control characters are boundaries.
bool is_word_char(char32_t cp) noexcept;
bool is_decimal_digit(char32_t cp) noexcept;
bool is_space(char32_t cp) noexcept;

std::string fold_case(std::string_view s);
/// Case-folds and removes diacritics: "García" -> "garcia".
std::string fold_key(std::string_view s);
std::string trim(std::string_view s);
/// Case-folds, trims and collapses internal whitespace runs to one space.
std::string normalize_label(std::string_view s);

struct WordSpan {
    std::size_t begin;  // byte offsets into the source string
    std::size_t end;
};

std::vector<WordSpan> word_spans(std::string_view s);

std::vector<std::string> split(std::string_view s, char delimiter);

/// 64-bit FNV-1a; used for seed derivation and artifact fingerprints.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept;
std::string hex64(std::uint64_t value);

}  // namespace clincascade::text
