#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

/// Plain-text encoding of relation values appended to a report:
///
///     <report text> ⟐ type=neoplastic process ⟐ site=skin
///
/// The separator (U+27D0) is a symbol, so the word tokenizer never emits it
/// from clinical text. The featurizer turns each segment into one atomic
/// `name=value` feature, which keeps the information position-independent.
namespace clincascade::augment {

inline constexpr std::string_view kSeparator = "⟐";

using Segment = std::pair<std::string, std::string>;

/// Appends one ` ⟐ name=value` segment per entry, in order. With no entries
/// the text is returned unchanged; otherwise stray separators inside `text`
/// are replaced by spaces so the segments parse back exactly.
std::string append(std::string_view text, const std::vector<Segment>& segments);

struct Parsed {
    std::string base;
    std::vector<Segment> segments;
};

/// Inverse of append.
Parsed parse(std::string_view text);

}  // namespace clincascade::augment
