#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "clincascade/corpus.hpp"

namespace clincascade::anonymizer {

/// Lookup list of surface forms. Entries are stored case-folded and without
/// diacritics, so matching ignores both.
struct Gazetteer {
    std::string name;
    std::set<std::string, std::less<>> entries;
    std::string source;

    bool contains(std::string_view folded) const { return entries.contains(folded); }
    /// Longest entry in tokens, for longest-match-first scanning.
    std::size_t max_tokens() const;
};

Gazetteer parse_gazetteer(std::string name, std::string_view content, std::string source = {});
/// One entry per line; lines starting with '#' are ignored.
Gazetteer load_gazetteer(const std::filesystem::path& path, std::string name, std::string source = {});

struct MaskingRuleSet {
    std::vector<Gazetteer> name_gazetteers;
    /// Common words that are never masked by gazetteer rules even when they
    /// double as names ("rosa", "pilar").
    Gazetteer frequent_words{"frequent_words", {}, {}};
    /// Domain terms that are never masked by any rule.
    std::set<std::string, std::less<>> exceptions;
    std::vector<std::string> title_patterns{"dr", "dra", "doctor", "doctora"};
    std::string mask_token = "[Entity]";

    bool is_exception(std::string_view folded) const { return exceptions.contains(folded); }
    bool is_suppressed(std::string_view folded) const;
    bool is_title(std::string_view folded) const;
    /// First name gazetteer containing the folded key, or nullptr.
    const Gazetteer* match(std::string_view folded) const;

    void validate() const;
};

/// Reads a TOML rule file. Relative paths inside it resolve against the
/// file's directory.
///
///     mask_token = "[Entity]"
///     title_patterns = ["dr", "dra", "doctor", "doctora"]
///     exceptions = ["cabello"]            # inline terms, and/or
///     exceptions_file = "exceptions.txt"
///     [frequent_words]
///     path = "frequent_words.txt"
///     source = "..."
///     [[gazetteers]]
///     name = "first_names"
///     path = "first_names.txt"
///     source = "..."
MaskingRuleSet load_rules(const std::filesystem::path& path);

inline constexpr std::string_view kTitleRule = "title_pattern";

struct MaskedSpan {
    std::string report_id;
    std::size_t start = 0;  // byte offsets into the masking input
    std::size_t end = 0;
    std::string rule;

    friend bool operator==(const MaskedSpan&, const MaskedSpan&) = default;
};

struct MaskResult {
    std::string text;
    std::vector<MaskedSpan> spans;
};

/// Deletes every decimal digit; all other characters are kept in order.
std::string strip_numeric(std::string_view text);

/// Replaces name/surname gazetteer hits and the words following a title
/// trigger (dr, dra, ...) with the mask token. Span offsets refer to `text`.
///
/// A title trigger masks at most three following words and stops early at a
/// sentence boundary, an exception term, or a frequent word that is not also
/// a name. Text already holding the mask token is left alone, which makes
/// masking idempotent.
MaskResult mask_entities(std::string_view text, const MaskingRuleSet& rules);

struct MaskingReport {
    std::size_t n_numeric_removed = 0;
    std::map<std::string, std::size_t> n_masked_by_rule;
    std::vector<MaskedSpan> masked_spans;

    std::size_t total_masked() const noexcept { return masked_spans.size(); }
    std::string to_json() const;
};

/// strip_numeric then mask_entities over every report. Span offsets refer to
/// the original text of each report; digits inside a span are dropped by the
/// masking, so r.text[start, end) with digits removed is the masked substring.
std::pair<corpus::Corpus, MaskingReport> anonymize(const corpus::Corpus& corpus, const MaskingRuleSet& rules);

enum class Verdict { ok, error };

struct Agreement {
    std::size_t n_common = 0;
    std::size_t n_disagree = 0;
    double rate = 0.0;
};

/// Inter-reviewer agreement over the ids both reviewers judged.
Agreement agreement(const std::map<std::string, Verdict>& a, const std::map<std::string, Verdict>& b);

}  // namespace clincascade::anonymizer
