#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "clincascade/relation.hpp"

namespace clincascade::ontology {
class RelationTable;
}

namespace clincascade::corpus {

/// One clinical note with its pathology label and optional relation values.
struct Report {
    std::string id;
    std::string text;
    std::string pathology;
    std::map<Relation, std::string> relations;

    std::optional<std::string> relation(Relation r) const;

    friend bool operator==(const Report&, const Report&) = default;
};

/// Ordered, validated collection of reports. Immutable after construction.
class Corpus {
public:
    Corpus() = default;
    /// Validates ids (nonempty, unique) and texts (nonempty after trimming).
    explicit Corpus(std::vector<Report> reports);

    const std::vector<Report>& reports() const noexcept { return reports_; }
    const std::map<std::string, std::size_t>& label_counts() const noexcept { return label_counts_; }
    std::vector<std::string> labels() const;

    std::size_t size() const noexcept { return reports_.size(); }
    bool empty() const noexcept { return reports_.empty(); }
    const Report& operator[](std::size_t i) const { return reports_[i]; }
    auto begin() const noexcept { return reports_.begin(); }
    auto end() const noexcept { return reports_.end(); }

    friend bool operator==(const Corpus& a, const Corpus& b) { return a.reports_ == b.reports_; }

private:
    std::vector<Report> reports_;
    std::map<std::string, std::size_t> label_counts_;
};

enum class Format { jsonl, csv };

Format format_from_path(const std::filesystem::path& path);

Corpus load_corpus(const std::filesystem::path& path, Format format);
Corpus load_corpus(const std::filesystem::path& path);
Corpus parse_jsonl(std::string_view content);
Corpus parse_csv(std::string_view content);
/// Writes JSONL or CSV according to the file extension.
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
std::string to_jsonl(const Corpus& corpus);
/// Header id,text,pathology,type,severity,site; every field quoted.
std::string to_csv(const Corpus& corpus);

/// Keeps the reports whose label occurs at least `min_count` times in the
/// input. Throws ErrorKind::empty_result when nothing survives.
Corpus filter_by_threshold(const Corpus& corpus, std::size_t min_count);

struct SplitSpec {
    std::vector<double> fractions{0.8, 0.2};
    std::uint64_t seed = 0;
    std::string stratify_by = "pathology";
};

/// Per-label stratified split. A label with fewer examples than there are
/// fractions goes entirely to the largest fraction.
std::vector<Corpus> stratified_split(const Corpus& corpus, const SplitSpec& spec);

struct ReviewPartition {
    Corpus set_a;
    Corpus set_b;
    Corpus common;
};

/// Dual-reviewer partition: a stratified sample split into two equally sized
/// review sets sharing `common`.
ReviewPartition make_review_partition(const Corpus& corpus, double sample_fraction, double overlap_fraction,
                                      std::uint64_t seed);

/// Token that encodes a relation value in synthetic text, e.g. "csiteskin".
std::string cue_token(Relation r, std::string_view value);
std::string disease_cue_token(std::string_view disease);

/// Synthetic relation-annotated corpus: every disease in the table yields
/// `n_per_class` reports carrying cue tokens for its type, severity, site and
/// identity. Each cue is independently replaced by a filler word with
/// probability `noise`.
Corpus generate_synthetic(const ontology::RelationTable& table, std::size_t n_per_class, double noise,
                          std::uint64_t seed);

/// Filler vocabulary used by generate_synthetic.
const std::vector<std::string>& synthetic_filler_words();

}  // namespace clincascade::corpus
