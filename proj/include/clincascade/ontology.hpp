#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clincascade/corpus.hpp"
#include "clincascade/relation.hpp"

namespace clincascade::ontology {

struct RelationRow {
    std::string type;
    std::string severity;
    std::string site;

    const std::string& get(Relation r) const;

    friend bool operator==(const RelationRow&, const RelationRow&) = default;
};

/// disease label -> (type, severity, site). Rows keep insertion order; every
/// value is drawn from the closed vocabularies in relation.hpp.
class RelationTable {
public:
    /// Adds or replaces a row. Values outside the closed vocabularies are
    /// rejected with a schema error.
    void insert(const std::string& disease, RelationRow row, std::string provenance = {});

    bool contains(std::string_view disease) const;
    const RelationRow* find(std::string_view disease) const;
    const RelationRow& at(std::string_view disease) const;

    const std::vector<std::string>& diseases() const noexcept { return order_; }
    const std::map<std::string, std::string, std::less<>>& provenance() const noexcept { return provenance_; }
    std::size_t size() const noexcept { return order_.size(); }
    bool empty() const noexcept { return order_.empty(); }

    /// First `n` rows in table order.
    RelationTable head(std::size_t n) const;

    friend bool operator==(const RelationTable& a, const RelationTable& b) {
        return a.order_ == b.order_ && a.rows_ == b.rows_;
    }

private:
    std::vector<std::string> order_;
    std::map<std::string, RelationRow, std::less<>> rows_;
    std::map<std::string, std::string, std::less<>> provenance_;
};

struct LoadOptions {
    /// Map alternative severity spellings (deadly, major, ...) onto the
    /// canonical grades instead of rejecting them.
    bool canonicalize_severity = false;
};

RelationTable parse_relation_table(std::string_view tsv, const LoadOptions& options = {});
RelationTable load_relation_table(const std::filesystem::path& path, const LoadOptions& options = {});
std::string to_tsv(const RelationTable& table);
void save_relation_table(const RelationTable& table, const std::filesystem::path& path);

enum class Icd10Flag { minor, major, morbidity };
using FlagSet = std::set<Icd10Flag>;

std::optional<Icd10Flag> parse_icd10_flag(std::string_view name);
std::string_view to_string(Icd10Flag flag) noexcept;

/// morbidity -> extreme, else major -> important, else minor -> mild, else
/// harmless.
std::string_view severity_from_flags(const FlagSet& flags) noexcept;

enum class SnapshotSource { umls_like, snomed_like, icd10_like };

std::string_view to_string(SnapshotSource source) noexcept;

struct ConceptRecord {
    std::string english_name;
    std::optional<std::string> semantic_type;
    std::optional<std::string> finding_site;
    FlagSet icd10_flags;
};

/// Offline extract of one terminology, restricted to the concepts a corpus
/// needs.
struct OntologySnapshot {
    SnapshotSource source = SnapshotSource::umls_like;
    std::string provenance;
    std::map<std::string, ConceptRecord> concepts;

    struct Match {
        const std::string* id;
        const ConceptRecord* record;
    };
    /// Exact match on the English name after case folding and accent
    /// stripping; the lowest concept id wins when several share a name.
    std::optional<Match> lookup(std::string_view english_name) const;
};

OntologySnapshot parse_snapshot(std::string_view json);
OntologySnapshot load_snapshot(const std::filesystem::path& path);

/// Offline Spanish -> English disease-name map.
class TranslationMap {
public:
    void insert(std::string_view spanish, std::string english);
    std::optional<std::string> translate(std::string_view spanish) const;
    std::size_t size() const noexcept { return entries_.size(); }

private:
    std::map<std::string, std::string, std::less<>> entries_;
};

TranslationMap parse_translation_map(std::string_view tsv);
TranslationMap load_translation_map(const std::filesystem::path& path);

struct UnresolvedLabel {
    std::string label;
    std::string english_name;
    std::string reason;
};

struct Derivation {
    RelationTable table;
    std::vector<UnresolvedLabel> unresolved;
};

/// Resolves (type, severity, site) for each label: translate, then look the
/// English name up in the UMLS-like (type), SNOMED-like (site) and
/// ICD-10-like (severity) snapshots. Labels that cannot be fully resolved are
/// listed in `unresolved` rather than aborting the run; a label absent from
/// the translation map is a hard error.
Derivation derive_relations(std::span<const std::string> labels, const TranslationMap& translations,
                            std::span<const OntologySnapshot> snapshots);

/// Copies each report's relations from its pathology's row.
corpus::Corpus annotate_corpus(const corpus::Corpus& corpus, const RelationTable& table);

}  // namespace clincascade::ontology
