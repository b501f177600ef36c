#include "clincascade/ontology.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

#include "clincascade/error.hpp"
#include "clincascade/io.hpp"
#include "clincascade/text.hpp"

namespace clincascade::ontology {

namespace {

constexpr const char* kModule = "ontology";

std::string join(std::span<const std::string_view> values) {
    std::string out;
    for (const auto v : values) {
        if (!out.empty()) out += ", ";
        out += v;
    }
    return out;
}

/// Data lines of a TSV file: '#' comments and blank lines dropped, CR stripped.
std::vector<std::vector<std::string>> tsv_rows(std::string_view content) {
    std::vector<std::vector<std::string>> rows;
    for (auto line : text::split(content, '\n')) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty() || line.front() == '#') continue;
        rows.push_back(text::split(line, '\t'));
    }
    return rows;
}

void expect_header(const std::vector<std::vector<std::string>>& rows, std::span<const std::string_view> header,
                   const std::string& op) {
    std::string expected;
    for (const auto h : header) expected += (expected.empty() ? "" : "\\t") + std::string(h);
    bool ok = !rows.empty() && rows[0].size() == header.size();
    for (std::size_t i = 0; ok && i < header.size(); ++i) ok = text::normalize_label(rows[0][i]) == header[i];
    if (!ok) throw Error(ErrorKind::schema, kModule, op, "missing or malformed header", "expected '" + expected + "'");
}

}  // namespace

const std::string& RelationRow::get(Relation r) const {
    switch (r) {
        case Relation::type: return type;
        case Relation::severity: return severity;
        case Relation::site: return site;
    }
    return type;
}

void RelationTable::insert(const std::string& disease, RelationRow row, std::string provenance) {
    const std::string key = text::normalize_label(disease);
    if (key.empty()) throw Error(ErrorKind::schema, kModule, "relation_table", "empty disease label");
    for (const Relation r : kAllRelations) {
        if (!in_vocabulary(r, row.get(r))) {
            throw Error(ErrorKind::schema, kModule, "relation_table",
                        "disease '" + key + "': " + std::string(to_string(r)) + " value '" + row.get(r) +
                            "' is not in the closed vocabulary",
                        "allowed: " + join(vocabulary(r)));
        }
    }
    if (!rows_.contains(key)) order_.push_back(key);
    rows_[key] = std::move(row);
    if (!provenance.empty()) provenance_[key] = std::move(provenance);
}

bool RelationTable::contains(std::string_view disease) const { return find(disease) != nullptr; }

const RelationRow* RelationTable::find(std::string_view disease) const {
    const auto it = rows_.find(text::normalize_label(disease));
    return it == rows_.end() ? nullptr : &it->second;
}

const RelationRow& RelationTable::at(std::string_view disease) const {
    if (const auto* row = find(disease)) return *row;
    throw Error(ErrorKind::validation, kModule, "relation_table", "no row for disease '" + std::string(disease) + "'");
}

RelationTable RelationTable::head(std::size_t n) const {
    RelationTable out;
    for (std::size_t i = 0; i < std::min(n, order_.size()); ++i) {
        const auto& d = order_[i];
        const auto prov = provenance_.find(d);
        out.insert(d, rows_.at(d), prov == provenance_.end() ? std::string{} : prov->second);
    }
    return out;
}

RelationTable parse_relation_table(std::string_view tsv, const LoadOptions& options) {
    const std::string op = "load_relation_table";
    static constexpr std::string_view kHeader[] = {"disease", "type", "severity", "site"};
    const auto rows = tsv_rows(tsv);
    expect_header(rows, kHeader, op);

    RelationTable table;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& cells = rows[i];
        const std::string where = "row " + std::to_string(i);
        if (cells.size() != 4) {
            throw Error(ErrorKind::schema, kModule, op, where + ": expected 4 tab-separated columns, got " +
                                                            std::to_string(cells.size()));
        }
        RelationRow row{text::normalize_label(cells[1]), text::normalize_label(cells[2]),
                        text::normalize_label(cells[3])};
        const std::string canonical = canonicalize_severity(row.severity);
        if (options.canonicalize_severity) row.severity = canonical;
        for (const Relation r : kAllRelations) {
            const std::string& value = row.get(r);
            if (in_vocabulary(r, value)) continue;
            std::string hint = "allowed: " + join(vocabulary(r));
            if (r == Relation::severity && in_vocabulary(r, canonical)) {
                hint = "did you mean '" + canonical + "'?";
            }
            throw Error(ErrorKind::schema, kModule, op,
                        where + ": unknown " + std::string(to_string(r)) + " value '" + value + "'", hint);
        }
        table.insert(cells[0], std::move(row));
    }
    return table;
}

RelationTable load_relation_table(const std::filesystem::path& path, const LoadOptions& options) {
    return parse_relation_table(io::read_file(path, kModule, "load_relation_table"), options);
}

std::string to_tsv(const RelationTable& table) {
    std::string out = "disease\ttype\tseverity\tsite\n";
    for (const auto& d : table.diseases()) {
        const auto& row = table.at(d);
        out += d + '\t' + row.type + '\t' + row.severity + '\t' + row.site + '\n';
    }
    return out;
}

void save_relation_table(const RelationTable& table, const std::filesystem::path& path) {
    io::write_file(path, to_tsv(table), kModule, "save_relation_table");
}

std::optional<Icd10Flag> parse_icd10_flag(std::string_view name) {
    const std::string key = text::normalize_label(name);
    if (key == "minor") return Icd10Flag::minor;
    if (key == "major") return Icd10Flag::major;
    if (key == "morbidity") return Icd10Flag::morbidity;
    return std::nullopt;
}

std::string_view to_string(Icd10Flag flag) noexcept {
    switch (flag) {
        case Icd10Flag::minor: return "minor";
        case Icd10Flag::major: return "major";
        case Icd10Flag::morbidity: return "morbidity";
    }
    return "?";
}

std::string_view severity_from_flags(const FlagSet& flags) noexcept {
    if (flags.contains(Icd10Flag::morbidity)) return "extreme";
    if (flags.contains(Icd10Flag::major)) return "important";
    if (flags.contains(Icd10Flag::minor)) return "mild";
    return "harmless";
}

std::string_view to_string(SnapshotSource source) noexcept {
    switch (source) {
        case SnapshotSource::umls_like: return "umls-like";
        case SnapshotSource::snomed_like: return "snomed-like";
        case SnapshotSource::icd10_like: return "icd10-like";
    }
    return "?";
}

std::optional<OntologySnapshot::Match> OntologySnapshot::lookup(std::string_view english_name) const {
    const std::string key = text::fold_key(text::normalize_label(english_name));
    for (const auto& [id, record] : concepts) {
        if (text::fold_key(text::normalize_label(record.english_name)) == key) return Match{&id, &record};
    }
    return std::nullopt;
}

OntologySnapshot parse_snapshot(std::string_view json_text) {
    const std::string op = "load_snapshot";
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::schema, kModule, op, std::string("invalid JSON: ") + e.what());
    }
    OntologySnapshot snap;
    const std::string source = doc.value("source", "");
    if (source == "umls-like") snap.source = SnapshotSource::umls_like;
    else if (source == "snomed-like") snap.source = SnapshotSource::snomed_like;
    else if (source == "icd10-like") snap.source = SnapshotSource::icd10_like;
    else throw Error(ErrorKind::schema, kModule, op, "unknown snapshot source '" + source + "'",
                     "use umls-like, snomed-like or icd10-like");
    snap.provenance = doc.value("provenance", "");

    const auto concepts = doc.find("concepts");
    if (concepts == doc.end() || !concepts->is_object()) {
        throw Error(ErrorKind::schema, kModule, op, "missing 'concepts' object");
    }
    for (const auto& [id, c] : concepts->items()) {
        ConceptRecord record;
        record.english_name = c.value("english_name", "");
        if (text::trim(record.english_name).empty()) {
            throw Error(ErrorKind::schema, kModule, op, "concept '" + id + "' has no english_name");
        }
        if (c.contains("semantic_type") && c["semantic_type"].is_string()) {
            record.semantic_type = c["semantic_type"].get<std::string>();
        }
        if (c.contains("finding_site") && c["finding_site"].is_string()) {
            record.finding_site = c["finding_site"].get<std::string>();
        }
        for (const auto& f : c.value("icd10_flags", nlohmann::json::array())) {
            const auto flag = f.is_string() ? parse_icd10_flag(f.get<std::string>()) : std::nullopt;
            if (!flag) {
                throw Error(ErrorKind::schema, kModule, op, "concept '" + id + "' has unknown icd10 flag " + f.dump(),
                            "allowed: minor, major, morbidity");
            }
            record.icd10_flags.insert(*flag);
        }
        snap.concepts.emplace(id, std::move(record));
    }
    return snap;
}

OntologySnapshot load_snapshot(const std::filesystem::path& path) {
    return parse_snapshot(io::read_file(path, kModule, "load_snapshot"));
}

void TranslationMap::insert(std::string_view spanish, std::string english) {
    entries_[text::normalize_label(spanish)] = text::trim(english);
}

std::optional<std::string> TranslationMap::translate(std::string_view spanish) const {
    const auto it = entries_.find(text::normalize_label(spanish));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

TranslationMap parse_translation_map(std::string_view tsv) {
    const std::string op = "load_translation_map";
    static constexpr std::string_view kHeader[] = {"spanish", "english"};
    const auto rows = tsv_rows(tsv);
    expect_header(rows, kHeader, op);
    TranslationMap map;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != 2 || text::trim(rows[i][0]).empty() || text::trim(rows[i][1]).empty()) {
            throw Error(ErrorKind::schema, kModule, op, "row " + std::to_string(i) + ": expected 'spanish\\tenglish'");
        }
        map.insert(rows[i][0], rows[i][1]);
    }
    return map;
}

TranslationMap load_translation_map(const std::filesystem::path& path) {
    return parse_translation_map(io::read_file(path, kModule, "load_translation_map"));
}

Derivation derive_relations(std::span<const std::string> labels, const TranslationMap& translations,
                            std::span<const OntologySnapshot> snapshots) {
    const std::string op = "derive_relations";
    const OntologySnapshot* by_source[3] = {nullptr, nullptr, nullptr};
    for (const auto& s : snapshots) {
        auto& slot = by_source[static_cast<int>(s.source)];
        if (!slot) slot = &s;
    }
    if (!labels.empty()) {
        for (int i = 0; i < 3; ++i) {
            if (!by_source[i]) {
                throw Error(ErrorKind::validation, kModule, op,
                            "no " + std::string(to_string(static_cast<SnapshotSource>(i))) + " snapshot supplied",
                            "pass one snapshot of each source kind");
            }
        }
    }
    const auto& umls = *by_source[static_cast<int>(SnapshotSource::umls_like)];
    const auto& snomed = *by_source[static_cast<int>(SnapshotSource::snomed_like)];
    const auto& icd10 = *by_source[static_cast<int>(SnapshotSource::icd10_like)];

    Derivation out;
    for (const auto& label : labels) {
        const auto english = translations.translate(label);
        if (!english) {
            throw Error(ErrorKind::validation, kModule, op, "label '" + label + "' has no translation",
                        "add it to the translation map");
        }

        std::vector<std::string> problems;
        RelationRow row;
        std::string provenance;
        const auto note = [&](Relation r, const OntologySnapshot& s, const std::string& id) {
            if (!provenance.empty()) provenance += ';';
            provenance += std::string(to_string(r)) + ':' + std::string(to_string(s.source)) + ':' + id;
        };

        if (const auto m = umls.lookup(*english); !m) {
            problems.push_back("not found in umls-like snapshot");
        } else if (!m->record->semantic_type) {
            problems.push_back("umls-like concept " + *m->id + " has no semantic type");
        } else {
            row.type = text::normalize_label(*m->record->semantic_type);
            if (in_vocabulary(Relation::type, row.type)) note(Relation::type, umls, *m->id);
            else problems.push_back("semantic type '" + row.type + "' outside the type vocabulary");
        }

        if (const auto m = icd10.lookup(*english); !m) {
            problems.push_back("not found in icd10-like snapshot");
        } else {
            row.severity = std::string(severity_from_flags(m->record->icd10_flags));
            note(Relation::severity, icd10, *m->id);
        }

        if (const auto m = snomed.lookup(*english); !m) {
            problems.push_back("not found in snomed-like snapshot");
        } else if (!m->record->finding_site) {
            problems.push_back("snomed-like concept " + *m->id + " has no finding site");
        } else {
            row.site = text::normalize_label(*m->record->finding_site);
            if (in_vocabulary(Relation::site, row.site)) note(Relation::site, snomed, *m->id);
            else problems.push_back("finding site '" + row.site + "' outside the site vocabulary");
        }

        if (problems.empty()) {
            out.table.insert(label, std::move(row), std::move(provenance));
        } else {
            std::string reason;
            for (const auto& p : problems) reason += (reason.empty() ? "" : "; ") + p;
            out.unresolved.push_back({text::normalize_label(label), *english, std::move(reason)});
        }
    }
    return out;
}

corpus::Corpus annotate_corpus(const corpus::Corpus& corpus, const RelationTable& table) {
    std::set<std::string> missing;
    for (const auto& [label, count] : corpus.label_counts()) {
        if (!table.contains(label)) missing.insert(label);
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing) list += (list.empty() ? "'" : ", '") + m + "'";
        throw Error(ErrorKind::validation, kModule, "annotate_corpus", "labels missing from relation table: " + list,
                    "derive or add relations for these labels");
    }
    std::vector<corpus::Report> reports;
    reports.reserve(corpus.size());
    for (const auto& r : corpus) {
        auto annotated = r;
        const auto& row = table.at(r.pathology);
        for (const Relation rel : kAllRelations) annotated.relations[rel] = row.get(rel);
        reports.push_back(std::move(annotated));
    }
    return corpus::Corpus(std::move(reports));
}

}  // namespace clincascade::ontology
