#include "clincascade/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "clincascade/error.hpp"
#include "clincascade/io.hpp"
#include "clincascade/ontology.hpp"
#include "clincascade/rng.hpp"
#include "clincascade/text.hpp"

namespace clincascade::corpus {

namespace {

constexpr const char* kModule = "corpus";

Error validation(const std::string& op, const std::string& msg, std::string hint = {}) {
    return Error(ErrorKind::validation, kModule, op, msg, std::move(hint));
}

Error schema(const std::string& op, const std::string& msg, std::string hint = {}) {
    return Error(ErrorKind::schema, kModule, op, msg, std::move(hint));
}

std::string normalize_relation_value(Relation r, std::string_view value) {
    return r == Relation::severity ? canonicalize_severity(value) : text::normalize_label(value);
}

/// Builds a report from named fields; `get` returns nullopt for absent fields.
template <typename Getter>
Report make_report(const std::string& op, std::size_t row, Getter&& get) {
    Report report;
    for (const char* field : {"id", "text", "pathology"}) {
        auto value = get(field);
        if (!value) {
            throw schema(op, "row " + std::to_string(row) + ": missing required field '" + field + "'",
                         "every record needs id, text and pathology");
        }
        if (std::string_view(field) == "id") report.id = std::move(*value);
        else if (std::string_view(field) == "text") report.text = std::move(*value);
        else report.pathology = text::normalize_label(*value);
    }
    if (report.pathology.empty()) {
        throw validation(op, "row " + std::to_string(row) + ": empty pathology label");
    }
    for (const Relation r : kAllRelations) {
        auto value = get(std::string(to_string(r)).c_str());
        if (value && !text::trim(*value).empty()) {
            report.relations[r] = normalize_relation_value(r, *value);
        }
    }
    return report;
}

// RFC 4180 reader: quoted fields may contain commas, doubled quotes and
// newlines; both LF and CRLF record terminators are accepted.
std::vector<std::vector<std::string>> read_csv_records(std::string_view content) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t i = 0;
    const auto end_record = [&] {
        record.push_back(std::move(field));
        field.clear();
        const bool blank = record.size() == 1 && record[0].empty() && !field_started;
        if (!blank) records.push_back(std::move(record));
        record.clear();
        field_started = false;
    };
    while (i < content.size()) {
        const char c = content[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < content.size() && content[i + 1] == '"') {
                    field.push_back('"');
                    i += 2;
                    continue;
                }
                in_quotes = false;
            } else {
                field.push_back(c);
            }
            ++i;
            continue;
        }
        switch (c) {
            case '"':
                in_quotes = true;
                field_started = true;
                break;
            case ',':
                record.push_back(std::move(field));
                field.clear();
                field_started = true;
                break;
            case '\r':
                if (i + 1 < content.size() && content[i + 1] == '\n') ++i;
                end_record();
                break;
            case '\n':
                end_record();
                break;
            default:
                field.push_back(c);
                field_started = true;
        }
        ++i;
    }
    if (in_quotes) throw schema("load_corpus", "unterminated quoted CSV field");
    if (field_started || !field.empty() || !record.empty()) end_record();
    return records;
}

std::string stratum(const Report& report, const std::string& field) {
    if (field == "pathology") return report.pathology;
    if (const auto r = parse_relation(field)) return report.relation(*r).value_or("");
    throw validation("stratified_split", "unknown stratification field '" + field + "'",
                     "use pathology, type, severity or site");
}

Corpus select(const Corpus& corpus, std::vector<std::size_t> indices) {
    std::sort(indices.begin(), indices.end());
    std::vector<Report> reports;
    reports.reserve(indices.size());
    for (const auto i : indices) reports.push_back(corpus[i]);
    return Corpus(std::move(reports));
}

std::string slug(std::string_view value) {
    std::string out;
    for (const char c : text::fold_key(value)) {
        if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) out.push_back(c);
    }
    return out;
}

}  // namespace

std::optional<std::string> Report::relation(Relation r) const {
    const auto it = relations.find(r);
    if (it == relations.end()) return std::nullopt;
    return it->second;
}

Corpus::Corpus(std::vector<Report> reports) : reports_(std::move(reports)) {
    std::set<std::string_view> ids;
    for (std::size_t i = 0; i < reports_.size(); ++i) {
        const Report& r = reports_[i];
        if (r.id.empty()) {
            throw validation("corpus", "row " + std::to_string(i + 1) + ": empty id");
        }
        if (!ids.insert(r.id).second) {
            throw validation("corpus", "row " + std::to_string(i + 1) + ": duplicate id '" + r.id + "'",
                             "report ids must be unique within a corpus");
        }
        if (text::trim(r.text).empty()) {
            throw validation("corpus", "row " + std::to_string(i + 1) + " (id '" + r.id + "'): empty text");
        }
        ++label_counts_[r.pathology];
    }
}

std::vector<std::string> Corpus::labels() const {
    std::vector<std::string> out;
    out.reserve(label_counts_.size());
    for (const auto& [label, count] : label_counts_) out.push_back(label);
    return out;
}

Format format_from_path(const std::filesystem::path& path) {
    const auto ext = text::fold_case(path.extension().string());
    if (ext == ".csv") return Format::csv;
    if (ext == ".jsonl" || ext == ".json" || ext == ".ndjson") return Format::jsonl;
    throw schema("load_corpus", "cannot infer corpus format from '" + path.string() + "'",
                 "use a .jsonl or .csv extension");
}

Corpus load_corpus(const std::filesystem::path& path, Format format) {
    const std::string content = io::read_file(path, kModule, "load_corpus");
    return format == Format::csv ? parse_csv(content) : parse_jsonl(content);
}

Corpus load_corpus(const std::filesystem::path& path) { return load_corpus(path, format_from_path(path)); }

Corpus parse_jsonl(std::string_view content) {
    std::vector<Report> reports;
    std::istringstream in{std::string(content)};
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        ++row;
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw schema("load_corpus", "row " + std::to_string(row) + ": invalid JSON (" + e.what() + ")");
        }
        if (!record.is_object()) throw schema("load_corpus", "row " + std::to_string(row) + ": not a JSON object");
        reports.push_back(make_report("load_corpus", row, [&](const char* field) -> std::optional<std::string> {
            const auto it = record.find(field);
            if (it == record.end() || it->is_null()) return std::nullopt;
            if (!it->is_string()) {
                throw schema("load_corpus",
                             "row " + std::to_string(row) + ": field '" + field + "' must be a string");
            }
            return it->get<std::string>();
        }));
    }
    return Corpus(std::move(reports));
}

Corpus parse_csv(std::string_view content) {
    // Tolerate a UTF-8 byte order mark.
    if (content.substr(0, 3) == "\xEF\xBB\xBF") content.remove_prefix(3);
    const auto records = read_csv_records(content);
    if (records.empty()) throw schema("load_corpus", "CSV input has no header row");
    std::map<std::string, std::size_t> columns;
    for (std::size_t c = 0; c < records[0].size(); ++c) columns[text::normalize_label(records[0][c])] = c;

    std::vector<Report> reports;
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        reports.push_back(make_report("load_corpus", r, [&](const char* field) -> std::optional<std::string> {
            const auto it = columns.find(field);
            if (it == columns.end() || it->second >= rec.size()) return std::nullopt;
            return rec[it->second];
        }));
    }
    return Corpus(std::move(reports));
}

std::string to_jsonl(const Corpus& corpus) {
    std::string out;
    for (const Report& r : corpus) {
        nlohmann::ordered_json record;
        record["id"] = r.id;
        record["text"] = r.text;
        record["pathology"] = r.pathology;
        for (const auto& [rel, value] : r.relations) record[std::string(to_string(rel))] = value;
        out += record.dump();
        out.push_back('\n');
    }
    return out;
}

std::string to_csv(const Corpus& corpus) {
    const auto quote = [](std::string_view v) {
        std::string out = "\"";
        for (const char c : v) {
            if (c == '"') out.push_back('"');
            out.push_back(c);
        }
        return out + "\"";
    };
    std::string out = "id,text,pathology,type,severity,site\n";
    for (const Report& r : corpus) {
        out += quote(r.id) + "," + quote(r.text) + "," + quote(r.pathology);
        for (const Relation rel : kAllRelations) out += "," + quote(r.relation(rel).value_or(""));
        out.push_back('\n');
    }
    return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    const auto format = format_from_path(path);
    io::write_file(path, format == Format::csv ? to_csv(corpus) : to_jsonl(corpus), kModule, "save_corpus");
}

Corpus filter_by_threshold(const Corpus& corpus, std::size_t min_count) {
    if (min_count < 1) throw validation("filter_by_threshold", "min_count must be >= 1");
    std::vector<Report> kept;
    for (const Report& r : corpus) {
        if (corpus.label_counts().at(r.pathology) >= min_count) kept.push_back(r);
    }
    if (kept.empty()) {
        throw Error(ErrorKind::empty_result, kModule, "filter_by_threshold",
                    "no label has at least " + std::to_string(min_count) + " examples",
                    "lower the threshold");
    }
    return Corpus(std::move(kept));
}

std::vector<Corpus> stratified_split(const Corpus& corpus, const SplitSpec& spec) {
    const std::string op = "stratified_split";
    if (corpus.empty()) throw validation(op, "cannot split an empty corpus");
    if (spec.fractions.empty()) throw validation(op, "fractions must be nonempty");
    double total = 0.0;
    for (const double f : spec.fractions) {
        if (!(f >= 0.0 && f <= 1.0)) throw validation(op, "each fraction must lie in [0, 1]");
        total += f;
    }
    if (std::abs(total - 1.0) > 1e-9) throw validation(op, "fractions must sum to 1");

    const std::size_t parts = spec.fractions.size();
    const std::size_t largest = static_cast<std::size_t>(
        std::max_element(spec.fractions.begin(), spec.fractions.end()) - spec.fractions.begin());

    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < corpus.size(); ++i) groups[stratum(corpus[i], spec.stratify_by)].push_back(i);

    std::vector<std::vector<std::size_t>> assigned(parts);
    for (auto& [key, indices] : groups) {
        Rng rng(derive_seed(spec.seed, "split:" + key));
        rng.shuffle(std::span(indices));
        const std::size_t n = indices.size();

        std::vector<std::size_t> counts(parts, 0);
        if (n < parts) {
            counts[largest] = n;
        } else {
            // Largest-remainder apportionment keeps each count within one of n*f.
            std::vector<double> remainders(parts);
            std::size_t used = 0;
            for (std::size_t p = 0; p < parts; ++p) {
                const double exact = static_cast<double>(n) * spec.fractions[p];
                counts[p] = static_cast<std::size_t>(std::floor(exact + 1e-9));
                remainders[p] = exact - static_cast<double>(counts[p]);
                used += counts[p];
            }
            std::vector<std::size_t> order(parts);
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
            for (std::size_t k = 0; used < n; ++k, ++used) ++counts[order[k % parts]];
        }

        std::size_t cursor = 0;
        for (std::size_t p = 0; p < parts; ++p) {
            for (std::size_t c = 0; c < counts[p]; ++c) assigned[p].push_back(indices[cursor++]);
        }
    }

    std::vector<Corpus> out;
    out.reserve(parts);
    for (auto& indices : assigned) out.push_back(select(corpus, std::move(indices)));
    return out;
}

ReviewPartition make_review_partition(const Corpus& corpus, double sample_fraction, double overlap_fraction,
                                      std::uint64_t seed) {
    const std::string op = "make_review_partition";
    if (!(sample_fraction > 0.0 && sample_fraction <= 1.0)) {
        throw validation(op, "sample_fraction must lie in (0, 1]");
    }
    if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0)) {
        throw validation(op, "overlap_fraction must lie in [0, 1)");
    }
    if (corpus.empty()) throw validation(op, "cannot sample an empty corpus");

    Corpus sample = corpus;
    if (sample_fraction < 1.0) {
        SplitSpec spec{{sample_fraction, 1.0 - sample_fraction}, derive_seed(seed, "review-sample"), "pathology"};
        sample = stratified_split(corpus, spec).front();
    }
    const auto n_common = static_cast<std::size_t>(std::llround(overlap_fraction * static_cast<double>(sample.size())));
    if (sample.empty() || (overlap_fraction > 0.0 && n_common == 0)) {
        throw validation(op, "sample of " + std::to_string(sample.size()) + " reports is too small to honor overlap",
                         "increase sample_fraction or overlap_fraction");
    }

    std::vector<std::size_t> order(sample.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, "review-overlap"));
    rng.shuffle(std::span(order));

    const std::size_t rest = sample.size() - n_common;
    const std::size_t n_a = rest - rest / 2;
    std::vector<std::size_t> common(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_common));
    std::vector<std::size_t> a = common;
    std::vector<std::size_t> b = common;
    for (std::size_t i = n_common; i < order.size(); ++i) (i - n_common < n_a ? a : b).push_back(order[i]);

    return {select(sample, std::move(a)), select(sample, std::move(b)), select(sample, std::move(common))};
}

std::string cue_token(Relation r, std::string_view value) {
    return "c" + std::string(to_string(r)) + slug(value);
}

std::string disease_cue_token(std::string_view disease) { return "cdisease" + slug(disease); }

const std::vector<std::string>& synthetic_filler_words() {
    static const std::vector<std::string> words = {
        "paciente", "acude",    "consulta",  "por",      "presenta",  "desde",    "hace",     "meses",
        "refiere",  "lesion",   "zona",      "sin",      "con",       "antecedentes", "personales", "exploracion",
        "se",       "observa",  "placa",     "bordes",   "bien",      "definidos", "tratamiento", "previo",
        "revision", "control",  "evolucion", "favorable", "valoracion", "derivado", "atencion", "primaria",
        "clinica",  "compatible", "aspecto", "superficie", "color",   "tamano",   "molestias", "prurito",
    };
    return words;
}

Corpus generate_synthetic(const ontology::RelationTable& table, std::size_t n_per_class, double noise,
                          std::uint64_t seed) {
    const std::string op = "generate_synthetic";
    if (table.empty()) throw validation(op, "relation table is empty");
    if (n_per_class < 1) throw validation(op, "n_per_class must be >= 1");
    if (!(noise >= 0.0 && noise <= 1.0)) throw validation(op, "noise must lie in [0, 1]");

    const auto& filler = synthetic_filler_words();
    std::vector<Report> reports;
    reports.reserve(table.size() * n_per_class);
    std::size_t disease_index = 0;
    for (const auto& disease : table.diseases()) {
        const auto& row = table.at(disease);
        Rng rng(derive_seed(seed, "synthetic:" + disease));
        const std::string cues[] = {
            cue_token(Relation::type, row.type),
            cue_token(Relation::severity, row.severity),
            cue_token(Relation::site, row.site),
            disease_cue_token(disease),
        };
        for (std::size_t j = 0; j < n_per_class; ++j) {
            std::vector<std::string> words;
            const std::size_t n_filler = 6 + rng.index(7);
            for (std::size_t w = 0; w < n_filler; ++w) words.push_back(filler[rng.index(filler.size())]);
            for (const auto& cue : cues) {
                const bool dropped = rng.uniform() < noise;
                const std::string& word = dropped ? filler[rng.index(filler.size())] : cue;
                words.insert(words.begin() + static_cast<std::ptrdiff_t>(rng.index(words.size() + 1)), word);
            }
            std::string body;
            for (const auto& w : words) {
                if (!body.empty()) body.push_back(' ');
                body += w;
            }
            body.push_back('.');

            char id[48];
            std::snprintf(id, sizeof id, "syn-%03zu-%05zu", disease_index, j);
            Report report{id, std::move(body), disease, {}};
            report.relations[Relation::type] = row.type;
            report.relations[Relation::severity] = row.severity;
            report.relations[Relation::site] = row.site;
            reports.push_back(std::move(report));
        }
        ++disease_index;
    }
    return Corpus(std::move(reports));
}

}  // namespace clincascade::corpus
