#include "clincascade/cli.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <toml.hpp>

#include "clincascade/anonymizer.hpp"
#include "clincascade/backend_client.hpp"
#include "clincascade/cascade.hpp"
#include "clincascade/corpus.hpp"
#include "clincascade/error.hpp"
#include "clincascade/io.hpp"
#include "clincascade/ontology.hpp"
#include "clincascade/rng.hpp"
#include "clincascade/text.hpp"

namespace clincascade::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kModule = "cli";

std::vector<std::string> split_words(std::string_view s) {
    std::vector<std::string> out;
    std::istringstream in{std::string(s)};
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::string format_double(double v) {
    std::ostringstream s;
    s << v;
    return s.str();
}

std::string fingerprint_path(const fs::path& p) {
    if (fs::is_directory(p)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::recursive_directory_iterator(p)) {
            if (e.is_regular_file()) files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        std::uint64_t h = text::fnv1a64("");
        for (const auto& f : files) {
            h = text::fnv1a64(fs::relative(f, p).generic_string(), h);
            h = text::fnv1a64(io::read_file(f, kModule, "fingerprint"), h);
        }
        return text::hex64(h);
    }
    return text::hex64(text::fnv1a64(io::read_file(p, kModule, "fingerprint")));
}

}  // namespace

const std::vector<std::string>& path_keys() {
    static const std::vector<std::string> keys = {"corpus", "rules",  "audit", "relations", "translations", "umls",
                                                  "snomed", "icd10", "pipeline", "predictions", "truth", "report"};
    return keys;
}

ordered_json RunConfig::to_json() const {
    ordered_json doc;
    doc["paths"] = ordered_json::object();
    for (const auto& [key, p] : paths) doc["paths"][key] = p.generic_string();
    doc["hyperparams"] = {{"batch_size", hp.batch_size},
                          {"learning_rate", hp.learning_rate},
                          {"epochs", hp.epochs},
                          {"l2", hp.l2}};
    doc["threshold"] = threshold;
    doc["thresholds"] = thresholds;
    doc["k"] = k;
    doc["mode"] = mode;
    doc["order"] = order;
    doc["select_by"] = select_by;
    doc["macro_over"] = macro_over == eval::MacroAverage::truth ? "truth" : "union";
    doc["backend"] = backend.describe();
    doc["backend_command"] = backend.command;
    doc["seed"] = seed;
    doc["n_per_class"] = n_per_class;
    doc["noise"] = noise;
    doc["classes"] = classes;
    doc["top"] = top;
    return doc;
}

namespace {

eval::MacroAverage parse_macro_over(std::string_view v) {
    if (v == "truth") return eval::MacroAverage::truth;
    if (v == "union") return eval::MacroAverage::union_labels;
    throw Error(ErrorKind::validation, kModule, "config", "macro_over must be 'truth' or 'union', got '" + std::string(v) + "'");
}

std::vector<std::size_t> parse_thresholds(std::string_view v) {
    std::vector<std::size_t> out;
    for (const auto& part : text::split(v, ',')) {
        const auto t = text::trim(part);
        if (t.empty()) continue;
        try {
            std::size_t used = 0;
            const long long n = std::stoll(t, &used);
            if (used != t.size() || n < 1) throw std::invalid_argument("range");
            out.push_back(static_cast<std::size_t>(n));
        } catch (const std::exception&) {
            throw Error(ErrorKind::validation, kModule, "config", "invalid threshold '" + t + "'",
                        "use a comma-separated list of positive integers");
        }
    }
    return out;
}

void set_backend(RunConfig& c, const std::optional<std::string>& kind, const std::optional<std::vector<std::string>>& command) {
    if (command) c.backend = classifier::BackendSpec::external(*command);
    if (kind) {
        if (*kind == "builtin") {
            c.backend = classifier::BackendSpec::builtin();
        } else if (*kind == "external") {
            if (!command && c.backend.command.empty()) {
                throw Error(ErrorKind::validation, kModule, "config", "backend 'external' needs a backend command",
                            "pass --backend-command \"model-server --stdio\"");
            }
            c.backend.kind = classifier::BackendSpec::Kind::external;
        } else {
            throw Error(ErrorKind::validation, kModule, "config", "backend must be 'builtin' or 'external', got '" + *kind + "'");
        }
    }
}

template <typename T>
std::optional<T> toml_get(const toml::table& t, std::string_view key, const fs::path& file) {
    const auto* node = t.get(key);
    if (!node) return std::nullopt;
    if constexpr (std::is_same_v<T, std::string>) {
        if (const auto v = node->value<std::string>()) return *v;
    } else if constexpr (std::is_same_v<T, double>) {
        if (const auto v = node->value<double>()) return *v;
    } else {
        if (const auto v = node->value<std::int64_t>(); v && *v >= 0) return static_cast<T>(*v);
    }
    throw Error(ErrorKind::schema, kModule, "config", file.string() + ": key '" + std::string(key) + "' has the wrong type");
}

}  // namespace

void apply_config_file(RunConfig& c, const fs::path& file) {
    toml::table doc;
    try {
        doc = toml::parse(io::read_file(file, kModule, "config"), file.string());
    } catch (const toml::parse_error& e) {
        throw Error(ErrorKind::schema, kModule, "config", std::string("invalid TOML: ") + std::string(e.description()));
    }
    static const std::set<std::string> known = {"paths", "hyperparams", "backend", "threshold", "thresholds", "k",
                                                "mode", "order", "select_by", "macro_over", "seed", "n_per_class",
                                                "noise", "classes", "top", "out"};
    for (const auto& [key, _] : doc) {
        if (!known.contains(std::string(key.str()))) {
            throw Error(ErrorKind::schema, kModule, "config", file.string() + ": unknown key '" + std::string(key.str()) + "'");
        }
    }
    const fs::path base = file.parent_path();
    const auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

    if (const auto* paths = doc["paths"].as_table()) {
        for (const auto& [key, _] : *paths) {
            const std::string k(key.str());
            if (std::find(path_keys().begin(), path_keys().end(), k) == path_keys().end()) {
                throw Error(ErrorKind::schema, kModule, "config", file.string() + ": unknown path key '" + k + "'",
                            "known keys: " + join(path_keys(), ", "));
            }
            c.paths[k] = resolve(*toml_get<std::string>(*paths, k, file));
        }
    }
    if (const auto v = toml_get<std::string>(doc, "out", file)) c.out = resolve(*v);
    if (const auto* hp = doc["hyperparams"].as_table()) {
        if (const auto v = toml_get<std::size_t>(*hp, "batch_size", file)) c.hp.batch_size = *v;
        if (const auto v = toml_get<double>(*hp, "learning_rate", file)) c.hp.learning_rate = *v;
        if (const auto v = toml_get<std::size_t>(*hp, "epochs", file)) c.hp.epochs = *v;
        if (const auto v = toml_get<double>(*hp, "l2", file)) c.hp.l2 = *v;
    }
    if (const auto* be = doc["backend"].as_table()) {
        std::optional<std::vector<std::string>> command;
        if (const auto* arr = be->get_as<toml::array>("command")) {
            command.emplace();
            for (const auto& el : *arr) {
                const auto s = el.value<std::string>();
                if (!s) throw Error(ErrorKind::schema, kModule, "config", "backend.command must be an array of strings");
                command->push_back(*s);
            }
        } else if (const auto s = toml_get<std::string>(*be, "command", file)) {
            command = split_words(*s);
        }
        set_backend(c, toml_get<std::string>(*be, "kind", file), command);
    }
    if (const auto v = toml_get<std::size_t>(doc, "threshold", file)) c.threshold = *v;
    if (const auto* arr = doc["thresholds"].as_array()) {
        c.thresholds.clear();
        for (const auto& el : *arr) {
            const auto n = el.value<std::int64_t>();
            if (!n || *n < 1) throw Error(ErrorKind::schema, kModule, "config", "thresholds must be positive integers");
            c.thresholds.push_back(static_cast<std::size_t>(*n));
        }
    }
    if (const auto v = toml_get<std::size_t>(doc, "k", file)) c.k = *v;
    if (const auto v = toml_get<std::string>(doc, "mode", file)) c.mode = *v;
    if (const auto v = toml_get<std::string>(doc, "order", file)) c.order = *v;
    if (const auto v = toml_get<std::string>(doc, "select_by", file)) c.select_by = *v;
    if (const auto v = toml_get<std::string>(doc, "macro_over", file)) c.macro_over = parse_macro_over(*v);
    if (const auto v = toml_get<std::uint64_t>(doc, "seed", file)) c.seed = *v;
    if (const auto v = toml_get<std::size_t>(doc, "n_per_class", file)) c.n_per_class = *v;
    if (const auto v = toml_get<double>(doc, "noise", file)) c.noise = *v;
    if (const auto v = toml_get<std::size_t>(doc, "classes", file)) c.classes = *v;
    if (const auto v = toml_get<std::size_t>(doc, "top", file)) c.top = *v;
}

namespace {

/// Flags as given on the command line; unset means "not given".
struct Flags {
    std::optional<std::string> config;
    std::optional<std::string> out;
    std::map<std::string, std::optional<std::string>> paths;
    std::optional<std::size_t> batch_size, epochs, threshold, k, n_per_class, classes, top;
    std::optional<double> lr, l2, noise;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode, order, select_by, macro_over, thresholds, backend, backend_command;
};

struct Command {
    std::string name;
    std::vector<std::string> required_paths;
};

/// Collects artifacts and writes the run manifest.
class Run {
public:
    Run(std::string command, RunConfig config)
        : command_(std::move(command)), config_(std::move(config)), start_(std::chrono::steady_clock::now()),
          started_at_(std::chrono::system_clock::now()) {}

    const RunConfig& config() const { return config_; }
    ordered_json& details() { return details_; }

    void input(const std::string& key) {
        const auto& p = config_.paths.at(key);
        inputs_[key] = {{"path", p.generic_string()}, {"fnv1a64", fingerprint_path(p)}};
    }

    fs::path path(const std::string& name) const { return config_.out / name; }

    void write(const std::string& name, std::string_view content) {
        io::write_file(path(name), content, kModule, command_);
        outputs_[name] = text::hex64(text::fnv1a64(content));
    }

    void record_output(const std::string& name) { outputs_[name] = fingerprint_path(path(name)); }

    void finish() {
        const auto cfg = config_.to_json();
        ordered_json m;
        m["command"] = command_;
        m["toolkit_version"] = CLINCASCADE_VERSION;
        m["config"] = cfg;
        m["config_hash"] = text::hex64(text::fnv1a64(cfg.dump()));
        m["inputs"] = inputs_;
        m["outputs"] = outputs_;
        m["details"] = details_;
        const auto t = std::chrono::system_clock::to_time_t(started_at_);
        std::tm tm{};
        gmtime_r(&t, &tm);
        char stamp[32];
        std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
        m["timing"] = {{"started_at", stamp},
                       {"wall_time_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count()}};
        io::write_file(path("manifest." + command_ + ".json"), m.dump(2) + "\n", kModule, command_);
    }

private:
    std::string command_;
    RunConfig config_;
    std::chrono::steady_clock::time_point start_;
    std::chrono::system_clock::time_point started_at_;
    ordered_json inputs_ = ordered_json::object();
    ordered_json outputs_ = ordered_json::object();
    ordered_json details_ = ordered_json::object();
};

corpus::Corpus load_annotated(Run& run) {
    run.input("corpus");
    auto c = corpus::load_corpus(run.config().paths.at("corpus"));
    if (run.config().paths.contains("relations")) {
        run.input("relations");
        const auto table = ontology::load_relation_table(run.config().paths.at("relations"));
        c = ontology::annotate_corpus(c, table);
    }
    return c;
}

classifier::Hyperparams train_hp(const RunConfig& c, std::string_view name) {
    auto hp = c.hp;
    hp.seed = derive_seed(c.seed, name);
    return hp;
}

/// Trains the configured pipeline on `train`. For "search" the training set
/// is split again to carve out a validation part.
cascade::CascadePipeline train_pipeline(const RunConfig& c, const corpus::Corpus& train, std::string_view name,
                                        ordered_json* details) {
    const auto hp = train_hp(c, std::string(name) + ":train");
    if (c.order == "vanilla" || c.order == "none") {
        if (details) details->operator[]("orderings_trained") = ordered_json::array({""});
        return cascade::train_vanilla(train, c.backend, hp);
    }
    if (c.order != "search") {
        const auto order = cascade::CascadeOrder::parse(c.order);
        if (details) details->operator[]("orderings_trained") = ordered_json::array({order.to_string()});
        return cascade::train_cascade(train, order, c.backend, hp);
    }
    corpus::SplitSpec spec;
    spec.fractions = {0.875, 0.125};
    spec.seed = derive_seed(c.seed, std::string(name) + ":validation");
    const auto parts = corpus::stratified_split(train, spec);
    if (parts[1].empty()) {
        throw Error(ErrorKind::empty_result, kModule, "train", "validation split is empty",
                    "use more reports or an explicit --order");
    }
    const auto orders = cascade::enumerate_orders(kAllRelations);
    const auto metric = c.select_by == "macro_f1" ? cascade::SelectionMetric::macro_f1 : cascade::SelectionMetric::accuracy;
    auto search = cascade::select_best_order(parts[0], parts[1], orders, c.backend, hp, c.k, metric);
    if (details) {
        ordered_json trained = ordered_json::array();
        ordered_json reports = ordered_json::array();
        for (const auto& [order, report] : search.reports) {
            trained.push_back(order.to_string());
            reports.push_back({{"order", order.to_string()},
                               {"accuracy", report.accuracy},
                               {"macro_f1", report.macro_f1},
                               {"topk_accuracy", report.topk_accuracy},
                               {"topk_f1", report.topk_f1}});
        }
        (*details)["orderings_trained"] = trained;
        (*details)["validation"] = reports;
        (*details)["selected_order"] = search.best.to_string();
        (*details)["n_validation"] = parts[1].size();
    }
    return std::move(search.pipelines.at(search.best.to_string()));
}

std::pair<corpus::Corpus, corpus::Corpus> train_test(const RunConfig& c, const corpus::Corpus& data) {
    corpus::SplitSpec spec;
    spec.seed = derive_seed(c.seed, "split");
    auto parts = corpus::stratified_split(data, spec);
    return {std::move(parts[0]), std::move(parts[1])};
}

// ---------------------------------------------------------------------------

void cmd_synth(Run& run) {
    const auto& c = run.config();
    run.input("relations");
    auto table = ontology::load_relation_table(c.paths.at("relations"));
    if (c.classes > 0) table = table.head(c.classes);
    const auto generated = corpus::generate_synthetic(table, c.n_per_class, c.noise, c.seed);
    run.write("synthetic.jsonl", corpus::to_jsonl(generated));
    run.details() = {{"n_reports", generated.size()}, {"n_classes", generated.label_counts().size()}};
}

void cmd_anonymize(Run& run, std::ostream& out) {
    const auto& c = run.config();
    run.input("corpus");
    run.input("rules");
    const auto input = corpus::load_corpus(c.paths.at("corpus"));
    const auto rules = anonymizer::load_rules(c.paths.at("rules"));
    const auto [masked, report] = anonymizer::anonymize(input, rules);
    run.write("anon.jsonl", corpus::to_jsonl(masked));
    const std::string audit = report.to_json() + "\n";
    if (c.paths.contains("audit")) {
        io::write_file(c.paths.at("audit"), audit, kModule, "anonymize");
        run.details()["audit_path"] = c.paths.at("audit").generic_string();
    } else {
        run.write("audit.json", audit);
    }
    run.details()["n_reports"] = masked.size();
    run.details()["n_numeric_removed"] = report.n_numeric_removed;
    run.details()["n_masked"] = report.total_masked();
    out << "anonymized " << masked.size() << " reports: " << report.n_numeric_removed << " numeric characters removed, "
        << report.total_masked() << " entities masked\n";
}

void cmd_relations(Run& run, std::ostream& out) {
    const auto& c = run.config();
    for (const auto* key : {"corpus", "translations", "umls", "snomed", "icd10"}) run.input(key);
    const auto input = corpus::load_corpus(c.paths.at("corpus"));
    const auto translations = ontology::load_translation_map(c.paths.at("translations"));
    const std::vector<ontology::OntologySnapshot> snapshots = {ontology::load_snapshot(c.paths.at("umls")),
                                                               ontology::load_snapshot(c.paths.at("snomed")),
                                                               ontology::load_snapshot(c.paths.at("icd10"))};
    const auto labels = input.labels();
    const auto derived = ontology::derive_relations(labels, translations, snapshots);
    run.write("relations.tsv", ontology::to_tsv(derived.table));
    ordered_json unresolved = ordered_json::array();
    for (const auto& u : derived.unresolved) {
        unresolved.push_back({{"label", u.label}, {"english_name", u.english_name}, {"reason", u.reason}});
    }
    run.write("unresolved.json", unresolved.dump(2) + "\n");
    if (derived.unresolved.empty()) {
        run.write("annotated.jsonl", corpus::to_jsonl(ontology::annotate_corpus(input, derived.table)));
    }
    run.details() = {{"n_labels", labels.size()},
                     {"n_resolved", derived.table.size()},
                     {"n_unresolved", derived.unresolved.size()}};
    out << "derived relations for " << derived.table.size() << " of " << labels.size() << " labels";
    if (!derived.unresolved.empty()) out << "; " << derived.unresolved.size() << " unresolved (see unresolved.json)";
    out << "\n";
}

void cmd_train(Run& run, std::ostream& out) {
    const auto& c = run.config();
    const auto data = corpus::filter_by_threshold(load_annotated(run), c.threshold);
    const auto [train, test] = train_test(c, data);
    run.write("split/train.jsonl", corpus::to_jsonl(train));
    run.write("split/test.jsonl", corpus::to_jsonl(test));
    const auto pipeline = train_pipeline(c, train, "train", &run.details());
    cascade::save_pipeline(pipeline, run.path("pipeline"));
    run.record_output("pipeline");
    run.details()["n_classes"] = data.label_counts().size();
    run.details()["n_train"] = train.size();
    run.details()["n_test"] = test.size();
    run.details()["order"] = pipeline.order_string();
    out << "trained " << (pipeline.is_vanilla() ? std::string("vanilla") : pipeline.order_string()) << " pipeline on "
        << train.size() << " reports (" << data.label_counts().size() << " classes)\n";
}

void cmd_infer(Run& run, std::ostream& out) {
    const auto& c = run.config();
    run.input("pipeline");
    run.input("corpus");
    const auto pipeline = cascade::load_pipeline(c.paths.at("pipeline"));
    const auto input = corpus::load_corpus(c.paths.at("corpus"));
    const auto mode = cascade::parse_mode(c.mode);
    std::string lines;
    for (const auto& r : input) {
        const auto inf = cascade::infer_detailed(pipeline, r.text, mode, &r.relations);
        ordered_json row;
        row["id"] = r.id;
        row["truth"] = r.pathology;
        row["top_k"] = inf.pathology.top_k(std::min(c.k, inf.pathology.labels().size()));
        row["labels"] = inf.pathology.labels();
        row["probs"] = inf.pathology.probabilities();
        if (!inf.stages.empty()) {
            row["stages"] = ordered_json::object();
            for (std::size_t i = 0; i < inf.stages.size(); ++i) {
                row["stages"][std::string(to_string(pipeline.order[i]))] = inf.stages[i].top1();
            }
        }
        lines += row.dump() + "\n";
    }
    run.write("predictions.jsonl", lines);
    run.details() = {{"n_predictions", input.size()}, {"mode", c.mode}, {"order", pipeline.order_string()}};
    out << "wrote " << input.size() << " predictions (" << c.mode << " mode)\n";
}

struct PredictionRow {
    std::string id;
    std::optional<std::string> truth;
    classifier::PredictionResult result;
};

std::vector<PredictionRow> load_predictions(const fs::path& path) {
    const std::string op = "evaluate";
    const auto content = io::read_file(path, kModule, op);
    std::vector<PredictionRow> rows;
    std::size_t line_no = 0;
    std::istringstream in(content);
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
            const auto doc = nlohmann::json::parse(line);
            PredictionRow row;
            row.id = doc.at("id").get<std::string>();
            if (doc.contains("truth")) row.truth = doc["truth"].get<std::string>();
            row.result = classifier::PredictionResult(doc.at("labels").get<std::vector<std::string>>(),
                                                      doc.at("probs").get<std::vector<double>>());
            rows.push_back(std::move(row));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::schema, kModule, op,
                        path.string() + " line " + std::to_string(line_no) + ": " + e.what(),
                        "each line needs id, labels and probs");
        }
    }
    return rows;
}

void write_report_artifacts(Run& run, const eval::EvaluationReport& report) {
    run.write("report.json", report.to_json().dump(2) + "\n");
    run.write("confusion.csv", report.confusion_csv());
    eval::write_heatmap(report, run.path("confusion.ppm"));
    run.record_output("confusion.ppm");
}

void cmd_evaluate(Run& run, std::ostream& out) {
    const auto& c = run.config();
    run.input("predictions");
    const auto rows = load_predictions(c.paths.at("predictions"));
    std::map<std::string, std::string> truth_by_id;
    if (c.paths.contains("truth")) {
        run.input("truth");
        for (const auto& r : corpus::load_corpus(c.paths.at("truth"))) truth_by_id[r.id] = r.pathology;
    }
    std::vector<std::string> truths;
    std::vector<classifier::PredictionResult> preds;
    std::vector<std::string> missing;
    for (const auto& row : rows) {
        if (const auto it = truth_by_id.find(row.id); it != truth_by_id.end()) {
            truths.push_back(it->second);
        } else if (!c.paths.contains("truth") && row.truth) {
            truths.push_back(*row.truth);
        } else {
            missing.push_back(row.id);
            continue;
        }
        preds.push_back(row.result);
    }
    if (!missing.empty()) {
        throw Error(ErrorKind::validation, kModule, "evaluate",
                    std::to_string(missing.size()) + " prediction(s) have no truth label, first id '" + missing.front() + "'",
                    "pass --truth with the corpus the predictions were made on");
    }
    const auto report = eval::evaluate(truths, preds, c.k, c.macro_over);
    write_report_artifacts(run, report);
    run.details() = {{"n", report.n}, {"accuracy", report.accuracy}, {"macro_f1", report.macro_f1}};
    out << report.table();
}

void cmd_sweep(Run& run, std::ostream& out) {
    const auto& c = run.config();
    const auto data = load_annotated(run);
    const auto mode = cascade::parse_mode(c.mode);
    const RunConfig cfg = c;
    const eval::PipelineFactory factory = [&cfg, mode](const corpus::Corpus& train) -> eval::Predictor {
        auto pipeline = std::make_shared<cascade::CascadePipeline>(train_pipeline(cfg, train, "sweep", nullptr));
        return [pipeline, mode](const corpus::Report& r) { return cascade::infer(*pipeline, r.text, mode, &r.relations); };
    };
    corpus::SplitSpec split;
    split.seed = derive_seed(c.seed, "split");
    const auto rows = eval::threshold_sweep(data, c.thresholds, factory, c.k, split);
    run.write("sweep.csv", eval::sweep_csv(rows));
    ordered_json summary = ordered_json::array();
    for (const auto& row : rows) summary.push_back({{"threshold", row.threshold}, {"n_classes", row.n_classes}});
    run.details()["rows"] = summary;
    out << eval::sweep_csv(rows);
}

void cmd_report(Run& run, std::ostream& out) {
    const auto& c = run.config();
    run.input("report");
    const auto doc = nlohmann::json::parse(io::read_file(c.paths.at("report"), kModule, "report"), nullptr, false);
    if (doc.is_discarded()) throw Error(ErrorKind::schema, kModule, "report", "report file is not valid JSON");
    const auto report = eval::EvaluationReport::from_json(doc);
    std::string md = "# Evaluation report\n\n```\n" + report.table() + "```\n\n## Most frequent confusions\n\n";
    const auto pairs = eval::confusion_top_pairs(report, c.top);
    if (pairs.empty()) {
        md += "none\n";
    } else {
        md += "| truth | predicted | count |\n|---|---|---|\n";
        for (const auto& p : pairs) md += "| " + p.truth + " | " + p.predicted + " | " + std::to_string(p.count) + " |\n";
    }
    run.write("report.md", md);
    eval::write_heatmap(report, run.path("confusion.ppm"));
    run.record_output("confusion.ppm");
    out << md;
}

void cmd_conformance(Run& run, std::ostream& out) {
    const auto& c = run.config();
    if (c.backend.command.empty()) {
        throw Error(ErrorKind::validation, kModule, "conformance", "no backend command given",
                    "pass --backend-command \"model-server --stdio\"");
    }
    const auto checks = backend::run_conformance(c.backend.command);
    ordered_json doc = ordered_json::array();
    std::size_t failed = 0;
    for (const auto& ch : checks) {
        out << (ch.passed ? "PASS " : "FAIL ") << ch.name;
        if (!ch.passed && !ch.detail.empty()) out << " (" << ch.detail << ")";
        out << "\n";
        if (!ch.passed) ++failed;
        doc.push_back({{"name", ch.name}, {"passed", ch.passed}, {"detail", ch.detail}});
    }
    run.write("conformance.json", doc.dump(2) + "\n");
    run.details() = {{"n_checks", checks.size()}, {"n_failed", failed}};
    if (failed > 0) {
        throw Error(ErrorKind::backend, kModule, "conformance",
                    std::to_string(failed) + " of " + std::to_string(checks.size()) + " conformance checks failed");
    }
}

// ---------------------------------------------------------------------------

void validate(const Command& cmd, const RunConfig& c) {
    std::vector<std::string> problems;
    for (const auto& key : cmd.required_paths) {
        if (!c.paths.contains(key)) problems.push_back("missing required path '" + key + "'");
    }
    for (const auto& [key, p] : c.paths) {
        if (key == "audit") continue;
        if (!fs::exists(p)) problems.push_back(key + " path '" + p.generic_string() + "' does not exist");
    }
    try {
        c.hp.validate();
    } catch (const Error& e) {
        problems.push_back(e.what());
    }
    if (c.k < 1) problems.push_back("k must be >= 1");
    if (c.threshold < 1) problems.push_back("threshold must be >= 1");
    if (c.thresholds.empty()) problems.push_back("thresholds must be nonempty");
    if (c.mode != "oracle" && c.mode != "predictive") problems.push_back("mode must be 'oracle' or 'predictive'");
    if (c.select_by != "accuracy" && c.select_by != "macro_f1") problems.push_back("select_by must be 'accuracy' or 'macro_f1'");
    if (c.order != "search" && c.order != "vanilla" && c.order != "none") {
        try {
            (void)cascade::CascadeOrder::parse(c.order);
        } catch (const Error& e) {
            problems.push_back(e.what());
        }
    }
    if (c.noise < 0.0 || c.noise > 1.0) problems.push_back("noise must be in [0, 1]");
    if (c.n_per_class < 1) problems.push_back("n_per_class must be >= 1");
    if (c.top < 1) problems.push_back("top must be >= 1");
    if (c.backend.kind == classifier::BackendSpec::Kind::external && c.backend.command.empty()) {
        problems.push_back("external backend needs a command");
    }
    if (!problems.empty()) {
        throw Error(ErrorKind::validation, kModule, cmd.name, join(problems, "; "),
                    "see `clincascade " + cmd.name + " --help`");
    }
}

RunConfig resolve(const Flags& f) {
    RunConfig c;
    if (f.config) apply_config_file(c, *f.config);
    for (const auto& [key, v] : f.paths) {
        if (v) c.paths[key] = *v;
    }
    if (f.out) c.out = *f.out;
    if (f.batch_size) c.hp.batch_size = *f.batch_size;
    if (f.lr) c.hp.learning_rate = *f.lr;
    if (f.epochs) c.hp.epochs = *f.epochs;
    if (f.l2) c.hp.l2 = *f.l2;
    if (f.threshold) c.threshold = *f.threshold;
    if (f.thresholds) c.thresholds = parse_thresholds(*f.thresholds);
    if (f.k) c.k = *f.k;
    if (f.mode) c.mode = *f.mode;
    if (f.order) c.order = *f.order;
    if (f.select_by) c.select_by = *f.select_by;
    if (f.macro_over) c.macro_over = parse_macro_over(*f.macro_over);
    if (f.seed) c.seed = *f.seed;
    if (f.n_per_class) c.n_per_class = *f.n_per_class;
    if (f.noise) c.noise = *f.noise;
    if (f.classes) c.classes = *f.classes;
    if (f.top) c.top = *f.top;
    std::optional<std::vector<std::string>> command;
    if (f.backend_command) command = split_words(*f.backend_command);
    set_backend(c, f.backend, command);
    return c;
}

std::string error_json(const Error& e) {
    ordered_json doc;
    doc["error"] = {{"module", e.module()},
                    {"operation", e.operation()},
                    {"kind", to_string(e.kind())},
                    {"message", e.what()},
                    {"hint", e.hint()}};
    return doc.dump();
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    const RunConfig defaults;
    Flags f;
    CLI::App app{"Clinical report anonymization, ontology relations and cascaded pathology classification.", "clincascade"};
    app.set_version_flag("--version", std::string(CLINCASCADE_VERSION));
    app.require_subcommand(1);

    const auto common = [&](CLI::App* sub) {
        sub->add_option("--config", f.config, "TOML config file (flags override it)")->check(CLI::ExistingFile);
        sub->add_option("--out", f.out, "Output directory")->default_str(defaults.out.string());
        sub->add_option("--seed", f.seed, "Top-level seed; every random draw derives from it")
            ->default_str(std::to_string(defaults.seed));
    };
    const auto path = [&](CLI::App* sub, const std::string& flag, const std::string& key, const std::string& help) {
        sub->add_option(flag, f.paths[key], help);
    };
    const auto training = [&](CLI::App* sub) {
        sub->add_option("--batch-size", f.batch_size, "Mini-batch size")->default_str(std::to_string(defaults.hp.batch_size));
        sub->add_option("--lr", f.lr, "Learning rate")->default_str(format_double(defaults.hp.learning_rate));
        sub->add_option("--epochs", f.epochs, "Training epochs")->default_str(std::to_string(defaults.hp.epochs));
        sub->add_option("--l2", f.l2, "L2 penalty")->default_str(format_double(defaults.hp.l2));
        sub->add_option("--order", f.order, "Cascade order (e.g. type>site>severity), 'search' or 'vanilla'")
            ->default_str(defaults.order);
        sub->add_option("--select-by", f.select_by, "Order search metric: accuracy|macro_f1")->default_str(defaults.select_by);
        sub->add_option("--backend", f.backend, "Classifier backend: builtin|external")->default_str("builtin");
        sub->add_option("--backend-command", f.backend_command, "Model server command line (implies external)");
        path(sub, "--relations", "relations", "Relation table TSV used to annotate the corpus");
    };
    const auto k_flag = [&](CLI::App* sub) {
        sub->add_option("-k,--k", f.k, "Top-k cutoff")->default_str(std::to_string(defaults.k));
    };
    const auto mode_flag = [&](CLI::App* sub) {
        sub->add_option("--mode", f.mode, "Inference mode: predictive|oracle")->default_str(defaults.mode);
    };

    std::vector<std::pair<CLI::App*, Command>> commands;
    const auto add = [&](const std::string& name, const std::string& help, std::vector<std::string> required) {
        auto* sub = app.add_subcommand(name, help);
        common(sub);
        commands.push_back({sub, {name, std::move(required)}});
        return sub;
    };

    {
        auto* s = add("anonymize", "Strip digits and mask names; writes anon.jsonl and audit.json", {"corpus", "rules"});
        path(s, "--in", "corpus", "Corpus (.jsonl or .csv)");
        path(s, "--rules", "rules", "Masking rules TOML");
        path(s, "--report", "audit", "Audit JSON path (default <out>/audit.json)");
    }
    {
        auto* s = add("relations", "Derive type/severity/site per label from ontology snapshots; writes relations.tsv",
                      {"corpus", "translations", "umls", "snomed", "icd10"});
        path(s, "--in", "corpus", "Corpus whose pathology labels are resolved");
        path(s, "--translations", "translations", "Spanish to English TSV");
        path(s, "--umls", "umls", "UMLS-like snapshot JSON");
        path(s, "--snomed", "snomed", "SNOMED-like snapshot JSON");
        path(s, "--icd10", "icd10", "ICD-10-like snapshot JSON");
    }
    {
        auto* s = add("train", "Filter, split and train a cascade; writes pipeline/ and split/", {"corpus"});
        path(s, "--in", "corpus", "Relation-annotated corpus");
        training(s);
        k_flag(s);
        s->add_option("--threshold", f.threshold, "Minimum reports per class")->default_str(std::to_string(defaults.threshold));
    }
    {
        auto* s = add("infer", "Run a trained pipeline over a corpus; writes predictions.jsonl", {"pipeline", "corpus"});
        path(s, "--pipeline", "pipeline", "Pipeline bundle directory");
        path(s, "--in", "corpus", "Corpus to classify");
        mode_flag(s);
        k_flag(s);
    }
    {
        auto* s = add("evaluate", "Score predictions; writes report.json, confusion.csv and confusion.ppm", {"predictions"});
        path(s, "--pred", "predictions", "Predictions JSONL from `infer`");
        path(s, "--truth", "truth", "Corpus with the true labels (default: truth fields in --pred)");
        k_flag(s);
        s->add_option("--macro-over", f.macro_over, "Macro-F1 label set: truth|union")->default_str("truth");
    }
    {
        auto* s = add("sweep", "Class-frequency threshold sweep; writes sweep.csv", {"corpus"});
        path(s, "--in", "corpus", "Relation-annotated corpus");
        s->add_option("--thresholds", f.thresholds, "Comma-separated thresholds")->default_str("2,10,25,50,61,75,100");
        training(s);
        mode_flag(s);
        k_flag(s);
    }
    {
        auto* s = add("report", "Render report.md and a confusion heatmap from report.json", {"report"});
        path(s, "--report", "report", "report.json from `evaluate`");
        s->add_option("--top", f.top, "Confusion pairs to list")->default_str(std::to_string(defaults.top));
    }
    {
        auto* s = add("synth", "Generate a synthetic cue-token corpus; writes synthetic.jsonl", {"relations"});
        path(s, "--relations", "relations", "Relation table TSV");
        s->add_option("--n-per-class", f.n_per_class, "Reports per disease")->default_str(std::to_string(defaults.n_per_class));
        s->add_option("--noise", f.noise, "Cue replacement probability")->default_str(format_double(defaults.noise));
        s->add_option("--classes", f.classes, "Use the first N table rows (0 = all)")->default_str("0");
    }
    {
        auto* s = add("conformance", "Check a model server against the line protocol; writes conformance.json", {});
        s->add_option("--backend-command", f.backend_command, "Model server command line")->required();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    for (const auto& [sub, cmd] : commands) {
        if (!sub->parsed()) continue;
        try {
            auto config = resolve(f);
            validate(cmd, config);
            Run r(cmd.name, std::move(config));
            if (cmd.name == "anonymize") cmd_anonymize(r, out);
            else if (cmd.name == "relations") cmd_relations(r, out);
            else if (cmd.name == "train") cmd_train(r, out);
            else if (cmd.name == "infer") cmd_infer(r, out);
            else if (cmd.name == "evaluate") cmd_evaluate(r, out);
            else if (cmd.name == "sweep") cmd_sweep(r, out);
            else if (cmd.name == "report") cmd_report(r, out);
            else if (cmd.name == "synth") cmd_synth(r);
            else if (cmd.name == "conformance") cmd_conformance(r, out);
            r.finish();
            return 0;
        } catch (const Error& e) {
            err << error_json(e) << "\n";
            return 1;
        } catch (const std::exception& e) {
            err << error_json(Error(ErrorKind::validation, kModule, cmd.name, e.what())) << "\n";
            return 1;
        }
    }
    return 2;
}

}  // namespace clincascade::cli
