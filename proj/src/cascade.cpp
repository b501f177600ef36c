#include "clincascade/cascade.hpp"

#include <algorithm>
#include <future>
#include <set>

#include <json.hpp>

#include "clincascade/augment.hpp"
#include "clincascade/error.hpp"
#include "clincascade/io.hpp"
#include "clincascade/rng.hpp"
#include "clincascade/text.hpp"

namespace clincascade::cascade {

namespace {

constexpr const char* kModule = "cascade";
constexpr const char* kBundleFormat = "clincascade.pipeline";
constexpr int kBundleVersion = 1;

Error validation(const std::string& op, const std::string& msg, std::string hint = {}) {
    return Error(ErrorKind::validation, kModule, op, msg, std::move(hint));
}

std::size_t relation_rank(Relation r) { return static_cast<std::size_t>(r); }

void permutations(const std::vector<Relation>& pool, std::size_t k, std::vector<Relation>& current,
                  std::vector<bool>& used, std::vector<CascadeOrder>& out) {
    if (current.size() == k) {
        out.emplace_back(current);
        return;
    }
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (used[i]) continue;
        used[i] = true;
        current.push_back(pool[i]);
        permutations(pool, k, current, used, out);
        current.pop_back();
        used[i] = false;
    }
}

/// Model whose only label is `value`; used when a training split carries a
/// single value for a relation.
classifier::ClassifierModel constant_model(const std::string& value, std::span<const classifier::Example> examples) {
    std::vector<std::string> texts;
    for (const auto& e : examples) texts.push_back(e.text);
    auto vocab = classifier::fit_vocabulary(texts);
    classifier::LinearModel linear;
    linear.n_labels = 1;
    linear.n_features = vocab.size();
    linear.weights.assign(vocab.size(), 0.0);
    linear.bias.assign(1, 0.0);
    return classifier::ClassifierModel::builtin({value}, std::move(vocab), std::move(linear));
}

classifier::Hyperparams child(const classifier::Hyperparams& hp, const std::string& name) {
    auto out = hp;
    out.seed = derive_seed(hp.seed, name);
    return out;
}

std::string label_fingerprint(const corpus::Corpus& c) {
    std::string joined;
    for (const auto& l : c.labels()) joined += l + '\n';
    return text::hex64(text::fnv1a64(joined));
}

const std::map<Relation, std::string> kNoRelations;

}  // namespace

CascadeOrder::CascadeOrder(std::vector<Relation> stages) : stages_(std::move(stages)) {
    if (stages_.empty() || stages_.size() > 3) throw validation("cascade_order", "an order has 1 to 3 stages");
    std::set<Relation> seen(stages_.begin(), stages_.end());
    if (seen.size() != stages_.size()) throw validation("cascade_order", "an order cannot repeat a relation");
}

CascadeOrder CascadeOrder::parse(std::string_view spec) {
    std::string normalized(spec);
    std::replace(normalized.begin(), normalized.end(), ',', '>');
    std::vector<Relation> stages;
    for (const auto& part : text::split(normalized, '>')) {
        // Accept "->" as well as ">".
        std::string name = text::trim(part);
        if (!name.empty() && name.back() == '-') name.pop_back();
        name = text::normalize_label(name);
        if (name == "t") name = "type";
        else if (name == "gr") name = "severity";
        else if (name == "sit") name = "site";
        const auto r = parse_relation(name);
        if (!r) {
            throw validation("cascade_order", "unknown relation '" + name + "' in order '" + std::string(spec) + "'",
                             "use type, severity and site separated by '>' or ','");
        }
        stages.push_back(*r);
    }
    return CascadeOrder(std::move(stages));
}

std::string CascadeOrder::to_string() const {
    std::string out;
    for (const auto r : stages_) {
        if (!out.empty()) out += '>';
        out += clincascade::to_string(r);
    }
    return out;
}

std::string_view to_string(Mode mode) noexcept { return mode == Mode::oracle ? "oracle" : "predictive"; }

Mode parse_mode(std::string_view name) {
    const std::string key = text::normalize_label(name);
    if (key == "oracle" || key == "or") return Mode::oracle;
    if (key == "predictive" || key == "pr") return Mode::predictive;
    throw validation("parse_mode", "unknown mode '" + std::string(name) + "'", "use oracle or predictive");
}

std::vector<CascadeOrder> enumerate_orders(std::span<const Relation> relations) {
    std::vector<Relation> pool(relations.begin(), relations.end());
    std::sort(pool.begin(), pool.end(), [](Relation a, Relation b) { return relation_rank(a) < relation_rank(b); });
    pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
    if (pool.empty()) throw validation("enumerate_orders", "relation set is empty");
    std::vector<CascadeOrder> out;
    for (std::size_t k = 1; k <= pool.size(); ++k) {
        std::vector<Relation> current;
        std::vector<bool> used(pool.size(), false);
        permutations(pool, k, current, used, out);
    }
    return out;
}

std::string augment_input(std::string_view text, const KnownRelations& known) {
    std::vector<augment::Segment> segments;
    for (const auto& [r, value] : known) {
        for (const auto& s : segments) {
            if (s.first == clincascade::to_string(r)) {
                throw validation("augment_input", "relation '" + s.first + "' given twice");
            }
        }
        segments.emplace_back(std::string(clincascade::to_string(r)), value);
    }
    return augment::append(text, segments);
}

std::string CascadePipeline::order_string() const {
    return order.empty() ? std::string("vanilla") : CascadeOrder(order).to_string();
}

CascadePipeline train_cascade(const corpus::Corpus& train, const CascadeOrder& order,
                              const classifier::BackendSpec& backend, const classifier::Hyperparams& hp,
                              const TrainingObserver& observer) {
    const std::string op = "train_cascade";
    for (const auto& r : train) {
        for (const auto rel : order.stages()) {
            if (!r.relation(rel)) {
                throw validation(op, "report '" + r.id + "' has no " + std::string(clincascade::to_string(rel)) + " annotation",
                                 "annotate the corpus with a relation table first");
            }
        }
    }

    CascadePipeline p;
    p.order = order.stages();
    p.backend = backend;
    p.corpus_fingerprint = text::hex64(text::fnv1a64(corpus::to_jsonl(train)));
    p.label_fingerprint = label_fingerprint(train);

    for (std::size_t i = 0; i <= order.size(); ++i) {
        const bool is_final = i == order.size();
        std::vector<classifier::Example> examples;
        examples.reserve(train.size());
        std::set<std::string> values;
        for (const auto& r : train) {
            KnownRelations known;
            for (std::size_t j = 0; j < i; ++j) known.emplace_back(order.stages()[j], *r.relation(order.stages()[j]));
            std::string label = is_final ? r.pathology : *r.relation(order.stages()[i]);
            values.insert(label);
            examples.push_back({augment_input(r.text, known), std::move(label)});
        }
        if (observer) observer(i, examples);

        const std::string name = is_final ? std::string("final") : "stage:" + std::to_string(i) + ":" +
                                                                      std::string(clincascade::to_string(order.stages()[i]));
        if (!is_final && values.size() == 1) {
            p.stage_models.push_back(constant_model(*values.begin(), examples));
            continue;
        }
        auto model = classifier::train(backend, examples, child(hp, name));
        if (is_final) p.final_model = std::move(model);
        else p.stage_models.push_back(std::move(model));
    }
    return p;
}

CascadePipeline train_vanilla(const corpus::Corpus& train, const classifier::BackendSpec& backend,
                              const classifier::Hyperparams& hp) {
    CascadePipeline p;
    p.backend = backend;
    p.corpus_fingerprint = text::hex64(text::fnv1a64(corpus::to_jsonl(train)));
    p.label_fingerprint = label_fingerprint(train);
    std::vector<classifier::Example> examples;
    for (const auto& r : train) examples.push_back({r.text, r.pathology});
    p.final_model = classifier::train(backend, examples, child(hp, "final"));
    return p;
}

Inference infer_detailed(const CascadePipeline& pipeline, std::string_view text, Mode mode,
                         const std::map<Relation, std::string>* oracle_relations) {
    if (!pipeline.final_model) throw validation("infer", "pipeline has no final model");
    Inference out;
    KnownRelations known;
    if (mode == Mode::oracle) {
        for (const auto rel : pipeline.order) {
            const auto it = oracle_relations ? oracle_relations->find(rel) : kNoRelations.end();
            if (!oracle_relations || it == oracle_relations->end()) {
                throw validation("infer", "oracle mode needs a true " + std::string(clincascade::to_string(rel)) + " value",
                                 "annotate the input or use predictive mode");
            }
            known.emplace_back(rel, it->second);
        }
    } else {
        for (std::size_t i = 0; i < pipeline.order.size(); ++i) {
            auto pred = pipeline.stage_models[i].predict(augment_input(text, known));
            known.emplace_back(pipeline.order[i], pred.top1());
            out.stages.push_back(std::move(pred));
        }
    }
    out.pathology = pipeline.final_model->predict(augment_input(text, known));
    return out;
}

classifier::PredictionResult infer(const CascadePipeline& pipeline, std::string_view text, Mode mode,
                                   const std::map<Relation, std::string>* oracle_relations) {
    return infer_detailed(pipeline, text, mode, oracle_relations).pathology;
}

std::vector<classifier::PredictionResult> predict_corpus(const CascadePipeline& pipeline, const corpus::Corpus& corpus,
                                                         Mode mode) {
    std::vector<classifier::PredictionResult> out;
    out.reserve(corpus.size());
    for (const auto& r : corpus) out.push_back(infer(pipeline, r.text, mode, &r.relations));
    return out;
}

eval::EvaluationReport evaluate_pipeline(const CascadePipeline& pipeline, const corpus::Corpus& corpus, Mode mode,
                                         std::size_t k) {
    std::vector<std::string> truths;
    for (const auto& r : corpus) truths.push_back(r.pathology);
    return eval::evaluate(truths, predict_corpus(pipeline, corpus, mode), k);
}

std::map<Relation, eval::EvaluationReport> evaluate_stages(const CascadePipeline& pipeline,
                                                           const corpus::Corpus& corpus, std::size_t k) {
    std::map<Relation, std::vector<std::string>> truths;
    std::map<Relation, std::vector<classifier::PredictionResult>> preds;
    for (const auto& r : corpus) {
        auto inf = infer_detailed(pipeline, r.text, Mode::predictive);
        for (std::size_t i = 0; i < pipeline.order.size(); ++i) {
            const auto rel = pipeline.order[i];
            const auto truth = r.relation(rel);
            if (!truth) {
                throw validation("evaluate_stages", "report '" + r.id + "' has no " +
                                                        std::string(clincascade::to_string(rel)) + " annotation");
            }
            truths[rel].push_back(*truth);
            preds[rel].push_back(std::move(inf.stages[i]));
        }
    }
    std::map<Relation, eval::EvaluationReport> out;
    for (const auto& [rel, t] : truths) out.emplace(rel, eval::evaluate(t, preds[rel], k));
    return out;
}

OrderSearch select_best_order(const corpus::Corpus& train, const corpus::Corpus& validation_set,
                              std::span<const CascadeOrder> orders, const classifier::BackendSpec& backend,
                              const classifier::Hyperparams& hp, std::size_t k, SelectionMetric metric) {
    if (orders.empty()) throw validation("select_best_order", "no orders to compare");

    using Outcome = std::pair<CascadePipeline, eval::EvaluationReport>;
    const auto run = [&](const CascadeOrder& order) -> Outcome {
        try {
            auto pipeline = train_cascade(train, order, backend, hp);
            auto report = evaluate_pipeline(pipeline, validation_set, Mode::predictive, k);
            return {std::move(pipeline), std::move(report)};
        } catch (const Error& e) {
            throw Error(e.kind(), e.module(), e.operation(), "order " + order.to_string() + ": " + e.what(), e.hint());
        }
    };

    std::vector<Outcome> outcomes;
    if (backend.kind == classifier::BackendSpec::Kind::builtin) {
        // Builtin training is pure, so orders train concurrently; results are
        // collected in input order.
        std::vector<std::future<Outcome>> jobs;
        for (const auto& order : orders) jobs.push_back(std::async(std::launch::async, run, std::cref(order)));
        for (auto& job : jobs) outcomes.push_back(job.get());
    } else {
        for (const auto& order : orders) outcomes.push_back(run(order));
    }

    const auto score = [&](const eval::EvaluationReport& r) {
        return metric == SelectionMetric::accuracy ? r.accuracy : r.macro_f1;
    };
    std::size_t best = 0;
    for (std::size_t i = 1; i < outcomes.size(); ++i) {
        if (score(outcomes[i].second) > score(outcomes[best].second)) best = i;
    }
    OrderSearch result{orders[best], {}, {}};
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        result.reports.emplace_back(orders[i], outcomes[i].second);
        result.pipelines.emplace(orders[i].to_string(), std::move(outcomes[i].first));
    }
    return result;
}

void save_pipeline(const CascadePipeline& pipeline, const std::filesystem::path& dir) {
    if (!pipeline.final_model) throw validation("save_pipeline", "pipeline has no final model");
    const std::string op = "save_pipeline";
    std::filesystem::create_directories(dir);

    nlohmann::ordered_json order = nlohmann::ordered_json::array();
    for (const auto r : pipeline.order) order.push_back(clincascade::to_string(r));
    io::write_file(dir / "order.json", nlohmann::ordered_json{{"stages", order}}.dump(2) + "\n", kModule, op);

    nlohmann::ordered_json stage_files = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < pipeline.order.size(); ++i) {
        const std::string name = "stage_" + std::to_string(i) + "_" + std::string(clincascade::to_string(pipeline.order[i])) + ".json";
        io::write_file(dir / name, pipeline.stage_models[i].to_json().dump() + "\n", kModule, op);
        stage_files.push_back(name);
    }
    io::write_file(dir / "final.json", pipeline.final_model->to_json().dump() + "\n", kModule, op);

    nlohmann::ordered_json manifest;
    manifest["format"] = kBundleFormat;
    manifest["version"] = kBundleVersion;
    manifest["order"] = order;
    manifest["backend"] = pipeline.backend.kind == classifier::BackendSpec::Kind::builtin ? "builtin" : "external";
    manifest["backend_command"] = pipeline.backend.command;
    manifest["stage_files"] = stage_files;
    manifest["final_file"] = "final.json";
    manifest["corpus_fingerprint"] = pipeline.corpus_fingerprint;
    manifest["label_set_fingerprint"] = pipeline.label_fingerprint;
    io::write_file(dir / "manifest.json", manifest.dump(2) + "\n", kModule, op);
}

CascadePipeline load_pipeline(const std::filesystem::path& dir) {
    const std::string op = "load_pipeline";
    const auto read_json = [&](const std::string& name) {
        try {
            return nlohmann::json::parse(io::read_file(dir / name, kModule, op));
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorKind::schema, kModule, op, name + ": " + e.what());
        }
    };
    const auto manifest = read_json("manifest.json");
    if (manifest.value("format", "") != kBundleFormat || manifest.value("version", 0) != kBundleVersion) {
        throw Error(ErrorKind::schema, kModule, op, "unsupported pipeline bundle format");
    }
    CascadePipeline p;
    const auto order_doc = read_json("order.json");
    for (const auto& name : order_doc.at("stages")) {
        const auto r = parse_relation(name.get<std::string>());
        if (!r) throw Error(ErrorKind::schema, kModule, op, "unknown relation in order.json");
        p.order.push_back(*r);
    }
    if (!p.order.empty()) CascadeOrder check(p.order);
    const auto stage_files = manifest.at("stage_files").get<std::vector<std::string>>();
    if (stage_files.size() != p.order.size()) {
        throw Error(ErrorKind::schema, kModule, op, "manifest lists a different number of stages than order.json");
    }
    for (const auto& f : stage_files) p.stage_models.push_back(classifier::ClassifierModel::from_json(read_json(f)));
    p.final_model = classifier::ClassifierModel::from_json(read_json(manifest.at("final_file").get<std::string>()));
    if (manifest.value("backend", "builtin") == "external") {
        p.backend = classifier::BackendSpec::external(manifest.at("backend_command").get<std::vector<std::string>>());
    }
    p.corpus_fingerprint = manifest.value("corpus_fingerprint", "");
    p.label_fingerprint = manifest.value("label_set_fingerprint", "");
    return p;
}

}  // namespace clincascade::cascade
