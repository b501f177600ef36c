#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "clincascade/classifier.hpp"
#include "clincascade/corpus.hpp"
#include "clincascade/eval.hpp"
#include "clincascade/relation.hpp"

namespace clincascade::cascade {

/// Ordered, duplicate-free sequence of one to three relations.
class CascadeOrder {
public:
    explicit CascadeOrder(std::vector<Relation> stages);

    /// Accepts "type>site>severity", "type,site,severity" or the short
    /// forms t / gr / sit.
    static CascadeOrder parse(std::string_view spec);

    const std::vector<Relation>& stages() const noexcept { return stages_; }
    std::size_t size() const noexcept { return stages_.size(); }
    std::string to_string() const;

    friend bool operator==(const CascadeOrder&, const CascadeOrder&) = default;
    friend auto operator<=>(const CascadeOrder&, const CascadeOrder&) = default;

private:
    std::vector<Relation> stages_;
};

enum class Mode { oracle, predictive };

std::string_view to_string(Mode mode) noexcept;
Mode parse_mode(std::string_view name);

/// Every non-repeating ordered selection of 1..n relations: shorter orders
/// first, then lexicographic in (type, severity, site) order. Three
/// relations give 3 + 6 + 6 = 15 orders.
std::vector<CascadeOrder> enumerate_orders(std::span<const Relation> relations);

using KnownRelations = std::vector<std::pair<Relation, std::string>>;

/// Appends ` ⟐ relation=value` per known relation, in order.
std::string augment_input(std::string_view text, const KnownRelations& known);

/// Stage models in cascade order plus the final pathology model. An empty
/// order is the vanilla text-only classifier.
struct CascadePipeline {
    std::vector<Relation> order;
    std::vector<classifier::ClassifierModel> stage_models;
    std::optional<classifier::ClassifierModel> final_model;
    classifier::BackendSpec backend;
    std::string corpus_fingerprint;
    std::string label_fingerprint;

    bool is_vanilla() const noexcept { return order.empty(); }
    std::string order_string() const;
};

/// Observes the examples each model is trained on; `stage` equals
/// order.size() for the final model.
using TrainingObserver = std::function<void(std::size_t stage, std::span<const classifier::Example>)>;

/// Teacher-forced cascade training: stage i sees the text augmented with the
/// TRUE values of stages 0..i-1; the final model sees all true values.
CascadePipeline train_cascade(const corpus::Corpus& train, const CascadeOrder& order,
                              const classifier::BackendSpec& backend, const classifier::Hyperparams& hp,
                              const TrainingObserver& observer = {});

/// Single text -> pathology classifier without relation augmentation.
CascadePipeline train_vanilla(const corpus::Corpus& train, const classifier::BackendSpec& backend,
                              const classifier::Hyperparams& hp);

struct Inference {
    classifier::PredictionResult pathology;
    /// Per-stage predictions (predictive mode only), in cascade order.
    std::vector<classifier::PredictionResult> stages;
};

/// Predictive mode runs the stages, feeding each one's top-1 forward; oracle
/// mode skips them and augments with `oracle_relations`, which must cover
/// every stage.
Inference infer_detailed(const CascadePipeline& pipeline, std::string_view text, Mode mode,
                         const std::map<Relation, std::string>* oracle_relations = nullptr);
classifier::PredictionResult infer(const CascadePipeline& pipeline, std::string_view text, Mode mode,
                                   const std::map<Relation, std::string>* oracle_relations = nullptr);

/// infer() over every report; oracle relations come from the reports.
std::vector<classifier::PredictionResult> predict_corpus(const CascadePipeline& pipeline, const corpus::Corpus& corpus,
                                                         Mode mode);

eval::EvaluationReport evaluate_pipeline(const CascadePipeline& pipeline, const corpus::Corpus& corpus, Mode mode,
                                         std::size_t k = 2);

/// Intermediate-stage scores in predictive mode, keyed by relation.
std::map<Relation, eval::EvaluationReport> evaluate_stages(const CascadePipeline& pipeline,
                                                           const corpus::Corpus& corpus, std::size_t k = 2);

enum class SelectionMetric { accuracy, macro_f1 };

struct OrderSearch {
    CascadeOrder best;
    std::vector<std::pair<CascadeOrder, eval::EvaluationReport>> reports;  // in input order
    std::map<std::string, CascadePipeline> pipelines;                      // keyed by order string
};

/// Trains one pipeline per order and scores each on `validation` in
/// predictive mode. Ties keep the earliest order.
OrderSearch select_best_order(const corpus::Corpus& train, const corpus::Corpus& validation,
                              std::span<const CascadeOrder> orders, const classifier::BackendSpec& backend,
                              const classifier::Hyperparams& hp, std::size_t k = 2,
                              SelectionMetric metric = SelectionMetric::accuracy);

/// Bundle layout: manifest.json, order.json, stage_<i>_<relation>.json,
/// final.json.
void save_pipeline(const CascadePipeline& pipeline, const std::filesystem::path& dir);
CascadePipeline load_pipeline(const std::filesystem::path& dir);

}  // namespace clincascade::cascade
