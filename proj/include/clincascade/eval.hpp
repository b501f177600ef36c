#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "clincascade/classifier.hpp"
#include "clincascade/corpus.hpp"

namespace clincascade::eval {

/// Which labels the macro average runs over: those with at least one true
/// example, or every label seen as truth or top-1 prediction.
enum class MacroAverage { truth, union_labels };

struct EvaluationReport {
    std::size_t n = 0;
    std::size_t k = 2;
    double accuracy = 0.0;
    double micro_f1 = 0.0;
    double macro_f1 = 0.0;
    double topk_accuracy = 0.0;
    /// Macro F1 over "effective" predictions: the truth when it is in the
    /// top-k, else the top-1 label. Equals macro_f1 at k = 1.
    double topk_f1 = 0.0;
    double topk_micro_f1 = 0.0;
    MacroAverage macro_over = MacroAverage::truth;

    /// Sorted union of true and top-1 labels; indexes the confusion matrix.
    std::vector<std::string> labels;
    /// confusion[truth][top-1] counts.
    std::vector<std::vector<std::size_t>> confusion;
    std::map<std::string, double> per_label_f1;

    nlohmann::ordered_json to_json() const;
    static EvaluationReport from_json(const nlohmann::json& doc);
    std::string confusion_csv() const;
    std::string table() const;
};

/// Scores ranked predictions against gold labels. Throws a validation error
/// on empty input, length mismatch or k = 0.
EvaluationReport evaluate(std::span<const std::string> truths, std::span<const classifier::PredictionResult> predictions,
                          std::size_t k = 2, MacroAverage macro_over = MacroAverage::truth);

struct ConfusionPair {
    std::string truth;
    std::string predicted;
    std::size_t count = 0;

    friend bool operator==(const ConfusionPair&, const ConfusionPair&) = default;
};

/// Off-diagonal cells by descending count; ties by (truth, predicted).
std::vector<ConfusionPair> confusion_top_pairs(const EvaluationReport& report, std::size_t n);

/// Renders the row-normalized confusion matrix as a binary PPM heatmap.
void write_heatmap(const EvaluationReport& report, const std::filesystem::path& path, std::size_t cell_px = 12);

using Predictor = std::function<classifier::PredictionResult(const corpus::Report&)>;
/// Builds a predictor from a training split.
using PipelineFactory = std::function<Predictor(const corpus::Corpus& train)>;

struct SweepRow {
    std::size_t threshold = 0;
    std::size_t n_classes = 0;
    std::optional<EvaluationReport> report;
    std::string skipped_reason;

    bool skipped() const noexcept { return !report.has_value(); }
};

/// For each threshold: filter the corpus, split it (first part trains, second
/// evaluates), train through the factory and evaluate. Thresholds leaving
/// fewer than two classes produce a skipped row.
std::vector<SweepRow> threshold_sweep(const corpus::Corpus& corpus, std::span<const std::size_t> thresholds,
                                      const PipelineFactory& factory, std::size_t k = 2,
                                      const corpus::SplitSpec& split = {});

std::string sweep_csv(std::span<const SweepRow> rows);

}  // namespace clincascade::eval
