#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace clincascade::backend {
class Session;
}

namespace clincascade::classifier {

/// Lowercased Unicode word tokens. No stemming, lemmatization or accent
/// removal: the classifier sees the raw text.
std::vector<std::string> tokenize(std::string_view text);

/// tokenize() over the report part of an augmented input, plus one atomic
/// `name=value` token per appended relation segment.
std::vector<std::string> feature_tokens(std::string_view text);

class Vocabulary {
public:
    Vocabulary() = default;
    Vocabulary(std::vector<std::string> tokens, std::vector<std::size_t> document_frequency, std::size_t n_documents);

    std::optional<std::size_t> find(std::string_view token) const;
    /// Smoothed inverse document frequency: ln((1 + N) / (1 + df)) + 1.
    double idf(std::size_t index) const;

    std::size_t size() const noexcept { return tokens_.size(); }
    std::size_t n_documents() const noexcept { return n_documents_; }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }
    const std::vector<std::size_t>& document_frequency() const noexcept { return df_; }

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
        return a.tokens_ == b.tokens_ && a.df_ == b.df_ && a.n_documents_ == b.n_documents_;
    }

private:
    std::vector<std::string> tokens_;  // sorted; index = position
    std::vector<std::size_t> df_;
    std::size_t n_documents_ = 0;
    std::unordered_map<std::string, std::size_t> index_;
};

/// (feature index, value) pairs sorted by index.
using SparseVector = std::vector<std::pair<std::uint32_t, double>>;

Vocabulary fit_vocabulary(std::span<const std::string> texts);
/// L2-normalized TF-IDF vector; tokens outside the vocabulary are ignored.
SparseVector featurize(const Vocabulary& vocab, std::string_view text);

struct Hyperparams {
    std::size_t batch_size = 64;
    double learning_rate = 0.001;
    std::size_t epochs = 10;
    double l2 = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct BackendSpec {
    enum class Kind { builtin, external };
    Kind kind = Kind::builtin;
    /// argv of the model server for external backends.
    std::vector<std::string> command;

    static BackendSpec builtin() { return {}; }
    static BackendSpec external(std::vector<std::string> command) { return {Kind::external, std::move(command)}; }
    std::string describe() const;
};

/// Probability distribution over a label set plus its ranking.
class PredictionResult {
public:
    PredictionResult() = default;
    /// Ranks labels by descending probability; ties go to the
    /// lexicographically smaller label.
    PredictionResult(std::vector<std::string> labels, std::vector<double> probabilities);

    const std::vector<std::string>& labels() const noexcept { return labels_; }
    const std::vector<double>& probabilities() const noexcept { return probabilities_; }
    const std::vector<std::size_t>& ranking() const noexcept { return ranking_; }

    const std::string& top1() const { return labels_[ranking_.front()]; }
    double probability(std::string_view label) const;
    /// Labels at ranks [0, min(k, |labels|)).
    std::vector<std::string> top_k(std::size_t k) const;

    friend bool operator==(const PredictionResult&, const PredictionResult&) = default;

private:
    std::vector<std::string> labels_;
    std::vector<double> probabilities_;
    std::vector<std::size_t> ranking_;
};

std::vector<std::string> top_k(const PredictionResult& result, std::size_t k);

/// Softmax-linear scorer: logits = W x + b, W row-major |labels| x |features|.
struct LinearModel {
    std::size_t n_labels = 0;
    std::size_t n_features = 0;
    std::vector<double> weights;
    std::vector<double> bias;

    std::vector<double> logits(const SparseVector& x) const;
    friend bool operator==(const LinearModel&, const LinearModel&) = default;
};

std::vector<double> softmax(std::span<const double> logits);

struct Objective {
    double loss = 0.0;
    std::vector<double> grad_weights;
    std::vector<double> grad_bias;
};

/// Mean softmax cross-entropy over the batch plus (l2 / 2) * ||W||^2, with
/// its analytic gradient.
Objective softmax_cross_entropy(const LinearModel& model, std::span<const SparseVector> xs,
                                std::span<const std::size_t> ys, double l2);

struct Example {
    std::string text;
    std::string label;
};

/// Per-epoch training diagnostics for the builtin backend.
struct TrainLog {
    std::vector<double> epoch_loss;  // full-data objective after each epoch
};

class ClassifierModel {
public:
    enum class Backend { builtin, external };

    static ClassifierModel builtin(std::vector<std::string> labels, Vocabulary vocab, LinearModel linear);
    /// `session` keeps the server that holds `model_id` alive; without it a
    /// shared session for the backend command is looked up on each predict.
    static ClassifierModel external(std::vector<std::string> labels, BackendSpec spec, std::string model_id,
                                    std::shared_ptr<backend::Session> session = nullptr);

    Backend backend() const noexcept { return backend_; }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    const Vocabulary& vocabulary() const noexcept { return vocab_; }
    const LinearModel& linear() const noexcept { return linear_; }
    const std::string& model_id() const noexcept { return model_id_; }
    const BackendSpec& spec() const noexcept { return spec_; }

    PredictionResult predict(std::string_view text) const;
    std::vector<PredictionResult> predict_batch(std::span<const std::string> texts) const;

    nlohmann::ordered_json to_json() const;
    static ClassifierModel from_json(const nlohmann::json& doc);

private:
    Backend backend_ = Backend::builtin;
    std::vector<std::string> labels_;
    Vocabulary vocab_;
    LinearModel linear_;
    BackendSpec spec_;
    std::string model_id_;
    std::shared_ptr<backend::Session> session_;
};

/// Builtin: multinomial logistic regression on TF-IDF features, trained with
/// mini-batch Adam from zero weights; deterministic for a given seed.
/// External: delegates over the model-server protocol.
///
/// `labels` fixes the model's label set (sorted distinct example labels when
/// empty); it must contain every example label.
ClassifierModel train(const BackendSpec& backend, std::span<const Example> examples, const Hyperparams& hp,
                      std::vector<std::string> labels = {}, TrainLog* log = nullptr);

}  // namespace clincascade::classifier
