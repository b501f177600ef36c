#include "clincascade/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "clincascade/augment.hpp"
#include "clincascade/backend_client.hpp"
#include "clincascade/error.hpp"
#include "clincascade/rng.hpp"
#include "clincascade/text.hpp"

namespace clincascade::classifier {

namespace {

constexpr const char* kModule = "classifier";
constexpr const char* kFormat = "clincascade.classifier";
constexpr int kFormatVersion = 1;

Error validation(const std::string& op, const std::string& msg) {
    return Error(ErrorKind::validation, kModule, op, msg);
}

}  // namespace

std::vector<std::string> tokenize(std::string_view input) {
    std::vector<std::string> tokens;
    for (const auto& span : text::word_spans(input)) {
        tokens.push_back(text::fold_case(input.substr(span.begin, span.end - span.begin)));
    }
    return tokens;
}

std::vector<std::string> feature_tokens(std::string_view input) {
    const auto parsed = augment::parse(input);
    auto tokens = tokenize(parsed.base);
    for (const auto& [name, value] : parsed.segments) {
        std::string token = text::normalize_label(name) + "=" + text::normalize_label(value);
        std::replace(token.begin(), token.end(), ' ', '_');
        tokens.push_back(std::move(token));
    }
    return tokens;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::vector<std::size_t> document_frequency,
                       std::size_t n_documents)
    : tokens_(std::move(tokens)), df_(std::move(document_frequency)), n_documents_(n_documents) {
    if (tokens_.size() != df_.size()) throw validation("vocabulary", "token and frequency counts differ");
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (df_[i] > n_documents_) throw validation("vocabulary", "document frequency exceeds document count");
        index_.emplace(tokens_[i], i);
    }
}

std::optional<std::size_t> Vocabulary::find(std::string_view token) const {
    const auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

double Vocabulary::idf(std::size_t index) const {
    return std::log((1.0 + static_cast<double>(n_documents_)) / (1.0 + static_cast<double>(df_[index]))) + 1.0;
}

Vocabulary fit_vocabulary(std::span<const std::string> texts) {
    if (texts.empty()) throw validation("fit_vocabulary", "corpus is empty");
    std::map<std::string, std::size_t> df;
    for (const auto& t : texts) {
        auto tokens = feature_tokens(t);
        std::sort(tokens.begin(), tokens.end());
        tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
        for (auto& tok : tokens) ++df[std::move(tok)];
    }
    if (df.empty()) throw validation("fit_vocabulary", "vocabulary is empty: no text contains a word token");
    std::vector<std::string> tokens;
    std::vector<std::size_t> counts;
    for (auto& [tok, n] : df) {
        tokens.push_back(tok);
        counts.push_back(n);
    }
    return Vocabulary(std::move(tokens), std::move(counts), texts.size());
}

SparseVector featurize(const Vocabulary& vocab, std::string_view input) {
    std::map<std::uint32_t, double> tf;
    for (const auto& tok : feature_tokens(input)) {
        if (const auto idx = vocab.find(tok)) tf[static_cast<std::uint32_t>(*idx)] += 1.0;
    }
    SparseVector x;
    x.reserve(tf.size());
    double norm2 = 0.0;
    for (const auto& [idx, count] : tf) {
        const double v = count * vocab.idf(idx);
        x.emplace_back(idx, v);
        norm2 += v * v;
    }
    if (norm2 > 0.0) {
        const double inv = 1.0 / std::sqrt(norm2);
        for (auto& [idx, v] : x) v *= inv;
    }
    return x;
}

void Hyperparams::validate() const {
    if (batch_size == 0) throw validation("hyperparams", "batch_size must be positive");
    if (!(learning_rate > 0.0)) throw validation("hyperparams", "learning_rate must be positive");
    if (epochs == 0) throw validation("hyperparams", "epochs must be positive");
    if (!(l2 >= 0.0)) throw validation("hyperparams", "l2 must be nonnegative");
}

std::string BackendSpec::describe() const {
    if (kind == Kind::builtin) return "builtin";
    std::string out = "external:";
    for (const auto& part : command) out += " " + part;
    return out;
}

PredictionResult::PredictionResult(std::vector<std::string> labels, std::vector<double> probabilities)
    : labels_(std::move(labels)), probabilities_(std::move(probabilities)) {
    if (labels_.empty() || labels_.size() != probabilities_.size()) {
        throw validation("predict", "prediction needs one probability per label");
    }
    ranking_.resize(labels_.size());
    std::iota(ranking_.begin(), ranking_.end(), 0);
    std::sort(ranking_.begin(), ranking_.end(), [&](std::size_t a, std::size_t b) {
        if (probabilities_[a] != probabilities_[b]) return probabilities_[a] > probabilities_[b];
        return labels_[a] < labels_[b];
    });
}

double PredictionResult::probability(std::string_view label) const {
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (labels_[i] == label) return probabilities_[i];
    }
    return 0.0;
}

std::vector<std::string> PredictionResult::top_k(std::size_t k) const {
    if (k < 1) throw validation("top_k", "k must be >= 1");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < std::min(k, ranking_.size()); ++i) out.push_back(labels_[ranking_[i]]);
    return out;
}

std::vector<std::string> top_k(const PredictionResult& result, std::size_t k) { return result.top_k(k); }

std::vector<double> LinearModel::logits(const SparseVector& x) const {
    std::vector<double> z(bias);
    for (std::size_t l = 0; l < n_labels; ++l) {
        const double* row = weights.data() + l * n_features;
        double acc = 0.0;
        for (const auto& [idx, v] : x) acc += row[idx] * v;
        z[l] += acc;
    }
    return z;
}

std::vector<double> softmax(std::span<const double> logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - m);
        sum += p[i];
    }
    for (auto& v : p) v /= sum;
    return p;
}

Objective softmax_cross_entropy(const LinearModel& model, std::span<const SparseVector> xs,
                                std::span<const std::size_t> ys, double l2) {
    Objective out;
    out.grad_weights.assign(model.weights.size(), 0.0);
    out.grad_bias.assign(model.n_labels, 0.0);
    const double inv_n = 1.0 / static_cast<double>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const auto z = model.logits(xs[i]);
        const double m = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (const double v : z) sum += std::exp(v - m);
        const double log_norm = m + std::log(sum);
        out.loss += (log_norm - z[ys[i]]) * inv_n;
        for (std::size_t l = 0; l < model.n_labels; ++l) {
            const double residual = (std::exp(z[l] - log_norm) - (l == ys[i] ? 1.0 : 0.0)) * inv_n;
            out.grad_bias[l] += residual;
            double* grow = out.grad_weights.data() + l * model.n_features;
            for (const auto& [idx, v] : xs[i]) grow[idx] += residual * v;
        }
    }
    if (l2 > 0.0) {
        double sq = 0.0;
        for (std::size_t j = 0; j < model.weights.size(); ++j) {
            sq += model.weights[j] * model.weights[j];
            out.grad_weights[j] += l2 * model.weights[j];
        }
        out.loss += 0.5 * l2 * sq;
    }
    return out;
}

ClassifierModel ClassifierModel::builtin(std::vector<std::string> labels, Vocabulary vocab, LinearModel linear) {
    if (linear.n_labels != labels.size() || linear.n_features != vocab.size() ||
        linear.weights.size() != linear.n_labels * linear.n_features || linear.bias.size() != linear.n_labels) {
        throw validation("model", "weight dimensions do not match labels and vocabulary");
    }
    ClassifierModel m;
    m.backend_ = Backend::builtin;
    m.labels_ = std::move(labels);
    m.vocab_ = std::move(vocab);
    m.linear_ = std::move(linear);
    return m;
}

ClassifierModel ClassifierModel::external(std::vector<std::string> labels, BackendSpec spec, std::string model_id,
                                          std::shared_ptr<backend::Session> session) {
    ClassifierModel m;
    m.backend_ = Backend::external;
    m.labels_ = std::move(labels);
    m.spec_ = std::move(spec);
    m.model_id_ = std::move(model_id);
    m.session_ = std::move(session);
    return m;
}

PredictionResult ClassifierModel::predict(std::string_view input) const {
    if (backend_ == Backend::builtin) {
        return PredictionResult(labels_, softmax(linear_.logits(featurize(vocab_, input))));
    }
    const std::string texts[] = {std::string(input)};
    return predict_batch(texts).front();
}

std::vector<PredictionResult> ClassifierModel::predict_batch(std::span<const std::string> texts) const {
    std::vector<PredictionResult> out;
    out.reserve(texts.size());
    if (backend_ == Backend::builtin) {
        for (const auto& t : texts) out.push_back(predict(t));
        return out;
    }
    const auto session = session_ ? session_ : backend::connect(spec_);
    const auto resp = session->request("predict", {{"model_id", model_id_}, {"texts", texts}});
    if (!resp.ok) {
        throw Error(ErrorKind::backend, kModule, "predict", resp.error_code + ": " + resp.error_message,
                    "external model ids only live as long as the server process");
    }
    const auto server_labels = resp.payload.at("labels").get<std::vector<std::string>>();
    const auto& rows = resp.payload.at("probs");
    if (rows.size() != texts.size()) throw Error(ErrorKind::backend, kModule, "predict", "wrong number of rows");
    for (const auto& row : rows) {
        const auto probs = row.get<std::vector<double>>();
        if (probs.size() != server_labels.size()) {
            throw Error(ErrorKind::backend, kModule, "predict", "probability row length differs from label count");
        }
        // Reorder into this model's label order.
        std::vector<double> ordered(labels_.size(), 0.0);
        for (std::size_t i = 0; i < server_labels.size(); ++i) {
            const auto it = std::find(labels_.begin(), labels_.end(), server_labels[i]);
            if (it == labels_.end()) {
                throw Error(ErrorKind::backend, kModule, "predict", "server returned unknown label '" + server_labels[i] + "'");
            }
            ordered[static_cast<std::size_t>(it - labels_.begin())] = probs[i];
        }
        out.emplace_back(labels_, std::move(ordered));
    }
    return out;
}

nlohmann::ordered_json ClassifierModel::to_json() const {
    nlohmann::ordered_json doc;
    doc["format"] = kFormat;
    doc["version"] = kFormatVersion;
    doc["backend"] = backend_ == Backend::builtin ? "builtin" : "external";
    doc["labels"] = labels_;
    if (backend_ == Backend::builtin) {
        doc["vocabulary"] = {{"tokens", vocab_.tokens()},
                             {"document_frequency", vocab_.document_frequency()},
                             {"n_documents", vocab_.n_documents()}};
        doc["n_features"] = linear_.n_features;
        doc["weights"] = linear_.weights;
        doc["bias"] = linear_.bias;
    } else {
        doc["command"] = spec_.command;
        doc["model_id"] = model_id_;
    }
    return doc;
}

ClassifierModel ClassifierModel::from_json(const nlohmann::json& doc) {
    try {
        if (doc.at("format") != kFormat || doc.at("version") != kFormatVersion) {
            throw Error(ErrorKind::schema, kModule, "load_model", "unsupported model format or version");
        }
        auto labels = doc.at("labels").get<std::vector<std::string>>();
        if (doc.at("backend") == "external") {
            return external(std::move(labels), BackendSpec::external(doc.at("command").get<std::vector<std::string>>()),
                            doc.at("model_id").get<std::string>());
        }
        const auto& v = doc.at("vocabulary");
        Vocabulary vocab(v.at("tokens").get<std::vector<std::string>>(),
                         v.at("document_frequency").get<std::vector<std::size_t>>(),
                         v.at("n_documents").get<std::size_t>());
        LinearModel linear;
        linear.n_labels = labels.size();
        linear.n_features = doc.at("n_features").get<std::size_t>();
        linear.weights = doc.at("weights").get<std::vector<double>>();
        linear.bias = doc.at("bias").get<std::vector<double>>();
        return builtin(std::move(labels), std::move(vocab), std::move(linear));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::schema, kModule, "load_model", std::string("malformed model JSON: ") + e.what());
    }
}

ClassifierModel train(const BackendSpec& backend, std::span<const Example> examples, const Hyperparams& hp,
                      std::vector<std::string> labels, TrainLog* log) {
    const std::string op = "train";
    hp.validate();
    std::set<std::string> seen;
    for (const auto& ex : examples) {
        if (text::trim(ex.text).empty()) throw validation(op, "training texts must be nonempty");
        seen.insert(ex.label);
    }
    if (seen.size() < 2) throw validation(op, "training needs at least 2 distinct labels");
    if (labels.empty()) {
        labels.assign(seen.begin(), seen.end());
    } else {
        std::sort(labels.begin(), labels.end());
        labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
        for (const auto& l : seen) {
            if (!std::binary_search(labels.begin(), labels.end(), l)) {
                throw validation(op, "example label '" + l + "' is outside the model label set");
            }
        }
    }

    if (backend.kind == BackendSpec::Kind::external) {
        auto session = backend::connect(backend);
        nlohmann::json ex = nlohmann::json::array();
        for (const auto& e : examples) ex.push_back({{"text", e.text}, {"label", e.label}});
        const auto resp = session->request(
            "train", {{"examples", std::move(ex)},
                      {"hyperparams",
                       {{"batch_size", hp.batch_size}, {"learning_rate", hp.learning_rate}, {"epochs", hp.epochs}}},
                      {"seed", hp.seed}});
        if (!resp.ok) {
            throw Error(ErrorKind::backend, kModule, op, resp.error_code + ": " + resp.error_message,
                        "check the model server log");
        }
        return ClassifierModel::external(std::move(labels), backend, resp.payload.at("model_id").get<std::string>(),
                                         std::move(session));
    }

    std::vector<std::string> texts;
    texts.reserve(examples.size());
    for (const auto& e : examples) texts.push_back(e.text);
    Vocabulary vocab = fit_vocabulary(texts);

    std::vector<SparseVector> xs;
    std::vector<std::size_t> ys;
    xs.reserve(examples.size());
    for (const auto& e : examples) {
        xs.push_back(featurize(vocab, e.text));
        ys.push_back(static_cast<std::size_t>(std::lower_bound(labels.begin(), labels.end(), e.label) - labels.begin()));
    }

    LinearModel model;
    model.n_labels = labels.size();
    model.n_features = vocab.size();
    model.weights.assign(model.n_labels * model.n_features, 0.0);
    model.bias.assign(model.n_labels, 0.0);

    // Adam, default moment decay rates.
    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kEps = 1e-8;
    std::vector<double> m_w(model.weights.size(), 0.0), v_w(model.weights.size(), 0.0);
    std::vector<double> m_b(model.n_labels, 0.0), v_b(model.n_labels, 0.0);
    double beta1_t = 1.0;
    double beta2_t = 1.0;
    const auto adam = [&](std::vector<double>& param, std::vector<double>& m, std::vector<double>& v,
                          const std::vector<double>& g) {
        const double c1 = 1.0 - beta1_t;
        const double c2 = 1.0 - beta2_t;
        for (std::size_t j = 0; j < param.size(); ++j) {
            m[j] = kBeta1 * m[j] + (1.0 - kBeta1) * g[j];
            v[j] = kBeta2 * v[j] + (1.0 - kBeta2) * g[j] * g[j];
            param[j] -= hp.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + kEps);
        }
    };

    Rng rng(derive_seed(hp.seed, "classifier.train"));
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<SparseVector> bx;
    std::vector<std::size_t> by;
    for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
        rng.shuffle(std::span(order));
        for (std::size_t start = 0; start < order.size(); start += hp.batch_size) {
            const std::size_t stop = std::min(order.size(), start + hp.batch_size);
            bx.clear();
            by.clear();
            for (std::size_t i = start; i < stop; ++i) {
                bx.push_back(xs[order[i]]);
                by.push_back(ys[order[i]]);
            }
            const auto obj = softmax_cross_entropy(model, bx, by, hp.l2);
            beta1_t *= kBeta1;
            beta2_t *= kBeta2;
            adam(model.weights, m_w, v_w, obj.grad_weights);
            adam(model.bias, m_b, v_b, obj.grad_bias);
        }
        if (log) log->epoch_loss.push_back(softmax_cross_entropy(model, xs, ys, hp.l2).loss);
    }
    return ClassifierModel::builtin(std::move(labels), std::move(vocab), std::move(model));
}

}  // namespace clincascade::classifier
