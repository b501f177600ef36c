#pragma once

// Brute-force reference implementations. Deliberately naive and written
// without calling into the library's own helpers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

struct Metrics {
    double accuracy = 0, micro_f1 = 0, macro_f1 = 0, topk_accuracy = 0, topk_f1 = 0, topk_micro_f1 = 0;
    std::vector<std::string> labels;
    std::vector<std::vector<std::size_t>> confusion;
    std::map<std::string, double> per_label_f1;
};

struct Ranked {
    std::vector<std::string> labels;
    std::vector<double> probs;
};

/// Selection sort on (prob desc, label asc); returns the first k labels.
inline std::vector<std::string> top_k(const Ranked& r, std::size_t k) {
    std::vector<bool> used(r.labels.size(), false);
    std::vector<std::string> out;
    for (std::size_t n = 0; n < k && n < r.labels.size(); ++n) {
        int best = -1;
        for (std::size_t i = 0; i < r.labels.size(); ++i) {
            if (used[i]) continue;
            if (best < 0 || r.probs[i] > r.probs[best] || (r.probs[i] == r.probs[best] && r.labels[i] < r.labels[best])) {
                best = static_cast<int>(i);
            }
        }
        used[best] = true;
        out.push_back(r.labels[best]);
    }
    return out;
}

inline double f1_of(double tp, double fp, double fn) { return tp + fp + fn == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn); }

inline void f1_scores(const std::vector<std::string>& labels, const std::vector<std::string>& truth,
                      const std::vector<std::string>& pred, bool union_labels, double& micro, double& macro,
                      std::map<std::string, double>* per_label) {
    double TP = 0, FP = 0, FN = 0, sum = 0;
    int counted = 0;
    for (const auto& L : labels) {
        double tp = 0, fp = 0, fn = 0, support = 0, predicted = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            if (truth[i] == L) support += 1;
            if (pred[i] == L) predicted += 1;
            if (truth[i] == L && pred[i] == L) tp += 1;
            if (truth[i] != L && pred[i] == L) fp += 1;
            if (truth[i] == L && pred[i] != L) fn += 1;
        }
        TP += tp;
        FP += fp;
        FN += fn;
        if (per_label) (*per_label)[L] = f1_of(tp, fp, fn);
        if (support > 0 || (union_labels && predicted > 0)) {
            sum += f1_of(tp, fp, fn);
            ++counted;
        }
    }
    micro = f1_of(TP, FP, FN);
    macro = counted ? sum / counted : 0.0;
}

inline Metrics evaluate(const std::vector<std::string>& truth, const std::vector<Ranked>& preds, std::size_t k,
                        bool union_labels = false) {
    Metrics m;
    std::vector<std::string> top1;
    for (const auto& p : preds) top1.push_back(top_k(p, 1).front());
    std::set<std::string> all(truth.begin(), truth.end());
    all.insert(top1.begin(), top1.end());
    m.labels.assign(all.begin(), all.end());

    double correct = 0, hits = 0;
    std::vector<std::string> effective;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (top1[i] == truth[i]) correct += 1;
        const auto tk = top_k(preds[i], k);
        bool hit = false;
        for (const auto& l : tk) hit = hit || l == truth[i];
        if (hit) hits += 1;
        effective.push_back(hit ? truth[i] : top1[i]);
    }
    m.accuracy = correct / truth.size();
    m.topk_accuracy = hits / truth.size();
    f1_scores(m.labels, truth, top1, union_labels, m.micro_f1, m.macro_f1, &m.per_label_f1);
    f1_scores(m.labels, truth, effective, union_labels, m.topk_micro_f1, m.topk_f1, nullptr);

    m.confusion.assign(m.labels.size(), std::vector<std::size_t>(m.labels.size(), 0));
    for (std::size_t a = 0; a < m.labels.size(); ++a) {
        for (std::size_t b = 0; b < m.labels.size(); ++b) {
            for (std::size_t i = 0; i < truth.size(); ++i) {
                if (truth[i] == m.labels[a] && top1[i] == m.labels[b]) ++m.confusion[a][b];
            }
        }
    }
    return m;
}

/// Random evaluation instance: up to `max_n` examples over up to `max_labels`
/// labels; probabilities are coarse so ties occur.
inline void random_instance(std::mt19937_64& g, std::size_t max_n, std::size_t max_labels,
                            std::vector<std::string>& truth, std::vector<Ranked>& preds) {
    const std::size_t n_labels = 2 + g() % (max_labels - 1);
    const std::size_t n = 1 + g() % max_n;
    std::vector<std::string> labels;
    for (std::size_t l = 0; l < n_labels; ++l) labels.push_back("L" + std::to_string(l));
    truth.clear();
    preds.clear();
    for (std::size_t i = 0; i < n; ++i) {
        truth.push_back(labels[g() % n_labels]);
        Ranked r{labels, {}};
        double sum = 0;
        for (std::size_t l = 0; l < n_labels; ++l) {
            r.probs.push_back(static_cast<double>(g() % 8));
            sum += r.probs.back();
        }
        if (sum == 0) {
            r.probs[0] = 1;
            sum = 1;
        }
        for (auto& p : r.probs) p /= sum;
        preds.push_back(std::move(r));
    }
}

/// Every non-repeating ordered selection of 1..n items, found by testing all
/// n^len index tuples.
inline std::set<std::vector<int>> all_variations(int n) {
    std::set<std::vector<int>> out;
    for (int len = 1; len <= n; ++len) {
        int total = 1;
        for (int i = 0; i < len; ++i) total *= n;
        for (int code = 0; code < total; ++code) {
            std::vector<int> v;
            int c = code;
            for (int i = 0; i < len; ++i) {
                v.push_back(c % n);
                c /= n;
            }
            std::set<int> distinct(v.begin(), v.end());
            if (static_cast<int>(distinct.size()) == len) out.insert(v);
        }
    }
    return out;
}

/// Severity by explicit priority: morbidity, then major, then minor.
inline std::string severity(bool minor, bool major, bool morbidity) {
    if (morbidity) return "extreme";
    if (major) return "important";
    if (minor) return "mild";
    return "harmless";
}

/// Dense softmax cross-entropy with mean reduction plus 0.5 * l2 * |W|^2.
inline double dense_loss(const std::vector<std::vector<double>>& X, const std::vector<std::size_t>& y,
                         const std::vector<double>& W, const std::vector<double>& b, std::size_t n_labels, double l2) {
    const std::size_t d = X.empty() ? 0 : X[0].size();
    double loss = 0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        std::vector<double> z(n_labels);
        for (std::size_t c = 0; c < n_labels; ++c) {
            z[c] = b[c];
            for (std::size_t j = 0; j < d; ++j) z[c] += W[c * d + j] * X[i][j];
        }
        double mx = z[0];
        for (const double v : z) mx = std::max(mx, v);
        double s = 0;
        for (const double v : z) s += std::exp(v - mx);
        loss += -(z[y[i]] - mx - std::log(s));
    }
    loss /= static_cast<double>(X.size());
    double sq = 0;
    for (const double w : W) sq += w * w;
    return loss + 0.5 * l2 * sq;
}

}  // namespace oracle
