#include "clincascade/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "clincascade/error.hpp"
#include "clincascade/io.hpp"

namespace clincascade::eval {

namespace {

constexpr const char* kModule = "eval";

struct Counts {
    std::vector<std::size_t> tp, fp, fn, support;
};

double f1(std::size_t tp, std::size_t fp, std::size_t fn) {
    const std::size_t denom = 2 * tp + fp + fn;
    return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

Counts count(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& pred, std::size_t n_labels) {
    Counts c{std::vector<std::size_t>(n_labels, 0), std::vector<std::size_t>(n_labels, 0),
             std::vector<std::size_t>(n_labels, 0), std::vector<std::size_t>(n_labels, 0)};
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ++c.support[truth[i]];
        if (truth[i] == pred[i]) {
            ++c.tp[truth[i]];
        } else {
            ++c.fp[pred[i]];
            ++c.fn[truth[i]];
        }
    }
    return c;
}

double micro(const Counts& c) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t l = 0; l < c.tp.size(); ++l) {
        tp += c.tp[l];
        fp += c.fp[l];
        fn += c.fn[l];
    }
    return f1(tp, fp, fn);
}

double macro(const Counts& c, MacroAverage over) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t l = 0; l < c.tp.size(); ++l) {
        const bool predicted = c.tp[l] + c.fp[l] > 0;
        const bool included = c.support[l] > 0 || (over == MacroAverage::union_labels && predicted);
        if (!included) continue;
        sum += f1(c.tp[l], c.fp[l], c.fn[l]);
        ++n;
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

}  // namespace

EvaluationReport evaluate(std::span<const std::string> truths, std::span<const classifier::PredictionResult> predictions,
                          std::size_t k, MacroAverage macro_over) {
    const std::string op = "evaluate";
    if (truths.empty()) throw Error(ErrorKind::validation, kModule, op, "no examples to evaluate");
    if (truths.size() != predictions.size()) {
        throw Error(ErrorKind::validation, kModule, op,
                    "got " + std::to_string(truths.size()) + " truths but " + std::to_string(predictions.size()) +
                        " predictions");
    }
    if (k < 1) throw Error(ErrorKind::validation, kModule, op, "k must be >= 1");

    std::set<std::string> label_set(truths.begin(), truths.end());
    for (const auto& p : predictions) label_set.insert(p.top1());
    EvaluationReport r;
    r.n = truths.size();
    r.k = k;
    r.macro_over = macro_over;
    r.labels.assign(label_set.begin(), label_set.end());
    const auto index = [&](const std::string& label) {
        return static_cast<std::size_t>(std::lower_bound(r.labels.begin(), r.labels.end(), label) - r.labels.begin());
    };

    std::vector<std::size_t> truth_idx, top1_idx, effective_idx;
    std::size_t correct = 0;
    std::size_t in_topk = 0;
    for (std::size_t i = 0; i < r.n; ++i) {
        const std::size_t t = index(truths[i]);
        const std::size_t p = index(predictions[i].top1());
        truth_idx.push_back(t);
        top1_idx.push_back(p);
        if (t == p) ++correct;
        const auto topk = predictions[i].top_k(k);
        const bool hit = std::find(topk.begin(), topk.end(), truths[i]) != topk.end();
        if (hit) ++in_topk;
        effective_idx.push_back(hit ? t : p);
    }

    r.confusion.assign(r.labels.size(), std::vector<std::size_t>(r.labels.size(), 0));
    for (std::size_t i = 0; i < r.n; ++i) ++r.confusion[truth_idx[i]][top1_idx[i]];

    const auto top1 = count(truth_idx, top1_idx, r.labels.size());
    const auto effective = count(truth_idx, effective_idx, r.labels.size());
    r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n);
    r.micro_f1 = micro(top1);
    r.macro_f1 = macro(top1, macro_over);
    r.topk_accuracy = static_cast<double>(in_topk) / static_cast<double>(r.n);
    r.topk_micro_f1 = micro(effective);
    r.topk_f1 = macro(effective, macro_over);
    for (std::size_t l = 0; l < r.labels.size(); ++l) r.per_label_f1[r.labels[l]] = f1(top1.tp[l], top1.fp[l], top1.fn[l]);
    return r;
}

nlohmann::ordered_json EvaluationReport::to_json() const {
    nlohmann::ordered_json doc;
    doc["n"] = n;
    doc["k"] = k;
    doc["accuracy"] = accuracy;
    doc["micro_f1"] = micro_f1;
    doc["macro_f1"] = macro_f1;
    doc["topk_accuracy"] = topk_accuracy;
    doc["topk_f1"] = topk_f1;
    doc["topk_micro_f1"] = topk_micro_f1;
    doc["macro_over"] = macro_over == MacroAverage::truth ? "truth" : "union";
    doc["labels"] = labels;
    doc["confusion"] = confusion;
    doc["per_label_f1"] = nlohmann::ordered_json::object();
    for (const auto& [label, v] : per_label_f1) doc["per_label_f1"][label] = v;
    return doc;
}

EvaluationReport EvaluationReport::from_json(const nlohmann::json& doc) {
    try {
        EvaluationReport r;
        r.n = doc.at("n").get<std::size_t>();
        r.k = doc.at("k").get<std::size_t>();
        r.accuracy = doc.at("accuracy").get<double>();
        r.micro_f1 = doc.at("micro_f1").get<double>();
        r.macro_f1 = doc.at("macro_f1").get<double>();
        r.topk_accuracy = doc.at("topk_accuracy").get<double>();
        r.topk_f1 = doc.at("topk_f1").get<double>();
        r.topk_micro_f1 = doc.value("topk_micro_f1", 0.0);
        r.macro_over = doc.value("macro_over", "truth") == "union" ? MacroAverage::union_labels : MacroAverage::truth;
        r.labels = doc.at("labels").get<std::vector<std::string>>();
        r.confusion = doc.at("confusion").get<std::vector<std::vector<std::size_t>>>();
        for (const auto& [label, v] : doc.at("per_label_f1").items()) r.per_label_f1[label] = v.get<double>();
        if (r.confusion.size() != r.labels.size()) {
            throw Error(ErrorKind::schema, kModule, "from_json", "confusion matrix does not match label count");
        }
        for (const auto& row : r.confusion) {
            if (row.size() != r.labels.size()) {
                throw Error(ErrorKind::schema, kModule, "from_json", "confusion matrix is not square");
            }
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::schema, kModule, "from_json", std::string("malformed report: ") + e.what());
    }
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    return out + "\"";
}

}  // namespace

std::string EvaluationReport::confusion_csv() const {
    std::string out = "truth\\predicted";
    for (const auto& l : labels) out += "," + csv_field(l);
    out += "\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out += csv_field(labels[i]);
        for (const auto c : confusion[i]) out += "," + std::to_string(c);
        out += "\n";
    }
    return out;
}

std::string EvaluationReport::table() const {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "examples        %zu\n"
                  "accuracy        %.4f\n"
                  "micro F1        %.4f\n"
                  "macro F1        %.4f  (over %s labels)\n"
                  "top-%zu accuracy  %.4f\n"
                  "top-%zu F1        %.4f\n",
                  n, accuracy, micro_f1, macro_f1, macro_over == MacroAverage::truth ? "true" : "true+predicted", k,
                  topk_accuracy, k, topk_f1);
    std::string out = buf;
    out += "\nper-label F1\n";
    for (const auto& [label, v] : per_label_f1) {
        std::snprintf(buf, sizeof buf, "  %-40s %.4f\n", label.c_str(), v);
        out += buf;
    }
    return out;
}

std::vector<ConfusionPair> confusion_top_pairs(const EvaluationReport& report, std::size_t n) {
    if (n < 1) throw Error(ErrorKind::validation, kModule, "confusion_top_pairs", "n must be >= 1");
    std::vector<ConfusionPair> pairs;
    for (std::size_t i = 0; i < report.labels.size(); ++i) {
        for (std::size_t j = 0; j < report.labels.size(); ++j) {
            if (i != j && report.confusion[i][j] > 0) {
                pairs.push_back({report.labels[i], report.labels[j], report.confusion[i][j]});
            }
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const ConfusionPair& a, const ConfusionPair& b) {
        if (a.count != b.count) return a.count > b.count;
        if (a.truth != b.truth) return a.truth < b.truth;
        return a.predicted < b.predicted;
    });
    if (pairs.size() > n) pairs.resize(n);
    return pairs;
}

void write_heatmap(const EvaluationReport& report, const std::filesystem::path& path, std::size_t cell_px) {
    const std::size_t side = std::max<std::size_t>(1, report.labels.size()) * cell_px;
    std::string data = "P6\n" + std::to_string(side) + " " + std::to_string(side) + "\n255\n";
    data.reserve(data.size() + side * side * 3);
    for (std::size_t y = 0; y < side; ++y) {
        const std::size_t row = y / cell_px;
        std::size_t row_total = 0;
        if (row < report.confusion.size()) {
            for (const auto c : report.confusion[row]) row_total += c;
        }
        for (std::size_t x = 0; x < side; ++x) {
            const std::size_t col = x / cell_px;
            double v = 0.0;
            if (row_total > 0) v = static_cast<double>(report.confusion[row][col]) / static_cast<double>(row_total);
            // White (0) to dark blue (1).
            data.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * (1.0 - v)))));
            data.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * (1.0 - 0.8 * v)))));
            data.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 - 100.0 * v))));
        }
    }
    io::write_file(path, data, kModule, "write_heatmap");
}

std::vector<SweepRow> threshold_sweep(const corpus::Corpus& corpus, std::span<const std::size_t> thresholds,
                                      const PipelineFactory& factory, std::size_t k, const corpus::SplitSpec& split) {
    const std::string op = "threshold_sweep";
    if (thresholds.empty()) throw Error(ErrorKind::validation, kModule, op, "thresholds must be nonempty");
    std::vector<SweepRow> rows;
    for (const auto t : thresholds) {
        if (t < 1) throw Error(ErrorKind::validation, kModule, op, "each threshold must be >= 1");
        SweepRow row;
        row.threshold = t;
        corpus::Corpus filtered;
        try {
            filtered = corpus::filter_by_threshold(corpus, t);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::empty_result) throw;
            row.skipped_reason = "no class has at least " + std::to_string(t) + " examples";
            rows.push_back(std::move(row));
            continue;
        }
        row.n_classes = filtered.label_counts().size();
        if (row.n_classes < 2) {
            row.skipped_reason = "only " + std::to_string(row.n_classes) + " class survives";
            rows.push_back(std::move(row));
            continue;
        }
        const auto parts = corpus::stratified_split(filtered, split);
        if (parts.size() < 2 || parts[1].empty()) {
            row.skipped_reason = "evaluation split is empty";
            rows.push_back(std::move(row));
            continue;
        }
        const auto predictor = factory(parts[0]);
        std::vector<std::string> truths;
        std::vector<classifier::PredictionResult> preds;
        for (const auto& r : parts[1]) {
            truths.push_back(r.pathology);
            preds.push_back(predictor(r));
        }
        row.report = evaluate(truths, preds, k);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
    std::string out = "threshold,n_classes,accuracy,micro_f1,macro_f1,topk_accuracy,topk_f1,skipped\n";
    char buf[256];
    for (const auto& row : rows) {
        if (row.report) {
            const auto& r = *row.report;
            std::snprintf(buf, sizeof buf, "%zu,%zu,%.6f,%.6f,%.6f,%.6f,%.6f,\n", row.threshold, row.n_classes,
                          r.accuracy, r.micro_f1, r.macro_f1, r.topk_accuracy, r.topk_f1);
            out += buf;
        } else {
            out += std::to_string(row.threshold) + "," + std::to_string(row.n_classes) + ",,,,,," +
                   csv_field(row.skipped_reason) + "\n";
        }
    }
    return out;
}

}  // namespace clincascade::eval
