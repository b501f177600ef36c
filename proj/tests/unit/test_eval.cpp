#include <doctest.h>

#include <algorithm>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "../support/oracles.hpp"
#include "clincascade/corpus.hpp"
#include "clincascade/error.hpp"
#include "clincascade/eval.hpp"

using namespace clincascade;
using classifier::PredictionResult;

namespace {

/// Two-label prediction whose top-1 is `top`.
PredictionResult pick(const std::string& top) {
    return top == "a" ? PredictionResult({"a", "b"}, {0.9, 0.1}) : PredictionResult({"a", "b"}, {0.1, 0.9});
}

}  // namespace

TEST_CASE("hand-computed two-label example") {
    const std::vector<std::string> truth = {"a", "a", "b", "b"};
    const std::vector<PredictionResult> preds = {pick("a"), pick("b"), pick("b"), pick("b")};
    const auto r = eval::evaluate(truth, preds, 1);
    CHECK(r.accuracy == doctest::Approx(0.75));
    CHECK(r.per_label_f1.at("a") == doctest::Approx(2.0 / 3.0));
    CHECK(r.per_label_f1.at("b") == doctest::Approx(4.0 / 5.0));
    CHECK(r.macro_f1 == doctest::Approx((2.0 / 3.0 + 0.8) / 2));
    CHECK(r.micro_f1 == doctest::Approx(0.75));
    CHECK(r.topk_f1 == doctest::Approx(r.macro_f1));
    CHECK(r.confusion == std::vector<std::vector<std::size_t>>{{1, 1}, {0, 2}});

    const auto k2 = eval::evaluate(truth, preds, 2);
    CHECK(k2.topk_accuracy == 1.0);
    CHECK(k2.topk_f1 == 1.0);
}

TEST_CASE("all-correct predictions score one everywhere") {
    const std::vector<std::string> truth = {"a", "b", "a"};
    const std::vector<PredictionResult> preds = {pick("a"), pick("b"), pick("a")};
    const auto r = eval::evaluate(truth, preds, 1);
    for (const double m : {r.accuracy, r.micro_f1, r.macro_f1, r.topk_accuracy, r.topk_f1}) CHECK(m == 1.0);
    CHECK(r.confusion[0][1] == 0);
    CHECK(r.confusion[1][0] == 0);
    CHECK(eval::confusion_top_pairs(r, 5).empty());
}

TEST_CASE("invalid input is rejected") {
    const std::vector<std::string> truth = {"a"};
    const std::vector<PredictionResult> none;
    CHECK_THROWS_AS(eval::evaluate(truth, none, 1), Error);
    CHECK_THROWS_AS(eval::evaluate({}, none, 1), Error);
    const std::vector<PredictionResult> one = {pick("a")};
    CHECK_THROWS_AS(eval::evaluate(truth, one, 0), Error);
}

TEST_CASE("metrics agree with the brute-force oracle on random instances") {
    std::mt19937_64 g(1234);
    for (int round = 0; round < 100; ++round) {
        std::vector<std::string> truth;
        std::vector<oracle::Ranked> ranked;
        oracle::random_instance(g, 500, 30, truth, ranked);
        std::vector<PredictionResult> preds;
        for (const auto& r : ranked) preds.emplace_back(r.labels, r.probs);
        const std::size_t k = 1 + g() % 4;
        for (const bool use_union : {false, true}) {
            const auto want = oracle::evaluate(truth, ranked, k, use_union);
            const auto got = eval::evaluate(truth, preds, k,
                                            use_union ? eval::MacroAverage::union_labels : eval::MacroAverage::truth);
            CHECK(got.accuracy == doctest::Approx(want.accuracy).epsilon(1e-12));
            CHECK(got.micro_f1 == doctest::Approx(want.micro_f1).epsilon(1e-12));
            CHECK(got.macro_f1 == doctest::Approx(want.macro_f1).epsilon(1e-12));
            CHECK(got.topk_accuracy == doctest::Approx(want.topk_accuracy).epsilon(1e-12));
            CHECK(got.topk_f1 == doctest::Approx(want.topk_f1).epsilon(1e-12));
            CHECK(got.topk_micro_f1 == doctest::Approx(want.topk_micro_f1).epsilon(1e-12));
            CHECK(got.labels == want.labels);
            CHECK(got.confusion == want.confusion);
            // Single-label data with full coverage: micro F1 is accuracy.
            CHECK(got.micro_f1 == doctest::Approx(got.accuracy).epsilon(1e-12));
            std::size_t total = 0;
            for (const auto& row : got.confusion) {
                for (const auto c : row) total += c;
            }
            CHECK(total == truth.size());
        }
    }
}

TEST_CASE("confusion_top_pairs matches a full sort of off-diagonal cells") {
    std::mt19937_64 g(8);
    for (int round = 0; round < 100; ++round) {
        eval::EvaluationReport r;
        const std::size_t n = 2 + g() % 6;
        for (std::size_t i = 0; i < n; ++i) r.labels.push_back(std::string(1, static_cast<char>('a' + i)));
        r.confusion.assign(n, std::vector<std::size_t>(n, 0));
        for (auto& row : r.confusion) {
            for (auto& c : row) c = g() % 4;
        }
        std::vector<std::tuple<long, std::string, std::string>> cells;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (i != j && r.confusion[i][j] > 0) {
                    cells.emplace_back(-static_cast<long>(r.confusion[i][j]), r.labels[i], r.labels[j]);
                }
            }
        }
        std::sort(cells.begin(), cells.end());
        const std::size_t want_n = 1 + g() % 10;
        const auto got = eval::confusion_top_pairs(r, want_n);
        REQUIRE(got.size() == std::min(want_n, cells.size()));
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].count == static_cast<std::size_t>(-std::get<0>(cells[i])));
            CHECK(got[i].truth == std::get<1>(cells[i]));
            CHECK(got[i].predicted == std::get<2>(cells[i]));
        }
    }
}

TEST_CASE("report json round trip") {
    const std::vector<std::string> truth = {"a", "a", "b"};
    const std::vector<PredictionResult> preds = {pick("a"), pick("b"), pick("b")};
    const auto r = eval::evaluate(truth, preds, 2);
    const auto back = eval::EvaluationReport::from_json(nlohmann::json::parse(r.to_json().dump()));
    CHECK(back.accuracy == r.accuracy);
    CHECK(back.confusion == r.confusion);
    CHECK(back.labels == r.labels);
    CHECK(back.to_json() == r.to_json());
}

TEST_CASE("threshold sweep rows") {
    std::vector<corpus::Report> reports;
    for (const char* label : {"x", "y", "z"}) {
        for (int i = 0; i < 40; ++i) reports.push_back({std::string(label) + std::to_string(i), std::string(label) + " nota", label, {}});
    }
    const corpus::Corpus c(reports);
    const eval::PipelineFactory constant = [](const corpus::Corpus&) {
        return [](const corpus::Report&) { return PredictionResult({"x", "y", "z"}, {0.5, 0.3, 0.2}); };
    };
    const std::vector<std::size_t> one = {1};
    const auto rows = eval::threshold_sweep(c, one, constant);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].n_classes == 3);
    REQUIRE_FALSE(rows[0].skipped());
    CHECK(rows[0].report->n == 24);

    const std::vector<std::size_t> too_high = {41};
    const auto skipped = eval::threshold_sweep(c, too_high, constant);
    REQUIRE(skipped.size() == 1);
    CHECK(skipped[0].skipped());
    CHECK(skipped[0].n_classes == 0);
    CHECK_FALSE(skipped[0].skipped_reason.empty());
    CHECK(eval::sweep_csv(skipped).find("41") != std::string::npos);
}
