#include <doctest.h>

#include <filesystem>
#include <map>
#include <random>
#include <string>

#include "../support/anon_corpus.hpp"
#include "clincascade/anonymizer.hpp"
#include "clincascade/error.hpp"
#include "clincascade/text.hpp"

using namespace clincascade;
using anonymizer::Verdict;

namespace {

const anonymizer::MaskingRuleSet& bundled() {
    static const auto rules = anonymizer::load_rules(std::filesystem::path(CLINCASCADE_DATA_DIR) / "rules" / "rules.toml");
    return rules;
}

std::string mask(std::string_view s) { return anonymizer::mask_entities(s, bundled()).text; }

}  // namespace

TEST_CASE("strip_numeric removes digits only") {
    CHECK(anonymizer::strip_numeric("visto el 12/03/2021, DNI 48291") == "visto el //, DNI ");
    CHECK(anonymizer::strip_numeric("hace ٣ meses") == "hace  meses");
    CHECK(anonymizer::strip_numeric("") == "");

    // Against a character-by-character filter over ASCII.
    std::mt19937_64 g(11);
    for (int round = 0; round < 500; ++round) {
        std::string s, expect;
        for (int i = 0, n = static_cast<int>(g() % 30); i < n; ++i) {
            const char c = static_cast<char>(' ' + g() % 95);
            s.push_back(c);
            if (c < '0' || c > '9') expect.push_back(c);
        }
        CHECK(anonymizer::strip_numeric(s) == expect);
    }
}

TEST_CASE("title trigger masks the following names") {
    CHECK(mask("derivado por la dra García López") == "derivado por la dra [Entity] [Entity]");
    CHECK(mask("Visto por Dr. Martínez. Refiere prurito") == "Visto por Dr. [Entity]. Refiere prurito");
}

TEST_CASE("exception terms are never masked") {
    const std::string s = "presenta cabello seco, lesión de aspecto benigno";
    CHECK(mask(s) == s);
    // A surname that is also a domain term survives even after a title.
    CHECK(mask("valorado por doctor Calvo") == "valorado por doctor Calvo");
}

TEST_CASE("frequent words that double as names are kept") {
    CHECK(mask("lesión de color rosa en el tronco") == "lesión de color rosa en el tronco");
    CHECK(mask("acude con García") == "acude con [Entity]");
}

TEST_CASE("gazetteer matching ignores case and accents") {
    CHECK(mask("GARCIA") == "[Entity]");
    CHECK(mask("garcía") == "[Entity]");
}

TEST_CASE("anonymize an empty corpus") {
    const auto [out, report] = anonymizer::anonymize(corpus::Corpus{}, bundled());
    CHECK(out.empty());
    CHECK(report.total_masked() == 0);
}

TEST_CASE("one name per report gives one mask per report") {
    std::vector<corpus::Report> reports;
    for (int i = 0; i < 10; ++i) reports.push_back({std::to_string(i), "acude García a consulta", "x", {}});
    const auto [out, report] = anonymizer::anonymize(corpus::Corpus(reports), bundled());
    CHECK(report.total_masked() == 10);
    CHECK(report.n_masked_by_rule.at("surnames") == 10);
    for (const auto& r : out) CHECK(r.text == "acude [Entity] a consulta");
}

TEST_CASE("anonymize is idempotent and its spans point into the original text") {
    const auto input = support::anonymizer_corpus(bundled(), 200, 4);
    const auto [once, report] = anonymizer::anonymize(input, bundled());
    const auto [twice, report2] = anonymizer::anonymize(once, bundled());
    CHECK(twice == once);
    CHECK(report2.total_masked() == 0);
    CHECK(report.n_numeric_removed > 0);

    std::map<std::string, const corpus::Report*> by_id;
    for (const auto& r : input) by_id[r.id] = &r;
    for (const auto& s : report.masked_spans) {
        const auto& original = by_id.at(s.report_id)->text;
        REQUIRE(s.end <= original.size());
        const auto piece = anonymizer::strip_numeric(std::string_view(original).substr(s.start, s.end - s.start));
        CHECK_FALSE(text::trim(piece).empty());
        if (s.rule == anonymizer::kTitleRule) CHECK(piece.find(' ') == std::string::npos);
    }
}

TEST_CASE("agreement") {
    std::map<std::string, Verdict> a, b;
    for (int i = 0; i < 50; ++i) a[std::to_string(i)] = b[std::to_string(i)] = Verdict::ok;
    auto r = anonymizer::agreement(a, b);
    CHECK(r.n_common == 50);
    CHECK(r.n_disagree == 0);
    CHECK(r.rate == 1.0);

    a.clear();
    b.clear();
    for (int i = 0; i < 112; ++i) {
        a["c" + std::to_string(i)] = Verdict::ok;
        b["c" + std::to_string(i)] = i < 4 ? Verdict::error : Verdict::ok;
    }
    a["only-a"] = Verdict::error;
    b["only-b"] = Verdict::ok;
    r = anonymizer::agreement(a, b);
    CHECK(r.n_common == 112);
    CHECK(r.n_disagree == 4);
    CHECK(r.rate == doctest::Approx(108.0 / 112.0));

    CHECK_THROWS_AS(anonymizer::agreement({{"x", Verdict::ok}}, {{"y", Verdict::ok}}), Error);
}

TEST_CASE("agreement matches a pairwise count on random judgments") {
    std::mt19937_64 g(21);
    for (int round = 0; round < 200; ++round) {
        std::map<std::string, Verdict> a, b;
        for (int i = 0; i < 40; ++i) {
            if (g() % 3) a[std::to_string(g() % 30)] = g() % 2 ? Verdict::ok : Verdict::error;
            if (g() % 3) b[std::to_string(g() % 30)] = g() % 2 ? Verdict::ok : Verdict::error;
        }
        std::size_t common = 0, differ = 0;
        for (const auto& [ka, va] : a) {
            for (const auto& [kb, vb] : b) {
                if (ka != kb) continue;
                ++common;
                differ += va != vb;
            }
        }
        if (common == 0) {
            CHECK_THROWS(anonymizer::agreement(a, b));
            continue;
        }
        const auto r = anonymizer::agreement(a, b);
        CHECK(r.n_common == common);
        CHECK(r.n_disagree == differ);
        CHECK(r.rate == doctest::Approx(1.0 - static_cast<double>(differ) / common));
    }
}

TEST_CASE("rule sets are validated") {
    anonymizer::MaskingRuleSet rules;
    rules.mask_token = "";
    CHECK_THROWS_AS(rules.validate(), Error);
}
