#include <doctest.h>

#include <filesystem>
#include <set>
#include <string>

#include "clincascade/corpus.hpp"
#include "clincascade/error.hpp"
#include "clincascade/ontology.hpp"

using namespace clincascade;
namespace fs = std::filesystem;

namespace {

corpus::Corpus labelled(const std::vector<std::pair<std::string, std::size_t>>& counts) {
    std::vector<corpus::Report> reports;
    for (const auto& [label, n] : counts) {
        for (std::size_t i = 0; i < n; ++i) {
            reports.push_back({label + "-" + std::to_string(i), "nota " + std::to_string(i), label, {}});
        }
    }
    return corpus::Corpus(std::move(reports));
}

std::set<std::string> ids(const corpus::Corpus& c) {
    std::set<std::string> out;
    for (const auto& r : c) out.insert(r.id);
    return out;
}

template <typename F>
ErrorKind kind_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error raised");
    return ErrorKind::io;
}

}  // namespace

TEST_CASE("jsonl with three rows loads") {
    const auto c = corpus::parse_jsonl(
        R"({"id":"1","text":"placa en codo","pathology":"psoriasis"}
{"id":"2","text":"pápula perlada","pathology":"carcinoma basocelular"}
{"id":"3","text":"comedones","pathology":"acné"}
)");
    REQUIRE(c.size() == 3);
    CHECK(c[1].pathology == "carcinoma basocelular");
    CHECK(c.label_counts().at("acné") == 1);
}

TEST_CASE("missing pathology is a schema error naming the row") {
    try {
        corpus::parse_jsonl(R"({"id":"1","text":"a","pathology":"x"}
{"id":"2","text":"b"})");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::schema);
        CHECK(std::string(e.what()).find("row 2") != std::string::npos);
        CHECK(std::string(e.what()).find("pathology") != std::string::npos);
    }
}

TEST_CASE("duplicate ids are rejected") {
    CHECK(kind_of([] {
              corpus::parse_jsonl(R"({"id":"1","text":"a","pathology":"x"}
{"id":"1","text":"b","pathology":"y"})");
          }) == ErrorKind::validation);
}

TEST_CASE("blank text is rejected") {
    CHECK(kind_of([] { corpus::Corpus({{"1", "   ", "x", {}}}); }) == ErrorKind::validation);
}

TEST_CASE("jsonl and csv round trip") {
    const auto dir = fs::temp_directory_path() / "clincascade_corpus_rt";
    fs::create_directories(dir);
    const corpus::Corpus c({{"a", "texto con \"comillas\", comas\ny saltos", "eccema", {}},
                            {"b", "otro", "acné", {{Relation::site, "face"}}}});
    for (const char* name : {"c.jsonl", "c.csv"}) {
        corpus::save_corpus(c, dir / name);
        const auto back = corpus::load_corpus(dir / name);
        CHECK(back == c);
    }
    fs::remove_all(dir);
}

TEST_CASE("filter_by_threshold") {
    const auto c = labelled({{"a", 5}, {"b", 3}, {"c", 1}});
    CHECK(corpus::filter_by_threshold(c, 1) == c);
    const auto f3 = corpus::filter_by_threshold(c, 3);
    CHECK(f3.size() == 8);
    CHECK(corpus::filter_by_threshold(f3, 3) == f3);
    const auto f4 = corpus::filter_by_threshold(c, 4);
    for (const auto& id : ids(f4)) CHECK(ids(f3).contains(id));
    CHECK(kind_of([&] { corpus::filter_by_threshold(c, 6); }) == ErrorKind::empty_result);
}

TEST_CASE("stratified split keeps label proportions") {
    const auto c = labelled({{"a", 50}, {"b", 50}});
    const auto parts = corpus::stratified_split(c, {{0.8, 0.2}, 7, "pathology"});
    REQUIRE(parts.size() == 2);
    CHECK(parts[0].size() == 80);
    CHECK(parts[1].size() == 20);
    CHECK(parts[0].label_counts().at("a") == 40);
    CHECK(parts[1].label_counts().at("b") == 10);

    auto all = ids(parts[0]);
    for (const auto& id : ids(parts[1])) CHECK(all.insert(id).second);
    CHECK(all == ids(c));

    const auto again = corpus::stratified_split(c, {{0.8, 0.2}, 7, "pathology"});
    CHECK(again[0] == parts[0]);
    CHECK(again[1] == parts[1]);
    const auto other = corpus::stratified_split(c, {{0.8, 0.2}, 8, "pathology"});
    CHECK_FALSE(other[0] == parts[0]);

    const auto whole = corpus::stratified_split(c, {{1.0}, 7, "pathology"});
    CHECK(ids(whole[0]) == ids(c));
}

TEST_CASE("split rejects fractions that do not sum to one") {
    const auto c = labelled({{"a", 4}});
    CHECK(kind_of([&] { corpus::stratified_split(c, {{0.5, 0.4}, 0, "pathology"}); }) == ErrorKind::validation);
}

TEST_CASE("review partition") {
    const auto c = labelled({{"a", 500}, {"b", 300}, {"c", 200}});
    const auto p = corpus::make_review_partition(c, 0.1, 0.25, 3);
    CHECK(p.common.size() == 25);
    // 75 non-shared reports cannot split evenly; sizes may differ by one.
    CHECK(p.set_a.size() + p.set_b.size() == 125);
    CHECK(p.set_a.size() - p.set_b.size() <= 1);
    auto a = ids(p.set_a), b = ids(p.set_b);
    std::set<std::string> both, either = a;
    either.insert(b.begin(), b.end());
    for (const auto& id : a) {
        if (b.contains(id)) both.insert(id);
    }
    CHECK(both == ids(p.common));
    CHECK(either.size() == 100);

    const auto disjoint = corpus::make_review_partition(c, 0.1, 0.0, 3);
    CHECK(disjoint.common.empty());
    for (const auto& id : ids(disjoint.set_a)) CHECK_FALSE(ids(disjoint.set_b).contains(id));
}

TEST_CASE("synthetic corpus cues follow the noise level") {
    ontology::RelationTable table;
    table.insert("acné", {"disease", "mild", "all"});
    table.insert("psoriasis", {"autoimmune process", "harmless", "extremities"});
    const auto cues = [&](const corpus::Report& r) {
        const auto& row = table.at(r.pathology);
        int n = 0;
        for (const Relation rel : kAllRelations) {
            n += r.text.find(corpus::cue_token(rel, row.get(rel))) != std::string::npos;
        }
        n += r.text.find(corpus::disease_cue_token(r.pathology)) != std::string::npos;
        return n;
    };
    const auto clean = corpus::generate_synthetic(table, 30, 0.0, 1);
    CHECK(clean.size() == 60);
    for (const auto& r : clean) {
        CHECK(cues(r) == 4);
        CHECK(r.relations.size() == 3);
    }
    for (const auto& r : corpus::generate_synthetic(table, 30, 1.0, 1)) CHECK(cues(r) == 0);
    CHECK(corpus::generate_synthetic(table, 30, 0.3, 9) == corpus::generate_synthetic(table, 30, 0.3, 9));
}
