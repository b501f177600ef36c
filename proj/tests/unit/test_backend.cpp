#include <doctest.h>

#include <map>
#include <string>
#include <vector>

#include "clincascade/backend_client.hpp"
#include "clincascade/classifier.hpp"
#include "clincascade/error.hpp"

using namespace clincascade;

namespace {

std::vector<std::string> stub(const std::string& mode = {}) {
    std::vector<std::string> cmd = {CLINCASCADE_STUB_SERVER};
    if (!mode.empty()) cmd.push_back("--misbehave=" + mode);
    return cmd;
}

std::map<std::string, bool> results(const std::vector<backend::ConformanceCheck>& checks) {
    std::map<std::string, bool> out;
    for (const auto& c : checks) out[c.name] = c.passed;
    return out;
}

}  // namespace

TEST_CASE("a well-behaved server passes every conformance check") {
    const auto checks = backend::run_conformance(stub());
    CHECK(checks.size() == 8);
    for (const auto& c : checks) CHECK_MESSAGE(c.passed, c.name << ": " << c.detail);
}

TEST_CASE("each misbehaviour fails its check") {
    CHECK_FALSE(results(backend::run_conformance(stub("wrong-version"))).at("info reports protocol_version 1"));

    // Mismatched ids already break the handshake.
    const auto bad_id = backend::run_conformance(stub("bad-id"));
    CHECK_FALSE(bad_id.front().passed);

    const auto unnormalized = results(backend::run_conformance(stub("unnormalized")));
    CHECK(unnormalized.at("info reports protocol_version 1"));
    CHECK_FALSE(unnormalized.at("train then predict returns normalized rows"));
    CHECK(unnormalized.at("malformed JSON yields parse"));

    const auto no_exit = results(backend::run_conformance(stub("no-exit")));
    CHECK_FALSE(no_exit.at("shutdown exits 0 within 5 s"));
    CHECK(no_exit.at("unknown cmd yields unsupported"));
}

TEST_CASE("a missing executable is a backend error") {
    try {
        backend::Session::spawn({"/nonexistent/model-server"}, std::chrono::seconds(5));
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::backend);
    }
    const auto checks = backend::run_conformance({"/nonexistent/model-server"});
    REQUIRE(checks.size() == 1);
    CHECK_FALSE(checks[0].passed);
}

TEST_CASE("session requests") {
    auto s = backend::Session::spawn(stub());
    CHECK(s->info().at("protocol_version") == "1");
    const auto r = s->request("predict", {{"model_id", "missing"}, {"texts", {"x"}}});
    CHECK_FALSE(r.ok);
    CHECK(r.error_code == "not_found");
    CHECK(s->shutdown() == 0);
}

TEST_CASE("external backend reproduces the builtin rankings") {
    std::vector<classifier::Example> examples;
    const char* words[] = {"placa", "pápula", "mácula", "nódulo", "vesícula"};
    for (int i = 0; i < 100; ++i) {
        examples.push_back({std::string(words[i % 5]) + " en zona " + std::to_string(i % 3), "label" + std::to_string(i % 5)});
    }
    classifier::Hyperparams hp;
    hp.seed = 42;
    hp.learning_rate = 0.05;
    const auto builtin = classifier::train(classifier::BackendSpec::builtin(), examples, hp);
    const auto external = classifier::train(classifier::BackendSpec::external(stub()), examples, hp);
    CHECK(external.backend() == classifier::ClassifierModel::Backend::external);
    CHECK(external.labels() == builtin.labels());

    std::vector<std::string> texts;
    for (const auto& e : examples) texts.push_back(e.text);
    texts.push_back("texto sin vocabulario conocido");
    const auto a = builtin.predict_batch(texts);
    const auto b = external.predict_batch(texts);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].ranking() == b[i].ranking());
        CHECK(a[i].top_k(5) == b[i].top_k(5));
    }
}
