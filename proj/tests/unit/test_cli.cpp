#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "clincascade/cli.hpp"
#include "clincascade/io.hpp"

using namespace clincascade;
namespace fs = std::filesystem;

namespace {

const fs::path kData = CLINCASCADE_DATA_DIR;

struct Run {
    int status;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "clincascade");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int status = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {status, out.str(), err.str()};
}

nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("clincascade_cli_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("help lists the documented defaults") {
    const auto r = run({"train", "--help"});
    CHECK(r.status == 0);
    for (const char* d : {"[64]", "[0.001]", "[10]", "[61]", "[2]"}) CHECK_MESSAGE(r.out.find(d) != std::string::npos, d);
}

TEST_CASE("unknown subcommands and bad flags are usage errors") {
    CHECK(run({"frobnicate"}).status == 2);
    CHECK(run({"train", "--epochs", "many"}).status == 2);
}

TEST_CASE("flags override the config file, which overrides defaults") {
    TempDir dir("config");
    {
        std::ofstream cfg(dir.path / "run.toml");
        cfg << "seed = 5\nn_per_class = 3\n[paths]\nrelations = \"" << (kData / "ontology" / "dermatology_relations.tsv").generic_string()
            << "\"\n";
    }
    const auto r = run({"synth", "--config", (dir.path / "run.toml").string(), "--n-per-class", "4", "--classes", "2",
                        "--out", (dir.path / "out").string()});
    REQUIRE_MESSAGE(r.status == 0, r.err);
    const auto m = read_json(dir.path / "out" / "manifest.synth.json");
    CHECK(m["config"]["seed"] == 5);
    CHECK(m["config"]["n_per_class"] == 4);
    CHECK(m["config"]["noise"] == 0.3);
    CHECK(m["config"]["hyperparams"]["batch_size"] == 64);
    CHECK(m["command"] == "synth");
    CHECK(m["inputs"].contains("relations"));

    std::ifstream in(dir.path / "out" / "synthetic.jsonl");
    std::size_t lines = 0;
    for (std::string line; std::getline(in, line);) lines += !line.empty();
    CHECK(lines == 8);
}

TEST_CASE("unknown config keys are rejected") {
    TempDir dir("badcfg");
    std::ofstream(dir.path / "run.toml") << "learning_rate = 0.1\n";
    const auto r = run({"synth", "--config", (dir.path / "run.toml").string(), "--out", dir.path.string()});
    CHECK(r.status == 1);
    const auto err = nlohmann::json::parse(r.err);
    CHECK(err["error"]["kind"] == "schema");
    CHECK(err["error"]["module"] == "cli");
}

TEST_CASE("module errors print a json error and exit 1") {
    TempDir dir("err");
    const auto r = run({"evaluate", "--pred", (dir.path / "missing.jsonl").string(), "--out", dir.path.string()});
    CHECK(r.status == 1);
    const auto err = nlohmann::json::parse(r.err);
    CHECK(err["error"].contains("message"));
    CHECK(err["error"].contains("operation"));
}

TEST_CASE("evaluate on an empty predictions file is a validation error") {
    TempDir dir("empty");
    std::ofstream(dir.path / "pred.jsonl") << "";
    const auto r = run({"evaluate", "--pred", (dir.path / "pred.jsonl").string(), "--out", dir.path.string()});
    CHECK(r.status == 1);
    CHECK(nlohmann::json::parse(r.err)["error"]["kind"] == "validation");
}

TEST_CASE("synth, search training, inference and evaluation end to end") {
    TempDir dir("e2e");
    const auto out = dir.path.string();
    REQUIRE(run({"synth", "--relations", (kData / "ontology" / "dermatology_relations.tsv").string(), "--classes", "4",
                 "--n-per-class", "25", "--noise", "0.2", "--out", out})
                .status == 0);
    const auto t = run({"train", "--in", (dir.path / "synthetic.jsonl").string(), "--threshold", "2", "--epochs", "2",
                        "--lr", "0.05", "--out", out});
    REQUIRE_MESSAGE(t.status == 0, t.err);
    const auto m = read_json(dir.path / "manifest.train.json");
    CHECK(m["details"]["orderings_trained"].size() == 15);
    CHECK(fs::exists(dir.path / "pipeline" / "order.json"));

    const auto i = run({"infer", "--pipeline", (dir.path / "pipeline").string(), "--in",
                        (dir.path / "split" / "test.jsonl").string(), "--out", out});
    REQUIRE_MESSAGE(i.status == 0, i.err);
    const auto e = run({"evaluate", "--pred", (dir.path / "predictions.jsonl").string(), "--out", out});
    REQUIRE_MESSAGE(e.status == 0, e.err);
    const auto report = read_json(dir.path / "report.json");
    CHECK(report["n"] == 20);
    CHECK(fs::exists(dir.path / "confusion.csv"));
    CHECK(fs::exists(dir.path / "confusion.ppm"));

    const auto rep = run({"report", "--report", (dir.path / "report.json").string(), "--out", out});
    CHECK_MESSAGE(rep.status == 0, rep.err);
    CHECK(fs::exists(dir.path / "report.md"));
}

TEST_CASE("conformance subcommand") {
    TempDir dir("conf");
    const auto ok = run({"conformance", "--backend-command", CLINCASCADE_STUB_SERVER, "--out", dir.path.string()});
    CHECK_MESSAGE(ok.status == 0, ok.err);
    CHECK(ok.out.find("FAIL") == std::string::npos);
    CHECK(fs::exists(dir.path / "conformance.json"));
    const auto bad = run({"conformance", "--backend-command", std::string(CLINCASCADE_STUB_SERVER) + " --misbehave=unnormalized",
                          "--out", dir.path.string()});
    CHECK(bad.status != 0);
    CHECK(bad.out.find("FAIL") != std::string::npos);
}
