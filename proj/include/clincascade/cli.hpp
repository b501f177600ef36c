#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "clincascade/classifier.hpp"
#include "clincascade/eval.hpp"

namespace clincascade::cli {

/// Resolved settings for one command. Built from defaults, then the TOML
/// config file, then command-line flags.
struct RunConfig {
    std::map<std::string, std::filesystem::path> paths;  // corpus, rules, relations, ...
    std::filesystem::path out = "out";
    classifier::Hyperparams hp;
    std::size_t threshold = 61;
    std::vector<std::size_t> thresholds{2, 10, 25, 50, 61, 75, 100};
    std::size_t k = 2;
    std::string mode = "predictive";
    std::string order = "search";
    std::string select_by = "accuracy";
    eval::MacroAverage macro_over = eval::MacroAverage::truth;
    classifier::BackendSpec backend;
    std::uint64_t seed = 0;
    std::size_t n_per_class = 40;
    double noise = 0.3;
    std::size_t classes = 0;  // 0 = every row of the relation table
    std::size_t top = 10;

    /// Everything that can change an artifact; `out` is excluded.
    nlohmann::ordered_json to_json() const;
};

/// Names of the path keys recognised in configs and flags.
const std::vector<std::string>& path_keys();

/// Reads `[paths]`, `[hyperparams]`, `[backend]` and top-level keys. Relative
/// paths resolve against the config file's directory.
void apply_config_file(RunConfig& config, const std::filesystem::path& file);

/// Entry point. Returns the process exit status: 0 on success, 1 on a
/// module error (error JSON on `err`), 2 on a usage error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace clincascade::cli
