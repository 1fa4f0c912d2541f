#pragma once

#include <string>
#include <vector>

#include "protocheck/pipeline.hpp"

namespace protocheck {

/// Everything the subcommands need; defaults < config file < CLI flags.
struct CliConfig {
    std::vector<std::string> manifest_paths;
    std::string templates_path;
    std::string out_dir = "out";
    std::string config_path;

    RunOptions run;

    std::string embedding_provider = "hashing";  // hashing | remote
    std::string embedding_model = "minilm";
    int embedding_dim = 256;

    // score-only inputs
    std::string predictions_path;
    std::string ratings_path;

    // ablate-only
    std::vector<AblationCondition> conditions = all_ablation_conditions();
};

/// Merges a JSON config file into cfg (file wins over current values;
/// CLI flags are applied afterwards by the caller).
void apply_config_file(CliConfig& cfg, const std::string& path);

/// Fills base_url / api_key from PROTOCHECK_BASE_URL / PROTOCHECK_API_KEY
/// when unset.
void apply_environment(CliConfig& cfg);

int cmd_run(const CliConfig& cfg);
int cmd_score(const CliConfig& cfg);
int cmd_ablate(const CliConfig& cfg);

}  // namespace protocheck
