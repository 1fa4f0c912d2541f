#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "protocheck/cli.hpp"

using namespace protocheck;

namespace {

void add_shared_flags(CLI::App* cmd, CliConfig& cfg, std::string& config_path) {
    cmd->add_option("--manifest", cfg.manifest_paths, "session manifest (repeatable)");
    cmd->add_option("--config", config_path, "JSON config file; CLI flags override it");
    cmd->add_option("--out", cfg.out_dir, "output directory");
}

void add_inference_flags(CLI::App* cmd, CliConfig& cfg, std::string& backend_kind,
                         std::string& empty_fallback, std::string& condition) {
    cmd->add_option("--templates", cfg.templates_path, "prompt template fixture");
    cmd->add_option("--backend", backend_kind, "mock | http");
    cmd->add_option("--base-url", cfg.run.backend.base_url, "inference server base URL");
    cmd->add_option("--model", cfg.run.backend.model_id, "served model id");
    cmd->add_option("--mock-script", cfg.run.backend.mock_script_path, "mock script JSON");
    cmd->add_option("--temperature", cfg.run.backend.temperature, "sampling temperature");
    cmd->add_option("--max-output-tokens", cfg.run.backend.max_output_tokens, "completion budget");
    cmd->add_option("--request-timeout-s", cfg.run.backend.request_timeout_s, "per-request timeout");
    cmd->add_option("--max-retries", cfg.run.backend.max_retries, "transport retries (0-5)");
    cmd->add_option("--max-in-flight", cfg.run.backend.max_in_flight, "concurrent request bound");
    cmd->add_option("--delta-pre-s", cfg.run.context.delta_pre_s, "pre-event buffer seconds");
    cmd->add_option("--delta-post-s", cfg.run.context.delta_post_s, "post-event buffer seconds");
    cmd->add_option("--tau", cfg.run.context.tau, "similarity threshold");
    cmd->add_option("--empty-fallback", empty_fallback, "auto_false | top_k");
    cmd->add_option("--top-k", cfg.run.context.top_k, "fallback context size");
    cmd->add_option("--embedding-provider", cfg.embedding_provider, "hashing | remote");
    cmd->add_option("--embedding-model", cfg.embedding_model, "remote embedding model id");
    cmd->add_option("--embedding-dim", cfg.embedding_dim, "embedding dimension");
    cmd->add_option("--fuzzy-overlap", cfg.run.grounding_fuzzy_overlap,
                    "token overlap for fuzzy evidence grounding");
    cmd->add_option("--condition", condition,
                    "context selection condition: none | temporal_only | semantic_only | "
                    "temporal_then_semantic");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"checklist compliance assessment over communication transcripts"};
    app.require_subcommand(1);

    CliConfig cfg;
    std::string config_path;
    std::string backend_kind;
    std::string empty_fallback;
    std::string condition;
    std::string normalization;
    std::string conditions_csv;

    CLI::App* run = app.add_subcommand("run", "run inference over sessions");
    add_shared_flags(run, cfg, config_path);
    add_inference_flags(run, cfg, backend_kind, empty_fallback, condition);
    run->add_flag("--resume", cfg.run.resume, "skip items already in the predictions file");

    CLI::App* score = app.add_subcommand("score", "score a predictions file against ground truth");
    add_shared_flags(score, cfg, config_path);
    score->add_option("--predictions", cfg.predictions_path, "predictions.jsonl to score");
    score->add_option("--ratings", cfg.ratings_path, "justification ratings CSV");
    score->add_option("--normalization", normalization, "scenario_scaled | raw_share");

    CLI::App* ablate = app.add_subcommand("ablate", "compare context selection conditions");
    add_shared_flags(ablate, cfg, config_path);
    add_inference_flags(ablate, cfg, backend_kind, empty_fallback, condition);
    ablate->add_option("--conditions", conditions_csv,
                       "comma-separated condition list (default: all four)");
    ablate->add_option("--ratings", cfg.ratings_path, "justification ratings CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        // precedence: defaults < config file < flags. Flags were parsed into
        // cfg already, so re-apply only the ones the user actually passed.
        if (!config_path.empty()) {
            CliConfig file_cfg;
            apply_config_file(file_cfg, config_path);
            CLI::App* active = app.get_subcommands().front();
            auto keep = [&](const std::string& flag) { return active->count(flag) > 0; };

            CliConfig merged = file_cfg;
            if (keep("--manifest") || file_cfg.manifest_paths.empty())
                merged.manifest_paths = cfg.manifest_paths;
            if (keep("--templates") || merged.templates_path.empty())
                merged.templates_path = cfg.templates_path;
            merged.out_dir = cfg.out_dir;
            merged.predictions_path = cfg.predictions_path;
            merged.ratings_path = cfg.ratings_path;
            merged.run.resume = cfg.run.resume;
            if (keep("--base-url")) merged.run.backend.base_url = cfg.run.backend.base_url;
            if (keep("--model")) merged.run.backend.model_id = cfg.run.backend.model_id;
            if (keep("--mock-script"))
                merged.run.backend.mock_script_path = cfg.run.backend.mock_script_path;
            if (keep("--temperature")) merged.run.backend.temperature = cfg.run.backend.temperature;
            if (keep("--max-output-tokens"))
                merged.run.backend.max_output_tokens = cfg.run.backend.max_output_tokens;
            if (keep("--request-timeout-s"))
                merged.run.backend.request_timeout_s = cfg.run.backend.request_timeout_s;
            if (keep("--max-retries")) merged.run.backend.max_retries = cfg.run.backend.max_retries;
            if (keep("--max-in-flight"))
                merged.run.backend.max_in_flight = cfg.run.backend.max_in_flight;
            if (keep("--delta-pre-s")) merged.run.context.delta_pre_s = cfg.run.context.delta_pre_s;
            if (keep("--delta-post-s"))
                merged.run.context.delta_post_s = cfg.run.context.delta_post_s;
            if (keep("--tau")) merged.run.context.tau = cfg.run.context.tau;
            if (keep("--top-k")) merged.run.context.top_k = cfg.run.context.top_k;
            if (keep("--embedding-provider")) merged.embedding_provider = cfg.embedding_provider;
            if (keep("--embedding-model")) merged.embedding_model = cfg.embedding_model;
            if (keep("--embedding-dim")) merged.embedding_dim = cfg.embedding_dim;
            if (keep("--fuzzy-overlap"))
                merged.run.grounding_fuzzy_overlap = cfg.run.grounding_fuzzy_overlap;
            cfg = merged;
        }
        if (!backend_kind.empty()) cfg.run.backend.kind = backend_kind_from_string(backend_kind);
        if (!empty_fallback.empty())
            cfg.run.context.empty_fallback = empty_fallback_from_string(empty_fallback);
        if (!condition.empty()) cfg.run.condition = ablation_condition_from_string(condition);
        if (!normalization.empty())
            cfg.run.normalization = priority_normalization_from_string(normalization);
        if (!conditions_csv.empty()) {
            cfg.conditions.clear();
            std::size_t pos = 0;
            while (pos <= conditions_csv.size()) {
                std::size_t comma = conditions_csv.find(',', pos);
                if (comma == std::string::npos) comma = conditions_csv.size();
                cfg.conditions.push_back(
                    ablation_condition_from_string(conditions_csv.substr(pos, comma - pos)));
                pos = comma + 1;
            }
        }
        apply_environment(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    if (app.got_subcommand("run")) return cmd_run(cfg);
    if (app.got_subcommand("score")) return cmd_score(cfg);
    if (app.got_subcommand("ablate")) return cmd_ablate(cfg);
    return 1;
}
