#include "protocheck/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

namespace protocheck {

namespace fs = std::filesystem;
using nlohmann::json;

void apply_config_file(CliConfig& cfg, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    json j = json::parse(buf.str(), nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw std::runtime_error("config file is not a JSON object: " + path);

    if (j.contains("context")) {
        const json& c = j["context"];
        if (c.contains("delta_pre_s")) cfg.run.context.delta_pre_s = c["delta_pre_s"].get<double>();
        if (c.contains("delta_post_s")) cfg.run.context.delta_post_s = c["delta_post_s"].get<double>();
        if (c.contains("tau")) cfg.run.context.tau = c["tau"].get<double>();
        if (c.contains("empty_fallback"))
            cfg.run.context.empty_fallback =
                empty_fallback_from_string(c["empty_fallback"].get<std::string>());
        if (c.contains("top_k")) cfg.run.context.top_k = c["top_k"].get<int>();
    }
    if (j.contains("embedding")) {
        const json& e = j["embedding"];
        if (e.contains("provider")) cfg.embedding_provider = e["provider"].get<std::string>();
        if (e.contains("model")) cfg.embedding_model = e["model"].get<std::string>();
        if (e.contains("dim")) cfg.embedding_dim = e["dim"].get<int>();
    }
    if (j.contains("backend")) {
        const json& b = j["backend"];
        if (b.contains("kind"))
            cfg.run.backend.kind = backend_kind_from_string(b["kind"].get<std::string>());
        if (b.contains("base_url")) cfg.run.backend.base_url = b["base_url"].get<std::string>();
        if (b.contains("model_id")) cfg.run.backend.model_id = b["model_id"].get<std::string>();
        if (b.contains("temperature")) cfg.run.backend.temperature = b["temperature"].get<double>();
        if (b.contains("max_output_tokens"))
            cfg.run.backend.max_output_tokens = b["max_output_tokens"].get<int>();
        if (b.contains("request_timeout_s"))
            cfg.run.backend.request_timeout_s = b["request_timeout_s"].get<double>();
        if (b.contains("max_retries")) cfg.run.backend.max_retries = b["max_retries"].get<int>();
        if (b.contains("max_in_flight")) cfg.run.backend.max_in_flight = b["max_in_flight"].get<int>();
        if (b.contains("mock_script")) cfg.run.backend.mock_script_path = b["mock_script"].get<std::string>();
    }
    if (j.contains("grounding") && j["grounding"].contains("fuzzy_overlap"))
        cfg.run.grounding_fuzzy_overlap = j["grounding"]["fuzzy_overlap"].get<double>();
    if (j.contains("normalization"))
        cfg.run.normalization = priority_normalization_from_string(j["normalization"].get<std::string>());
    if (j.contains("templates")) {
        fs::path p = j["templates"].get<std::string>();
        cfg.templates_path = p.is_absolute() ? p.string() : (fs::path(path).parent_path() / p).string();
    }
    if (j.contains("manifests") && j["manifests"].is_array())
        for (const auto& m : j["manifests"]) {
            fs::path p = m.get<std::string>();
            cfg.manifest_paths.push_back(
                p.is_absolute() ? p.string() : (fs::path(path).parent_path() / p).string());
        }
}

void apply_environment(CliConfig& cfg) {
    if (cfg.run.backend.base_url.empty())
        if (const char* url = std::getenv("PROTOCHECK_BASE_URL")) cfg.run.backend.base_url = url;
    if (cfg.run.backend.api_key.empty())
        if (const char* key = std::getenv("PROTOCHECK_API_KEY")) cfg.run.backend.api_key = key;
}

namespace {

struct LoadedInputs {
    std::vector<Session> sessions;
    std::map<std::string, PromptTemplate> templates;
    std::unique_ptr<EmbeddingProvider> base_provider;
    std::unique_ptr<MemoizedEmbeddingProvider> provider;
};

LoadedInputs load_inputs(const CliConfig& cfg, bool need_templates) {
    LoadedInputs inputs;
    if (cfg.manifest_paths.empty()) throw std::runtime_error("no session manifests given");
    for (const auto& path : cfg.manifest_paths) inputs.sessions.push_back(load_session(path));

    if (need_templates) {
        if (cfg.templates_path.empty()) throw std::runtime_error("no template fixture given");
        inputs.templates = load_prompt_templates(cfg.templates_path);
    }

    if (cfg.embedding_provider == "hashing") {
        inputs.base_provider = std::make_unique<HashingEmbeddingProvider>(
            static_cast<std::size_t>(cfg.embedding_dim));
    } else if (cfg.embedding_provider == "remote") {
        std::string url = cfg.run.backend.base_url;
        inputs.base_provider = std::make_unique<RemoteEmbeddingProvider>(
            url, cfg.embedding_model, static_cast<std::size_t>(cfg.embedding_dim),
            cfg.run.backend.request_timeout_s, cfg.run.backend.api_key);
    } else {
        throw std::runtime_error("unknown embedding provider '" + cfg.embedding_provider + "'");
    }
    inputs.provider = std::make_unique<MemoizedEmbeddingProvider>(*inputs.base_provider);
    return inputs;
}

int report_config_error(const std::string& message) {
    std::cerr << "error: " << message << "\n";
    return 1;
}

}  // namespace

int cmd_run(const CliConfig& cfg) {
    LoadedInputs inputs;
    std::unique_ptr<Backend> backend;
    RunOptions opts = cfg.run;
    opts.out_dir = cfg.out_dir;
    try {
        inputs = load_inputs(cfg, true);
        auto problems = preflight_problems(inputs.sessions, opts, inputs.templates);
        if (!problems.empty()) {
            for (const auto& p : problems) std::cerr << "error: " << p << "\n";
            return 1;
        }
        backend = make_backend(opts.backend);
        HealthStatus health = backend->healthcheck();
        if (!health.healthy) return report_config_error("backend unhealthy: " + health.detail);
    } catch (const std::exception& e) {
        return report_config_error(e.what());
    }

    RunSummary summary = run_inference(inputs.sessions, opts, *backend, *inputs.provider,
                                       inputs.templates);
    std::cout << "run complete: " << summary.total << " items, " << summary.judged << " judged, "
              << summary.no_context << " no-context, " << summary.rejected << " rejected, "
              << summary.backend_errors << " backend errors";
    if (summary.skipped_resume > 0) std::cout << ", " << summary.skipped_resume << " resumed";
    std::cout << "\n";
    return summary.exit_code();
}

int cmd_score(const CliConfig& cfg) {
    try {
        if (cfg.predictions_path.empty()) throw std::runtime_error("no predictions file given");
        LoadedInputs inputs = load_inputs(cfg, false);
        std::vector<RatingRecord> ratings;
        if (!cfg.ratings_path.empty()) ratings = load_ratings_csv(cfg.ratings_path);

        ScoreResult result = score_predictions(cfg.predictions_path, inputs.sessions, ratings,
                                               cfg.run.normalization);
        fs::create_directories(cfg.out_dir);
        std::string json_path = (fs::path(cfg.out_dir) / "report.json").string();
        std::string text_path = (fs::path(cfg.out_dir) / "report.txt").string();
        write_report(result, json_path, text_path);

        std::ifstream table(text_path);
        std::cout << table.rdbuf();
        return 0;
    } catch (const std::exception& e) {
        return report_config_error(e.what());
    }
}

int cmd_ablate(const CliConfig& cfg) {
    LoadedInputs inputs;
    std::unique_ptr<Backend> backend;
    RunOptions opts = cfg.run;
    opts.out_dir = cfg.out_dir;
    try {
        inputs = load_inputs(cfg, true);
        auto problems = preflight_problems(inputs.sessions, opts, inputs.templates);
        if (!problems.empty()) {
            for (const auto& p : problems) std::cerr << "error: " << p << "\n";
            return 1;
        }
        backend = make_backend(opts.backend);
        HealthStatus health = backend->healthcheck();
        if (!health.healthy) return report_config_error("backend unhealthy: " + health.detail);
    } catch (const std::exception& e) {
        return report_config_error(e.what());
    }

    std::vector<RatingRecord> ratings;
    if (!cfg.ratings_path.empty()) {
        try {
            ratings = load_ratings_csv(cfg.ratings_path);
        } catch (const std::exception& e) {
            return report_config_error(e.what());
        }
    }

    auto cells = run_ablation(inputs.sessions, cfg.conditions, opts, *backend, *inputs.provider,
                              inputs.templates, ratings);
    std::string json_path = (fs::path(cfg.out_dir) / "summary.json").string();
    std::string text_path = (fs::path(cfg.out_dir) / "summary.txt").string();
    write_ablation_summary(cells, json_path, text_path);

    std::ifstream table(text_path);
    std::cout << table.rdbuf();

    bool any_failed = false;
    bool any_partial = false;
    for (const auto& cell : cells) {
        any_failed |= cell.failed;
        any_partial |= !cell.failed && cell.summary.exit_code() != 0;
    }
    return any_failed || any_partial ? 2 : 0;
}

}  // namespace protocheck
