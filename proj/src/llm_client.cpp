#include "protocheck/llm_client.hpp"

#include <chrono>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace protocheck {

using nlohmann::json;

std::string to_string(BackendKind k) { return k == BackendKind::http ? "http" : "mock"; }

BackendKind backend_kind_from_string(const std::string& s) {
    if (s == "http") return BackendKind::http;
    if (s == "mock") return BackendKind::mock;
    throw std::invalid_argument("unknown backend kind '" + s + "'");
}

void validate(const BackendConfig& cfg) {
    if (cfg.temperature < 0.0) throw std::invalid_argument("temperature must be >= 0");
    if (cfg.max_output_tokens <= 0) throw std::invalid_argument("max_output_tokens must be positive");
    if (cfg.max_retries < 0 || cfg.max_retries > 5)
        throw std::invalid_argument("max_retries must be in [0,5]");
    if (cfg.max_in_flight <= 0) throw std::invalid_argument("max_in_flight must be positive");
    if (cfg.request_timeout_s <= 0.0) throw std::invalid_argument("request_timeout_s must be positive");
    if (cfg.kind == BackendKind::http && cfg.base_url.empty())
        throw std::invalid_argument("http backend requires base_url");
}

const std::string& MockScript::lookup(const std::string& session_id,
                                      const std::string& item_id) const {
    auto it = entries.find(session_id + "/" + item_id);
    return it != entries.end() ? it->second : default_text;
}

MockScript MockScript::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open mock script: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    json j = json::parse(buf.str(), nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw std::runtime_error("mock script must be a JSON object: " + path);

    MockScript script;
    for (const auto& [key, val] : j.items()) {
        if (!val.is_string())
            throw std::runtime_error("mock script value for '" + key + "' must be a string");
        if (key == "default")
            script.default_text = val.get<std::string>();
        else
            script.entries[key] = val.get<std::string>();
    }
    return script;
}

namespace {

class MockBackend final : public Backend {
public:
    explicit MockBackend(const BackendConfig& cfg) : script_(MockScript::load(cfg.mock_script_path)) {}

    RawCompletion complete(const std::string& session_id, const PromptBundle& bundle) override {
        return {bundle.item_id, script_.lookup(session_id, bundle.item_id), 0, 1};
    }

    HealthStatus healthcheck() override { return {true, "mock backend ready"}; }

private:
    MockScript script_;
};

// Counting semaphore with a runtime bound.
class InFlightLimiter {
public:
    explicit InFlightLimiter(int limit) : available_(limit) {}

    void acquire() {
        std::unique_lock<std::mutex> lock(mutex_);
        cv_.wait(lock, [&] { return available_ > 0; });
        --available_;
    }

    void release() {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            ++available_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    int available_;
};

struct LimiterGuard {
    explicit LimiterGuard(InFlightLimiter& l) : limiter(l) { limiter.acquire(); }
    ~LimiterGuard() { limiter.release(); }
    InFlightLimiter& limiter;
};

class HttpBackend final : public Backend {
public:
    explicit HttpBackend(const BackendConfig& cfg) : cfg_(cfg), limiter_(cfg.max_in_flight) {
        while (!cfg_.base_url.empty() && cfg_.base_url.back() == '/') cfg_.base_url.pop_back();
    }

    RawCompletion complete(const std::string&, const PromptBundle& bundle) override {
        LimiterGuard guard(limiter_);

        json body = {{"model", cfg_.model_id},
                     {"messages", json::array({{{"role", "user"}, {"content", bundle.rendered_text}}})},
                     {"temperature", cfg_.temperature},
                     {"max_tokens", cfg_.max_output_tokens}};
        const std::string payload = body.dump();

        auto start = std::chrono::steady_clock::now();
        std::string last_failure;
        const int max_attempts = cfg_.max_retries + 1;
        for (int attempt = 1; attempt <= max_attempts; ++attempt) {
            if (attempt > 1)
                std::this_thread::sleep_for(std::chrono::milliseconds(
                    static_cast<long>(cfg_.backoff_base_ms) << (attempt - 2)));

            auto res = new_client().Post("/v1/chat/completions", headers(), payload,
                                         "application/json");
            if (!res) {
                last_failure = transport_failure_name(res.error());
                continue;
            }
            if (res->status >= 500) {
                last_failure = "HTTP " + std::to_string(res->status);
                continue;
            }
            if (res->status < 200 || res->status >= 300)
                throw BackendError(BackendErrorCode::HttpStatus,
                                   "backend returned HTTP " + std::to_string(res->status),
                                   res->status, attempt);

            json j = json::parse(res->body, nullptr, false);
            if (j.is_discarded() || !j.contains("choices") || !j["choices"].is_array() ||
                j["choices"].empty() || !j["choices"][0].contains("message") ||
                !j["choices"][0]["message"].contains("content") ||
                !j["choices"][0]["message"]["content"].is_string())
                throw BackendError(BackendErrorCode::BadResponse,
                                   "malformed chat completion envelope", res->status, attempt);

            auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                               std::chrono::steady_clock::now() - start)
                               .count();
            return {bundle.item_id, j["choices"][0]["message"]["content"].get<std::string>(),
                    elapsed, attempt};
        }
        throw BackendError(BackendErrorCode::RetriesExhausted,
                           "gave up after " + std::to_string(max_attempts) + " attempts (last: " +
                               last_failure + ")",
                           0, max_attempts);
    }

    HealthStatus healthcheck() override {
        auto res = new_client().Get("/v1/models", headers());
        if (!res) return {false, "BackendUnreachable: " + transport_failure_name(res.error())};
        if (res->status < 200 || res->status >= 300)
            return {false, "HttpStatus: " + std::to_string(res->status)};
        json j = json::parse(res->body, nullptr, false);
        if (j.is_discarded() || !j.contains("data") || !j["data"].is_array())
            return {false, "BadResponse: model listing unparseable"};
        for (const auto& m : j["data"])
            if (m.contains("id") && m["id"].is_string() &&
                m["id"].get<std::string>() == cfg_.model_id)
                return {true, "model '" + cfg_.model_id + "' served"};
        return {false, "ModelNotServed: '" + cfg_.model_id + "' missing from /v1/models"};
    }

private:
    httplib::Client new_client() const {
        httplib::Client client(cfg_.base_url);
        auto timeout =
            std::chrono::milliseconds(static_cast<long>(cfg_.request_timeout_s * 1000));
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);
        return client;
    }

    httplib::Headers headers() const {
        httplib::Headers h;
        if (!cfg_.api_key.empty()) h.emplace("Authorization", "Bearer " + cfg_.api_key);
        return h;
    }

    static std::string transport_failure_name(httplib::Error err) {
        switch (err) {
            case httplib::Error::ConnectionTimeout:
            case httplib::Error::Read:
            case httplib::Error::Write:
                return "BackendTimeout";
            default:
                return "BackendUnreachable";
        }
    }

    BackendConfig cfg_;
    InFlightLimiter limiter_;
};

}  // namespace

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg) {
    validate(cfg);
    if (cfg.kind == BackendKind::mock) return std::make_unique<MockBackend>(cfg);
    return std::make_unique<HttpBackend>(cfg);
}

}  // namespace protocheck
