#pragma once

#include <map>
#include <memory>
#include <stdexcept>
#include <string>

#include "protocheck/prompting.hpp"

namespace protocheck {

enum class BackendKind { http, mock };

std::string to_string(BackendKind k);
BackendKind backend_kind_from_string(const std::string& s);

struct BackendConfig {
    BackendKind kind = BackendKind::mock;
    std::string base_url;     // http only
    std::string model_id;
    double temperature = 0.0;
    int max_output_tokens = 512;
    double request_timeout_s = 30.0;
    int max_retries = 2;      // hard cap 5
    int max_in_flight = 4;
    std::string api_key;           // optional bearer token
    std::string mock_script_path;  // mock only
    int backoff_base_ms = 1000;    // doubles per retry
};

/// Validates field ranges; throws std::invalid_argument on violation.
void validate(const BackendConfig& cfg);

struct RawCompletion {
    std::string item_id;
    std::string text;  // backend output verbatim
    long latency_ms = 0;
    int attempt = 1;
};

struct HealthStatus {
    bool healthy = false;
    std::string detail;
};

enum class BackendErrorCode {
    BackendTimeout,
    BackendUnreachable,
    HttpStatus,
    RetriesExhausted,
    BadResponse,
};

class BackendError : public std::runtime_error {
public:
    BackendError(BackendErrorCode code, const std::string& what, int http_status = 0,
                 int attempts = 0)
        : std::runtime_error(what), code_(code), http_status_(http_status), attempts_(attempts) {}
    BackendErrorCode code() const { return code_; }
    int http_status() const { return http_status_; }
    int attempts() const { return attempts_; }

private:
    BackendErrorCode code_;
    int http_status_;
    int attempts_;
};

/// Canned outputs for deterministic runs, keyed "session_id/item_id".
/// The reserved key "default" supplies the fallback text, so lookups are
/// total.
struct MockScript {
    std::map<std::string, std::string> entries;
    std::string default_text;

    const std::string& lookup(const std::string& session_id, const std::string& item_id) const;
    static MockScript load(const std::string& path);
};

class Backend {
public:
    virtual ~Backend() = default;

    /// Sends the rendered prompt and returns the model text verbatim.
    /// Transport failures (unreachable, timeout, 5xx) are retried with
    /// exponential backoff up to max_retries; a well-formed response is
    /// never retried regardless of its content. Safe to call from multiple
    /// workers; at most max_in_flight requests are outstanding at once.
    virtual RawCompletion complete(const std::string& session_id, const PromptBundle& bundle) = 0;

    /// Reports, never throws.
    virtual HealthStatus healthcheck() = 0;
};

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg);

}  // namespace protocheck
