#include "protocheck/context.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include <httplib.h>
#include <json.hpp>

namespace protocheck {

using nlohmann::json;

std::string to_string(EmptyFallback f) {
    return f == EmptyFallback::auto_false ? "auto_false" : "top_k";
}

EmptyFallback empty_fallback_from_string(const std::string& s) {
    if (s == "auto_false") return EmptyFallback::auto_false;
    if (s == "top_k") return EmptyFallback::top_k;
    throw std::invalid_argument("unknown empty_fallback '" + s + "'");
}

double EmbeddingVector::norm() const {
    double sum = 0.0;
    for (double v : values) sum += v * v;
    return std::sqrt(sum);
}

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t fnv1a(const char* data, std::size_t len) {
    std::uint64_t h = kFnvOffset;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= static_cast<unsigned char>(data[i]);
        h *= kFnvPrime;
    }
    return h;
}

char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

}  // namespace

HashingEmbeddingProvider::HashingEmbeddingProvider(std::size_t dim) : dim_(dim) {
    if (dim_ == 0) throw std::invalid_argument("embedding dim must be positive");
}

std::string HashingEmbeddingProvider::id() const {
    return "hashing-trigram-" + std::to_string(dim_);
}

EmbeddingVector HashingEmbeddingProvider::embed(const std::string& text) {
    if (text.empty()) throw EmbeddingError(EmbeddingErrorCode::EmptyText, "cannot embed empty text");

    std::string lower(text);
    for (char& c : lower) c = ascii_lower(c);

    EmbeddingVector v;
    v.values.assign(dim_, 0.0);
    if (lower.size() < 3) {
        v.values[fnv1a(lower.data(), lower.size()) % dim_] += 1.0;
    } else {
        for (std::size_t i = 0; i + 3 <= lower.size(); ++i)
            v.values[fnv1a(lower.data() + i, 3) % dim_] += 1.0;
    }
    double n = v.norm();
    for (double& x : v.values) x /= n;
    return v;
}

RemoteEmbeddingProvider::RemoteEmbeddingProvider(std::string base_url, std::string model,
                                                 std::size_t dim, double timeout_s,
                                                 std::string api_key)
    : base_url_(std::move(base_url)), model_(std::move(model)), dim_(dim), timeout_s_(timeout_s),
      api_key_(std::move(api_key)) {
    while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

std::string RemoteEmbeddingProvider::id() const { return "remote:" + model_; }

EmbeddingVector RemoteEmbeddingProvider::embed(const std::string& text) {
    if (text.empty()) throw EmbeddingError(EmbeddingErrorCode::EmptyText, "cannot embed empty text");

    httplib::Client client(base_url_);
    client.set_connection_timeout(std::chrono::milliseconds(static_cast<int>(timeout_s_ * 1000)));
    client.set_read_timeout(std::chrono::milliseconds(static_cast<int>(timeout_s_ * 1000)));
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    json body = {{"model", model_}, {"input", json::array({text})}};
    auto res = client.Post("/v1/embeddings", headers, body.dump(), "application/json");
    if (!res)
        throw EmbeddingError(EmbeddingErrorCode::ProviderUnavailable,
                             "embeddings endpoint unreachable: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300)
        throw EmbeddingError(EmbeddingErrorCode::ProviderUnavailable,
                             "embeddings endpoint returned HTTP " + std::to_string(res->status));

    json j = json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("data") || !j["data"].is_array() || j["data"].empty() ||
        !j["data"][0].contains("embedding") || !j["data"][0]["embedding"].is_array())
        throw EmbeddingError(EmbeddingErrorCode::ProviderUnavailable,
                             "malformed embeddings response");

    EmbeddingVector v;
    for (const auto& x : j["data"][0]["embedding"]) {
        if (!x.is_number())
            throw EmbeddingError(EmbeddingErrorCode::ProviderUnavailable,
                                 "non-numeric embedding component");
        v.values.push_back(x.get<double>());
    }
    if (v.dim() != dim_)
        throw EmbeddingError(EmbeddingErrorCode::ProviderUnavailable,
                             "embedding dim " + std::to_string(v.dim()) + ", expected " +
                                 std::to_string(dim_));
    return v;
}

EmbeddingVector MemoizedEmbeddingProvider::embed(const std::string& text) {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = cache_.find(text);
        if (it != cache_.end()) return it->second;
    }
    EmbeddingVector v = inner_.embed(text);
    std::lock_guard<std::mutex> lock(mutex_);
    return cache_.emplace(text, std::move(v)).first->second;
}

std::size_t MemoizedEmbeddingProvider::cache_size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return cache_.size();
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim())
        throw EmbeddingError(EmbeddingErrorCode::DimensionMismatch,
                             "dims " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
    double dot = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) dot += a.values[i] * b.values[i];
    double na = a.norm();
    double nb = b.norm();
    if (na == 0.0 || nb == 0.0)
        throw EmbeddingError(EmbeddingErrorCode::ZeroVector, "zero-norm vector");
    return std::clamp(dot / (na * nb), -1.0, 1.0);
}

std::vector<Utterance> temporal_extract(const Transcript& transcript, const EventWindow& window,
                                        const ContextConfig& cfg) {
    double lo = window.start_s - cfg.delta_pre_s;
    double hi = window.end_s + cfg.delta_post_s;
    std::vector<Utterance> out;
    for (const auto& u : transcript.utterances)
        if (lo < u.timestamp_s && u.timestamp_s < hi) out.push_back(u);
    return out;
}

std::vector<ScoredUtterance> score_candidates(const std::vector<Utterance>& candidates,
                                              const ChecklistItem& item,
                                              EmbeddingProvider& provider) {
    std::vector<ScoredUtterance> out;
    if (candidates.empty()) return out;
    EmbeddingVector item_vec = provider.embed(item.text);
    out.reserve(candidates.size());
    for (const auto& u : candidates)
        out.push_back({u, cosine_similarity(provider.embed(u.text), item_vec)});
    return out;
}

std::vector<ScoredUtterance> semantic_refine(const std::vector<Utterance>& candidates,
                                             const ChecklistItem& item, const ContextConfig& cfg,
                                             EmbeddingProvider& provider) {
    std::vector<ScoredUtterance> out;
    for (auto& su : score_candidates(candidates, item, provider))
        if (su.similarity > cfg.tau) out.push_back(std::move(su));
    return out;
}

ContextSelection select_context(const Session& session, const ChecklistItem& item,
                                const ContextConfig& cfg, EmbeddingProvider& provider) {
    ContextSelection sel;
    sel.item_id = item.item_id;
    sel.temporal_candidates = temporal_extract(session.transcript, session.event_for(item), cfg);

    auto scored = score_candidates(sel.temporal_candidates, item, provider);
    for (const auto& su : scored)
        if (su.similarity > cfg.tau) sel.selected.push_back(su.utterance);

    if (sel.selected.empty()) {
        sel.fallback_used = true;
        if (cfg.empty_fallback == EmptyFallback::top_k && !scored.empty()) {
            auto ranked = scored;
            std::sort(ranked.begin(), ranked.end(), [](const ScoredUtterance& x, const ScoredUtterance& y) {
                if (x.similarity != y.similarity) return x.similarity > y.similarity;
                if (x.utterance.timestamp_s != y.utterance.timestamp_s)
                    return x.utterance.timestamp_s < y.utterance.timestamp_s;
                return x.utterance.index < y.utterance.index;
            });
            std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(cfg.top_k), ranked.size());
            ranked.resize(k);
            // back into transcript order
            std::sort(ranked.begin(), ranked.end(), [](const ScoredUtterance& x, const ScoredUtterance& y) {
                return x.utterance.index < y.utterance.index;
            });
            for (auto& su : ranked) sel.selected.push_back(std::move(su.utterance));
        }
    }
    return sel;
}

}  // namespace protocheck
