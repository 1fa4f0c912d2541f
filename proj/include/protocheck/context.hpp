#pragma once

#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "protocheck/corpus.hpp"

namespace protocheck {

enum class EmptyFallback { auto_false, top_k };

std::string to_string(EmptyFallback f);
EmptyFallback empty_fallback_from_string(const std::string& s);

struct ContextConfig {
    double delta_pre_s = 30.0;   // pre-event buffer
    double delta_post_s = 60.0;  // post-event buffer
    double tau = 0.7;            // similarity threshold, strict >
    EmptyFallback empty_fallback = EmptyFallback::auto_false;
    int top_k = 3;  // only used when empty_fallback == top_k
};

struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dim() const { return values.size(); }
    double norm() const;
};

enum class EmbeddingErrorCode { EmptyText, ProviderUnavailable, DimensionMismatch, ZeroVector };

class EmbeddingError : public std::runtime_error {
public:
    EmbeddingError(EmbeddingErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    EmbeddingErrorCode code() const { return code_; }

private:
    EmbeddingErrorCode code_;
};

/// Text-to-vector provider. Implementations must be deterministic:
/// the same text always maps to the same vector of fixed dimension.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual EmbeddingVector embed(const std::string& text) = 0;
    virtual std::size_t dim() const = 0;
    virtual std::string id() const = 0;
};

/// Offline fallback provider: character trigrams of the lower-cased text
/// are hashed (FNV-1a 64) into a fixed-dim bag, then L2-normalized.
/// Texts shorter than three bytes contribute a single gram.
class HashingEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit HashingEmbeddingProvider(std::size_t dim = 256);
    EmbeddingVector embed(const std::string& text) override;
    std::size_t dim() const override { return dim_; }
    std::string id() const override;

private:
    std::size_t dim_;
};

/// Remote provider speaking POST {base_url}/v1/embeddings with body
/// {model, input:[text]}; the vector is read from data[0].embedding.
class RemoteEmbeddingProvider final : public EmbeddingProvider {
public:
    RemoteEmbeddingProvider(std::string base_url, std::string model, std::size_t dim,
                            double timeout_s = 30.0, std::string api_key = {});
    EmbeddingVector embed(const std::string& text) override;
    std::size_t dim() const override { return dim_; }
    std::string id() const override;

private:
    std::string base_url_;
    std::string model_;
    std::size_t dim_;
    double timeout_s_;
    std::string api_key_;
};

/// Thread-safe per-text memo in front of another provider. Two threads may
/// race to compute the same key; determinism makes that harmless.
class MemoizedEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit MemoizedEmbeddingProvider(EmbeddingProvider& inner) : inner_(inner) {}
    EmbeddingVector embed(const std::string& text) override;
    std::size_t dim() const override { return inner_.dim(); }
    std::string id() const override { return inner_.id(); }
    std::size_t cache_size() const;

private:
    EmbeddingProvider& inner_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, EmbeddingVector> cache_;
};

/// (a.b)/(|a||b|), clamped to [-1,1]. Throws DimensionMismatch / ZeroVector.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

struct ScoredUtterance {
    Utterance utterance;
    double similarity = 0.0;
};

struct ContextSelection {
    std::string item_id;
    std::vector<Utterance> temporal_candidates;  // T_ek
    std::vector<Utterance> selected;             // T_j, transcript order
    bool fallback_used = false;
};

/// Utterances with start_s - delta_pre < t < end_s + delta_post, strict
/// on both sides, in transcript order.
std::vector<Utterance> temporal_extract(const Transcript& transcript, const EventWindow& window,
                                        const ContextConfig& cfg);

/// Similarity of every candidate against the item text, transcript order.
std::vector<ScoredUtterance> score_candidates(const std::vector<Utterance>& candidates,
                                              const ChecklistItem& item,
                                              EmbeddingProvider& provider);

/// Keeps candidates with similarity strictly above cfg.tau.
std::vector<ScoredUtterance> semantic_refine(const std::vector<Utterance>& candidates,
                                             const ChecklistItem& item, const ContextConfig& cfg,
                                             EmbeddingProvider& provider);

/// Temporal extraction then semantic refinement. When nothing survives the
/// threshold the configured fallback applies: auto_false leaves `selected`
/// empty, top_k keeps the k most similar temporal candidates (ties broken
/// toward the earlier timestamp); either way fallback_used is set.
ContextSelection select_context(const Session& session, const ChecklistItem& item,
                                const ContextConfig& cfg, EmbeddingProvider& provider);

}  // namespace protocheck
