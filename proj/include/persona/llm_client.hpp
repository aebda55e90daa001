#pragma once

// Chat-completions and embeddings clients for OpenAI-compatible endpoints,
// plus the embedders used by the awareness check.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace persona {

struct SamplingParams {
    double temperature{0.7};
    double top_p{1.0};
    std::optional<int> top_k{50};
    int max_tokens{256};
    std::optional<std::uint64_t> request_seed;

    void validate() const;  // throws InvalidSpec
};

struct ChatRequest {
    std::string model;
    std::string system;  // omitted from the wire when empty
    std::string user;
    SamplingParams params;
};

class ChatClient {
public:
    virtual ~ChatClient() = default;
    // Returns the raw completion text. Implementations must be callable from
    // several threads at once.
    virtual std::string chat(const ChatRequest& req) = 0;
};

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::vector<double> embed(const std::string& text) = 0;
    virtual std::string name() const = 0;
};

struct RetryPolicy {
    int max_retries{3};
    std::chrono::milliseconds base_delay{500};
    double multiplier{2.0};
    std::chrono::milliseconds max_delay{30000};

    // Full jitter: uniform in [0, min(max_delay, base * multiplier^attempt)].
    std::chrono::milliseconds delay(int attempt, std::uint64_t draw) const;
};

struct EndpointConfig {
    std::string base_url;  // scheme://host[:port][/prefix]
    std::string api_key;   // sent as a bearer token when non-empty
    std::chrono::seconds timeout{120};
    RetryPolicy retry;
    int max_in_flight{4};
};

// Blocks callers once `limit` requests are outstanding.
class InFlightLimiter {
public:
    explicit InFlightLimiter(int limit);
    void acquire();
    void release();

private:
    std::mutex mu_;
    std::condition_variable cv_;
    int available_;
};

struct ClientMetrics {
    std::atomic<std::uint64_t> requests{0};
    std::atomic<std::uint64_t> retries{0};
    std::atomic<std::uint64_t> failures{0};
};

class HttpChatClient : public ChatClient {
public:
    explicit HttpChatClient(EndpointConfig cfg);

    std::string chat(const ChatRequest& req) override;

    const ClientMetrics& metrics() const noexcept { return metrics_; }
    bool top_k_enabled() const noexcept { return send_top_k_.load(); }

private:
    EndpointConfig cfg_;
    InFlightLimiter limiter_;
    ClientMetrics metrics_;
    std::atomic<bool> send_top_k_{true};
    std::atomic<std::uint64_t> jitter_counter_{0};
};

class HttpEmbedder : public Embedder {
public:
    HttpEmbedder(EndpointConfig cfg, std::string model);

    std::vector<double> embed(const std::string& text) override;
    std::string name() const override { return "http:" + model_; }

private:
    EndpointConfig cfg_;
    std::string model_;
    InFlightLimiter limiter_;
    std::mutex mu_;
    std::map<std::string, std::vector<double>> cache_;
    std::size_t dimension_{0};
    std::atomic<std::uint64_t> jitter_counter_{0};
};

// Vectors looked up from a JSON object {"text": [numbers], ...}.
class PrecomputedEmbedder : public Embedder {
public:
    static PrecomputedEmbedder load(const std::filesystem::path& path);
    explicit PrecomputedEmbedder(std::map<std::string, std::vector<double>> vectors);

    std::vector<double> embed(const std::string& text) override;  // throws MissingVector
    std::string name() const override { return "precomputed"; }

private:
    std::map<std::string, std::vector<double>> vectors_;
};

// Feature-hashed bag of lowercase words. Offline fallback, not a semantic model.
class HashingEmbedder : public Embedder {
public:
    explicit HashingEmbedder(std::size_t dimension = 512);

    std::vector<double> embed(const std::string& text) override;
    std::string name() const override { return "hashing-bow"; }

private:
    std::size_t dimension_;
};

// Splits "http://host:port/prefix" into the scheme+authority and path prefix.
struct ParsedUrl {
    std::string origin;
    std::string path_prefix;
};
ParsedUrl parse_base_url(const std::string& base_url);

}  // namespace persona
