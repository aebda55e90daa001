#include "persona/llm_client.hpp"

#include "persona/errors.hpp"
#include "persona/hashing.hpp"
#include "persona/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

namespace persona {

using nlohmann::json;

void SamplingParams::validate() const {
    if (!(temperature >= 0.0)) throw InvalidSpec(fmt::format("temperature must be >= 0 (got {})", temperature));
    if (!(top_p > 0.0 && top_p <= 1.0)) throw InvalidSpec(fmt::format("top_p must be in (0, 1] (got {})", top_p));
    if (top_k && *top_k <= 0) throw InvalidSpec(fmt::format("top_k must be positive (got {})", *top_k));
    if (max_tokens <= 0) throw InvalidSpec(fmt::format("max_tokens must be positive (got {})", max_tokens));
}

std::chrono::milliseconds RetryPolicy::delay(int attempt, std::uint64_t draw) const {
    const double cap = std::min(static_cast<double>(max_delay.count()),
                                static_cast<double>(base_delay.count()) * std::pow(multiplier, attempt));
    SplitMixRng rng(draw);
    return std::chrono::milliseconds(static_cast<std::int64_t>(rng.unit() * cap));
}

InFlightLimiter::InFlightLimiter(int limit) : available_(std::max(1, limit)) {}

void InFlightLimiter::acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [this] { return available_ > 0; });
    --available_;
}

void InFlightLimiter::release() {
    {
        std::lock_guard lock(mu_);
        ++available_;
    }
    cv_.notify_one();
}

namespace {

class Slot {
public:
    explicit Slot(InFlightLimiter& l) : l_(l) { l_.acquire(); }
    ~Slot() { l_.release(); }
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;

private:
    InFlightLimiter& l_;
};

std::string endpoint_path(const ParsedUrl& url, std::string_view suffix) {
    auto prefix = url.path_prefix;
    if (prefix.size() >= 3 && prefix.compare(prefix.size() - 3, 3, "/v1") == 0) prefix.resize(prefix.size() - 3);
    return prefix + "/v1/" + std::string(suffix);
}

std::string snippet(const std::string& body) {
    return body.size() > 300 ? body.substr(0, 300) + "..." : body;
}

enum class Outcome { Ok, Retry, Fatal };

struct PostResult {
    Outcome outcome;
    int status{0};
    std::string body;
    std::string network_error;
};

PostResult post_json(const EndpointConfig& cfg, const std::string& path, const std::string& payload,
                     InFlightLimiter& limiter) {
    const auto url = parse_base_url(cfg.base_url);
    httplib::Client cli(url.origin);
    const auto t = cfg.timeout.count();
    cli.set_connection_timeout(std::min<std::int64_t>(t, 30), 0);
    cli.set_read_timeout(t, 0);
    cli.set_write_timeout(t, 0);
    httplib::Headers headers;
    if (!cfg.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg.api_key);

    httplib::Result res = [&] {
        Slot slot(limiter);
        return cli.Post(path, headers, payload, "application/json");
    }();
    if (!res) return {Outcome::Retry, 0, {}, httplib::to_string(res.error())};
    const int status = res->status;
    if (status >= 200 && status < 300) return {Outcome::Ok, status, res->body, {}};
    if (status == 429 || status >= 500) return {Outcome::Retry, status, res->body, {}};
    return {Outcome::Fatal, status, res->body, {}};
}

// Runs `attempt_once` under the retry policy until it reports Outcome::Ok. It
// may throw to stop immediately.
template <typename F>
void with_retries(const EndpointConfig& cfg, const std::string& what, std::atomic<std::uint64_t>& jitter,
                  ClientMetrics* metrics, F&& attempt_once) {
    PostResult last{Outcome::Retry, 0, {}, {}};
    for (int attempt = 0; attempt <= cfg.retry.max_retries; ++attempt) {
        if (attempt > 0) {
            if (metrics) ++metrics->retries;
            const auto draw = mix(fnv1a64(what), jitter.fetch_add(1));
            std::this_thread::sleep_for(cfg.retry.delay(attempt - 1, draw));
        }
        last = attempt_once();
        if (last.outcome == Outcome::Ok) return;
    }
    if (metrics) ++metrics->failures;
    if (last.status == 0) {
        throw NetworkError(fmt::format("{}: {} after {} attempt(s)", what, last.network_error,
                                       cfg.retry.max_retries + 1));
    }
    if (last.status == 429) {
        throw RateLimited(fmt::format("{}: rate limited after {} attempt(s)", what, cfg.retry.max_retries + 1));
    }
    throw HttpError(last.status, snippet(last.body));
}

}  // namespace

ParsedUrl parse_base_url(const std::string& base_url) {
    const auto trimmed = std::string(trim(base_url));
    const auto scheme_end = trimmed.find("://");
    if (trimmed.empty() || scheme_end == std::string::npos) {
        throw ConfigError(fmt::format("base URL '{}' must look like http://host:port", base_url));
    }
    const auto path_start = trimmed.find('/', scheme_end + 3);
    ParsedUrl out;
    out.origin = trimmed.substr(0, path_start);
    if (path_start != std::string::npos) {
        out.path_prefix = trimmed.substr(path_start);
        while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
    }
    return out;
}

HttpChatClient::HttpChatClient(EndpointConfig cfg) : cfg_(std::move(cfg)), limiter_(cfg_.max_in_flight) {
    parse_base_url(cfg_.base_url);
}

std::string HttpChatClient::chat(const ChatRequest& req) {
    req.params.validate();
    const auto path = endpoint_path(parse_base_url(cfg_.base_url), "chat/completions");

    auto build = [&](bool with_top_k) {
        json messages = json::array();
        if (!req.system.empty()) messages.push_back({{"role", "system"}, {"content", req.system}});
        messages.push_back({{"role", "user"}, {"content", req.user}});
        json body{{"model", req.model},
                  {"messages", messages},
                  {"temperature", req.params.temperature},
                  {"top_p", req.params.top_p},
                  {"max_tokens", req.params.max_tokens}};
        if (with_top_k && req.params.top_k) body["top_k"] = *req.params.top_k;
        if (req.params.request_seed) body["seed"] = *req.params.request_seed;
        return body.dump();
    };

    std::string content;
    with_retries(cfg_, "chat " + req.model, jitter_counter_, &metrics_, [&]() -> PostResult {
        ++metrics_.requests;
        const bool with_top_k = send_top_k_.load() && req.params.top_k.has_value();
        auto r = post_json(cfg_, path, build(with_top_k), limiter_);
        if (r.outcome == Outcome::Fatal && with_top_k && (r.status == 400 || r.status == 422) &&
            r.body.find("top_k") != std::string::npos) {
            if (send_top_k_.exchange(false)) {
                fmt::print(stderr, "warning: endpoint rejected top_k ({}); continuing without it\n", r.status);
            }
            r = post_json(cfg_, path, build(false), limiter_);
        }
        if (r.outcome == Outcome::Fatal) {
            ++metrics_.failures;
            throw HttpError(r.status, snippet(r.body));
        }
        if (r.outcome != Outcome::Ok) return r;

        json doc;
        try {
            doc = json::parse(r.body);
        } catch (const json::exception&) {
            throw HttpError(r.status, "malformed JSON in completion response: " + snippet(r.body));
        }
        const json* msg = nullptr;
        if (doc.contains("choices") && doc["choices"].is_array() && !doc["choices"].empty()) {
            const auto& c0 = doc["choices"][0];
            if (c0.contains("message") && c0["message"].contains("content")) msg = &c0["message"]["content"];
        }
        if (!msg || !msg->is_string() || trim(msg->get_ref<const std::string&>()).empty()) {
            throw EmptyCompletion(fmt::format("model {} returned no completion text", req.model));
        }
        content = msg->get<std::string>();
        return r;
    });
    return content;
}

HttpEmbedder::HttpEmbedder(EndpointConfig cfg, std::string model)
    : cfg_(std::move(cfg)), model_(std::move(model)), limiter_(cfg_.max_in_flight) {
    parse_base_url(cfg_.base_url);
}

std::vector<double> HttpEmbedder::embed(const std::string& text) {
    {
        std::lock_guard lock(mu_);
        if (auto it = cache_.find(text); it != cache_.end()) return it->second;
    }
    const auto path = endpoint_path(parse_base_url(cfg_.base_url), "embeddings");
    const auto payload = json{{"model", model_}, {"input", text}}.dump();

    std::vector<double> vec;
    with_retries(cfg_, "embed " + model_, jitter_counter_, nullptr, [&]() -> PostResult {
        auto r = post_json(cfg_, path, payload, limiter_);
        if (r.outcome == Outcome::Fatal) throw HttpError(r.status, snippet(r.body));
        if (r.outcome != Outcome::Ok) return r;
        try {
            vec = json::parse(r.body).at("data").at(0).at("embedding").get<std::vector<double>>();
        } catch (const json::exception&) {
            throw HttpError(r.status, "malformed embeddings response: " + snippet(r.body));
        }
        return r;
    });
    if (vec.empty()) throw HttpError(200, "embeddings response carried an empty vector");

    std::lock_guard lock(mu_);
    if (dimension_ == 0) dimension_ = vec.size();
    if (vec.size() != dimension_) {
        throw DimensionMismatch(
            fmt::format("embedding dimension changed from {} to {} mid-run", dimension_, vec.size()));
    }
    cache_.emplace(text, vec);
    return vec;
}

PrecomputedEmbedder::PrecomputedEmbedder(std::map<std::string, std::vector<double>> vectors)
    : vectors_(std::move(vectors)) {
    std::size_t dim = 0;
    for (const auto& [text, v] : vectors_) {
        if (dim == 0) dim = v.size();
        if (v.size() != dim || v.empty()) {
            throw DimensionMismatch(fmt::format("precomputed vector for '{}' has dimension {} (expected {})",
                                                snippet(text), v.size(), dim));
        }
    }
}

PrecomputedEmbedder PrecomputedEmbedder::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open vector file '{}'", path.string()));
    try {
        return PrecomputedEmbedder(json::parse(in).get<std::map<std::string, std::vector<double>>>());
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

std::vector<double> PrecomputedEmbedder::embed(const std::string& text) {
    auto it = vectors_.find(text);
    if (it == vectors_.end()) throw MissingVector(fmt::format("no precomputed vector for '{}'", snippet(text)));
    return it->second;
}

HashingEmbedder::HashingEmbedder(std::size_t dimension) : dimension_(std::max<std::size_t>(1, dimension)) {}

std::vector<double> HashingEmbedder::embed(const std::string& text) {
    std::vector<double> v(dimension_, 0.0);
    std::string word;
    auto flush = [&] {
        if (word.empty()) return;
        const auto h = fnv1a64(word);
        v[h % dimension_] += (h >> 63) ? -1.0 : 1.0;
        word.clear();
    };
    for (char c : text) {
        if (ascii_alnum(c)) {
            word.push_back(ascii_lower(c));
        } else {
            flush();
        }
    }
    flush();
    return v;
}

}  // namespace persona
