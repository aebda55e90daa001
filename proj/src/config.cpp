#include "persona/config.hpp"

#include "persona/errors.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include <fmt/format.h>

namespace persona {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, std::string_view where) {
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : obj.items()) {
        if (!ok.contains(k)) throw ConfigError(fmt::format("{}: unknown key '{}'", where, k));
    }
}

template <typename T>
void read(const json& obj, const char* key, T& out, std::string_view where) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(fmt::format("{}: '{}' has the wrong type", where, key));
    }
}

SamplingParams parse_sampling(const json& j, SamplingParams base, std::string_view where) {
    if (!j.is_object()) throw ConfigError(fmt::format("{} must be an object", where));
    reject_unknown(j, {"top_p", "top_k", "max_tokens"}, where);
    read(j, "top_p", base.top_p, where);
    if (j.contains("top_k")) {
        if (j.at("top_k").is_null()) {
            base.top_k.reset();
        } else {
            int k = 0;
            read(j, "top_k", k, where);
            base.top_k = k;
        }
    }
    read(j, "max_tokens", base.max_tokens, where);
    return base;
}

}  // namespace

void Config::validate() const {
    for (double t : temperatures) {
        if (!(t > 0.0)) throw ConfigError(fmt::format("temperatures must be positive (got {})", t));
    }
    if (timeout_s <= 0) throw ConfigError("endpoint.timeout_s must be positive");
    if (max_in_flight <= 0) throw ConfigError("endpoint.max_in_flight must be positive");
    if (retry.max_retries < 0) throw ConfigError("endpoint.retry.max_retries must be >= 0");
    if (workers <= 0) throw ConfigError("workers must be positive");
    if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
    try {
        sampling.validate();
        for (const auto& [t, p] : per_temperature) p.validate();
    } catch (const InvalidSpec& e) {
        throw ConfigError(fmt::format("sampling: {}", e.what()));
    }
}

EndpointConfig Config::endpoint() const {
    EndpointConfig e;
    e.base_url = base_url;
    if (const char* key = std::getenv(api_key_env.c_str())) e.api_key = key;
    e.timeout = std::chrono::seconds(timeout_s);
    e.retry = retry;
    e.max_in_flight = max_in_flight;
    return e;
}

Config parse_config(const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    reject_unknown(j,
                   {"endpoint", "models", "temperatures", "sampling", "per_temperature", "workers", "max_retries",
                    "run_seed", "output_dir", "embedding_model", "data_dir", "templates_dir"},
                   "config");
    Config c;
    if (j.contains("endpoint")) {
        const auto& e = j.at("endpoint");
        reject_unknown(e, {"base_url", "api_key_env", "timeout_s", "max_in_flight", "retry"}, "endpoint");
        read(e, "base_url", c.base_url, "endpoint");
        read(e, "api_key_env", c.api_key_env, "endpoint");
        read(e, "timeout_s", c.timeout_s, "endpoint");
        read(e, "max_in_flight", c.max_in_flight, "endpoint");
        if (e.contains("retry")) {
            const auto& r = e.at("retry");
            reject_unknown(r, {"max_retries", "base_delay_ms", "multiplier", "max_delay_ms"}, "endpoint.retry");
            read(r, "max_retries", c.retry.max_retries, "endpoint.retry");
            std::int64_t ms = c.retry.base_delay.count();
            read(r, "base_delay_ms", ms, "endpoint.retry");
            c.retry.base_delay = std::chrono::milliseconds(ms);
            ms = c.retry.max_delay.count();
            read(r, "max_delay_ms", ms, "endpoint.retry");
            c.retry.max_delay = std::chrono::milliseconds(ms);
            read(r, "multiplier", c.retry.multiplier, "endpoint.retry");
        }
    }
    read(j, "models", c.models, "config");
    read(j, "temperatures", c.temperatures, "config");
    if (j.contains("sampling")) c.sampling = parse_sampling(j.at("sampling"), c.sampling, "sampling");
    if (j.contains("per_temperature")) {
        for (const auto& [k, v] : j.at("per_temperature").items()) {
            double t = 0.0;
            try {
                t = std::stod(k);
            } catch (const std::exception&) {
                throw ConfigError(fmt::format("per_temperature: key '{}' is not a number", k));
            }
            c.per_temperature[t] = parse_sampling(v, c.sampling, "per_temperature." + k);
        }
    }
    read(j, "workers", c.workers, "config");
    read(j, "max_retries", c.max_retries, "config");
    read(j, "run_seed", c.run_seed, "config");
    read(j, "output_dir", c.output_dir, "config");
    read(j, "embedding_model", c.embedding_model, "config");
    read(j, "data_dir", c.data_dir, "config");
    read(j, "templates_dir", c.templates_dir, "config");
    c.validate();
    return c;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open config file '{}'", path.string()));
    try {
        return parse_config(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

}  // namespace persona
