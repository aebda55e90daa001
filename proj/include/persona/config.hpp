#pragma once

// Harness configuration: a JSON file whose values the command-line flags
// override. Secrets never live in the file; it names the environment
// variable holding the API key instead.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "persona/llm_client.hpp"

namespace persona {

struct Config {
    std::string base_url;
    std::string api_key_env{"OPENAI_API_KEY"};
    int timeout_s{120};
    int max_in_flight{4};
    RetryPolicy retry;

    std::vector<std::string> models;
    std::vector<double> temperatures{0.01, 0.7};
    SamplingParams sampling;
    std::map<double, SamplingParams> per_temperature;

    int workers{1};
    int max_retries{3};
    std::uint64_t run_seed{0};
    std::string output_dir{"."};

    std::string embedding_model;
    std::string data_dir;
    std::string templates_dir;

    // Throws ConfigError naming the offending field.
    void validate() const;
    // Reads the API key from the environment at call time.
    EndpointConfig endpoint() const;
};

Config parse_config(const nlohmann::json& j);  // unknown keys are errors
Config load_config(const std::filesystem::path& path);

}  // namespace persona
