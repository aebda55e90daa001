#pragma once

// Experiment grid execution: models x temperatures x conditionings x
// repetitions, one session per cell, each session asking every question of
// the instrument once in its own shuffled order.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "persona/instruments.hpp"
#include "persona/ledger.hpp"
#include "persona/llm_client.hpp"
#include "persona/prompting.hpp"

namespace persona {

std::uint64_t session_count(std::uint64_t models, std::uint64_t temperatures, std::uint64_t conditionings,
                            std::uint64_t repetitions) noexcept;

struct RunPlan {
    std::vector<std::string> models;
    std::vector<double> temperatures;
    std::vector<ConditioningSpec> conditionings;
    int repetitions{1};
    std::uint64_t run_seed{0};

    std::uint64_t session_count() const noexcept;
    void validate(const PersonaCatalog& personas) const;  // throws InvalidSpec

    nlohmann::ordered_json to_json() const;
    static RunPlan from_json(const nlohmann::json& j);
    // "run-" + 16 hex digits of the canonical plan hash.
    std::string run_id() const;
};

struct SessionKey {
    std::string model;
    double temperature{};
    ConditioningSpec conditioning;
    int repetition{};

    // "model|temperature|conditioning|repetition"
    std::string id() const;
    std::uint64_t seed(std::uint64_t run_seed) const;
};

// Plan order: model, then temperature, then conditioning, then repetition.
std::vector<SessionKey> expand(const RunPlan& plan);

std::string format_temperature(double t);

std::vector<int> shuffle_questions(const QuestionBank& bank, std::uint64_t session_seed);

std::uint64_t request_seed(std::uint64_t session_seed, int question_id, int attempt) noexcept;

struct RunOptions {
    int workers{1};
    int max_retries{kDefaultMaxRetries};
    SamplingParams sampling;  // temperature is overridden per session
    std::map<double, SamplingParams> per_temperature;  // replaces `sampling` for that temperature
    bool send_seed{true};
    std::string backend;      // recorded in the ledger header
    std::function<void(std::size_t done, std::size_t total)> on_session_done;
};

struct RunSummary {
    std::string run_id;
    std::size_t sessions_planned{0};
    std::size_t sessions_skipped{0};  // already complete in a resumed ledger
    std::size_t sessions_run{0};
    std::size_t invalid_sessions{0};
    std::size_t records_written{0};
    bool aborted{false};
    std::string abort_reason;
};

class Runner {
public:
    Runner(const BankSet& banks, const PromptRenderer& renderer, ChatClient& client, RunOptions options);

    // Writes a fresh ledger, or with `resume` continues the one at `ledger_path`,
    // skipping (session, question) pairs already recorded. Endpoint failures
    // stop the run with `aborted` set; the ledger stays resumable.
    RunSummary execute(const RunPlan& plan, const std::filesystem::path& ledger_path, bool resume = false);

private:
    const BankSet* banks_;
    const PromptRenderer* renderer_;
    ChatClient* client_;
    RunOptions options_;
};

}  // namespace persona
