#pragma once

// Deterministic synthetic respondent. It answers from the shipped scoring
// keys, so its scored outcomes are known in advance; that makes it the
// reference backend for the whole pipeline.

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "persona/instruments.hpp"
#include "persona/llm_client.hpp"
#include "persona/personas.hpp"

namespace persona {

enum class MockMode {
    Fixed,               // always answers as `target`
    Random,              // uniform answers, no target
    FollowConditioning,  // target read from the interviewee system message
};

struct MockPersona {
    MockMode mode{MockMode::Random};
    std::optional<Target> target;  // required for Fixed
    double epsilon{0.0};           // probability of a uniform-random answer
    std::uint64_t rng_seed{0};
};

class MockChatClient : public ChatClient {
public:
    static constexpr const char* kUnparseableReply = "I would rather not pick any of those.";

    MockChatClient(MockPersona persona, const BankSet& banks, const PersonaCatalog& personas);

    std::string chat(const ChatRequest& req) override;

    // Key-aligned answer for `target` on one question (no noise).
    std::string aligned_answer(const Target& target, Instrument instrument, int question_id) const;

private:
    struct Located {
        Instrument instrument;
        int id;
    };
    std::optional<Located> locate(const std::string& user) const;
    std::optional<Target> conditioned_target(const std::string& system) const;
    std::optional<Target> awareness_target(const std::string& user) const;

    MockPersona persona_;
    const BankSet* banks_;
    const PersonaCatalog* personas_;
    std::map<std::string, Located> by_text_;
};

}  // namespace persona
