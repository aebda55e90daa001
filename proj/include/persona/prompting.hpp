#pragma once

// Interview prompts and system messages for the three conditioning regimes.
// Templates live in data/templates/*.txt with {NAME} placeholders; an
// override directory can replace any subset of them for prompt ablations.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "persona/instruments.hpp"
#include "persona/personas.hpp"

namespace persona {

enum class Regime { Unconditioned, Personality, RolePersonality };

std::string_view to_string(Regime r) noexcept;
Regime parse_regime(std::string_view s);  // "unconditioned" | "personality" | "role"

struct ConditioningSpec {
    Regime regime{Regime::Unconditioned};
    Instrument instrument{Instrument::MBTI};
    std::optional<Target> target;
    std::optional<std::string> role;

    // e.g. "MBTI/unconditioned", "MBTI/personality/INTJ", "BFI/role/Neuroticism/Artist"
    std::string canonical() const;
    static ConditioningSpec from_canonical(std::string_view s);

    // Throws InvalidSpec if the regime/target/role combination is inconsistent.
    void validate(const PersonaCatalog& personas) const;

    bool operator==(const ConditioningSpec&) const = default;
};

struct SystemMessages {
    std::string interviewee;  // empty when unconditioned
    std::string interviewer;
};

struct RenderedPrompt {
    std::string system_interviewee;
    std::string system_interviewer;
    std::string user_question;
};

class PromptTemplates {
public:
    static constexpr std::array<std::string_view, 12> kNames{
        "mbti_question",           "bfi_question",
        "mbti_interviewer",        "bfi_interviewer",
        "mbti_interviewee_personality", "mbti_interviewee_role",
        "bfi_interviewee_personality",  "bfi_interviewee_role",
        "mbti_awareness",          "bfi_awareness",
        "mbti_role_categorization", "bfi_role_categorization"};

    // Loads every template from `dir`; files present in `override_dir` win.
    static PromptTemplates load(const std::filesystem::path& dir,
                                const std::optional<std::filesystem::path>& override_dir = std::nullopt);

    const std::string& get(std::string_view name) const;
    void set(std::string name, std::string text) { templates_[std::move(name)] = std::move(text); }

private:
    std::map<std::string, std::string, std::less<>> templates_;
};

// Replaces {NAME} for every NAME in `vars`. Other braces are left alone, so
// literal option sets such as "{Agree, ...}" survive.
std::string substitute(std::string_view tmpl, const std::map<std::string, std::string>& vars);

class PromptRenderer {
public:
    // `banks`, when given, supplies the {OPTIONS} placeholder (labels joined
    // by ", ") for override templates that use it.
    PromptRenderer(PromptTemplates templates, const PersonaCatalog& personas,
                   const BankSet* banks = nullptr);

    std::string render_question_prompt(Instrument instrument, const Question& q) const;
    SystemMessages render_system_message(const ConditioningSpec& spec) const;
    std::string render_awareness_prompt(Instrument instrument, const Target& target) const;
    RenderedPrompt render(const ConditioningSpec& spec, const Question& q) const;

    // Documented template only; not used by the pipeline.
    std::string render_role_categorization(Instrument instrument) const;

    const PersonaCatalog& personas() const noexcept { return *personas_; }

private:
    PromptTemplates templates_;
    const PersonaCatalog* personas_;
    const BankSet* banks_;
};

}  // namespace persona
