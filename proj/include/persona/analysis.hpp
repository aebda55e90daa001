#pragma once

// Session-level scoring of a ledger and the aggregate views built on it:
// type frequencies, factor means, conditioning accuracy, confusion matrices
// and percentage change against an unconditioned baseline.

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "persona/awareness.hpp"
#include "persona/ledger.hpp"
#include "persona/scoring.hpp"

namespace persona {

struct ScoredSession {
    std::string session;
    std::string model;
    double temperature{};
    ConditioningSpec conditioning;
    int repetition{};
    std::size_t answered{0};
    bool valid{false};
    std::string invalid_reason;
    std::optional<MbtiOutcome> mbti;
    std::optional<BfiScores> bfi;
};

struct ScoredSet {
    std::string run_id;
    std::vector<ScoredSession> sessions;  // sorted by model, temperature, conditioning, repetition

    std::size_t valid_count() const noexcept;
};

// Invalid sessions (an unparseable answer, or unanswered questions) are kept
// with a reason but never scored.
ScoredSet score_ledger(const Ledger& ledger, const BankSet& banks);

nlohmann::ordered_json to_json(const ScoredSet& s);
ScoredSet scored_from_json(const nlohmann::json& j);

struct SessionFilter {
    std::optional<std::string> model;
    std::optional<double> temperature;
    std::optional<Instrument> instrument;
    std::optional<Regime> regime;
    std::optional<std::string> target;
    std::optional<std::string> role;

    bool matches(const ScoredSession& s) const;
};

struct TypeFrequencies {
    std::map<std::string, double> freq;  // only observed types
    std::size_t valid{0};
    std::size_t with_ties{0};
};

// Throws NoValidSessions.
TypeFrequencies type_frequencies(const ScoredSet& scored, const SessionFilter& filter);

// Letter -> relative frequency for all eight pole letters.
std::map<char, double> letter_frequencies(const ScoredSet& scored, const SessionFilter& filter);

struct FactorMeans {
    BfiScores means;
    std::size_t valid{0};
};

// Mean over valid sessions of the session-level factor means. Throws NoValidSessions.
FactorMeans factor_means(const ScoredSet& scored, const SessionFilter& filter);

struct AccuracyRow {
    std::string conditioning;  // canonical
    std::string target;
    std::optional<std::string> role;
    std::size_t valid{0};
    std::size_t invalid{0};
    std::size_t matches{0};
    double accuracy{0.0};
    double tie_rate{0.0};
};

struct AccuracySummary {
    std::string model;
    double temperature{};
    std::vector<AccuracyRow> rows;          // conditionings with at least one valid session
    std::vector<std::string> excluded;      // conditionings with none
    MeanStd across_conditionings;           // sample std over per-conditioning accuracies
    double pooled_std{0.0};                 // sample std over all repetitions' 0/1 outcomes
};

// Personality- and role-conditioned MBTI sessions for one model and
// temperature. `regime` narrows to one of the two. Throws NoValidSessions.
AccuracySummary conditioned_accuracy(const ScoredSet& scored, const std::string& model, double temperature,
                                     std::optional<Regime> regime = std::nullopt);

struct PctIncrease {
    Factor factor{Factor::Extraversion};
    std::optional<std::string> role;
    double baseline{0.0};
    double conditioned{0.0};
    double delta{0.0};
};

double pct_increase(double baseline, double conditioned) noexcept;
std::vector<PctIncrease> pct_increase(const BfiScores& baseline, const BfiScores& conditioned);

// For each BFI conditioning (factor, role) of the model/temperature: the
// conditioned mean of that factor against the unconditioned baseline mean.
// Throws NoValidSessions when either side is missing.
std::vector<PctIncrease> pct_increase_table(const ScoredSet& conditioned, const ScoredSet& baseline,
                                            const std::string& model, double temperature);

struct ConfusionMatrix {
    std::vector<std::string> rows;                 // conditioning types with data, in table order
    std::vector<std::string> columns;              // all sixteen types, in table order
    std::vector<std::array<double, 16>> values;    // row-stochastic
    std::vector<std::size_t> row_valid;
};

// Rows aggregate every conditioning with the same target type. Throws NoValidSessions.
ConfusionMatrix export_matrix(const ScoredSet& scored, const std::string& model, double temperature,
                              std::optional<Regime> regime = std::nullopt);

std::string matrix_csv(const ConfusionMatrix& m);

// "0.785 ± 0.391"
std::string format_accuracy(const MeanStd& ms);
// "+50.0"
std::string format_pct(double delta);

}  // namespace persona
