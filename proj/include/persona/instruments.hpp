#pragma once

// Question banks for the two instruments, their answer scales and scoring
// keys. Banks are loaded from JSON files (see docs/data-formats.md) and are
// immutable once validated.

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace persona {

enum class Instrument { MBTI, BFI };

std::string_view to_string(Instrument i) noexcept;
Instrument parse_instrument(std::string_view s);  // case-insensitive; throws SchemaError

// MBTI dichotomies. The first pole is E, S, T, J.
enum class Axis { EI = 0, SN = 1, TF = 2, JP = 3 };
inline constexpr std::array<Axis, 4> kAxes{Axis::EI, Axis::SN, Axis::TF, Axis::JP};

std::string_view to_string(Axis a) noexcept;
Axis parse_axis(std::string_view s);
char first_pole(Axis a) noexcept;
char second_pole(Axis a) noexcept;

enum class Factor { Extraversion = 0, Agreeableness, Conscientiousness, Neuroticism, Openness };
inline constexpr std::array<Factor, 5> kFactors{Factor::Extraversion, Factor::Agreeableness,
                                                Factor::Conscientiousness, Factor::Neuroticism,
                                                Factor::Openness};

std::string_view to_string(Factor f) noexcept;
char factor_letter(Factor f) noexcept;
// Accepts the full name or the single letter (E, A, C, N, O), any case.
Factor parse_factor(std::string_view s);

struct OptionScale {
    Instrument instrument{Instrument::MBTI};
    std::vector<std::string> labels;
    std::vector<int> values;

    std::size_t size() const noexcept { return labels.size(); }
    // Exact match first, then case-insensitive. Throws UnknownLabel.
    std::size_t index_of(std::string_view label) const;
    std::string_view label_for(int value) const;
};

int option_value(const OptionScale& scale, std::string_view label);

struct Question {
    int id{};
    std::string text;
    Instrument instrument{Instrument::MBTI};
};

struct MbtiKey {
    std::map<int, Axis> item_axis;
    std::map<int, int> polarity;  // +1: agreement pushes toward the first pole
    std::map<int, std::string> rationale;
};

struct BfiKey {
    std::map<int, Factor> item_factor;
    std::set<int> reversed;

    std::vector<int> items_of(Factor f) const;
};

class QuestionBank {
public:
    Instrument instrument{Instrument::MBTI};
    OptionScale scale;
    std::vector<Question> questions;  // ordered by id
    std::variant<MbtiKey, BfiKey> key;
    std::string note;

    std::size_t size() const noexcept { return questions.size(); }
    const Question& question(int id) const;
    const MbtiKey& mbti_key() const;
    const BfiKey& bfi_key() const;
};

// Both banks, as used together by the runner and the scorer.
struct BankSet {
    QuestionBank mbti;
    QuestionBank bfi;

    const QuestionBank& get(Instrument i) const noexcept {
        return i == Instrument::MBTI ? mbti : bfi;
    }
};

QuestionBank parse_bank(const nlohmann::json& doc, Instrument expected);
QuestionBank load_bank(const std::filesystem::path& path, Instrument expected);
BankSet load_banks(const std::filesystem::path& data_dir);

// Canonical, byte-stable serialization; parse_bank(serialize_bank(b)) == b.
std::string serialize_bank(const QuestionBank& bank);

bool operator==(const OptionScale& a, const OptionScale& b);
bool operator==(const QuestionBank& a, const QuestionBank& b);

}  // namespace persona
