#pragma once

// Personality targets used for conditioning: the sixteen MBTI types with
// their trait profiles, the five BFI factors with their profiles, and the
// curated role triples per target.

#include <array>
#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "persona/instruments.hpp"

namespace persona {

class MbtiType {
public:
    // Throws InvalidSpec when `code` is not one of the sixteen types.
    static MbtiType parse(std::string_view code);
    static std::optional<MbtiType> try_parse(std::string_view code) noexcept;

    // Builds a type from one pole choice per axis (true = E/S/T/J).
    static MbtiType from_poles(const std::array<bool, 4>& first_poles) noexcept;

    std::string code() const { return std::string(letters_.begin(), letters_.end()); }
    char letter(Axis a) const noexcept { return letters_[static_cast<std::size_t>(a)]; }
    bool is_first_pole(Axis a) const noexcept { return letter(a) == first_pole(a); }

    auto operator<=>(const MbtiType&) const = default;

private:
    MbtiType() = default;
    std::array<char, 4> letters_{};
};

// Table order: ESTP ESFP ENFP ENTP ESTJ ESFJ ENFJ ENTJ, then the I-row.
const std::array<MbtiType, 16>& all_types();

using Target = std::variant<MbtiType, Factor>;

std::string target_name(const Target& t);
Instrument target_instrument(const Target& t) noexcept;
Target parse_target(Instrument instrument, std::string_view name);
std::vector<Target> all_targets(Instrument instrument);

struct TraitFeature {
    std::string name;
    std::string text;
};

inline constexpr std::array<std::string_view, 7> kTraitFeatureNames{
    "General Traits",         "Strengths",    "Potential development areas",
    "Typical characteristics", "Careers & career ideas", "Under stress",
    "Relationships"};

struct TraitProfile {
    std::string type;
    std::vector<TraitFeature> features;  // in kTraitFeatureNames order

    const std::string& feature(std::string_view name) const;
    // "Name: text" lines joined by '\n'.
    std::string render() const;
};

struct FactorProfile {
    Factor factor{Factor::Extraversion};
    std::string verbal_labels;
    std::string conceptual_definition;
    std::string behavioral_examples;

    std::string render() const;
};

class PersonaCatalog {
public:
    static PersonaCatalog parse(const nlohmann::json& doc);
    static PersonaCatalog load(const std::filesystem::path& path);

    const TraitProfile& traits_for(const MbtiType& t) const;
    const FactorProfile& profile_for(Factor f) const;
    const std::array<std::string, 3>& roles_for(const Target& t) const;
    bool role_allowed(const Target& t, std::string_view role) const;
    const std::vector<std::string>& role_catalog() const noexcept { return catalog_; }

    // Rendered reference description (trait profile or factor profile).
    std::string reference_text(const Target& t) const;

private:
    std::map<std::string, TraitProfile> types_;
    std::array<FactorProfile, 5> factors_{};
    std::map<std::string, std::array<std::string, 3>> roles_;
    std::vector<std::string> catalog_;
};

}  // namespace persona
