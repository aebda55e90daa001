#include "persona/personas.hpp"

#include "persona/errors.hpp"
#include "persona/text.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>

namespace persona {

using nlohmann::json;

std::optional<MbtiType> MbtiType::try_parse(std::string_view code) noexcept {
    if (code.size() != 4) return std::nullopt;
    MbtiType t;
    for (Axis a : kAxes) {
        const auto i = static_cast<std::size_t>(a);
        const char c = static_cast<char>(code[i] >= 'a' && code[i] <= 'z' ? code[i] - 'a' + 'A' : code[i]);
        if (c != first_pole(a) && c != second_pole(a)) return std::nullopt;
        t.letters_[i] = c;
    }
    return t;
}

MbtiType MbtiType::parse(std::string_view code) {
    if (auto t = try_parse(code)) return *t;
    throw InvalidSpec(fmt::format("'{}' is not an MBTI type", code));
}

MbtiType MbtiType::from_poles(const std::array<bool, 4>& first_poles) noexcept {
    MbtiType t;
    for (Axis a : kAxes) {
        const auto i = static_cast<std::size_t>(a);
        t.letters_[i] = first_poles[i] ? first_pole(a) : second_pole(a);
    }
    return t;
}

const std::array<MbtiType, 16>& all_types() {
    static const std::array<MbtiType, 16> types{
        MbtiType::parse("ESTP"), MbtiType::parse("ESFP"), MbtiType::parse("ENFP"),
        MbtiType::parse("ENTP"), MbtiType::parse("ESTJ"), MbtiType::parse("ESFJ"),
        MbtiType::parse("ENFJ"), MbtiType::parse("ENTJ"), MbtiType::parse("ISTJ"),
        MbtiType::parse("ISFJ"), MbtiType::parse("INFJ"), MbtiType::parse("INTJ"),
        MbtiType::parse("ISTP"), MbtiType::parse("ISFP"), MbtiType::parse("INFP"),
        MbtiType::parse("INTP")};
    return types;
}

std::string target_name(const Target& t) {
    if (const auto* m = std::get_if<MbtiType>(&t)) return m->code();
    return std::string(to_string(std::get<Factor>(t)));
}

Instrument target_instrument(const Target& t) noexcept {
    return std::holds_alternative<MbtiType>(t) ? Instrument::MBTI : Instrument::BFI;
}

Target parse_target(Instrument instrument, std::string_view name) {
    if (instrument == Instrument::MBTI) return MbtiType::parse(name);
    try {
        return parse_factor(name);
    } catch (const SchemaError&) {
        throw InvalidSpec(fmt::format("'{}' is not a BFI factor", name));
    }
}

std::vector<Target> all_targets(Instrument instrument) {
    std::vector<Target> out;
    if (instrument == Instrument::MBTI) {
        for (const auto& t : all_types()) out.emplace_back(t);
    } else {
        for (Factor f : kFactors) out.emplace_back(f);
    }
    return out;
}

const std::string& TraitProfile::feature(std::string_view name) const {
    for (const auto& f : features) {
        if (f.name == name) return f.text;
    }
    throw KeyError(fmt::format("{} has no feature '{}'", type, name));
}

std::string TraitProfile::render() const {
    std::vector<std::string> lines;
    lines.reserve(features.size());
    for (const auto& f : features) lines.push_back(f.name + ": " + f.text);
    return join(lines, "\n");
}

std::string FactorProfile::render() const {
    return "Verbal labels: " + verbal_labels + "\nConceptual definition: " + conceptual_definition +
           "\nBehavioral examples: " + behavioral_examples;
}

namespace {

std::string nonempty_string(const json& obj, const char* key, std::string_view where) {
    if (!obj.contains(key) || !obj.at(key).is_string()) {
        throw SchemaError(fmt::format("{}: missing string field '{}'", where, key));
    }
    auto s = obj.at(key).get<std::string>();
    if (trim(s).empty()) throw SchemaError(fmt::format("{}: field '{}' is empty", where, key));
    return s;
}

}  // namespace

PersonaCatalog PersonaCatalog::parse(const json& doc) {
    if (!doc.is_object() || doc.value("schema", "") != "persona-profiles/1") {
        throw SchemaError("personas: expected schema 'persona-profiles/1'");
    }
    PersonaCatalog cat;

    for (const auto& t : doc.at("types")) {
        const auto code = MbtiType::parse(nonempty_string(t, "code", "types[]")).code();
        TraitProfile p{code, {}};
        const auto& feats = t.at("features");
        if (!feats.is_array() || feats.size() != kTraitFeatureNames.size()) {
            throw SchemaError(fmt::format("{}: expected {} features", code, kTraitFeatureNames.size()));
        }
        for (std::size_t i = 0; i < feats.size(); ++i) {
            auto name = nonempty_string(feats[i], "name", code);
            if (name != kTraitFeatureNames[i]) {
                throw SchemaError(fmt::format("{}: feature {} must be '{}'", code, i, kTraitFeatureNames[i]));
            }
            p.features.push_back({std::move(name), nonempty_string(feats[i], "text", code)});
        }
        if (!cat.types_.emplace(code, std::move(p)).second) {
            throw SchemaError(fmt::format("duplicate type profile {}", code));
        }
    }
    if (cat.types_.size() != 16) throw SchemaError("personas: expected 16 type profiles");

    std::array<bool, 5> seen{};
    for (const auto& f : doc.at("factors")) {
        const auto factor = parse_factor(nonempty_string(f, "name", "factors[]"));
        const auto where = std::string(to_string(factor));
        auto& slot = cat.factors_[static_cast<std::size_t>(factor)];
        slot = FactorProfile{factor, nonempty_string(f, "verbal_labels", where),
                             nonempty_string(f, "conceptual_definition", where),
                             nonempty_string(f, "behavioral_examples", where)};
        seen[static_cast<std::size_t>(factor)] = true;
    }
    if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) {
        throw SchemaError("personas: expected all 5 factor profiles");
    }

    for (const auto& r : doc.at("role_catalog")) cat.catalog_.push_back(r.get<std::string>());

    const auto& assignments = doc.at("role_assignments");
    for (const char* inst : {"MBTI", "BFI"}) {
        const auto instrument = parse_instrument(inst);
        for (const auto& a : assignments.at(inst)) {
            const auto target = parse_target(instrument, nonempty_string(a, "target", "role_assignments"));
            const auto& roles = a.at("roles");
            if (!roles.is_array() || roles.size() != 3) {
                throw SchemaError(fmt::format("{}: exactly 3 roles required", target_name(target)));
            }
            std::array<std::string, 3> triple;
            for (std::size_t i = 0; i < 3; ++i) triple[i] = roles[i].get<std::string>();
            if (!cat.roles_.emplace(target_name(target), std::move(triple)).second) {
                throw SchemaError(fmt::format("duplicate role assignment for {}", target_name(target)));
            }
        }
    }
    if (cat.roles_.size() != 21) throw SchemaError("personas: expected role triples for 21 targets");
    return cat;
}

PersonaCatalog PersonaCatalog::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError(fmt::format("cannot open personas file '{}'", path.string()));
    try {
        return parse(json::parse(in));
    } catch (const json::exception& e) {
        throw SchemaError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

const TraitProfile& PersonaCatalog::traits_for(const MbtiType& t) const { return types_.at(t.code()); }

const FactorProfile& PersonaCatalog::profile_for(Factor f) const {
    return factors_[static_cast<std::size_t>(f)];
}

const std::array<std::string, 3>& PersonaCatalog::roles_for(const Target& t) const {
    return roles_.at(target_name(t));
}

bool PersonaCatalog::role_allowed(const Target& t, std::string_view role) const {
    const auto& roles = roles_for(t);
    return std::find(roles.begin(), roles.end(), role) != roles.end();
}

std::string PersonaCatalog::reference_text(const Target& t) const {
    if (const auto* m = std::get_if<MbtiType>(&t)) return traits_for(*m).render();
    return profile_for(std::get<Factor>(t)).render();
}

}  // namespace persona
