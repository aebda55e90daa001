#include "persona/prompting.hpp"

#include "persona/errors.hpp"
#include "persona/text.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace persona {

std::string_view to_string(Regime r) noexcept {
    switch (r) {
        case Regime::Unconditioned: return "unconditioned";
        case Regime::Personality: return "personality";
        case Regime::RolePersonality: return "role";
    }
    return "unconditioned";
}

Regime parse_regime(std::string_view s) {
    const auto f = casefold(s);
    if (f == "unconditioned") return Regime::Unconditioned;
    if (f == "personality") return Regime::Personality;
    if (f == "role" || f == "role+personality" || f == "rolepersonality") return Regime::RolePersonality;
    throw InvalidSpec(fmt::format("unknown conditioning mode '{}'", s));
}

std::string ConditioningSpec::canonical() const {
    std::string s = fmt::format("{}/{}", to_string(instrument), to_string(regime));
    if (target) s += "/" + target_name(*target);
    if (role) s += "/" + *role;
    return s;
}

ConditioningSpec ConditioningSpec::from_canonical(std::string_view s) {
    const auto parts = split(s, '/');
    if (parts.size() < 2) throw InvalidSpec(fmt::format("malformed conditioning '{}'", s));
    ConditioningSpec spec;
    try {
        spec.instrument = parse_instrument(parts[0]);
    } catch (const SchemaError& e) {
        throw InvalidSpec(e.what());
    }
    spec.regime = parse_regime(parts[1]);
    if (parts.size() >= 3) spec.target = parse_target(spec.instrument, parts[2]);
    if (parts.size() >= 4) {
        // Role labels may not contain '/', but keep anything after the target intact.
        std::string role = parts[3];
        for (std::size_t i = 4; i < parts.size(); ++i) role += "/" + parts[i];
        spec.role = role;
    }
    return spec;
}

void ConditioningSpec::validate(const PersonaCatalog& personas) const {
    if (target && target_instrument(*target) != instrument) {
        throw InvalidSpec(fmt::format("target {} does not belong to {}", target_name(*target),
                                      to_string(instrument)));
    }
    switch (regime) {
        case Regime::Unconditioned:
            if (target || role) throw InvalidSpec("unconditioned prompting takes no target or role");
            break;
        case Regime::Personality:
            if (!target) throw InvalidSpec("personality conditioning requires a target");
            if (role) throw InvalidSpec("personality conditioning takes no role");
            break;
        case Regime::RolePersonality:
            if (!target || !role) throw InvalidSpec("role conditioning requires a target and a role");
            if (!personas.role_allowed(*target, *role)) {
                throw InvalidSpec(fmt::format("'{}' is not one of the roles assigned to {}", *role,
                                              target_name(*target)));
            }
            break;
    }
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir,
                                      const std::optional<std::filesystem::path>& override_dir) {
    PromptTemplates t;
    for (auto name : kNames) {
        const auto file = std::string(name) + ".txt";
        auto path = dir / file;
        if (override_dir && std::filesystem::exists(*override_dir / file)) path = *override_dir / file;
        std::ifstream in(path, std::ios::binary);
        if (!in) throw SchemaError(fmt::format("missing prompt template '{}'", path.string()));
        std::ostringstream buf;
        buf << in.rdbuf();
        auto text = buf.str();
        // Files end with a single newline that is not part of the template.
        if (!text.empty() && text.back() == '\n') text.pop_back();
        if (!text.empty() && text.back() == '\r') text.pop_back();
        t.templates_.emplace(std::string(name), std::move(text));
    }
    return t;
}

const std::string& PromptTemplates::get(std::string_view name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw SchemaError(fmt::format("unknown prompt template '{}'", name));
    return it->second;
}

std::string substitute(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            const auto close = tmpl.find('}', i + 1);
            if (close != std::string_view::npos) {
                const auto name = std::string(tmpl.substr(i + 1, close - i - 1));
                if (auto it = vars.find(name); it != vars.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out.push_back(tmpl[i++]);
    }
    return out;
}

PromptRenderer::PromptRenderer(PromptTemplates templates, const PersonaCatalog& personas,
                               const BankSet* banks)
    : templates_(std::move(templates)), personas_(&personas), banks_(banks) {}

namespace {

std::string prefix(Instrument i) { return i == Instrument::MBTI ? "mbti_" : "bfi_"; }

}  // namespace

std::string PromptRenderer::render_question_prompt(Instrument instrument, const Question& q) const {
    if (q.instrument != instrument) {
        throw InvalidSpec(fmt::format("question {} is not a {} item", q.id, to_string(instrument)));
    }
    std::map<std::string, std::string> vars{{"QUESTION", q.text}};
    if (banks_) vars["OPTIONS"] = join(banks_->get(instrument).scale.labels, ", ");
    return substitute(templates_.get(prefix(instrument) + "question"), vars);
}

SystemMessages PromptRenderer::render_system_message(const ConditioningSpec& spec) const {
    spec.validate(*personas_);
    const auto p = prefix(spec.instrument);
    SystemMessages msgs;
    msgs.interviewer = templates_.get(p + "interviewer");
    if (spec.regime == Regime::Unconditioned) return msgs;

    const auto& tmpl = templates_.get(p + (spec.regime == Regime::Personality ? "interviewee_personality"
                                                                               : "interviewee_role"));
    std::map<std::string, std::string> vars;
    if (spec.instrument == Instrument::MBTI) {
        const auto& type = std::get<MbtiType>(*spec.target);
        vars["PERSONALITY"] = type.code();
        vars["PERSONALITY_TRAITS"] = personas_->traits_for(type).render();
    } else {
        const auto factor = std::get<Factor>(*spec.target);
        vars["FACTOR"] = std::string(to_string(factor));
        vars["DETAILS"] = personas_->profile_for(factor).render();
    }
    if (spec.role) vars["ROLE"] = *spec.role;
    msgs.interviewee = substitute(tmpl, vars);
    return msgs;
}

std::string PromptRenderer::render_awareness_prompt(Instrument instrument, const Target& target) const {
    if (target_instrument(target) != instrument) {
        throw InvalidSpec(fmt::format("{} is not a {} target", target_name(target), to_string(instrument)));
    }
    const auto name = target_name(target);
    return substitute(templates_.get(prefix(instrument) + "awareness"),
                      {{"PERSONALITY", name}, {"FACTOR", name}});
}

RenderedPrompt PromptRenderer::render(const ConditioningSpec& spec, const Question& q) const {
    auto sys = render_system_message(spec);
    return RenderedPrompt{std::move(sys.interviewee), std::move(sys.interviewer),
                          render_question_prompt(spec.instrument, q)};
}

std::string PromptRenderer::render_role_categorization(Instrument instrument) const {
    return templates_.get(prefix(instrument) + "role_categorization");
}

}  // namespace persona
