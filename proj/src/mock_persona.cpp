#include "persona/mock_persona.hpp"

#include "persona/errors.hpp"
#include "persona/hashing.hpp"
#include "persona/text.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace persona {

namespace {

constexpr std::string_view kBfiStem = "I see Myself as Someone Who...";

std::string_view extreme_label(const OptionScale& scale, bool highest) {
    const auto it = highest ? std::max_element(scale.values.begin(), scale.values.end())
                            : std::min_element(scale.values.begin(), scale.values.end());
    return scale.labels[static_cast<std::size_t>(it - scale.values.begin())];
}

std::vector<std::string> alnum_tokens(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (ascii_alnum(c)) {
            cur.push_back(c);
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::optional<Target> first_target_token(std::string_view text) {
    for (const auto& tok : alnum_tokens(text)) {
        if (tok.size() == 4 && std::all_of(tok.begin(), tok.end(), [](char c) { return c >= 'A' && c <= 'Z'; })) {
            if (auto t = MbtiType::try_parse(tok)) return Target{*t};
        }
        for (Factor f : kFactors) {
            if (tok == to_string(f)) return Target{f};
        }
    }
    return std::nullopt;
}

}  // namespace

MockChatClient::MockChatClient(MockPersona persona, const BankSet& banks, const PersonaCatalog& personas)
    : persona_(std::move(persona)), banks_(&banks), personas_(&personas) {
    if (persona_.epsilon < 0.0 || persona_.epsilon > 1.0) {
        throw InvalidSpec(fmt::format("mock epsilon must be in [0, 1] (got {})", persona_.epsilon));
    }
    if (persona_.mode == MockMode::Fixed && !persona_.target) {
        throw InvalidSpec("fixed mock persona requires a target");
    }
    for (const auto* bank : {&banks.mbti, &banks.bfi}) {
        for (const auto& q : bank->questions) {
            by_text_.emplace(std::string(trim(q.text)), Located{bank->instrument, q.id});
        }
    }
}

std::optional<MockChatClient::Located> MockChatClient::locate(const std::string& user) const {
    std::size_t pos = std::string::npos;
    if (user.rfind("Q: ", 0) == 0) pos = 0;
    if (auto p = user.rfind("\nQ: "); p != std::string::npos) pos = p + 1;
    if (pos != std::string::npos) {
        const auto start = pos + 3;
        const auto end = user.find('\n', start);
        auto line = trim(std::string_view(user).substr(start, end == std::string::npos ? end : end - start));
        if (line.substr(0, kBfiStem.size()) == kBfiStem) line = trim(line.substr(kBfiStem.size()));
        if (auto it = by_text_.find(std::string(line)); it != by_text_.end()) return it->second;
    }
    // Override templates may drop the "Q: " marker; fall back to the longest embedded question.
    std::optional<Located> best;
    std::size_t best_len = 0;
    for (const auto& [text, loc] : by_text_) {
        if (text.size() > best_len && user.find(text) != std::string::npos) {
            best = loc;
            best_len = text.size();
        }
    }
    return best;
}

std::optional<Target> MockChatClient::conditioned_target(const std::string& system) const {
    return first_target_token(system);
}

std::optional<Target> MockChatClient::awareness_target(const std::string& user) const {
    return first_target_token(user);
}

std::string MockChatClient::aligned_answer(const Target& target, Instrument instrument, int question_id) const {
    const auto& bank = banks_->get(instrument);
    if (target_instrument(target) != instrument) {
        throw InvalidSpec(fmt::format("{} is not a {} target", target_name(target), to_string(instrument)));
    }
    if (instrument == Instrument::MBTI) {
        const auto& key = bank.mbti_key();
        const auto axis = key.item_axis.at(question_id);
        const int toward_first = std::get<MbtiType>(target).is_first_pole(axis) ? 1 : -1;
        return std::string(extreme_label(bank.scale, key.polarity.at(question_id) * toward_first > 0));
    }
    const auto& key = bank.bfi_key();
    if (key.item_factor.at(question_id) != std::get<Factor>(target)) return std::string(bank.scale.label_for(3));
    return std::string(extreme_label(bank.scale, !key.reversed.contains(question_id)));
}

std::string MockChatClient::chat(const ChatRequest& req) {
    SplitMixRng rng(mix(persona_.rng_seed,
                        mix(req.params.request_seed.value_or(0), fnv1a64(req.user, fnv1a64(req.system)))));
    const double noise = rng.unit();

    const auto loc = locate(req.user);
    if (!loc) {
        if (auto t = awareness_target(req.user)) return personas_->reference_text(*t);
        return kUnparseableReply;
    }

    std::optional<Target> target;
    if (persona_.mode == MockMode::Fixed) target = persona_.target;
    if (persona_.mode == MockMode::FollowConditioning) target = conditioned_target(req.system);
    if (target && target_instrument(*target) != loc->instrument) target.reset();

    const auto& scale = banks_->get(loc->instrument).scale;
    if (!target || noise < persona_.epsilon) return scale.labels[rng.below(scale.size())];
    return aligned_answer(*target, loc->instrument, loc->id);
}

}  // namespace persona
