#include "persona/scoring.hpp"

#include "persona/errors.hpp"

#include <fmt/format.h>

namespace persona {

int reverse_item(int v) {
    if (v < 1 || v > 5) throw OutOfRange(fmt::format("BFI value {} outside 1..5", v));
    return 6 - v;
}

BfiScores score_bfi(const std::map<int, int>& answers, const BfiKey& key) {
    std::vector<int> missing;
    for (const auto& [id, factor] : key.item_factor) {
        if (!answers.contains(id)) missing.push_back(id);
    }
    if (!missing.empty()) throw MissingAnswer(std::move(missing));

    std::array<int, 5> sum{};
    std::array<int, 5> count{};
    for (const auto& [id, factor] : key.item_factor) {
        const int v = answers.at(id);
        if (v < 1 || v > 5) throw OutOfRange(fmt::format("answer {} to BFI item {} outside 1..5", v, id));
        const auto f = static_cast<std::size_t>(factor);
        sum[f] += key.reversed.contains(id) ? reverse_item(v) : v;
        ++count[f];
    }
    BfiScores out;
    for (std::size_t f = 0; f < 5; ++f) {
        out.means[f] = count[f] ? static_cast<double>(sum[f]) / count[f] : 0.0;
    }
    return out;
}

MbtiOutcome score_mbti(const std::map<int, std::string>& answers, const MbtiKey& key, const OptionScale& scale) {
    std::vector<int> missing;
    for (const auto& [id, axis] : key.item_axis) {
        if (!answers.contains(id)) missing.push_back(id);
    }
    if (!missing.empty()) throw MissingAnswer(std::move(missing));

    std::array<int, 4> sums{};
    for (const auto& [id, axis] : key.item_axis) {
        sums[static_cast<std::size_t>(axis)] += key.polarity.at(id) * option_value(scale, answers.at(id));
    }
    std::array<bool, 4> first{};
    std::set<Axis> ties;
    for (Axis a : kAxes) {
        const auto i = static_cast<std::size_t>(a);
        first[i] = sums[i] > 0;
        if (sums[i] == 0) ties.insert(a);
    }
    return MbtiOutcome{MbtiType::from_poles(first), sums, std::move(ties)};
}

int likert_weight(std::string_view label, const OptionScale& scale) { return option_value(scale, label); }

}  // namespace persona
