#pragma once

#include <array>
#include <map>
#include <set>
#include <string>

#include "persona/instruments.hpp"
#include "persona/personas.hpp"

namespace persona {

// BFI reverse keying: 6 - v. Throws OutOfRange outside 1..5.
int reverse_item(int v);

struct BfiScores {
    std::array<double, 5> means{};  // indexed by Factor

    double operator[](Factor f) const noexcept { return means[static_cast<std::size_t>(f)]; }
};

// Per factor, the mean of item values with reversed items flipped.
// Throws MissingAnswer when any keyed item is absent, OutOfRange for values outside 1..5.
BfiScores score_bfi(const std::map<int, int>& answers, const BfiKey& key);

struct MbtiOutcome {
    MbtiType type;
    std::array<int, 4> axis_sums{};  // indexed by Axis
    std::set<Axis> tie_flags;

    int sum(Axis a) const noexcept { return axis_sums[static_cast<std::size_t>(a)]; }
};

// axis sum = sum of polarity * option value; positive -> E/S/T/J, negative ->
// I/N/F/P, zero -> I/N/F/P with the axis flagged as a tie.
MbtiOutcome score_mbti(const std::map<int, std::string>& answers, const MbtiKey& key, const OptionScale& scale);

int likert_weight(std::string_view label, const OptionScale& scale);

}  // namespace persona
