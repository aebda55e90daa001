#include <doctest.h>

#include <random>

#include <json.hpp>

#include "persona/errors.hpp"
#include "persona/scoring.hpp"
#include "support/bfi_oracle.hpp"
#include "support/fixtures.hpp"

using namespace persona;
using persona::testing::shipped;

namespace {

const BfiKey& bfi_key() { return shipped().banks.bfi.bfi_key(); }
const MbtiKey& mbti_key() { return shipped().banks.mbti.mbti_key(); }
const OptionScale& mbti_scale() { return shipped().banks.mbti.scale; }

std::map<int, int> uniform_bfi(int v) {
    std::map<int, int> m;
    for (int id = 1; id <= 44; ++id) m[id] = v;
    return m;
}

std::map<int, std::string> uniform_mbti(const std::string& label) {
    std::map<int, std::string> m;
    for (int id = 1; id <= 60; ++id) m[id] = label;
    return m;
}

// Key read straight from the bank file.
struct RawKeyItem {
    int axis;
    int polarity;
};

std::map<int, RawKeyItem> raw_mbti_key() {
    const auto doc = nlohmann::json::parse(testing::read_file(testing::data_dir() / "mbti_bank.json"));
    const std::string axes[] = {"EI", "SN", "TF", "JP"};
    std::map<int, RawKeyItem> out;
    for (const auto& it : doc["items"]) {
        const auto a = it["axis"].get<std::string>();
        int idx = 0;
        while (axes[idx] != a) ++idx;
        out[it["id"].get<int>()] = {idx, it["polarity"].get<int>()};
    }
    return out;
}

}  // namespace

TEST_CASE("reverse_item") {
    CHECK(reverse_item(4) == 2);
    CHECK(reverse_item(3) == 3);
    CHECK(reverse_item(1) == 5);
    for (int v = 1; v <= 5; ++v) CHECK(reverse_item(reverse_item(v)) == v);
    CHECK_THROWS_AS(reverse_item(0), OutOfRange);
    CHECK_THROWS_AS(reverse_item(6), OutOfRange);
}

TEST_CASE("score_bfi examples") {
    const auto threes = score_bfi(uniform_bfi(3), bfi_key());
    for (Factor f : kFactors) CHECK(threes[f] == 3.0);

    const auto fives = score_bfi(uniform_bfi(5), bfi_key());
    CHECK(testing::oracle_bfi(uniform_bfi(5))[0] == 3.5);
    CHECK(fives[Factor::Extraversion] == 3.5);

    auto pattern = uniform_bfi(3);
    for (int id : {1, 11, 16, 26, 36}) pattern[id] = 5;
    for (int id : {6, 21, 31}) pattern[id] = 1;
    const auto expect = testing::oracle_bfi(pattern);
    CHECK(expect == std::array<double, 5>{5.0, 3.0, 3.0, 3.0, 3.0});
    CHECK(score_bfi(pattern, bfi_key()).means == expect);
}

TEST_CASE("score_bfi errors") {
    auto m = uniform_bfi(3);
    m.erase(17);
    m.erase(40);
    try {
        score_bfi(m, bfi_key());
        FAIL("expected MissingAnswer");
    } catch (const MissingAnswer& e) {
        CHECK(e.ids() == std::vector<int>{17, 40});
    }
    m = uniform_bfi(3);
    m[5] = 7;
    CHECK_THROWS_AS(score_bfi(m, bfi_key()), OutOfRange);
}

TEST_CASE("score_bfi matches the brute-force oracle on 1000 random vectors") {
    std::mt19937_64 gen(2024);
    std::uniform_int_distribution<int> v(1, 5);
    for (int n = 0; n < 1000; ++n) {
        std::map<int, int> answers;
        for (int id = 1; id <= 44; ++id) answers[id] = v(gen);
        const auto got = score_bfi(answers, bfi_key());
        const auto want = testing::oracle_bfi(answers);
        for (std::size_t f = 0; f < 5; ++f) REQUIRE(got.means[f] == want[f]);
    }
}

TEST_CASE("score_bfi monotonicity") {
    std::mt19937_64 gen(7);
    std::uniform_int_distribution<int> v(1, 4);
    for (int n = 0; n < 100; ++n) {
        std::map<int, int> answers;
        for (int id = 1; id <= 44; ++id) answers[id] = v(gen);
        const auto before = score_bfi(answers, bfi_key());
        const int id = 1 + static_cast<int>(gen() % 44);
        ++answers[id];
        const auto after = score_bfi(answers, bfi_key());
        const auto f = bfi_key().item_factor.at(id);
        for (Factor g : kFactors) {
            if (g != f) {
                CHECK(after[g] == before[g]);
            } else if (bfi_key().reversed.contains(id)) {
                CHECK(after[g] < before[g]);
            } else {
                CHECK(after[g] > before[g]);
            }
        }
    }
}

TEST_CASE("score_mbti: all neutral ties to INFP") {
    const auto out = score_mbti(uniform_mbti("Neither Agree nor Disagree"), mbti_key(), mbti_scale());
    CHECK(out.type.code() == "INFP");
    CHECK(out.tie_flags.size() == 4);
    for (Axis a : kAxes) CHECK(out.sum(a) == 0);
}

TEST_CASE("score_mbti: key-aligned extremes toward ESTJ") {
    const auto key = raw_mbti_key();
    std::map<int, std::string> answers;
    std::array<int, 4> oracle{};
    for (const auto& [id, k] : key) {
        const int v = k.polarity > 0 ? 3 : -3;
        answers[id] = v > 0 ? "Agree" : "Disagree";
        oracle[static_cast<std::size_t>(k.axis)] += k.polarity * v;
    }
    const auto out = score_mbti(answers, mbti_key(), mbti_scale());
    CHECK(out.type.code() == "ESTJ");
    CHECK(out.axis_sums == oracle);
    CHECK(out.tie_flags.empty());
}

TEST_CASE("score_mbti: single EI item perturbation") {
    const auto key = raw_mbti_key();
    int item = 0;
    for (const auto& [id, k] : key) {
        if (k.axis == 0 && k.polarity == 1) {
            item = id;
            break;
        }
    }
    REQUIRE(item != 0);
    auto answers = uniform_mbti("Neither Agree nor Disagree");
    answers[item] = "Agree";
    const auto out = score_mbti(answers, mbti_key(), mbti_scale());
    CHECK(out.sum(Axis::EI) == 3);
    CHECK(out.type.code() == "ENFP");
    CHECK(out.tie_flags == std::set<Axis>{Axis::SN, Axis::TF, Axis::JP});
}

TEST_CASE("score_mbti matches a brute-force sum on random answers") {
    const auto key = raw_mbti_key();
    std::mt19937_64 gen(5);
    for (int n = 0; n < 500; ++n) {
        std::map<int, std::string> answers;
        std::array<int, 4> oracle{};
        for (const auto& [id, k] : key) {
            const auto i = gen() % 7;
            answers[id] = mbti_scale().labels[i];
            oracle[static_cast<std::size_t>(k.axis)] += k.polarity * (3 - static_cast<int>(i));
        }
        const auto out = score_mbti(answers, mbti_key(), mbti_scale());
        REQUIRE(out.axis_sums == oracle);
        std::string code;
        const char first[] = {'E', 'S', 'T', 'J'}, second[] = {'I', 'N', 'F', 'P'};
        for (int a = 0; a < 4; ++a) code += oracle[a] > 0 ? first[a] : second[a];
        CHECK(out.type.code() == code);
    }
}

TEST_CASE("score_mbti per-axis independence and argmax invariance") {
    std::mt19937_64 gen(17);
    auto scaled = mbti_scale();
    for (auto& v : scaled.values) v *= 4;
    for (int n = 0; n < 200; ++n) {
        std::map<int, std::string> answers;
        for (int id = 1; id <= 60; ++id) answers[id] = mbti_scale().labels[gen() % 7];
        const auto base = score_mbti(answers, mbti_key(), mbti_scale());
        CHECK(score_mbti(answers, mbti_key(), scaled).type == base.type);

        auto changed = answers;
        for (const auto& [id, axis] : mbti_key().item_axis) {
            if (axis == Axis::EI) changed[id] = mbti_scale().labels[gen() % 7];
        }
        const auto after = score_mbti(changed, mbti_key(), mbti_scale());
        for (Axis a : {Axis::SN, Axis::TF, Axis::JP}) CHECK(after.type.letter(a) == base.type.letter(a));
    }
}

TEST_CASE("score_mbti errors") {
    auto m = uniform_mbti("Agree");
    m.erase(60);
    CHECK_THROWS_AS(score_mbti(m, mbti_key(), mbti_scale()), MissingAnswer);
    m = uniform_mbti("Agree");
    m[3] = "Strongly Agree";
    CHECK_THROWS_AS(score_mbti(m, mbti_key(), mbti_scale()), UnknownLabel);
    CHECK(likert_weight("Partially Disagree", mbti_scale()) == -1);
}
