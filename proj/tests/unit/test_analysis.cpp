#include <doctest.h>

#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "persona/analysis.hpp"
#include "persona/errors.hpp"
#include "persona/mock_persona.hpp"
#include "persona/report.hpp"
#include "persona/runner.hpp"
#include "support/fixtures.hpp"

using namespace persona;
using persona::testing::shipped;
using persona::testing::TempDir;

namespace {

int rep_counter = 0;

ScoredSession mbti_session(const std::string& outcome, std::optional<std::string> target = std::nullopt,
                           std::string model = "m", double temp = 0.7) {
    ScoredSession s;
    s.model = std::move(model);
    s.temperature = temp;
    s.conditioning.instrument = Instrument::MBTI;
    if (target) {
        s.conditioning.regime = Regime::Personality;
        s.conditioning.target = MbtiType::parse(*target);
    }
    s.repetition = rep_counter++;
    s.session = fmt::format("{}|{}|{}|{}", s.model, temp, s.conditioning.canonical(), s.repetition);
    s.valid = true;
    s.answered = 60;
    s.mbti = MbtiOutcome{MbtiType::parse(outcome), {}, {}};
    return s;
}

ScoredSession bfi_session(std::array<double, 5> means, std::optional<Factor> target = std::nullopt) {
    ScoredSession s;
    s.model = "m";
    s.temperature = 0.7;
    s.conditioning.instrument = Instrument::BFI;
    if (target) {
        s.conditioning.regime = Regime::Personality;
        s.conditioning.target = *target;
    }
    s.repetition = rep_counter++;
    s.session = "bfi|" + std::to_string(s.repetition);
    s.valid = true;
    s.answered = 44;
    s.bfi = BfiScores{means};
    return s;
}

ScoredSet mock_run(const RunPlan& plan, MockMode mode, double epsilon = 0.0) {
    TempDir dir;
    MockChatClient client({mode, std::nullopt, epsilon, 3}, shipped().banks, shipped().personas);
    RunOptions o;
    o.workers = 4;
    Runner(shipped().banks, shipped().renderer, client, o).execute(plan, dir / "l.jsonl");
    return score_ledger(read_ledger(dir / "l.jsonl"), shipped().banks);
}

RunPlan plan_for(std::vector<ConditioningSpec> conds, int reps) {
    RunPlan p;
    p.models = {"mock"};
    p.temperatures = {0.7};
    p.conditionings = std::move(conds);
    p.repetitions = reps;
    p.run_seed = 3;
    return p;
}

}  // namespace

TEST_CASE("type frequencies") {
    ScoredSet set;
    for (int i = 0; i < 30; ++i) set.sessions.push_back(mbti_session("ENFJ"));
    auto f = type_frequencies(set, {});
    CHECK(f.freq == std::map<std::string, double>{{"ENFJ", 1.0}});
    CHECK(f.valid == 30);

    set.sessions.clear();
    for (int i = 0; i < 10; ++i) set.sessions.push_back(mbti_session("ENFJ"));
    for (int i = 0; i < 10; ++i) set.sessions.push_back(mbti_session("INFJ"));
    f = type_frequencies(set, {});
    CHECK(f.freq == std::map<std::string, double>{{"ENFJ", 0.5}, {"INFJ", 0.5}});
    const auto letters = letter_frequencies(set, {});
    CHECK(letters.at('E') == 0.5);
    CHECK(letters.at('N') == 1.0);
    CHECK(letters.at('S') == 0.0);

    SessionFilter other;
    other.model = "nobody";
    CHECK_THROWS_AS(type_frequencies(set, other), NoValidSessions);
    CHECK_THROWS_AS(type_frequencies(ScoredSet{}, {}), NoValidSessions);
}

TEST_CASE("invalid sessions never count") {
    ScoredSet set;
    set.sessions.push_back(mbti_session("ENFJ"));
    auto bad = mbti_session("INTJ");
    bad.valid = false;
    bad.mbti.reset();
    bad.invalid_reason = "question 3: UnparseableAnswer";
    set.sessions.push_back(bad);
    CHECK(type_frequencies(set, {}).freq == std::map<std::string, double>{{"ENFJ", 1.0}});
    CHECK(set.valid_count() == 1);
}

TEST_CASE("factor means") {
    ScoredSet set;
    set.sessions.push_back(bfi_session({3, 3, 3, 3, 3}));
    auto single = factor_means(set, {});
    CHECK(single.means.means == std::array<double, 5>{3, 3, 3, 3, 3});
    set.sessions.push_back(bfi_session({5, 5, 5, 5, 5}));
    CHECK(factor_means(set, {}).means.means == std::array<double, 5>{4, 4, 4, 4, 4});
    CHECK_THROWS_AS(factor_means(ScoredSet{}, {}), NoValidSessions);
}

TEST_CASE("Openness mock averages 5.0 on Openness and 3.0 elsewhere") {
    const auto set = mock_run(plan_for({{Regime::Personality, Instrument::BFI, Factor::Openness, std::nullopt}}, 10),
                              MockMode::FollowConditioning);
    const auto m = factor_means(set, {});
    CHECK(m.valid == 10);
    CHECK(m.means.means == std::array<double, 5>{3.0, 3.0, 3.0, 3.0, 5.0});
}

TEST_CASE("accuracy arithmetic") {
    ScoredSet set;
    for (int i = 0; i < 3; ++i) set.sessions.push_back(mbti_session("INTJ", "INTJ"));
    for (int i = 0; i < 7; ++i) set.sessions.push_back(mbti_session("ENFP", "INTJ"));
    for (int i = 0; i < 10; ++i) set.sessions.push_back(mbti_session("ESTP", "ESTP"));
    const auto acc = conditioned_accuracy(set, "m", 0.7);
    REQUIRE(acc.rows.size() == 2);
    CHECK(acc.rows[0].target == "ESTP");
    CHECK(acc.rows[0].accuracy == 1.0);
    CHECK(acc.rows[1].target == "INTJ");
    CHECK(acc.rows[1].accuracy == doctest::Approx(0.3));
    CHECK(acc.rows[1].valid == 10);
    CHECK(acc.across_conditionings.mean == doctest::Approx(0.65));
    CHECK(acc.across_conditionings.std == doctest::Approx(std::sqrt(2 * 0.35 * 0.35)));
    // 13 ones and 7 zeros over 20 repetitions.
    const double p = 13.0 / 20.0;
    CHECK(acc.pooled_std == doctest::Approx(std::sqrt(20.0 * p * (1 - p) / 19.0)));
    CHECK_THROWS_AS(conditioned_accuracy(set, "other", 0.7), NoValidSessions);
}

TEST_CASE("a conditioning with no valid sessions is excluded and listed") {
    ScoredSet set;
    set.sessions.push_back(mbti_session("INTJ", "INTJ"));
    auto bad = mbti_session("ENFJ", "ENFJ");
    bad.valid = false;
    bad.mbti.reset();
    set.sessions.push_back(bad);
    const auto acc = conditioned_accuracy(set, "m", 0.7);
    CHECK(acc.rows.size() == 1);
    CHECK(acc.excluded == std::vector<std::string>{"MBTI/personality/ENFJ"});
}

TEST_CASE("perfect mock: accuracy 1.000 ± 0.000 and identity matrix") {
    std::vector<ConditioningSpec> conds;
    for (const auto& t : all_types()) conds.push_back({Regime::Personality, Instrument::MBTI, t, std::nullopt});
    const auto set = mock_run(plan_for(conds, 10), MockMode::FollowConditioning);
    const auto acc = conditioned_accuracy(set, "mock", 0.7);
    REQUIRE(acc.rows.size() == 16);
    for (const auto& r : acc.rows) {
        CHECK(r.accuracy == 1.0);
        CHECK(r.valid == 10);
    }
    CHECK(format_accuracy(acc.across_conditionings) == "1.000 ± 0.000");

    const auto m = export_matrix(set, "mock", 0.7);
    REQUIRE(m.rows.size() == 16);
    for (std::size_t r = 0; r < 16; ++r) {
        for (std::size_t c = 0; c < 16; ++c) CHECK(m.values[r][c] == (r == c ? 1.0 : 0.0));
    }
}

TEST_CASE("matrix rows are probability vectors") {
    std::vector<ConditioningSpec> conds;
    for (const char* t : {"INTJ", "ESFP", "ISTJ"}) conds.push_back({Regime::Personality, Instrument::MBTI, MbtiType::parse(t), std::nullopt});
    const auto set = mock_run(plan_for(conds, 25), MockMode::FollowConditioning, 0.6);
    const auto m = export_matrix(set, "mock", 0.7);
    CHECK(m.rows == std::vector<std::string>{"ESFP", "ISTJ", "INTJ"});
    for (const auto& row : m.values) {
        CHECK(std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0) < 1e-9);
        for (double v : row) CHECK((v >= 0.0 && v <= 1.0));
    }
    const auto csv = matrix_csv(m);
    CHECK(csv.rfind("conditioning,ESTP,ESFP,", 0) == 0);
}

TEST_CASE("all outcomes one type gives a single nonzero column") {
    ScoredSet set;
    for (const char* t : {"INTJ", "ESFP", "ISTJ"}) {
        for (int i = 0; i < 4; ++i) set.sessions.push_back(mbti_session("ENFJ", t));
    }
    const auto m = export_matrix(set, "m", 0.7);
    CHECK(m.rows == std::vector<std::string>{"ESFP", "ISTJ", "INTJ"});
    for (const auto& row : m.values) {
        for (std::size_t c = 0; c < 16; ++c) CHECK(row[c] == (m.columns[c] == "ENFJ" ? 1.0 : 0.0));
    }
}

TEST_CASE("percentage increase") {
    CHECK(pct_increase(3.0, 3.0) == 0.0);
    CHECK(pct_increase(3.0, 4.5) == doctest::Approx(50.0));
    CHECK(pct_increase(1.5, 5.0) == doctest::Approx(700.0 / 3.0));
    CHECK(format_pct(pct_increase(3.0, 4.5)) == "+50.0");
    CHECK(format_pct(pct_increase(1.5, 5.0)) == "+233.3");
    CHECK(format_pct(-0.01) == "+0.0");
    CHECK(format_pct(-12.34) == "-12.3");
    for (double x : {1.0, 2.2, 4.9}) CHECK(pct_increase(x, x) == 0.0);

    const auto rows = pct_increase(BfiScores{{3, 3, 3, 3, 2}}, BfiScores{{3, 4.5, 3, 3, 5}});
    REQUIRE(rows.size() == 5);
    CHECK(rows[1].delta == doctest::Approx(50.0));
    CHECK(rows[4].delta == doctest::Approx(150.0));
}

TEST_CASE("percentage increase table against an unconditioned baseline") {
    ScoredSet base, cond;
    base.sessions.push_back(bfi_session({3, 3, 3, 2, 3}));
    base.sessions.push_back(bfi_session({3, 3, 3, 1, 3}));
    cond.sessions.push_back(bfi_session({3, 3, 3, 5, 3}, Factor::Neuroticism));
    const auto t = pct_increase_table(cond, base, "m", 0.7);
    REQUIRE(t.size() == 1);
    CHECK(t[0].factor == Factor::Neuroticism);
    CHECK(t[0].baseline == 1.5);
    CHECK(t[0].conditioned == 5.0);
    CHECK(format_pct(t[0].delta) == "+233.3");
    CHECK_THROWS_AS(pct_increase_table(cond, ScoredSet{}, "m", 0.7), NoValidSessions);
}

TEST_CASE("format_accuracy") {
    CHECK(format_accuracy({0.785, 0.391}) == "0.785 ± 0.391");
    CHECK(format_accuracy({1.0, 0.0}) == "1.000 ± 0.000");
}

TEST_CASE("scores JSON round trip") {
    const auto set = mock_run(plan_for({ConditioningSpec{}}, 3), MockMode::Random);
    const auto j = nlohmann::json::parse(to_json(set).dump());
    const auto back = scored_from_json(j);
    CHECK(back.run_id == set.run_id);
    REQUIRE(back.sessions.size() == set.sessions.size());
    for (std::size_t i = 0; i < set.sessions.size(); ++i) {
        CHECK(back.sessions[i].session == set.sessions[i].session);
        CHECK(back.sessions[i].mbti->type == set.sessions[i].mbti->type);
        CHECK(back.sessions[i].mbti->axis_sums == set.sessions[i].mbti->axis_sums);
    }
    CHECK(to_json(back).dump() == to_json(set).dump());
}

TEST_CASE("report files") {
    std::vector<ConditioningSpec> conds{{Regime::Personality, Instrument::MBTI, MbtiType::parse("INTJ"), std::nullopt},
                                        {Regime::Personality, Instrument::BFI, Factor::Openness, std::nullopt}};
    const auto set = mock_run(plan_for(conds, 2), MockMode::FollowConditioning);
    const auto base = mock_run(plan_for({ConditioningSpec{Regime::Unconditioned, Instrument::BFI, {}, {}}}, 2),
                               MockMode::FollowConditioning);
    TempDir dir;
    const auto files = write_report(set, &base, dir.path());
    for (const auto& f : files) CHECK(std::filesystem::exists(dir / f));
    CHECK(std::find(files.begin(), files.end(), "pct_increase.csv") != files.end());
    const auto acc = testing::read_file(dir / "accuracy_summary.csv");
    CHECK(acc.find("1.000 ± 0.000") != std::string::npos);

    TempDir dir2;
    CHECK_THROWS_AS(write_report(set, nullptr, dir2.path(), ReportOptions{false, true}), MissingBaseline);
}
