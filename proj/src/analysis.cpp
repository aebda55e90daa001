#include "persona/analysis.hpp"

#include "persona/errors.hpp"
#include "persona/runner.hpp"
#include "persona/text.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include <fmt/format.h>

namespace persona {

using nlohmann::json;
using nlohmann::ordered_json;

std::size_t ScoredSet::valid_count() const noexcept {
    return static_cast<std::size_t>(std::count_if(sessions.begin(), sessions.end(),
                                                  [](const ScoredSession& s) { return s.valid; }));
}

namespace {

auto sort_key(const ScoredSession& s) {
    return std::make_tuple(s.model, s.temperature, s.conditioning.canonical(), s.repetition);
}

std::size_t type_index(std::string_view code) {
    const auto& types = all_types();
    for (std::size_t i = 0; i < types.size(); ++i) {
        if (types[i].code() == code) return i;
    }
    return types.size();
}

std::optional<std::string> target_of(const ScoredSession& s) {
    if (!s.conditioning.target) return std::nullopt;
    return target_name(*s.conditioning.target);
}

}  // namespace

ScoredSet score_ledger(const Ledger& ledger, const BankSet& banks) {
    std::map<std::string, std::vector<const LedgerRecord*>> by_session;
    for (const auto& r : ledger.records) by_session[r.session].push_back(&r);

    ScoredSet out;
    out.run_id = ledger.header.run_id;
    for (const auto& [id, recs] : by_session) {
        const auto& first = *recs.front();
        ScoredSession s;
        s.session = id;
        s.model = first.model;
        s.temperature = first.temperature;
        s.conditioning = first.conditioning();
        s.repetition = first.repetition;

        const auto& bank = banks.get(first.instrument);
        std::map<int, std::string> labels;
        for (const auto* r : recs) {
            if (r->error && s.invalid_reason.empty()) {
                s.invalid_reason = fmt::format("question {}: {}", r->question_id, *r->error);
            }
            if (r->label) labels[r->question_id] = *r->label;
        }
        s.answered = labels.size();
        if (s.invalid_reason.empty() && labels.size() < bank.size()) {
            s.invalid_reason = fmt::format("incomplete ({}/{} answered)", labels.size(), bank.size());
        }
        if (s.invalid_reason.empty()) {
            if (first.instrument == Instrument::MBTI) {
                s.mbti = score_mbti(labels, bank.mbti_key(), bank.scale);
            } else {
                std::map<int, int> values;
                for (const auto& [qid, label] : labels) values[qid] = option_value(bank.scale, label);
                s.bfi = score_bfi(values, bank.bfi_key());
            }
            s.valid = true;
        }
        out.sessions.push_back(std::move(s));
    }
    std::sort(out.sessions.begin(), out.sessions.end(),
              [](const ScoredSession& a, const ScoredSession& b) { return sort_key(a) < sort_key(b); });
    return out;
}

ordered_json to_json(const ScoredSet& set) {
    ordered_json sessions = ordered_json::array();
    ordered_json invalid = ordered_json::array();
    for (const auto& s : set.sessions) {
        ordered_json j{{"session", s.session},
                       {"model", s.model},
                       {"temperature", s.temperature},
                       {"conditioning", s.conditioning.canonical()},
                       {"repetition", s.repetition},
                       {"answered", s.answered}};
        if (!s.valid) {
            j["reason"] = s.invalid_reason;
            invalid.push_back(std::move(j));
            continue;
        }
        if (s.mbti) {
            ordered_json sums;
            for (Axis a : kAxes) sums[std::string(to_string(a))] = s.mbti->sum(a);
            std::vector<std::string> ties;
            for (Axis a : s.mbti->tie_flags) ties.emplace_back(to_string(a));
            j["mbti"] = {{"type", s.mbti->type.code()}, {"axis_sums", sums}, {"ties", ties}};
        }
        if (s.bfi) {
            ordered_json means;
            for (Factor f : kFactors) means[std::string(to_string(f))] = (*s.bfi)[f];
            j["bfi"] = means;
        }
        sessions.push_back(std::move(j));
    }
    return ordered_json{{"schema", "persona-scores/1"},
                        {"run_id", set.run_id},
                        {"sessions", sessions},
                        {"data_quality",
                         {{"sessions", set.sessions.size()},
                          {"valid", set.valid_count()},
                          {"invalid", set.sessions.size() - set.valid_count()},
                          {"invalid_sessions", invalid}}}};
}

namespace {

ScoredSession session_from_json(const json& js) {
    ScoredSession s;
    s.session = js.at("session").get<std::string>();
    s.model = js.at("model").get<std::string>();
    s.temperature = js.at("temperature").get<double>();
    s.conditioning = ConditioningSpec::from_canonical(js.at("conditioning").get<std::string>());
    s.repetition = js.at("repetition").get<int>();
    s.answered = js.value("answered", std::size_t{0});
    return s;
}

}  // namespace

ScoredSet scored_from_json(const json& j) {
    if (j.value("schema", "") != "persona-scores/1") throw LedgerError("not a scores file (schema persona-scores/1)");
    ScoredSet set;
    set.run_id = j.value("run_id", "");
    for (const auto& js : j.at("sessions")) {
        auto s = session_from_json(js);
        s.valid = true;
        if (js.contains("mbti")) {
            const auto& m = js.at("mbti");
            std::array<int, 4> sums{};
            for (Axis a : kAxes) sums[static_cast<std::size_t>(a)] = m.at("axis_sums").at(std::string(to_string(a)));
            std::set<Axis> ties;
            for (const auto& t : m.at("ties")) ties.insert(parse_axis(t.get<std::string>()));
            s.mbti = MbtiOutcome{MbtiType::parse(m.at("type").get<std::string>()), sums, ties};
        }
        if (js.contains("bfi")) {
            BfiScores b;
            for (Factor f : kFactors) b.means[static_cast<std::size_t>(f)] = js.at("bfi").at(std::string(to_string(f)));
            s.bfi = b;
        }
        set.sessions.push_back(std::move(s));
    }
    if (j.contains("data_quality")) {
        for (const auto& js : j.at("data_quality").value("invalid_sessions", json::array())) {
            auto s = session_from_json(js);
            s.invalid_reason = js.value("reason", "");
            set.sessions.push_back(std::move(s));
        }
    }
    std::sort(set.sessions.begin(), set.sessions.end(),
              [](const ScoredSession& a, const ScoredSession& b) { return sort_key(a) < sort_key(b); });
    return set;
}

bool SessionFilter::matches(const ScoredSession& s) const {
    if (model && s.model != *model) return false;
    if (temperature && s.temperature != *temperature) return false;
    if (instrument && s.conditioning.instrument != *instrument) return false;
    if (regime && s.conditioning.regime != *regime) return false;
    if (target && target_of(s) != *target) return false;
    if (role && s.conditioning.role != *role) return false;
    return true;
}

namespace {

std::vector<const ScoredSession*> select(const ScoredSet& scored, const SessionFilter& filter, Instrument inst) {
    std::vector<const ScoredSession*> out;
    for (const auto& s : scored.sessions) {
        if (s.valid && s.conditioning.instrument == inst && filter.matches(s)) out.push_back(&s);
    }
    if (out.empty()) throw NoValidSessions(fmt::format("no valid {} sessions match the filter", to_string(inst)));
    return out;
}

}  // namespace

TypeFrequencies type_frequencies(const ScoredSet& scored, const SessionFilter& filter) {
    const auto sel = select(scored, filter, Instrument::MBTI);
    TypeFrequencies out;
    out.valid = sel.size();
    std::map<std::string, std::size_t> counts;
    for (const auto* s : sel) {
        ++counts[s->mbti->type.code()];
        if (!s->mbti->tie_flags.empty()) ++out.with_ties;
    }
    for (const auto& [code, n] : counts) out.freq[code] = static_cast<double>(n) / static_cast<double>(sel.size());
    return out;
}

std::map<char, double> letter_frequencies(const ScoredSet& scored, const SessionFilter& filter) {
    const auto sel = select(scored, filter, Instrument::MBTI);
    std::map<char, double> out;
    for (Axis a : kAxes) {
        out[first_pole(a)] = 0.0;
        out[second_pole(a)] = 0.0;
    }
    for (const auto* s : sel) {
        for (Axis a : kAxes) out[s->mbti->type.letter(a)] += 1.0;
    }
    for (auto& [letter, v] : out) v /= static_cast<double>(sel.size());
    return out;
}

FactorMeans factor_means(const ScoredSet& scored, const SessionFilter& filter) {
    const auto sel = select(scored, filter, Instrument::BFI);
    FactorMeans out;
    out.valid = sel.size();
    for (const auto* s : sel) {
        for (std::size_t f = 0; f < 5; ++f) out.means.means[f] += s->bfi->means[f];
    }
    for (auto& m : out.means.means) m /= static_cast<double>(sel.size());
    return out;
}

AccuracySummary conditioned_accuracy(const ScoredSet& scored, const std::string& model, double temperature,
                                     std::optional<Regime> regime) {
    struct Cell {
        AccuracyRow row;
        std::size_t ties{0};
    };
    std::map<std::tuple<std::size_t, std::string, std::string>, Cell> cells;
    for (const auto& s : scored.sessions) {
        const auto& c = s.conditioning;
        if (c.instrument != Instrument::MBTI || s.model != model || s.temperature != temperature) continue;
        if (c.regime == Regime::Unconditioned || (regime && c.regime != *regime)) continue;
        const auto target = target_name(*c.target);
        auto& cell = cells[{type_index(target), c.role.value_or(""), c.canonical()}];
        cell.row.conditioning = c.canonical();
        cell.row.target = target;
        cell.row.role = c.role;
        if (!s.valid) {
            ++cell.row.invalid;
            continue;
        }
        ++cell.row.valid;
        if (s.mbti->type.code() == target) ++cell.row.matches;
        if (!s.mbti->tie_flags.empty()) ++cell.ties;
    }
    if (cells.empty()) {
        throw NoValidSessions(fmt::format("no conditioned MBTI sessions for {} at temperature {}", model,
                                          format_temperature(temperature)));
    }

    AccuracySummary out;
    out.model = model;
    out.temperature = temperature;
    std::vector<double> accs, outcomes;
    for (auto& [key, cell] : cells) {
        auto& row = cell.row;
        if (row.valid == 0) {
            out.excluded.push_back(row.conditioning);
            continue;
        }
        row.accuracy = static_cast<double>(row.matches) / static_cast<double>(row.valid);
        row.tie_rate = static_cast<double>(cell.ties) / static_cast<double>(row.valid);
        accs.push_back(row.accuracy);
        outcomes.insert(outcomes.end(), row.matches, 1.0);
        outcomes.insert(outcomes.end(), row.valid - row.matches, 0.0);
        out.rows.push_back(row);
    }
    if (out.rows.empty()) {
        throw NoValidSessions(fmt::format("every conditioning for {} at temperature {} is invalid", model,
                                          format_temperature(temperature)));
    }
    out.across_conditionings = mean_std(accs);
    out.pooled_std = mean_std(outcomes).std;
    return out;
}

double pct_increase(double baseline, double conditioned) noexcept {
    return 100.0 * (conditioned - baseline) / baseline;
}

std::vector<PctIncrease> pct_increase(const BfiScores& baseline, const BfiScores& conditioned) {
    std::vector<PctIncrease> out;
    for (Factor f : kFactors) {
        out.push_back({f, std::nullopt, baseline[f], conditioned[f], pct_increase(baseline[f], conditioned[f])});
    }
    return out;
}

std::vector<PctIncrease> pct_increase_table(const ScoredSet& conditioned, const ScoredSet& baseline,
                                            const std::string& model, double temperature) {
    SessionFilter base_filter;
    base_filter.model = model;
    base_filter.temperature = temperature;
    base_filter.regime = Regime::Unconditioned;
    const auto base = factor_means(baseline, base_filter);

    std::map<std::pair<std::size_t, std::string>, std::pair<Factor, std::optional<std::string>>> groups;
    for (const auto& s : conditioned.sessions) {
        const auto& c = s.conditioning;
        if (!s.valid || c.instrument != Instrument::BFI || c.regime == Regime::Unconditioned) continue;
        if (s.model != model || s.temperature != temperature) continue;
        const auto f = std::get<Factor>(*c.target);
        groups[{static_cast<std::size_t>(f), c.role.value_or("")}] = {f, c.role};
    }
    if (groups.empty()) {
        throw NoValidSessions(fmt::format("no conditioned BFI sessions for {} at temperature {}", model,
                                          format_temperature(temperature)));
    }
    std::vector<PctIncrease> out;
    for (const auto& [key, g] : groups) {
        SessionFilter filter;
        filter.model = model;
        filter.temperature = temperature;
        filter.target = std::string(to_string(g.first));
        if (g.second) {
            filter.regime = Regime::RolePersonality;
            filter.role = g.second;
        } else {
            filter.regime = Regime::Personality;
        }
        const auto cond = factor_means(conditioned, filter);
        const double b = base.means[g.first];
        const double c = cond.means[g.first];
        out.push_back({g.first, g.second, b, c, pct_increase(b, c)});
    }
    return out;
}

ConfusionMatrix export_matrix(const ScoredSet& scored, const std::string& model, double temperature,
                              std::optional<Regime> regime) {
    std::array<std::array<std::size_t, 16>, 16> counts{};
    std::array<std::size_t, 16> totals{};
    for (const auto& s : scored.sessions) {
        const auto& c = s.conditioning;
        if (!s.valid || c.instrument != Instrument::MBTI || c.regime == Regime::Unconditioned) continue;
        if (s.model != model || s.temperature != temperature || (regime && c.regime != *regime)) continue;
        const auto row = type_index(target_name(*c.target));
        ++counts[row][type_index(s.mbti->type.code())];
        ++totals[row];
    }
    ConfusionMatrix m;
    for (const auto& t : all_types()) m.columns.push_back(t.code());
    for (std::size_t r = 0; r < 16; ++r) {
        if (totals[r] == 0) continue;
        m.rows.push_back(m.columns[r]);
        std::array<double, 16> row{};
        for (std::size_t c = 0; c < 16; ++c) {
            row[c] = static_cast<double>(counts[r][c]) / static_cast<double>(totals[r]);
        }
        m.values.push_back(row);
        m.row_valid.push_back(totals[r]);
    }
    if (m.rows.empty()) {
        throw NoValidSessions(fmt::format("no valid conditioned MBTI sessions for {} at temperature {}", model,
                                          format_temperature(temperature)));
    }
    return m;
}

std::string matrix_csv(const ConfusionMatrix& m) {
    std::string out = "conditioning," + join(m.columns, ",") + ",valid\n";
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
        out += m.rows[r];
        for (double v : m.values[r]) out += fmt::format(",{:.6f}", v);
        out += fmt::format(",{}\n", m.row_valid[r]);
    }
    return out;
}

std::string format_accuracy(const MeanStd& ms) { return fmt::format("{:.3f} ± {:.3f}", ms.mean, ms.std); }

std::string format_pct(double delta) {
    double r = std::round(delta * 10.0) / 10.0;
    if (r == 0.0) r = 0.0;
    return fmt::format("{:+.1f}", r);
}

}  // namespace persona
