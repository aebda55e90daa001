#include "persona/report.hpp"

#include "persona/errors.hpp"
#include "persona/runner.hpp"
#include "persona/text.hpp"

#include <fstream>
#include <set>
#include <tuple>

#include <fmt/format.h>

namespace persona {

std::string sanitize_filename(std::string_view s) {
    std::string out;
    for (char c : s) out.push_back(ascii_alnum(c) || c == '.' || c == '-' || c == '_' ? c : '_');
    return out;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
    out << content;
}

using Group = std::tuple<std::string, double, Instrument, Regime>;

std::set<Group> groups_of(const ScoredSet& scored) {
    std::set<Group> out;
    for (const auto& s : scored.sessions) {
        if (s.valid) out.insert({s.model, s.temperature, s.conditioning.instrument, s.conditioning.regime});
    }
    return out;
}

std::string role_field(const std::optional<std::string>& role) { return role ? *role : "-"; }

}  // namespace

std::vector<std::string> write_report(const ScoredSet& scored, const ScoredSet* baseline,
                                      const std::filesystem::path& dir, const ReportOptions& options) {
    if (options.require_pct_increase && !baseline) {
        throw MissingBaseline("percentage-increase tables need --baseline <unconditioned scores>");
    }
    std::filesystem::create_directories(dir);
    std::vector<std::string> written;
    auto emit = [&](const std::string& name, const std::string& content) {
        write_file(dir / name, content);
        written.push_back(name);
    };
    const auto groups = groups_of(scored);

    std::string fig4 = "model\ttemperature\tregime\ttype\tfrequency\tvalid\n";
    std::string fig5 = "model\ttemperature\tregime\ttarget\trole\tfactor\tmean\tvalid\n";
    for (const auto& [model, temp, inst, regime] : groups) {
        SessionFilter f;
        f.model = model;
        f.temperature = temp;
        f.instrument = inst;
        f.regime = regime;
        const auto t = format_temperature(temp);
        if (inst == Instrument::MBTI) {
            const auto tf = type_frequencies(scored, f);
            for (const auto& type : all_types()) {
                const auto it = tf.freq.find(type.code());
                fig4 += fmt::format("{}\t{}\t{}\t{}\t{:.3f}\t{}\n", model, t, to_string(regime), type.code(),
                                    it == tf.freq.end() ? 0.0 : it->second, tf.valid);
            }
            continue;
        }
        std::set<std::tuple<std::size_t, std::string, std::optional<std::string>>> conds;
        for (const auto& s : scored.sessions) {
            if (s.valid && f.matches(s)) {
                const auto& c = s.conditioning;
                if (c.target) {
                    conds.insert({static_cast<std::size_t>(std::get<Factor>(*c.target)), target_name(*c.target), c.role});
                } else {
                    conds.insert({0, "-", std::nullopt});
                }
            }
        }
        for (const auto& [idx, target, role] : conds) {
            SessionFilter g = f;
            if (target != "-") g.target = target;
            g.role = role;
            const auto fm = factor_means(scored, g);
            for (Factor factor : kFactors) {
                fig5 += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{:.3f}\t{}\n", model, t, to_string(regime), target,
                                    role_field(role), to_string(factor), fm.means[factor], fm.valid);
            }
        }
    }
    emit("fig4_type_frequencies.tsv", fig4);
    emit("fig5_factor_means.tsv", fig5);

    std::string acc = "model,temperature,regime,conditioning,target,role,valid,invalid,matches,accuracy,tie_rate\n";
    std::string summary = "model,temperature,regime,conditionings,accuracy,pooled_std,excluded\n";
    std::vector<std::pair<std::string, ConfusionMatrix>> matrices;
    for (const auto& [model, temp, inst, regime] : groups) {
        if (inst != Instrument::MBTI || regime == Regime::Unconditioned) continue;
        const auto t = format_temperature(temp);
        const auto a = conditioned_accuracy(scored, model, temp, regime);
        for (const auto& r : a.rows) {
            acc += fmt::format("{},{},{},{},{},{},{},{},{},{:.3f},{:.3f}\n", model, t, to_string(regime),
                               r.conditioning, r.target, role_field(r.role), r.valid, r.invalid, r.matches,
                               r.accuracy, r.tie_rate);
        }
        summary += fmt::format("{},{},{},{},{},{:.3f},{}\n", model, t, to_string(regime), a.rows.size(),
                               format_accuracy(a.across_conditionings), a.pooled_std, join(a.excluded, ";"));
        matrices.emplace_back(fmt::format("matrix_{}_{}_{}.csv", sanitize_filename(model), sanitize_filename(t),
                                          to_string(regime)),
                              export_matrix(scored, model, temp, regime));
    }
    if (options.require_matrix && matrices.empty()) {
        throw NoValidSessions("no valid conditioned MBTI sessions to build a matrix from");
    }
    emit("accuracy.csv", acc);
    emit("accuracy_summary.csv", summary);
    for (const auto& [name, m] : matrices) emit(name, matrix_csv(m));

    if (baseline) {
        std::string pct = "model,temperature,factor,role,baseline,conditioned,pct_increase\n";
        std::size_t rows = 0;
        std::set<std::pair<std::string, double>> pairs;
        for (const auto& [model, temp, inst, regime] : groups) {
            if (inst == Instrument::BFI && regime != Regime::Unconditioned) pairs.insert({model, temp});
        }
        for (const auto& [model, temp] : pairs) {
            for (const auto& p : pct_increase_table(scored, *baseline, model, temp)) {
                pct += fmt::format("{},{},{},{},{:.3f},{:.3f},{}\n", model, format_temperature(temp),
                                   to_string(p.factor), role_field(p.role), p.baseline, p.conditioned,
                                   format_pct(p.delta));
                ++rows;
            }
        }
        if (options.require_pct_increase && rows == 0) {
            throw NoValidSessions("no conditioned BFI sessions to compare against the baseline");
        }
        emit("pct_increase.csv", pct);
    }

    const auto dq = to_json(scored)["data_quality"];
    emit("data_quality.json", dq.dump(2) + "\n");
    return written;
}

}  // namespace persona
