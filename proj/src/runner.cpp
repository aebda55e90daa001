#include "persona/runner.hpp"

#include "persona/errors.hpp"
#include "persona/hashing.hpp"

#include <atomic>
#include <set>
#include <thread>

#include <fmt/format.h>

namespace persona {

using nlohmann::json;
using nlohmann::ordered_json;

std::uint64_t session_count(std::uint64_t models, std::uint64_t temperatures, std::uint64_t conditionings,
                            std::uint64_t repetitions) noexcept {
    return models * temperatures * conditionings * repetitions;
}

std::uint64_t RunPlan::session_count() const noexcept {
    return persona::session_count(models.size(), temperatures.size(), conditionings.size(),
                                  static_cast<std::uint64_t>(std::max(repetitions, 0)));
}

void RunPlan::validate(const PersonaCatalog& personas) const {
    if (models.empty()) throw InvalidSpec("plan needs at least one model");
    if (temperatures.empty()) throw InvalidSpec("plan needs at least one temperature");
    if (conditionings.empty()) throw InvalidSpec("plan needs at least one conditioning");
    if (repetitions < 1) throw InvalidSpec(fmt::format("repetitions must be >= 1 (got {})", repetitions));
    for (const auto& m : models) {
        if (m.empty()) throw InvalidSpec("model id must not be empty");
    }
    for (double t : temperatures) {
        if (!(t >= 0.0)) throw InvalidSpec(fmt::format("temperature must be >= 0 (got {})", t));
    }
    std::set<std::string> seen;
    for (const auto& c : conditionings) {
        c.validate(personas);
        if (!seen.insert(c.canonical()).second) {
            throw InvalidSpec(fmt::format("conditioning {} listed twice", c.canonical()));
        }
    }
}

ordered_json RunPlan::to_json() const {
    std::vector<std::string> conds;
    for (const auto& c : conditionings) conds.push_back(c.canonical());
    return ordered_json{{"models", models},
                        {"temperatures", temperatures},
                        {"conditionings", conds},
                        {"repetitions", repetitions},
                        {"run_seed", run_seed}};
}

RunPlan RunPlan::from_json(const json& j) {
    RunPlan p;
    p.models = j.at("models").get<std::vector<std::string>>();
    p.temperatures = j.at("temperatures").get<std::vector<double>>();
    for (const auto& c : j.at("conditionings")) p.conditionings.push_back(ConditioningSpec::from_canonical(c.get<std::string>()));
    p.repetitions = j.at("repetitions").get<int>();
    p.run_seed = j.at("run_seed").get<std::uint64_t>();
    return p;
}

std::string RunPlan::run_id() const { return "run-" + hex64(fnv1a64(to_json().dump())); }

std::string format_temperature(double t) { return fmt::format("{}", t); }

std::string SessionKey::id() const {
    return fmt::format("{}|{}|{}|{}", model, format_temperature(temperature), conditioning.canonical(), repetition);
}

std::uint64_t SessionKey::seed(std::uint64_t run_seed) const { return mix(run_seed, fnv1a64(id())); }

std::vector<SessionKey> expand(const RunPlan& plan) {
    std::vector<SessionKey> keys;
    keys.reserve(plan.session_count());
    for (const auto& m : plan.models) {
        for (double t : plan.temperatures) {
            for (const auto& c : plan.conditionings) {
                for (int r = 0; r < plan.repetitions; ++r) keys.push_back({m, t, c, r});
            }
        }
    }
    return keys;
}

std::vector<int> shuffle_questions(const QuestionBank& bank, std::uint64_t session_seed) {
    std::vector<int> ids;
    ids.reserve(bank.size());
    for (const auto& q : bank.questions) ids.push_back(q.id);
    SplitMixRng rng(mix(session_seed, fnv1a64("question-order")));
    fisher_yates(ids, rng);
    return ids;
}

std::uint64_t request_seed(std::uint64_t session_seed, int question_id, int attempt) noexcept {
    return mix(session_seed, mix(static_cast<std::uint64_t>(question_id), static_cast<std::uint64_t>(attempt)));
}

Runner::Runner(const BankSet& banks, const PromptRenderer& renderer, ChatClient& client, RunOptions options)
    : banks_(&banks), renderer_(&renderer), client_(&client), options_(std::move(options)) {}

namespace {

struct Work {
    SessionKey key;
    std::set<int> done;
};

}  // namespace

RunSummary Runner::execute(const RunPlan& plan, const std::filesystem::path& ledger_path, bool resume) {
    plan.validate(renderer_->personas());
    options_.sampling.validate();
    for (const auto& [t, p] : options_.per_temperature) p.validate();

    RunSummary summary;
    summary.run_id = plan.run_id();
    const auto keys = expand(plan);
    summary.sessions_planned = keys.size();

    std::map<std::string, std::set<int>> answered;
    std::optional<LedgerWriter> writer;
    if (resume && std::filesystem::exists(ledger_path)) {
        auto existing = read_ledger(ledger_path);
        if (existing.header.run_id != summary.run_id) {
            throw LedgerError(fmt::format("ledger '{}' belongs to {}, not to this plan ({})", ledger_path.string(),
                                          existing.header.run_id, summary.run_id));
        }
        for (const auto& r : existing.records) answered[r.session].insert(r.question_id);
        writer.emplace(LedgerWriter::append(ledger_path, existing.valid_bytes));
    } else {
        LedgerHeader header;
        header.run_id = summary.run_id;
        header.created = utc_timestamp();
        header.backend = options_.backend;
        header.plan = plan.to_json();
        for (const auto& c : plan.conditionings) {
            const auto inst = std::string(to_string(c.instrument));
            if (header.interviewer.contains(inst)) continue;
            ConditioningSpec plain;
            plain.instrument = c.instrument;
            header.interviewer[inst] = renderer_->render_system_message(plain).interviewer;
            if (c.instrument == Instrument::MBTI) header.key_note = banks_->mbti.note;
        }
        writer.emplace(LedgerWriter::create(ledger_path, header));
    }

    std::vector<Work> work;
    for (const auto& k : keys) {
        const auto id = k.id();
        const auto& done = answered[id];
        if (done.size() >= banks_->get(k.conditioning.instrument).size()) {
            ++summary.sessions_skipped;
            continue;
        }
        work.push_back({k, done});
    }

    OrderedLedgerSink sink(*writer, work.size());
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> finished{0};
    std::atomic<std::size_t> invalid{0};
    std::atomic<bool> abort{false};
    std::mutex abort_mu;
    std::string abort_reason;

    auto fail = [&](const std::string& why) {
        std::lock_guard lock(abort_mu);
        if (!abort.exchange(true)) abort_reason = why;
    };

    auto run_session = [&](std::size_t idx) {
        const auto& [key, done] = work[idx];
        const auto& spec = key.conditioning;
        const auto& bank = banks_->get(spec.instrument);
        const auto session_seed = key.seed(plan.run_seed);
        const auto system = renderer_->render_system_message(spec).interviewee;
        const auto system_hash = hex64(fnv1a64(system));
        const auto order = shuffle_questions(bank, session_seed);
        const auto per_t = options_.per_temperature.find(key.temperature);
        const auto& sampling = per_t == options_.per_temperature.end() ? options_.sampling : per_t->second;

        bool session_invalid = false;
        for (std::size_t pos = 0; pos < order.size(); ++pos) {
            if (abort.load()) break;
            const int qid = order[pos];
            if (done.contains(qid)) continue;
            const auto user = renderer_->render_question_prompt(spec.instrument, bank.question(qid));

            LedgerRecord rec;
            rec.run_id = summary.run_id;
            rec.session = key.id();
            rec.session_seed = session_seed;
            rec.model = key.model;
            rec.instrument = spec.instrument;
            rec.regime = spec.regime;
            if (spec.target) rec.target = target_name(*spec.target);
            rec.role = spec.role;
            rec.temperature = key.temperature;
            rec.repetition = key.repetition;
            rec.question_id = qid;
            rec.position = static_cast<int>(pos) + 1;
            rec.system_hash = system_hash;

            int attempt = 0;
            auto ask = [&](const std::string& extra) {
                ChatRequest req{key.model, system, extra.empty() ? user : user + "\n\n" + extra, sampling};
                req.params.temperature = key.temperature;
                req.params.request_seed =
                    options_.send_seed ? std::optional(request_seed(session_seed, qid, attempt)) : std::nullopt;
                ++attempt;
                return client_->chat(req);
            };

            try {
                auto parsed = answer_with_retries(ask, bank.scale, options_.max_retries);
                rec.raw_response = parsed.raw_text;
                rec.attempts = std::move(parsed.attempts);
                rec.label = parsed.label;
                rec.value = bank.scale.values[parsed.option_index];
                rec.match_method = parsed.match_method;
            } catch (const UnparseableAnswer& e) {
                rec.attempts = e.attempts();
                rec.raw_response = rec.attempts.empty() ? std::string() : rec.attempts.back();
                rec.error = fmt::format("UnparseableAnswer: {}", e.what());
                if (!session_invalid) ++invalid;
                session_invalid = true;
            } catch (const std::exception& e) {
                fail(fmt::format("session {} question {}: {}", key.id(), qid, e.what()));
                break;
            }
            rec.timestamp = utc_timestamp();
            sink.submit(idx, std::move(rec));
        }
        sink.finish(idx);
        const auto n = ++finished;
        if (options_.on_session_done) options_.on_session_done(n, work.size());
    };

    auto worker = [&] {
        for (;;) {
            if (abort.load()) return;
            const auto idx = next.fetch_add(1);
            if (idx >= work.size()) return;
            try {
                run_session(idx);
            } catch (const std::exception& e) {
                fail(e.what());
                sink.finish(idx);
            }
        }
    };

    const auto threads = static_cast<std::size_t>(std::max(1, options_.workers));
    if (threads == 1 || work.size() <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t i = 0; i < std::min(threads, work.size()); ++i) pool.emplace_back(worker);
    }

    if (abort.load()) sink.drain();
    writer->flush();
    summary.sessions_run = finished.load();
    summary.invalid_sessions = invalid.load();
    summary.records_written = writer->written();
    summary.aborted = abort.load();
    summary.abort_reason = abort_reason;
    return summary;
}

}  // namespace persona
