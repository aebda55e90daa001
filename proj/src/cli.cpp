#include "persona/cli.hpp"

#include "persona/analysis.hpp"
#include "persona/awareness.hpp"
#include "persona/config.hpp"
#include "persona/errors.hpp"
#include "persona/mock_persona.hpp"
#include "persona/report.hpp"
#include "persona/runner.hpp"
#include "persona/text.hpp"

#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <fmt/format.h>

#ifndef PERSONA_DEFAULT_DATA_DIR
#define PERSONA_DEFAULT_DATA_DIR "data"
#endif

namespace persona {

namespace fs = std::filesystem;

namespace {

struct Globals {
    std::string config_path;
    std::string data_dir;
    std::string templates_dir;
    std::string out_dir;
};

struct RunFlags {
    std::string instrument;
    std::string mode{"unconditioned"};
    std::vector<std::string> targets;
    std::vector<std::string> roles;
    std::vector<std::string> models;
    std::vector<double> temps;
    int reps{1};
    std::string backend{"live"};
    std::string mock_target;
    double mock_epsilon{0.0};
    std::uint64_t mock_seed{0};
    std::optional<std::uint64_t> seed;
    std::string ledger{"ledger.jsonl"};
    std::string resume;
    bool force{false};
    bool dry_run{false};
    int workers{0};
    int max_retries{-1};
    std::string base_url;
};

struct ScoreFlags {
    std::string ledger{"ledger.jsonl"};
    std::string output{"scores.json"};
};

struct ReportFlags {
    std::string scores{"scores.json"};
    std::string baseline;
    std::string dir{"report"};
    bool matrix{false};
    bool pct{false};
};

struct AwarenessFlags {
    std::string instrument;
    std::vector<std::string> models;
    std::string backend{"live"};
    std::string embedder;
    std::string vectors;
    std::string embed_model;
    std::string base_url;
    std::string output;
};

// Loaded data shared by the subcommands.
struct Context {
    Config config;
    fs::path out_dir;
    BankSet banks;
    PersonaCatalog personas;
    std::unique_ptr<PromptRenderer> renderer;

    fs::path resolve(const std::string& p) const {
        const fs::path path(p);
        return path.is_absolute() ? path : out_dir / path;
    }
};

std::unique_ptr<Context> load_context(const Globals& g) {
    auto ctx = std::make_unique<Context>();
    if (!g.config_path.empty()) ctx->config = load_config(g.config_path);
    ctx->out_dir = !g.out_dir.empty() ? g.out_dir : ctx->config.output_dir;
    const fs::path data = !g.data_dir.empty()             ? fs::path(g.data_dir)
                          : !ctx->config.data_dir.empty() ? fs::path(ctx->config.data_dir)
                                                          : fs::path(PERSONA_DEFAULT_DATA_DIR);
    if (!fs::is_directory(data)) throw ConfigError(fmt::format("data directory '{}' does not exist", data.string()));
    std::optional<fs::path> overrides;
    if (!g.templates_dir.empty()) {
        overrides = g.templates_dir;
    } else if (!ctx->config.templates_dir.empty()) {
        overrides = ctx->config.templates_dir;
    }
    ctx->banks = load_banks(data);
    ctx->personas = PersonaCatalog::load(data / "personas.json");
    ctx->renderer = std::make_unique<PromptRenderer>(PromptTemplates::load(data / "templates", overrides),
                                                     ctx->personas, &ctx->banks);
    return ctx;
}

std::vector<std::string> expand_list(const std::vector<std::string>& items) {
    std::vector<std::string> out;
    for (const auto& item : items) {
        for (const auto& part : split(item, ',')) {
            const auto t = std::string(trim(part));
            if (!t.empty()) out.push_back(t);
        }
    }
    return out;
}

bool is_all(const std::vector<std::string>& v) { return v.size() == 1 && casefold(v[0]) == "all"; }

std::vector<ConditioningSpec> build_conditionings(const RunFlags& f, Instrument inst, const PersonaCatalog& personas) {
    const auto regime = parse_regime(f.mode);
    const auto targets = expand_list(f.targets);
    const auto roles = expand_list(f.roles);
    std::vector<ConditioningSpec> out;
    if (regime == Regime::Unconditioned) {
        if (!targets.empty()) throw InvalidSpec("--targets only applies to --mode personality or role");
        if (!roles.empty()) throw InvalidSpec("--roles only applies to --mode role");
        out.push_back({regime, inst, std::nullopt, std::nullopt});
        return out;
    }
    if (regime == Regime::Personality && !roles.empty()) throw InvalidSpec("--roles only applies to --mode role");
    std::vector<Target> chosen;
    if (targets.empty() || is_all(targets)) {
        chosen = all_targets(inst);
    } else {
        for (const auto& t : targets) chosen.push_back(parse_target(inst, t));
    }
    for (const auto& t : chosen) {
        if (regime == Regime::Personality) {
            out.push_back({regime, inst, t, std::nullopt});
            continue;
        }
        for (const auto& role : personas.roles_for(t)) {
            if (!roles.empty() && !is_all(roles) && std::find(roles.begin(), roles.end(), role) == roles.end()) {
                continue;
            }
            out.push_back({regime, inst, t, role});
        }
    }
    if (out.empty()) throw InvalidSpec("no conditioning matches the requested targets and roles");
    return out;
}

MockPersona build_mock(const RunFlags& f, Instrument inst, Regime regime) {
    MockPersona m;
    m.epsilon = f.mock_epsilon;
    m.rng_seed = f.mock_seed;
    const auto t = casefold(f.mock_target);
    if (t.empty()) {
        m.mode = regime == Regime::Unconditioned ? MockMode::Random : MockMode::FollowConditioning;
    } else if (t == "none" || t == "random") {
        m.mode = MockMode::Random;
    } else if (t == "follow") {
        m.mode = MockMode::FollowConditioning;
    } else {
        m.mode = MockMode::Fixed;
        m.target = parse_target(inst, f.mock_target);
    }
    return m;
}

std::string describe_mock(const MockPersona& m) {
    const char* mode = m.mode == MockMode::Fixed ? "fixed" : m.mode == MockMode::Random ? "random" : "follow";
    return fmt::format("mock:{}{}:epsilon={}:seed={}", mode, m.target ? ":" + target_name(*m.target) : "",
                       m.epsilon, m.rng_seed);
}

void print_outcomes(const ScoredSet& scored, std::ostream& out) {
    std::size_t shown = 0;
    for (const auto& s : scored.sessions) {
        if (shown == 40) {
            out << fmt::format("  ... ({} sessions in total)\n", scored.sessions.size());
            return;
        }
        ++shown;
        const auto head = fmt::format("  {} {} {} #{}:", s.model, format_temperature(s.temperature),
                                      s.conditioning.canonical(), s.repetition);
        if (!s.valid) {
            out << head << " invalid (" << s.invalid_reason << ")\n";
        } else if (s.mbti) {
            std::string ties;
            for (Axis a : s.mbti->tie_flags) ties += fmt::format(" tie:{}", to_string(a));
            out << head << " " << s.mbti->type.code() << ties << "\n";
        } else {
            std::string line;
            for (Factor f : kFactors) line += fmt::format(" {}={:.3f}", factor_letter(f), (*s.bfi)[f]);
            out << head << line << "\n";
        }
    }
}

int cmd_run(const Globals& g, RunFlags f, std::ostream& out, std::ostream& err) {
    auto ctx = load_context(g);
    auto& cfg = ctx->config;
    const auto inst = parse_instrument(f.instrument);
    const auto regime = parse_regime(f.mode);
    if (f.backend != "live" && f.backend != "mock") throw ConfigError("--backend must be live or mock");
    if (f.reps < 1) throw InvalidSpec("--reps must be >= 1");

    RunPlan plan;
    plan.models = !f.models.empty() ? expand_list(f.models) : cfg.models;
    if (plan.models.empty() && f.backend == "mock") plan.models = {"mock"};
    if (plan.models.empty()) throw ConfigError("no models: pass --models or list them in the config file");
    plan.temperatures = !f.temps.empty() ? f.temps : cfg.temperatures;
    for (double t : plan.temperatures) {
        if (!(t > 0.0)) throw ConfigError(fmt::format("temperatures must be positive (got {})", t));
    }
    plan.conditionings = build_conditionings(f, inst, ctx->personas);
    plan.repetitions = f.reps;
    plan.run_seed = f.seed.value_or(cfg.run_seed);
    plan.validate(ctx->personas);

    bool resume = false;
    fs::path ledger = ctx->resolve(f.ledger);
    if (!f.resume.empty()) {
        ledger = ctx->resolve(f.resume);
        resume = true;
        if (!fs::exists(ledger)) throw ConfigError(fmt::format("--resume: no ledger at '{}'", ledger.string()));
    }

    out << fmt::format("plan {}: {} sessions ({} models x {} temperatures x {} conditionings x {} repetitions)\n",
                       plan.run_id(), plan.session_count(), plan.models.size(), plan.temperatures.size(),
                       plan.conditionings.size(), plan.repetitions);
    if (f.dry_run) return kExitOk;

    if (!resume && fs::exists(ledger) && !f.force) {
        throw ConfigError(fmt::format("ledger '{}' already exists; pass --resume {} to continue it or --force to "
                                      "overwrite",
                                      ledger.string(), f.ledger));
    }

    std::unique_ptr<ChatClient> client;
    RunOptions opts;
    if (f.backend == "mock") {
        const auto mock = build_mock(f, inst, regime);
        opts.backend = describe_mock(mock);
        client = std::make_unique<MockChatClient>(mock, ctx->banks, ctx->personas);
    } else {
        if (!f.base_url.empty()) cfg.base_url = f.base_url;
        if (cfg.base_url.empty()) {
            throw ConfigError("live backend needs an endpoint: set endpoint.base_url in the config or pass --base-url");
        }
        opts.backend = "live:" + cfg.base_url;
        client = std::make_unique<HttpChatClient>(cfg.endpoint());
    }
    opts.workers = f.workers > 0 ? f.workers : cfg.workers;
    opts.max_retries = f.max_retries >= 0 ? f.max_retries : cfg.max_retries;
    opts.sampling = cfg.sampling;
    opts.per_temperature = cfg.per_temperature;

    Runner runner(ctx->banks, *ctx->renderer, *client, opts);
    const auto summary = runner.execute(plan, ledger, resume);
    out << fmt::format("ledger {}: {} records written, {} sessions run, {} already complete, {} invalid\n",
                       ledger.string(), summary.records_written, summary.sessions_run, summary.sessions_skipped,
                       summary.invalid_sessions);
    if (summary.aborted) {
        err << fmt::format("run interrupted: {}\nresume with the same flags plus --resume {}\n", summary.abort_reason,
                           ledger.string());
        return kExitPartial;
    }
    const auto scored = score_ledger(read_ledger(ledger), ctx->banks);
    out << "outcomes:\n";
    print_outcomes(scored, out);
    return kExitOk;
}

int cmd_score(const Globals& g, const ScoreFlags& f, std::ostream& out) {
    auto ctx = load_context(g);
    const auto ledger = read_ledger(ctx->resolve(f.ledger));
    if (ledger.records.empty()) throw NoValidSessions("ledger contains no records");
    const auto scored = score_ledger(ledger, ctx->banks);
    const auto path = ctx->resolve(f.output);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream(path, std::ios::binary | std::ios::trunc) << to_json(scored).dump(2) << "\n";
    const auto valid = scored.valid_count();
    out << fmt::format("{}: {} sessions scored, {} valid, {} invalid\n", path.string(), scored.sessions.size(), valid,
                       scored.sessions.size() - valid);
    for (const auto& s : scored.sessions) {
        if (!s.valid) out << fmt::format("  invalid {}: {}\n", s.session, s.invalid_reason);
    }
    if (valid == 0) throw NoValidSessions("every session in the ledger is invalid");
    return kExitOk;
}

ScoredSet load_scores(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(fmt::format("cannot open scores file '{}'", path.string()));
    try {
        return scored_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw LedgerError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

int cmd_report(const Globals& g, const ReportFlags& f, std::ostream& out) {
    auto ctx = load_context(g);
    if (f.pct && f.baseline.empty()) {
        throw MissingBaseline("--pct needs --baseline <scores of an unconditioned BFI run>");
    }
    const auto scored = load_scores(ctx->resolve(f.scores));
    std::optional<ScoredSet> baseline;
    if (!f.baseline.empty()) baseline = load_scores(ctx->resolve(f.baseline));
    const auto dir = ctx->resolve(f.dir);
    const auto files = write_report(scored, baseline ? &*baseline : nullptr, dir, {f.matrix, f.pct});
    out << fmt::format("report written to {}:\n", dir.string());
    for (const auto& name : files) out << "  " << name << "\n";

    std::ifstream summary(dir / "accuracy_summary.csv");
    std::string line;
    std::getline(summary, line);
    while (std::getline(summary, line)) out << "  accuracy " << line << "\n";
    return kExitOk;
}

int cmd_awareness(const Globals& g, const AwarenessFlags& f, std::ostream& out) {
    auto ctx = load_context(g);
    auto& cfg = ctx->config;
    const auto inst = parse_instrument(f.instrument);
    auto models = !f.models.empty() ? expand_list(f.models) : cfg.models;
    if (models.empty() && f.backend == "mock") models = {"mock"};
    if (models.empty()) throw ConfigError("no models: pass --models or list them in the config file");
    if (!f.base_url.empty()) cfg.base_url = f.base_url;

    std::unique_ptr<ChatClient> client;
    if (f.backend == "mock") {
        client = std::make_unique<MockChatClient>(MockPersona{}, ctx->banks, ctx->personas);
    } else if (f.backend == "live") {
        if (cfg.base_url.empty()) {
            throw ConfigError("live backend needs an endpoint: set endpoint.base_url in the config or pass --base-url");
        }
        client = std::make_unique<HttpChatClient>(cfg.endpoint());
    } else {
        throw ConfigError("--backend must be live or mock");
    }

    const auto embed_model = !f.embed_model.empty() ? f.embed_model : cfg.embedding_model;
    auto kind = f.embedder;
    if (kind.empty()) kind = !f.vectors.empty() ? "precomputed" : (f.backend == "live" && !embed_model.empty()) ? "http" : "hashing";
    std::unique_ptr<Embedder> embedder;
    if (kind == "hashing") {
        embedder = std::make_unique<HashingEmbedder>();
    } else if (kind == "precomputed") {
        if (f.vectors.empty()) throw ConfigError("--embedder precomputed needs --vectors <file>");
        embedder = std::make_unique<PrecomputedEmbedder>(PrecomputedEmbedder::load(f.vectors));
    } else if (kind == "http") {
        if (cfg.base_url.empty() || embed_model.empty()) {
            throw ConfigError("--embedder http needs an endpoint and --embed-model (or embedding_model in the config)");
        }
        embedder = std::make_unique<HttpEmbedder>(cfg.endpoint(), embed_model);
    } else {
        throw ConfigError("--embedder must be http, precomputed or hashing");
    }

    bool partial = false;
    for (const auto& model : models) {
        const auto report = awareness_report(model, inst, *client, *embedder, *ctx->renderer);
        const auto name = !f.output.empty() && models.size() == 1
                              ? f.output
                              : fmt::format("awareness_{}_{}.csv", to_string(inst), sanitize_filename(model));
        const auto path = ctx->resolve(name);
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        std::ofstream(path, std::ios::binary | std::ios::trunc) << awareness_csv(report);
        out << fmt::format("{} {}: WO {:.3f} ± {:.3f}, cosine {:.3f} ± {:.3f} ({} targets, normalizer {}, embedder {}) -> {}\n",
                           model, to_string(inst), report.wo.mean, report.wo.std, report.cosine.mean, report.cosine.std,
                           report.results.size() - report.failed, report.normalizer, report.embedder, path.string());
        if (report.partial()) {
            out << fmt::format("  partial report: {} target(s) failed\n", report.failed);
            partial = true;
        }
    }
    return partial ? kExitRuntime : kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Personality-conditioning test harness for chat models"};
    app.name("persona");
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    Globals g;
    app.add_option("--config", g.config_path, "JSON config file; flags override its values")->check(CLI::ExistingFile);
    app.add_option("--data-dir", g.data_dir, "Directory with the question banks, personas and templates");
    app.add_option("--templates", g.templates_dir, "Directory of prompt templates overriding the shipped ones");
    app.add_option("--out", g.out_dir, "Output directory; ledger, scores and report paths are relative to it");

    RunFlags rf;
    auto* run = app.add_subcommand("run", "Administer a test over the planned grid and write the ledger");
    run->add_option("--instrument", rf.instrument, "mbti or bfi")->required();
    run->add_option("--mode", rf.mode, "unconditioned, personality or role")->capture_default_str();
    run->add_option("--targets", rf.targets, "Comma-separated types/factors, or all")->delimiter(',');
    run->add_option("--roles", rf.roles, "Restrict role mode to these roles (default: all three per target)")
        ->delimiter(',');
    run->add_option("--models", rf.models, "Model ids (overrides the config)")->delimiter(',');
    run->add_option("--temps", rf.temps, "Temperatures, e.g. 0.01,0.7 (overrides the config)")->delimiter(',');
    run->add_option("--reps", rf.reps, "Repetitions per cell")->capture_default_str();
    run->add_option("--backend", rf.backend, "live or mock")->capture_default_str();
    run->add_option("--mock-target", rf.mock_target, "Mock persona: a type/factor, none, or follow");
    run->add_option("--mock-epsilon", rf.mock_epsilon, "Mock noise rate in [0,1]")->capture_default_str();
    run->add_option("--mock-seed", rf.mock_seed, "Mock RNG seed")->capture_default_str();
    run->add_option("--seed", rf.seed, "Run seed (overrides the config)");
    run->add_option("--ledger", rf.ledger, "Ledger file to create")->capture_default_str();
    run->add_option("--resume", rf.resume, "Continue this existing ledger");
    run->add_flag("--force", rf.force, "Overwrite an existing ledger");
    run->add_flag("--dry-run", rf.dry_run, "Print the plan size and stop");
    run->add_option("--workers", rf.workers, "Concurrent sessions (overrides the config)");
    run->add_option("--max-retries", rf.max_retries, "Re-asks per question before giving up");
    run->add_option("--base-url", rf.base_url, "Endpoint base URL (overrides the config)");

    ScoreFlags sf;
    auto* score = app.add_subcommand("score", "Score every session of a ledger");
    score->add_option("--ledger", sf.ledger, "Ledger to score")->capture_default_str();
    score->add_option("--output", sf.output, "Scores file to write")->capture_default_str();

    ReportFlags pf;
    auto* report = app.add_subcommand("report", "Aggregate scores into frequency, accuracy and matrix files");
    report->add_option("--scores", pf.scores, "Scores file")->capture_default_str();
    report->add_option("--baseline", pf.baseline, "Scores of the unconditioned run, for percentage change");
    report->add_option("--report-dir", pf.dir, "Directory to write")->capture_default_str();
    report->add_flag("--matrix", pf.matrix, "Fail unless a conditioning x outcome matrix can be built");
    report->add_flag("--pct", pf.pct, "Fail unless a percentage-change table can be built");

    AwarenessFlags af;
    auto* aware = app.add_subcommand("awareness", "Compare model-written personality descriptions with the references");
    aware->add_option("--instrument", af.instrument, "mbti or bfi")->required();
    aware->add_option("--models", af.models, "Model ids (overrides the config)")->delimiter(',');
    aware->add_option("--backend", af.backend, "live or mock")->capture_default_str();
    aware->add_option("--embedder", af.embedder, "http, precomputed or hashing");
    aware->add_option("--vectors", af.vectors, "JSON file of precomputed vectors");
    aware->add_option("--embed-model", af.embed_model, "Embeddings model id");
    aware->add_option("--base-url", af.base_url, "Endpoint base URL (overrides the config)");
    aware->add_option("--output", af.output, "CSV file to write (single model only)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (run->parsed()) return cmd_run(g, rf, out, err);
        if (score->parsed()) return cmd_score(g, sf, out);
        if (report->parsed()) return cmd_report(g, pf, out);
        if (aware->parsed()) return cmd_awareness(g, af, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const InvalidSpec& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const MissingBaseline& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const SchemaError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitValidation;
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace persona
