#include "persona/ledger.hpp"

#include "persona/errors.hpp"
#include "persona/personas.hpp"

#include <chrono>
#include <ctime>

#include <fmt/format.h>

namespace persona {

using nlohmann::json;
using nlohmann::ordered_json;

ConditioningSpec LedgerRecord::conditioning() const {
    ConditioningSpec spec;
    spec.instrument = instrument;
    spec.regime = regime;
    if (target) spec.target = parse_target(instrument, *target);
    spec.role = role;
    return spec;
}

namespace {

template <typename T>
ordered_json opt(const std::optional<T>& v) {
    return v ? ordered_json(*v) : ordered_json(nullptr);
}

template <typename T>
std::optional<T> get_opt(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

}  // namespace

ordered_json to_json(const LedgerHeader& h) {
    ordered_json interviewer = ordered_json::object();
    for (const auto& [k, v] : h.interviewer) interviewer[k] = v;
    return ordered_json{{"schema", kLedgerSchema}, {"run_id", h.run_id},
                        {"created", h.created},    {"backend", h.backend},
                        {"plan", h.plan},          {"interviewer", interviewer},
                        {"key_note", h.key_note}};
}

ordered_json to_json(const LedgerRecord& r) {
    ordered_json j;
    j["run_id"] = r.run_id;
    j["session"] = r.session;
    j["session_seed"] = r.session_seed;
    j["model"] = r.model;
    j["instrument"] = to_string(r.instrument);
    j["regime"] = to_string(r.regime);
    j["target"] = opt(r.target);
    j["role"] = opt(r.role);
    j["temperature"] = r.temperature;
    j["repetition"] = r.repetition;
    j["question_id"] = r.question_id;
    j["position"] = r.position;
    j["system_hash"] = r.system_hash;
    j["raw_response"] = r.raw_response;
    j["attempts"] = r.attempts;
    j["label"] = opt(r.label);
    j["value"] = opt(r.value);
    j["error"] = opt(r.error);
    j["match_method"] = r.match_method ? ordered_json(to_string(*r.match_method)) : ordered_json(nullptr);
    j["timestamp"] = r.timestamp;
    return j;
}

LedgerHeader header_from_json(const json& j) {
    if (!j.is_object() || j.value("schema", "") != kLedgerSchema) {
        throw LedgerError(fmt::format("not a ledger header (expected schema '{}')", kLedgerSchema));
    }
    LedgerHeader h;
    h.run_id = j.at("run_id").get<std::string>();
    h.created = j.value("created", "");
    h.backend = j.value("backend", "");
    h.plan = j.at("plan");
    if (j.contains("interviewer")) h.interviewer = j.at("interviewer").get<std::map<std::string, std::string>>();
    h.key_note = j.value("key_note", "");
    return h;
}

LedgerRecord record_from_json(const json& j) {
    LedgerRecord r;
    r.run_id = j.at("run_id").get<std::string>();
    r.session = j.at("session").get<std::string>();
    r.session_seed = j.at("session_seed").get<std::uint64_t>();
    r.model = j.at("model").get<std::string>();
    r.instrument = parse_instrument(j.at("instrument").get<std::string>());
    r.regime = parse_regime(j.at("regime").get<std::string>());
    r.target = get_opt<std::string>(j, "target");
    r.role = get_opt<std::string>(j, "role");
    r.temperature = j.at("temperature").get<double>();
    r.repetition = j.at("repetition").get<int>();
    r.question_id = j.at("question_id").get<int>();
    r.position = j.at("position").get<int>();
    r.system_hash = j.at("system_hash").get<std::string>();
    r.raw_response = j.at("raw_response").get<std::string>();
    r.attempts = j.value("attempts", std::vector<std::string>{});
    r.label = get_opt<std::string>(j, "label");
    r.value = get_opt<int>(j, "value");
    r.error = get_opt<std::string>(j, "error");
    if (auto m = get_opt<std::string>(j, "match_method")) r.match_method = parse_match_method(*m);
    r.timestamp = j.value("timestamp", "");
    if (!r.error && (!r.label || !r.value)) throw LedgerError("record has neither an answer nor an error");
    return r;
}

Ledger read_ledger(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LedgerError(fmt::format("cannot open ledger '{}'", path.string()));
    Ledger ledger;
    std::string line;
    std::size_t line_no = 0;
    std::uintmax_t offset = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const bool terminated = !in.eof();
        const auto next_offset = offset + line.size() + (terminated ? 1 : 0);
        if (line.empty() && terminated) {
            offset = next_offset;
            ledger.valid_bytes = offset;
            continue;
        }
        try {
            const auto j = json::parse(line);
            if (line_no == 1) {
                ledger.header = header_from_json(j);
            } else {
                ledger.records.push_back(record_from_json(j));
            }
            // A complete final record without its newline is kept; append() restores the newline.
            ledger.valid_bytes = next_offset;
        } catch (const std::exception& e) {
            if (!terminated && line_no > 1) {
                fmt::print(stderr, "warning: {}: dropping incomplete final line {}\n", path.string(), line_no);
                ledger.truncated_tail = true;
                break;
            }
            throw LedgerError(fmt::format("{}: line {}: {}", path.string(), line_no, e.what()));
        }
        offset = next_offset;
    }
    if (line_no == 0) throw LedgerError(fmt::format("ledger '{}' is empty", path.string()));
    return ledger;
}

std::string utc_timestamp() {
    using namespace std::chrono;
    const auto now = system_clock::now();
    const auto t = system_clock::to_time_t(now);
    const auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}.{:03}Z", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                       tm.tm_hour, tm.tm_min, tm.tm_sec, ms);
}

LedgerWriter::LedgerWriter(const std::filesystem::path& path) : path_(path) {}

LedgerWriter LedgerWriter::create(const std::filesystem::path& path, const LedgerHeader& header) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    LedgerWriter w(path);
    w.out_.open(path, std::ios::binary | std::ios::trunc);
    if (!w.out_) throw LedgerError(fmt::format("cannot create ledger '{}'", path.string()));
    w.out_ << to_json(header).dump() << '\n';
    w.out_.flush();
    return w;
}

LedgerWriter LedgerWriter::append(const std::filesystem::path& path, std::uintmax_t valid_bytes) {
    std::error_code ec;
    if (std::filesystem::file_size(path, ec) != valid_bytes) std::filesystem::resize_file(path, valid_bytes);
    bool needs_newline = false;
    if (valid_bytes > 0) {
        std::ifstream in(path, std::ios::binary);
        in.seekg(static_cast<std::streamoff>(valid_bytes) - 1);
        needs_newline = in.get() != '\n';
    }
    LedgerWriter w(path);
    w.out_.open(path, std::ios::binary | std::ios::app);
    if (!w.out_) throw LedgerError(fmt::format("cannot append to ledger '{}'", path.string()));
    if (needs_newline) w.out_ << '\n';
    return w;
}

void LedgerWriter::write(const LedgerRecord& r) {
    out_ << to_json(r).dump() << '\n';
    if (!out_) throw LedgerError(fmt::format("write to ledger '{}' failed", path_.string()));
    ++written_;
}

void LedgerWriter::flush() { out_.flush(); }

OrderedLedgerSink::OrderedLedgerSink(LedgerWriter& writer, std::size_t sessions)
    : writer_(&writer), pending_(sessions), finished_(sessions, false) {}

void OrderedLedgerSink::submit(std::size_t session, LedgerRecord r) {
    std::lock_guard lock(mu_);
    if (session == next_) {
        writer_->write(r);
        writer_->flush();
    } else {
        pending_[session].push_back(std::move(r));
    }
}

void OrderedLedgerSink::finish(std::size_t session) {
    std::lock_guard lock(mu_);
    finished_[session] = true;
    advance();
}

void OrderedLedgerSink::advance() {
    while (next_ < finished_.size() && finished_[next_]) {
        ++next_;
        if (next_ < pending_.size()) {
            for (auto& r : pending_[next_]) writer_->write(r);
            pending_[next_].clear();
            pending_[next_].shrink_to_fit();
        }
    }
    writer_->flush();
}

void OrderedLedgerSink::drain() {
    std::lock_guard lock(mu_);
    for (std::size_t s = next_; s < pending_.size(); ++s) {
        for (auto& r : pending_[s]) writer_->write(r);
        pending_[s].clear();
    }
    next_ = pending_.size();
    writer_->flush();
}

}  // namespace persona
