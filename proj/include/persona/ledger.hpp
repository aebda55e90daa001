#pragma once

// Append-only JSON-lines run ledger. The first line is a header describing
// the plan; every following line is one question exchange.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "persona/instruments.hpp"
#include "persona/parsing.hpp"
#include "persona/prompting.hpp"

namespace persona {

inline constexpr std::string_view kLedgerSchema = "persona-ledger/1";

struct LedgerHeader {
    std::string run_id;
    std::string created;
    std::string backend;
    nlohmann::ordered_json plan;
    std::map<std::string, std::string> interviewer;  // instrument -> interviewer system message
    std::string key_note;
};

struct LedgerRecord {
    std::string run_id;
    std::string session;
    std::uint64_t session_seed{};
    std::string model;
    Instrument instrument{Instrument::MBTI};
    Regime regime{Regime::Unconditioned};
    std::optional<std::string> target;
    std::optional<std::string> role;
    double temperature{};
    int repetition{};
    int question_id{};
    int position{};
    std::string system_hash;
    std::string raw_response;
    std::vector<std::string> attempts;
    std::optional<std::string> label;
    std::optional<int> value;
    std::optional<std::string> error;
    std::optional<MatchMethod> match_method;
    std::string timestamp;

    ConditioningSpec conditioning() const;
};

nlohmann::ordered_json to_json(const LedgerHeader& h);
nlohmann::ordered_json to_json(const LedgerRecord& r);
LedgerHeader header_from_json(const nlohmann::json& j);
LedgerRecord record_from_json(const nlohmann::json& j);

struct Ledger {
    LedgerHeader header;
    std::vector<LedgerRecord> records;
    std::uintmax_t valid_bytes{0};  // length of the well-formed prefix
    bool truncated_tail{false};     // an unterminated final line was dropped
};

// Corrupt lines raise LedgerError naming the line number. An unterminated,
// unparsable final line (an interrupted write) is dropped with a warning.
Ledger read_ledger(const std::filesystem::path& path);

// ISO-8601 UTC with milliseconds.
std::string utc_timestamp();

class LedgerWriter {
public:
    // Starts a new ledger (truncating any existing file) and writes the header.
    static LedgerWriter create(const std::filesystem::path& path, const LedgerHeader& header);
    // Appends to an existing ledger, first cutting it back to `valid_bytes`.
    static LedgerWriter append(const std::filesystem::path& path, std::uintmax_t valid_bytes);

    LedgerWriter(LedgerWriter&&) = default;

    void write(const LedgerRecord& r);
    void flush();
    std::size_t written() const noexcept { return written_; }

private:
    explicit LedgerWriter(const std::filesystem::path& path);
    std::filesystem::path path_;
    std::ofstream out_;
    std::size_t written_{0};
};

// Records from concurrently running sessions are emitted in session order:
// the lowest unfinished session streams straight through, later ones are
// held back until every earlier session has finished.
class OrderedLedgerSink {
public:
    OrderedLedgerSink(LedgerWriter& writer, std::size_t sessions);

    void submit(std::size_t session, LedgerRecord r);
    void finish(std::size_t session);
    // Emits everything still buffered, in session order. Used on abort.
    void drain();

private:
    void advance();

    std::mutex mu_;
    LedgerWriter* writer_;
    std::vector<std::vector<LedgerRecord>> pending_;
    std::vector<bool> finished_;
    std::size_t next_{0};
};

}  // namespace persona
