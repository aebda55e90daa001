#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace persona {

// Root of every error raised by the harness. Subclasses map one-to-one onto
// the failure modes callers are expected to distinguish.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// instruments
class SchemaError : public Error { using Error::Error; };
class KeyError : public Error { using Error::Error; };
class UnknownLabel : public Error { using Error::Error; };

// prompting
class InvalidSpec : public Error { using Error::Error; };

// llm_client
class NetworkError : public Error { using Error::Error; };

class HttpError : public Error {
public:
    HttpError(int status, const std::string& body)
        : Error("HTTP " + std::to_string(status) + ": " + body), status_(status) {}
    int status() const noexcept { return status_; }

private:
    int status_;
};

class RateLimited : public Error { using Error::Error; };
class EmptyCompletion : public Error { using Error::Error; };
class MissingVector : public Error { using Error::Error; };
class DimensionMismatch : public Error { using Error::Error; };

// parsing
class NoMatch : public Error { using Error::Error; };
class Ambiguous : public Error { using Error::Error; };

class UnparseableAnswer : public Error {
public:
    explicit UnparseableAnswer(std::vector<std::string> attempts)
        : Error("no option label could be extracted after " +
                std::to_string(attempts.size()) + " attempt(s)"),
          attempts_(std::move(attempts)) {}
    const std::vector<std::string>& attempts() const noexcept { return attempts_; }

private:
    std::vector<std::string> attempts_;
};

// scoring
class OutOfRange : public Error { using Error::Error; };

class MissingAnswer : public Error {
public:
    explicit MissingAnswer(std::vector<int> ids)
        : Error(describe(ids)), ids_(std::move(ids)) {}
    const std::vector<int>& ids() const noexcept { return ids_; }

private:
    static std::string describe(const std::vector<int>& ids) {
        std::string s = "missing answers for question id(s):";
        for (int id : ids) s += " " + std::to_string(id);
        return s;
    }
    std::vector<int> ids_;
};

// awareness
class EmptyAfterPreprocess : public Error { using Error::Error; };
class EmptyInput : public Error { using Error::Error; };
class ZeroVector : public Error { using Error::Error; };

// runner / analysis / cli
class LedgerError : public Error { using Error::Error; };
class NoValidSessions : public Error { using Error::Error; };
class MissingBaseline : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };

}  // namespace persona
