#include "persona/parsing.hpp"

#include "persona/errors.hpp"
#include "persona/text.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

namespace persona {

std::string_view to_string(MatchMethod m) noexcept {
    switch (m) {
        case MatchMethod::Exact: return "Exact";
        case MatchMethod::Phrase: return "Phrase";
        case MatchMethod::Fuzzy: return "Fuzzy";
        case MatchMethod::Reprompt: return "Reprompt";
    }
    return "Exact";
}

MatchMethod parse_match_method(std::string_view s) {
    for (auto m : {MatchMethod::Exact, MatchMethod::Phrase, MatchMethod::Fuzzy, MatchMethod::Reprompt}) {
        if (s == to_string(m)) return m;
    }
    throw SchemaError(fmt::format("unknown match method '{}'", s));
}

namespace {

std::vector<std::string> tokens(std::string_view s) {
    std::string buf;
    buf.reserve(s.size());
    for (char c : s) buf.push_back(ascii_alnum(c) ? ascii_lower(c) : ' ');
    return split_words(buf);
}

struct Occurrence {
    std::size_t label;
    std::size_t begin;
    std::size_t end;  // exclusive
};

// Drops occurrences lying inside an occurrence of a longer, different label.
std::set<std::size_t> surviving_labels(const std::vector<Occurrence>& occ) {
    std::set<std::size_t> out;
    for (const auto& a : occ) {
        const bool nested = std::any_of(occ.begin(), occ.end(), [&](const Occurrence& b) {
            return b.label != a.label && b.begin <= a.begin && a.end <= b.end &&
                   (b.end - b.begin) > (a.end - a.begin);
        });
        if (!nested) out.insert(a.label);
    }
    return out;
}

std::string window(const std::vector<std::string>& toks, std::size_t begin, std::size_t n) {
    std::string s;
    for (std::size_t i = begin; i < begin + n; ++i) {
        if (i > begin) s.push_back(' ');
        s += toks[i];
    }
    return s;
}

ParsedAnswer make(const OptionScale& scale, std::size_t idx, std::string_view raw, MatchMethod m) {
    return ParsedAnswer{idx, scale.labels[idx], std::string(raw), m, {std::string(raw)}};
}

[[noreturn]] void ambiguous(const OptionScale& scale, const std::set<std::size_t>& hits, std::string_view raw) {
    std::vector<std::string> names;
    for (auto i : hits) names.push_back(scale.labels[i]);
    throw Ambiguous(fmt::format("reply mentions several options ({}): '{}'", join(names, ", "), raw));
}

}  // namespace

std::string normalize_answer(std::string_view raw) { return join(tokens(raw), " "); }

std::size_t fuzzy_threshold(std::size_t label_length) noexcept {
    return std::max<std::size_t>(1, label_length * 15 / 100);
}

ParsedAnswer parse_option(std::string_view raw, const OptionScale& scale) {
    const auto toks = tokens(raw);
    if (toks.empty()) throw NoMatch("empty reply");

    std::vector<std::vector<std::string>> label_toks;
    for (const auto& l : scale.labels) label_toks.push_back(tokens(l));

    for (std::size_t i = 0; i < label_toks.size(); ++i) {
        if (toks == label_toks[i]) return make(scale, i, raw, MatchMethod::Exact);
    }

    std::vector<Occurrence> occ;
    for (std::size_t i = 0; i < label_toks.size(); ++i) {
        const auto& lt = label_toks[i];
        if (lt.empty() || lt.size() > toks.size()) continue;
        for (std::size_t b = 0; b + lt.size() <= toks.size(); ++b) {
            if (std::equal(lt.begin(), lt.end(), toks.begin() + static_cast<std::ptrdiff_t>(b))) {
                occ.push_back({i, b, b + lt.size()});
            }
        }
    }
    if (!occ.empty()) {
        const auto hits = surviving_labels(occ);
        if (hits.size() > 1) ambiguous(scale, hits, raw);
        return make(scale, *hits.begin(), raw, MatchMethod::Phrase);
    }

    for (std::size_t i = 0; i < label_toks.size(); ++i) {
        const auto& lt = label_toks[i];
        if (lt.empty() || lt.size() > toks.size()) continue;
        const auto label = join(lt, " ");
        const auto limit = fuzzy_threshold(label.size());
        for (std::size_t b = 0; b + lt.size() <= toks.size(); ++b) {
            if (edit_distance(window(toks, b, lt.size()), label) <= limit) occ.push_back({i, b, b + lt.size()});
        }
    }
    if (!occ.empty()) {
        const auto hits = surviving_labels(occ);
        if (hits.size() > 1) ambiguous(scale, hits, raw);
        return make(scale, *hits.begin(), raw, MatchMethod::Fuzzy);
    }
    throw NoMatch(fmt::format("no option label found in '{}'", raw));
}

std::string strict_instruction(const OptionScale& scale) {
    return "Answer with exactly one of: " + join(scale.labels, ", ") + ".";
}

ParsedAnswer answer_with_retries(const AskFn& ask, const OptionScale& scale, int max_retries) {
    if (max_retries < 0) throw InvalidSpec("max_retries must be >= 0");
    std::vector<std::string> attempts;
    const auto strict = strict_instruction(scale);
    for (int attempt = 0; attempt <= max_retries; ++attempt) {
        std::string raw;
        try {
            raw = ask(attempt == 0 ? std::string() : strict);
        } catch (const EmptyCompletion&) {
            attempts.emplace_back();
            continue;
        }
        attempts.push_back(raw);
        try {
            auto parsed = parse_option(raw, scale);
            if (attempt > 0) parsed.match_method = MatchMethod::Reprompt;
            parsed.attempts = attempts;
            return parsed;
        } catch (const NoMatch&) {
        } catch (const Ambiguous&) {
        }
    }
    throw UnparseableAnswer(std::move(attempts));
}

}  // namespace persona
