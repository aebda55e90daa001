#pragma once

// Maps free-form completions onto exactly one option label.
//
// Text is compared as token sequences: casefolded, every non-alphanumeric
// byte treated as a separator. Three stages run in order and the first that
// yields anything decides:
//   1. Exact  - the whole reply equals a label.
//   2. Phrase - labels occurring as whole-token phrases. An occurrence that
//               lies inside an occurrence of a longer label is dropped, so
//               "Partially Agree" does not also count as "Agree".
//   3. Fuzzy  - token windows within edit distance max(1, floor(0.15 * n))
//               of a label of n characters, with the same nesting rule.
// More than one surviving label is Ambiguous; none at all is NoMatch.

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "persona/instruments.hpp"

namespace persona {

enum class MatchMethod { Exact, Phrase, Fuzzy, Reprompt };

std::string_view to_string(MatchMethod m) noexcept;
MatchMethod parse_match_method(std::string_view s);

struct ParsedAnswer {
    std::size_t option_index{};
    std::string label;
    std::string raw_text;  // the reply that was finally parsed
    MatchMethod match_method{MatchMethod::Exact};
    std::vector<std::string> attempts;  // every raw reply, in order
};

// Lowercased alphanumeric tokens joined by single spaces.
std::string normalize_answer(std::string_view raw);

std::size_t fuzzy_threshold(std::size_t label_length) noexcept;

// Throws NoMatch or Ambiguous.
ParsedAnswer parse_option(std::string_view raw, const OptionScale& scale);

// "Answer with exactly one of: <labels>."
std::string strict_instruction(const OptionScale& scale);

// Called with an empty string for the first ask and with strict_instruction()
// for every re-ask.
using AskFn = std::function<std::string(const std::string& extra_instruction)>;

inline constexpr int kDefaultMaxRetries = 3;

// Throws UnparseableAnswer carrying every raw reply once retries run out.
ParsedAnswer answer_with_retries(const AskFn& ask, const OptionScale& scale,
                                 int max_retries = kDefaultMaxRetries);

}  // namespace persona
