#pragma once

// Awareness check: does a model's own description of a personality target
// resemble the reference description? Lexical word overlap (WO) plus cosine
// similarity of embeddings.

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "persona/llm_client.hpp"
#include "persona/personas.hpp"
#include "persona/prompting.hpp"

namespace persona {

// Fixed English stopword list shipped with the library.
const std::set<std::string, std::less<>>& stopwords();

// S-stemmer: ies -> y, es -> e, s -> "" with the usual exceptions
// (eies, aies / aes, ees, oes / us, ss). Words under four letters pass through.
std::string s_stem(std::string_view word);

using Normalizer = std::function<std::string(std::string_view)>;

// Lowercase, punctuation to whitespace, stopwords out, normalize, dedupe.
// Throws EmptyAfterPreprocess when nothing survives.
std::set<std::string> preprocess(std::string_view text, const Normalizer& normalize = s_stem);

// |s1 n s2| / min(|s1|, |s2|). Throws EmptyInput.
double word_overlap(const std::set<std::string>& s1, const std::set<std::string>& s2);

// Throws DimensionMismatch or ZeroVector.
double cosine(const std::vector<double>& v1, const std::vector<double>& v2);

struct AwarenessResult {
    Target target;
    double wo{0.0};
    double cosine{0.0};
    std::string generated_text;
    std::optional<std::string> error;
};

struct MeanStd {
    double mean{0.0};
    double std{0.0};  // sample standard deviation; 0 for a single value
};

MeanStd mean_std(const std::vector<double>& xs);

struct AwarenessReport {
    std::string model;
    Instrument instrument{Instrument::MBTI};
    std::string normalizer;
    std::string embedder;
    std::vector<AwarenessResult> results;
    MeanStd wo;
    MeanStd cosine;
    std::size_t failed{0};

    bool partial() const noexcept { return failed > 0; }
};

struct AwarenessOptions {
    SamplingParams sampling = [] {
        SamplingParams p;
        p.temperature = 0.01;
        return p;
    }();
    std::string normalizer_name{"s-stemmer"};
    Normalizer normalize{s_stem};
};

AwarenessReport awareness_report(const std::string& model, Instrument instrument, ChatClient& client,
                                 Embedder& embedder, const PromptRenderer& renderer,
                                 const AwarenessOptions& options = {});

// target,wo,cosine,error rows then a "mean ± std" footer row.
std::string awareness_csv(const AwarenessReport& report);

}  // namespace persona
