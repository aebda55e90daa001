#include "persona/awareness.hpp"

#include "persona/errors.hpp"
#include "persona/text.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace persona {

const std::set<std::string, std::less<>>& stopwords() {
    static const std::set<std::string, std::less<>> words{
        "a",        "about",   "above",   "after",   "again",   "against", "ain",     "all",      "am",
        "an",       "and",     "any",     "are",     "aren",    "as",      "at",      "be",       "because",
        "been",     "before",  "being",   "below",   "between", "both",    "but",     "by",       "can",
        "couldn",   "d",       "did",     "didn",    "do",      "does",    "doesn",   "doing",    "don",
        "down",     "during",  "each",    "few",     "for",     "from",    "further", "had",      "hadn",
        "has",      "hasn",    "have",    "haven",   "having",  "he",      "her",     "here",     "hers",
        "herself",  "him",     "himself", "his",     "how",     "i",       "if",      "in",       "into",
        "is",       "isn",     "it",      "its",     "itself",  "just",    "ll",      "m",        "ma",
        "me",       "mightn",  "more",    "most",    "mustn",   "my",      "myself",  "needn",    "no",
        "nor",      "not",     "now",     "o",       "of",      "off",     "on",      "once",     "only",
        "or",       "other",   "our",     "ours",    "ourselves", "out",   "over",    "own",      "re",
        "s",        "same",    "shan",    "she",     "should",  "shouldn", "so",      "some",     "such",
        "t",        "than",    "that",    "the",     "their",   "theirs",  "them",    "themselves", "then",
        "there",    "these",   "they",    "this",    "those",   "through", "to",      "too",      "under",
        "until",    "up",      "ve",      "very",    "was",     "wasn",    "we",      "were",     "weren",
        "what",     "when",    "where",   "which",   "while",   "who",     "whom",    "why",      "will",
        "with",     "won",     "wouldn",  "y",       "you",     "your",    "yours",   "yourself", "yourselves",
        "also",     "could",   "would",   "may",     "might",   "must",    "shall",   "often",    "us"};
    return words;
}

std::string s_stem(std::string_view word) {
    std::string w(word);
    if (w.size() < 4) return w;
    auto ends = [&](std::string_view suf) { return w.size() >= suf.size() && w.compare(w.size() - suf.size(), suf.size(), suf) == 0; };
    if (ends("ies") && !ends("eies") && !ends("aies")) {
        w.replace(w.size() - 3, 3, "y");
    } else if (ends("es") && !ends("aes") && !ends("ees") && !ends("oes")) {
        w.pop_back();
    } else if (ends("s") && !ends("us") && !ends("ss")) {
        w.pop_back();
    }
    return w;
}

std::set<std::string> preprocess(std::string_view text, const Normalizer& normalize) {
    std::string buf;
    buf.reserve(text.size());
    for (char c : text) buf.push_back(ascii_alnum(c) ? ascii_lower(c) : ' ');
    std::set<std::string> out;
    for (auto& w : split_words(buf)) {
        if (stopwords().contains(w)) continue;
        auto n = normalize ? normalize(w) : w;
        if (!n.empty() && !stopwords().contains(n)) out.insert(std::move(n));
    }
    if (out.empty()) throw EmptyAfterPreprocess("no content words left after preprocessing");
    return out;
}

double word_overlap(const std::set<std::string>& s1, const std::set<std::string>& s2) {
    if (s1.empty() || s2.empty()) throw EmptyInput("word overlap needs two non-empty token sets");
    const auto& small = s1.size() <= s2.size() ? s1 : s2;
    const auto& large = s1.size() <= s2.size() ? s2 : s1;
    std::size_t common = 0;
    for (const auto& w : small) common += large.contains(w) ? 1 : 0;
    return static_cast<double>(common) / static_cast<double>(small.size());
}

double cosine(const std::vector<double>& v1, const std::vector<double>& v2) {
    if (v1.size() != v2.size()) {
        throw DimensionMismatch(fmt::format("cosine of vectors with dimensions {} and {}", v1.size(), v2.size()));
    }
    const double dot = std::inner_product(v1.begin(), v1.end(), v2.begin(), 0.0);
    const double n1 = std::sqrt(std::inner_product(v1.begin(), v1.end(), v1.begin(), 0.0));
    const double n2 = std::sqrt(std::inner_product(v2.begin(), v2.end(), v2.begin(), 0.0));
    if (n1 == 0.0 || n2 == 0.0) throw ZeroVector("cosine of a zero vector is undefined");
    return std::clamp(dot / (n1 * n2), -1.0, 1.0);
}

MeanStd mean_std(const std::vector<double>& xs) {
    MeanStd out;
    if (xs.empty()) return out;
    out.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - out.mean) * (x - out.mean);
        out.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    return out;
}

AwarenessReport awareness_report(const std::string& model, Instrument instrument, ChatClient& client,
                                 Embedder& embedder, const PromptRenderer& renderer,
                                 const AwarenessOptions& options) {
    AwarenessReport report;
    report.model = model;
    report.instrument = instrument;
    report.normalizer = options.normalizer_name;
    report.embedder = embedder.name();

    std::vector<double> wos, coss;
    for (const auto& target : all_targets(instrument)) {
        AwarenessResult r{target, 0.0, 0.0, {}, std::nullopt};
        try {
            ChatRequest req{model, "", renderer.render_awareness_prompt(instrument, target), options.sampling};
            r.generated_text = client.chat(req);
            const auto reference = renderer.personas().reference_text(target);
            r.wo = word_overlap(preprocess(r.generated_text, options.normalize),
                                preprocess(reference, options.normalize));
            r.cosine = cosine(embedder.embed(r.generated_text), embedder.embed(reference));
            wos.push_back(r.wo);
            coss.push_back(r.cosine);
        } catch (const Error& e) {
            r.error = e.what();
            ++report.failed;
        }
        report.results.push_back(std::move(r));
    }
    report.wo = mean_std(wos);
    report.cosine = mean_std(coss);
    return report;
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

std::string awareness_csv(const AwarenessReport& report) {
    std::string out = "target,wo,cosine,error\n";
    for (const auto& r : report.results) {
        if (r.error) {
            out += fmt::format("{},,,{}\n", target_name(r.target), csv_field(*r.error));
        } else {
            out += fmt::format("{},{:.4f},{:.4f},\n", target_name(r.target), r.wo, r.cosine);
        }
    }
    out += fmt::format("mean ± std,{:.4f} ± {:.4f},{:.4f} ± {:.4f},{}\n", report.wo.mean, report.wo.std,
                       report.cosine.mean, report.cosine.std,
                       report.partial() ? fmt::format("partial: {} failed", report.failed) : "");
    return out;
}

}  // namespace persona
