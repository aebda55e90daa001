#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "persona/analysis.hpp"

namespace persona {

struct ReportOptions {
    bool require_matrix{false};        // NoValidSessions when no conditioned MBTI data
    bool require_pct_increase{false};  // MissingBaseline without a baseline
};

// Writes the report files into `dir` and returns their names, in write order:
//   fig4_type_frequencies.tsv, fig5_factor_means.tsv, accuracy.csv,
//   accuracy_summary.csv, matrix_<model>_<temperature>_<regime>.csv,
//   pct_increase.csv, data_quality.json
std::vector<std::string> write_report(const ScoredSet& scored, const ScoredSet* baseline,
                                      const std::filesystem::path& dir, const ReportOptions& options = {});

std::string sanitize_filename(std::string_view s);

}  // namespace persona
