#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpmi/dataset.hpp"
#include "cpmi/scorers.hpp"

namespace cpmi {

inline constexpr double kSignificanceLevel = 0.05;
// n at or below this uses the exact permutation distribution.
inline constexpr std::size_t kExactPermutationMaxN = 10;

// Average ranks, 1-based; ties get the mean of the ranks they cover.
std::vector<double> average_ranks(std::span<const double> values);

// p = count / total over all n! orderings of y against x.
struct ExactPValue {
  std::uint64_t count = 0;
  std::uint64_t total = 0;
};

struct SpearmanResult {
  double rho = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  // Set when p_value came from exact enumeration.
  std::optional<ExactPValue> exact;
};

// Throws LengthMismatch, TooFewSamples (n < 3) or DegenerateInput (a
// constant vector).
SpearmanResult spearman(std::span<const double> x, std::span<const double> y);

// Two-sided p-value of rho via t = rho sqrt((n-2)/(1-rho^2)) with n-2
// degrees of freedom.
double spearman_t_pvalue(double rho, std::size_t n);

// Two-sided exact permutation p-value: the fraction of the n! orderings of
// y whose |rho| is at least the observed |rho|. Ranks are compared through
// an integer statistic, so ties in |rho| are counted exactly. n <= 12.
ExactPValue spearman_exact_pvalue(std::span<const double> x, std::span<const double> y);
// Single-threaded reference for the above.
ExactPValue spearman_exact_pvalue_serial(std::span<const double> x, std::span<const double> y);

struct CorrelationResult {
  std::string scorer;  // row label, e.g. "cpmi/avg"
  std::string dimension;
  double rho = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  bool significant = false;
};

struct CorrelationTable {
  std::string scorer;
  // Registry order when known, else first-seen order.
  std::vector<CorrelationResult> dimensions;
  // Unweighted mean of per-dimension rho.
  double average_rho = 0.0;
};

// Recomputes average_rho from the rows.
CorrelationTable make_table(std::string scorer, std::vector<CorrelationResult> dimensions);

// Joins scores with labels on (sample_id, normalized dimension) and returns
// one table per (scorer, ll_mode) in first-seen order. Throws NoOverlap when
// a scored dimension has no labelled samples, or too few to correlate.
std::vector<CorrelationTable> correlate_run(std::span<const ScoreRecord> scores,
                                            std::span<const AggregatedLabel> labels);

enum class ReportFormat { Markdown, Json };

// Markdown: one row per table, one column per dimension plus "Avg.", values
// rho x 100 with one decimal, non-significant cells in *italics*.
// JSON: {"rows": [{"scorer", "dimension", "rho", "p", "n", "significant"}]}
// at full precision, with an "average" row per scorer. Throws
// InvalidArgument when there is nothing to render.
std::string render_report(std::span<const CorrelationTable> tables, ReportFormat format,
                          std::span<const std::string> manifests = {});

// rho x 100 with one decimal, e.g. 0.482 -> "48.2".
std::string format_percent(double rho);

}  // namespace cpmi
