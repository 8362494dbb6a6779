#include "cpmi/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>
#include <nlohmann/json.hpp>

#include "cpmi/error.hpp"

namespace cpmi {

namespace {

constexpr std::size_t kExactHardLimit = 12;

void check_pair(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::LengthMismatch, "vectors have lengths " + std::to_string(x.size()) +
                                               " and " + std::to_string(y.size()));
  }
  if (x.size() < 3) {
    throw Error(ErrorCode::TooFewSamples, "need at least 3 pairs, got " + std::to_string(x.size()));
  }
  for (const auto v : {x, y}) {
    if (std::all_of(v.begin(), v.end(), [&](double e) { return e == v.front(); })) {
      throw Error(ErrorCode::DegenerateInput, "constant input vector");
    }
  }
}

// Centered doubled ranks 2 r_i - (n + 1); integers because average ranks are
// multiples of 1/2.
std::vector<std::int64_t> centered_doubled_ranks(std::span<const double> values) {
  const std::vector<double> ranks = average_ranks(values);
  const auto n = static_cast<std::int64_t>(values.size());
  std::vector<std::int64_t> out(ranks.size());
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    out[i] = std::llround(2.0 * ranks[i]) - (n + 1);
  }
  return out;
}

std::int64_t dot(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                 std::span<const std::size_t> order) {
  std::int64_t s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[order[i]];
  return s;
}

std::uint64_t factorial(std::size_t n) {
  std::uint64_t f = 1;
  for (std::size_t i = 2; i <= n; ++i) f *= i;
  return f;
}

struct ExactSetup {
  std::vector<std::int64_t> a;
  std::vector<std::int64_t> b;
  std::int64_t observed = 0;
};

ExactSetup exact_setup(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  if (x.size() > kExactHardLimit) {
    throw Error(ErrorCode::InvalidArgument, "exact permutation test supports n <= " +
                                                std::to_string(kExactHardLimit));
  }
  ExactSetup s{centered_doubled_ranks(x), centered_doubled_ranks(y), 0};
  std::vector<std::size_t> identity(x.size());
  std::iota(identity.begin(), identity.end(), 0);
  s.observed = std::llabs(dot(s.a, s.b, identity));
  return s;
}

// Counts orderings whose first slot holds b[first] and whose |statistic|
// reaches the observed one.
std::uint64_t count_with_first(const ExactSetup& s, std::size_t first) {
  const std::size_t n = s.a.size();
  std::vector<std::size_t> order;
  order.reserve(n);
  order.push_back(first);
  for (std::size_t i = 0; i < n; ++i) {
    if (i != first) order.push_back(i);
  }
  std::uint64_t count = 0;
  do {
    if (std::llabs(dot(s.a, s.b, order)) >= s.observed) ++count;
  } while (std::next_permutation(order.begin() + 1, order.end()));
  return count;
}

std::string display_name(const std::string& dimension) {
  std::string out = dimension;
  std::replace(out.begin(), out.end(), '_', ' ');
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

std::string row_label(const ScoreRecord& r) {
  return std::string(to_string(r.scorer)) + "/" + std::string(to_string(r.ll_mode));
}

}  // namespace

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    // Positions i..j-1 hold ranks i+1..j.
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

double spearman_t_pvalue(double rho, std::size_t n) {
  if (n < 3) throw Error(ErrorCode::TooFewSamples, "t approximation needs n >= 3");
  if (std::fabs(rho) >= 1.0) return 0.0;
  const auto dof = static_cast<double>(n - 2);
  const double t = rho * std::sqrt(dof / ((1.0 - rho) * (1.0 + rho)));
  const boost::math::students_t_distribution<double> dist(dof);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t))));
}

ExactPValue spearman_exact_pvalue_serial(std::span<const double> x, std::span<const double> y) {
  const ExactSetup s = exact_setup(x, y);
  std::uint64_t count = 0;
  for (std::size_t first = 0; first < s.a.size(); ++first) count += count_with_first(s, first);
  return ExactPValue{count, factorial(s.a.size())};
}

ExactPValue spearman_exact_pvalue(std::span<const double> x, std::span<const double> y) {
  const ExactSetup s = exact_setup(x, y);
  const auto n = static_cast<std::ptrdiff_t>(s.a.size());
  std::uint64_t count = 0;
#ifdef CPMI_HAVE_OPENMP
#pragma omp parallel for reduction(+ : count) schedule(static, 1)
#endif
  for (std::ptrdiff_t first = 0; first < n; ++first) {
    count += count_with_first(s, static_cast<std::size_t>(first));
  }
  return ExactPValue{count, factorial(s.a.size())};
}

SpearmanResult spearman(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  const std::size_t n = x.size();
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  // Both rank vectors have mean (n + 1) / 2.
  const double mean = 0.5 * static_cast<double>(n + 1);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = rx[i] - mean;
    const double dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  SpearmanResult result;
  result.n = n;
  result.rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  if (n <= kExactPermutationMaxN) {
    result.exact = spearman_exact_pvalue(x, y);
    result.p_value =
        static_cast<double>(result.exact->count) / static_cast<double>(result.exact->total);
  } else {
    result.p_value = spearman_t_pvalue(result.rho, n);
  }
  return result;
}

CorrelationTable make_table(std::string scorer, std::vector<CorrelationResult> dimensions) {
  CorrelationTable table{std::move(scorer), std::move(dimensions), 0.0};
  if (!table.dimensions.empty()) {
    double sum = 0.0;
    for (const auto& d : table.dimensions) sum += d.rho;
    table.average_rho = sum / static_cast<double>(table.dimensions.size());
  }
  return table;
}

std::vector<CorrelationTable> correlate_run(std::span<const ScoreRecord> scores,
                                            std::span<const AggregatedLabel> labels) {
  std::map<std::pair<std::string, std::string>, double> label_of;
  for (const auto& l : labels) label_of[{l.sample_id, normalize_dimension_name(l.dimension)}] = l.mean_rating;

  // Preserve first-seen order of rows and of dimensions within a row.
  std::vector<std::string> row_order;
  std::map<std::string, std::vector<std::string>> dims_of_row;
  std::map<std::pair<std::string, std::string>, std::pair<std::vector<double>, std::vector<double>>>
      pairs;
  for (const auto& r : scores) {
    const std::string row = row_label(r);
    if (!dims_of_row.contains(row)) row_order.push_back(row);
    auto& dims = dims_of_row[row];
    if (std::find(dims.begin(), dims.end(), r.dimension) == dims.end()) dims.push_back(r.dimension);
    auto& [xs, ys] = pairs[{row, r.dimension}];
    const auto hit = label_of.find({r.sample_id, normalize_dimension_name(r.dimension)});
    if (hit == label_of.end()) continue;
    xs.push_back(r.value);
    ys.push_back(hit->second);
  }

  std::vector<CorrelationTable> tables;
  for (const auto& row : row_order) {
    std::vector<CorrelationResult> results;
    for (const auto& dim : dims_of_row[row]) {
      const auto& [xs, ys] = pairs[{row, dim}];
      if (xs.empty()) {
        throw Error(ErrorCode::NoOverlap,
                    "dimension " + dim + ": no scored sample has a human label");
      }
      SpearmanResult s;
      try {
        s = spearman(xs, ys);
      } catch (const Error& e) {
        throw e.with_context("dimension " + dim);
      }
      results.push_back(CorrelationResult{row, dim, s.rho, s.p_value, s.n,
                                          s.p_value <= kSignificanceLevel});
    }
    tables.push_back(make_table(row, std::move(results)));
  }
  return tables;
}

std::string format_percent(double rho) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.1f", rho * 100.0);
  std::string out = buffer;
  if (out == "-0.0") out = "0.0";
  return out;
}

std::string render_report(std::span<const CorrelationTable> tables, ReportFormat format,
                          std::span<const std::string> manifests) {
  if (tables.empty() ||
      std::all_of(tables.begin(), tables.end(), [](const auto& t) { return t.dimensions.empty(); })) {
    throw Error(ErrorCode::InvalidArgument, "nothing to render: no dimensions");
  }

  if (format == ReportFormat::Json) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& table : tables) {
      for (const auto& d : table.dimensions) {
        rows.push_back({{"scorer", table.scorer}, {"dimension", d.dimension}, {"rho", d.rho},
                        {"p", d.p_value}, {"n", d.n}, {"significant", d.significant}});
      }
      rows.push_back({{"scorer", table.scorer}, {"dimension", "average"},
                      {"rho", table.average_rho}, {"p", nullptr}, {"n", table.dimensions.size()},
                      {"significant", nullptr}});
    }
    nlohmann::ordered_json root;
    root["rows"] = std::move(rows);
    root["manifests"] = std::vector<std::string>(manifests.begin(), manifests.end());
    return root.dump(2) + "\n";
  }

  std::vector<std::string> columns;
  for (const auto& table : tables) {
    for (const auto& d : table.dimensions) {
      if (std::find(columns.begin(), columns.end(), d.dimension) == columns.end()) {
        columns.push_back(d.dimension);
      }
    }
  }
  std::string out = "| Scorer |";
  for (const auto& c : columns) out += " " + display_name(c) + " |";
  out += " Avg. |\n|---|";
  for (std::size_t i = 0; i <= columns.size(); ++i) out += "---:|";
  out += '\n';
  for (const auto& table : tables) {
    out += "| " + table.scorer + " |";
    for (const auto& c : columns) {
      const auto it = std::find_if(table.dimensions.begin(), table.dimensions.end(),
                                   [&](const auto& d) { return d.dimension == c; });
      if (it == table.dimensions.end()) {
        out += " - |";
        continue;
      }
      const std::string value = format_percent(it->rho);
      out += it->significant ? " " + value + " |" : " *" + value + "* |";
    }
    out += " " + format_percent(table.average_rho) + " |\n";
  }
  if (!manifests.empty()) {
    out += "\n<!-- manifests:";
    for (const auto& m : manifests) out += " " + m;
    out += " -->\n";
  }
  return out;
}

}  // namespace cpmi
