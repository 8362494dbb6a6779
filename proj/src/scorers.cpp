#include "cpmi/scorers.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#ifdef CPMI_HAVE_OPENMP
#include <omp.h>
#endif

namespace cpmi {

namespace {

// Neumaier compensated sum in insertion order.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::fabs(sum_) >= std::fabs(v)) {
      carry_ += (sum_ - t) + v;
    } else {
      carry_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

double query(const LLProvider& provider, const std::string& text, LLMode mode,
             std::string_view label) {
  try {
    return ll_value(provider.loglikelihood(text), mode);
  } catch (const Error& e) {
    throw e.with_context("sequence " + std::string(label));
  }
}

// LL(first,second,h) + LL(h) - LL(first,h) - LL(second,h), queried in that
// order.
double cpmi_term(const LLProvider& provider, std::span<const std::string> first,
                 std::span<const std::string> second, std::string_view hypothesis,
                 const ScoringConfig& config, bool swapped) {
  const CpmiSequences seqs = cpmi_sequences(first, second, hypothesis, config.sequence);
  const LLMode mode = config.ll_mode;
  const double joint = query(provider, seqs.joint, mode, swapped ? "{x,r,h}" : "{r,x,h}");
  const double hyp = query(provider, seqs.hypothesis, mode, "{h}");
  const double first_h = query(provider, seqs.first_h, mode, swapped ? "{x,h}" : "{r,h}");
  const double second_h = query(provider, seqs.second_h, mode, swapped ? "{r,h}" : "{x,h}");
  return joint + hyp - first_h - second_h;
}

double polarity_sum(const std::vector<Hypothesis>& hypotheses, bool mean,
                    const auto& term_for) {
  CompensatedSum sum;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const char* polarity = hypotheses[i].polarity == Polarity::Positive ? "positive" : "negative";
    try {
      sum.add(term_for(hypotheses[i].text));
    } catch (const Error& e) {
      throw e.with_context(std::string(polarity) + " hypothesis " + std::to_string(i));
    }
  }
  const double total = sum.value();
  return mean ? total / static_cast<double>(hypotheses.size()) : total;
}

std::vector<ScoreRecord> score_sample(const LLProvider& provider, const ScoringInput& input,
                                      const Registry& registry,
                                      const ScoreDatasetOptions& options) {
  input.pair.validate();
  std::vector<ScoreRecord> records;
  records.reserve(registry.size());
  for (const auto& dimension : registry.dimensions()) {
    double value = 0.0;
    try {
      value = score_dimension(provider, input.pair, dimension, options.scorer, options.config);
    } catch (const Error& e) {
      throw e.with_context("dimension " + dimension.name);
    }
    if (!std::isfinite(value)) {
      throw Error(ErrorCode::InvalidArgument, "dimension " + dimension.name + ": non-finite score");
    }
    records.push_back(ScoreRecord{input.sample_id, dimension.name, options.scorer,
                                  options.config.ll_mode, value});
  }
  return records;
}

struct SampleOutcome {
  std::vector<ScoreRecord> records;
  std::optional<SampleFailure> failure;
};

SampleOutcome score_sample_caught(const LLProvider& provider,
                                  std::span<const ScoringInput> samples, std::size_t index,
                                  const Registry& registry, const ScoreDatasetOptions& options) {
  SampleOutcome outcome;
  try {
    outcome.records = score_sample(provider, samples[index], registry, options);
  } catch (const Error& e) {
    outcome.failure = SampleFailure{index, samples[index].sample_id, e.code(), e.what()};
  } catch (const std::exception& e) {
    outcome.failure =
        SampleFailure{index, samples[index].sample_id, ErrorCode::InvalidArgument, e.what()};
  }
  return outcome;
}

ScoreRun collect(std::vector<SampleOutcome>& outcomes, const ScoreDatasetOptions& options) {
  ScoreRun run;
  for (auto& outcome : outcomes) {
    if (outcome.failure) {
      if (options.strict) {
        const SampleFailure& f = *outcome.failure;
        throw Error(f.code, "sample " + f.sample_id + " (index " + std::to_string(f.index) +
                                "): " + f.message);
      }
      run.failures.push_back(std::move(*outcome.failure));
      continue;
    }
    run.records.insert(run.records.end(), std::make_move_iterator(outcome.records.begin()),
                       std::make_move_iterator(outcome.records.end()));
  }
  return run;
}

void check_dataset_args(std::span<const ScoringInput> samples, const Registry& registry) {
  if (samples.empty()) throw Error(ErrorCode::EmptyDataset, "no samples to score");
  if (registry.empty()) throw Error(ErrorCode::InvalidArgument, "registry has no dimensions");
}

std::string format_double(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

}  // namespace

std::string_view to_string(ScorerKind kind) {
  switch (kind) {
    case ScorerKind::Nll: return "nll";
    case ScorerKind::Cpmi: return "cpmi";
    case ScorerKind::CpmiSym: return "cpmi-sym";
  }
  return "unknown";
}

std::string_view to_string(LLMode mode) { return mode == LLMode::Averaged ? "avg" : "sum"; }

std::optional<ScorerKind> parse_scorer_kind(std::string_view name) {
  if (name == "nll") return ScorerKind::Nll;
  if (name == "cpmi") return ScorerKind::Cpmi;
  if (name == "cpmi-sym" || name == "cpmi_sym") return ScorerKind::CpmiSym;
  return std::nullopt;
}

std::optional<LLMode> parse_ll_mode(std::string_view name) {
  if (name == "avg" || name == "averaged") return LLMode::Averaged;
  if (name == "sum" || name == "summed") return LLMode::Summed;
  return std::nullopt;
}

void SamplePair::validate() const {
  if (history.empty()) throw Error(ErrorCode::InvalidArgument, "sample history is empty");
  if (history.back().speaker != Speaker::User) {
    throw Error(ErrorCode::InvalidArgument, "sample history must end with a user turn");
  }
  if (trim(response).empty()) throw Error(ErrorCode::EmptyPart, "sample response is empty");
}

std::vector<std::string> SamplePair::history_texts() const {
  std::vector<std::string> texts;
  texts.reserve(history.size());
  for (const auto& turn : history) texts.push_back(turn.text);
  return texts;
}

double ll_value(const LLResult& result, LLMode mode) {
  return mode == LLMode::Averaged ? result.avg_ll : result.sum_ll;
}

CpmiSequences cpmi_sequences(std::span<const std::string> first,
                             std::span<const std::string> second, std::string_view hypothesis,
                             const SequenceOptions& options) {
  std::vector<std::string> both(first.begin(), first.end());
  both.insert(both.end(), second.begin(), second.end());
  if (trim(hypothesis).empty()) throw Error(ErrorCode::EmptyPart, "hypothesis is empty");
  return CpmiSequences{join_with_hypothesis(both, hypothesis, options), std::string(hypothesis),
                       join_with_hypothesis(first, hypothesis, options),
                       join_with_hypothesis(second, hypothesis, options)};
}

double cpmi(const LLProvider& provider, std::span<const std::string> history,
            std::string_view response, std::string_view hypothesis, const ScoringConfig& config) {
  const std::string x(response);
  return cpmi_term(provider, history, std::span<const std::string>(&x, 1), hypothesis, config,
                   false);
}

double cpmi_swapped(const LLProvider& provider, std::span<const std::string> history,
                    std::string_view response, std::string_view hypothesis,
                    const ScoringConfig& config) {
  const std::string x(response);
  return cpmi_term(provider, std::span<const std::string>(&x, 1), history, hypothesis, config,
                   true);
}

double cpmi_sym(const LLProvider& provider, std::span<const std::string> history,
                std::string_view response, std::string_view hypothesis,
                const ScoringConfig& config) {
  const double forward = cpmi(provider, history, response, hypothesis, config);
  const double backward = cpmi_swapped(provider, history, response, hypothesis, config);
  return 0.5 * (forward + backward);
}

double fed_nll_score(const LLProvider& provider, const SamplePair& sample,
                     const Dimension& dimension, const ScoringConfig& config) {
  std::vector<std::string> prefix = sample.history_texts();
  prefix.push_back(sample.response);
  const auto nll = [&](const std::string& hypothesis) {
    const std::string text = join_with_hypothesis(prefix, hypothesis, config.sequence);
    return -query(provider, text, config.ll_mode, "{c,r,h}");
  };
  return polarity_sum(dimension.negatives, config.mean_hypotheses, nll) -
         polarity_sum(dimension.positives, config.mean_hypotheses, nll);
}

double fed_cpmi_score(const LLProvider& provider, const SamplePair& sample,
                      const Dimension& dimension, ScorerKind variant,
                      const ScoringConfig& config) {
  if (variant == ScorerKind::Nll) {
    throw Error(ErrorCode::InvalidArgument, "fed_cpmi_score needs the cpmi or cpmi-sym variant");
  }
  const std::vector<std::string> history = sample.history_texts();
  const auto term = [&](const std::string& hypothesis) {
    return variant == ScorerKind::Cpmi
               ? cpmi(provider, history, sample.response, hypothesis, config)
               : cpmi_sym(provider, history, sample.response, hypothesis, config);
  };
  const double score = polarity_sum(dimension.negatives, config.mean_hypotheses, term) -
                       polarity_sum(dimension.positives, config.mean_hypotheses, term);
  return config.negate_cpmi ? -score : score;
}

double score_dimension(const LLProvider& provider, const SamplePair& sample,
                       const Dimension& dimension, ScorerKind scorer,
                       const ScoringConfig& config) {
  if (scorer == ScorerKind::Nll) return fed_nll_score(provider, sample, dimension, config);
  return fed_cpmi_score(provider, sample, dimension, scorer, config);
}

ScoreRun score_dataset_serial(const LLProvider& provider, std::span<const ScoringInput> samples,
                              const Registry& registry, const ScoreDatasetOptions& options) {
  check_dataset_args(samples, registry);
  std::vector<SampleOutcome> outcomes;
  outcomes.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    outcomes.push_back(score_sample_caught(provider, samples, i, registry, options));
  }
  return collect(outcomes, options);
}

ScoreRun score_dataset(const LLProvider& provider, std::span<const ScoringInput> samples,
                       const Registry& registry, const ScoreDatasetOptions& options) {
  check_dataset_args(samples, registry);
  std::vector<SampleOutcome> outcomes(samples.size());
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
#ifdef CPMI_HAVE_OPENMP
  const int threads = options.jobs > 0 ? options.jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
#endif
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    outcomes[static_cast<std::size_t>(i)] =
        score_sample_caught(provider, samples, static_cast<std::size_t>(i), registry, options);
  }
  return collect(outcomes, options);
}

// ------------------------------------------------------------ scores file

std::string format_score_line(const ScoreRecord& record, std::string_view manifest_hash) {
  std::string line = "{\"sample_id\":" + nlohmann::json(record.sample_id).dump() +
                     ",\"dimension\":" + nlohmann::json(record.dimension).dump() +
                     ",\"scorer\":\"" + std::string(to_string(record.scorer)) +
                     "\",\"ll_mode\":\"" + std::string(to_string(record.ll_mode)) +
                     "\",\"value\":" + format_double(record.value);
  if (!manifest_hash.empty()) {
    line += ",\"manifest\":" + nlohmann::json(std::string(manifest_hash)).dump();
  }
  line += "}";
  return line;
}

std::string format_scores(std::span<const ScoreRecord> records, std::string_view manifest_hash) {
  std::string out;
  for (const auto& record : records) {
    out += format_score_line(record, manifest_hash);
    out += '\n';
  }
  return out;
}

ScoresFile parse_scores(std::string_view content) {
  ScoresFile file;
  std::set<std::string> seen_manifests;
  std::set<std::tuple<std::string, std::string, ScorerKind, LLMode>> seen_keys;
  std::istringstream in{std::string(content)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "scores line " + std::to_string(line_no);
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw Error(ErrorCode::ParseError, where + ": malformed JSON");
    }
    try {
      ScoreRecord record;
      record.sample_id = obj.at("sample_id").get<std::string>();
      record.dimension = obj.at("dimension").get<std::string>();
      const auto scorer = parse_scorer_kind(obj.at("scorer").get<std::string>());
      const auto mode = parse_ll_mode(obj.at("ll_mode").get<std::string>());
      if (!scorer || !mode) throw Error(ErrorCode::SchemaError, "unknown scorer or ll_mode");
      record.scorer = *scorer;
      record.ll_mode = *mode;
      record.value = obj.at("value").get<double>();
      if (!seen_keys.emplace(record.sample_id, record.dimension, record.scorer, record.ll_mode)
               .second) {
        throw Error(ErrorCode::SchemaError, "duplicate (sample_id, dimension, scorer, ll_mode)");
      }
      if (obj.contains("manifest")) {
        const auto hash = obj["manifest"].get<std::string>();
        if (seen_manifests.insert(hash).second) file.manifests.push_back(hash);
      }
      file.records.push_back(std::move(record));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::SchemaError, where + ": " + e.what());
    } catch (const Error& e) {
      throw e.with_context(where);
    }
  }
  return file;
}

ScoresFile read_scores(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open scores file " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_scores(buffer.str());
  } catch (const Error& e) {
    throw e.with_context(path);
  }
}

}  // namespace cpmi
