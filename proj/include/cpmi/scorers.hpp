#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cpmi/error.hpp"
#include "cpmi/hypotheses.hpp"
#include "cpmi/llprovider.hpp"
#include "cpmi/textseq.hpp"

namespace cpmi {

enum class ScorerKind { Nll, Cpmi, CpmiSym };
enum class LLMode { Averaged, Summed };

// "nll", "cpmi", "cpmi-sym"
std::string_view to_string(ScorerKind kind);
// "avg", "sum"
std::string_view to_string(LLMode mode);
std::optional<ScorerKind> parse_scorer_kind(std::string_view name);
std::optional<LLMode> parse_ll_mode(std::string_view name);

struct ScoringConfig {
  SequenceOptions sequence;
  LLMode ll_mode = LLMode::Averaged;
  // Flips the sign of C-PMI in the FED substitution.
  bool negate_cpmi = false;
  // Divide each polarity's sum by its hypothesis count.
  bool mean_hypotheses = false;
};

// Dialogue history (ending with a user turn) and the response under test.
struct SamplePair {
  std::vector<Turn> history;
  std::string response;

  // Throws InvalidArgument when history is empty or ends with a System
  // turn, EmptyPart when response is blank.
  void validate() const;
  std::vector<std::string> history_texts() const;
};

struct ScoringInput {
  std::string sample_id;
  SamplePair pair;
};

struct ScoreRecord {
  std::string sample_id;
  std::string dimension;
  ScorerKind scorer = ScorerKind::Nll;
  LLMode ll_mode = LLMode::Averaged;
  double value = 0.0;

  friend bool operator==(const ScoreRecord&, const ScoreRecord&) = default;
};

// LL under the configured mode: avg_ll or sum_ll.
double ll_value(const LLResult& result, LLMode mode);

// The four sequences a C-PMI term reads, in the order they are queried.
struct CpmiSequences {
  std::string joint;       // {first, second, h}
  std::string hypothesis;  // {h}
  std::string first_h;     // {first, h}
  std::string second_h;    // {second, h}
};

CpmiSequences cpmi_sequences(std::span<const std::string> first,
                             std::span<const std::string> second, std::string_view hypothesis,
                             const SequenceOptions& options);

// LL(r,x,h) + LL(h) - LL(r,h) - LL(x,h), with r the history parts.
double cpmi(const LLProvider& provider, std::span<const std::string> history,
            std::string_view response, std::string_view hypothesis, const ScoringConfig& config);

// Same with the response placed before the history.
double cpmi_swapped(const LLProvider& provider, std::span<const std::string> history,
                    std::string_view response, std::string_view hypothesis,
                    const ScoringConfig& config);

// (cpmi + cpmi_swapped) / 2.
double cpmi_sym(const LLProvider& provider, std::span<const std::string> history,
                std::string_view response, std::string_view hypothesis,
                const ScoringConfig& config);

// sum_neg NLL({c,r,n}) - sum_pos NLL({c,r,p}); higher means the positive
// follow-ups are more likely.
double fed_nll_score(const LLProvider& provider, const SamplePair& sample,
                     const Dimension& dimension, const ScoringConfig& config);

// NLL replaced by C-PMI (variant Cpmi or CpmiSym):
// sum_neg C-PMI(r,x|n) - sum_pos C-PMI(r,x|p).
double fed_cpmi_score(const LLProvider& provider, const SamplePair& sample,
                      const Dimension& dimension, ScorerKind variant,
                      const ScoringConfig& config);

double score_dimension(const LLProvider& provider, const SamplePair& sample,
                       const Dimension& dimension, ScorerKind scorer,
                       const ScoringConfig& config);

struct SampleFailure {
  std::size_t index = 0;
  std::string sample_id;
  ErrorCode code{};
  std::string message;
};

struct ScoreRun {
  // Ordered by (sample index, registry order); failed samples excluded.
  std::vector<ScoreRecord> records;
  std::vector<SampleFailure> failures;
};

struct ScoreDatasetOptions {
  ScorerKind scorer = ScorerKind::Cpmi;
  ScoringConfig config;
  // Throw the first (lowest-index) failure instead of collecting it.
  bool strict = false;
  // Worker threads; 0 uses the OpenMP default.
  int jobs = 1;
};

// Parallel over samples; output identical to score_dataset_serial for any
// job count.
ScoreRun score_dataset(const LLProvider& provider, std::span<const ScoringInput> samples,
                       const Registry& registry, const ScoreDatasetOptions& options);

// Single-threaded reference.
ScoreRun score_dataset_serial(const LLProvider& provider, std::span<const ScoringInput> samples,
                              const Registry& registry, const ScoreDatasetOptions& options);

// One JSON object per line with keys in fixed order:
// sample_id, dimension, scorer, ll_mode, value (17 significant digits),
// and manifest when manifest_hash is non-empty.
std::string format_score_line(const ScoreRecord& record, std::string_view manifest_hash = {});
std::string format_scores(std::span<const ScoreRecord> records, std::string_view manifest_hash = {});

struct ScoresFile {
  std::vector<ScoreRecord> records;
  // Distinct manifest hashes referenced by the lines.
  std::vector<std::string> manifests;
};

ScoresFile parse_scores(std::string_view content);
ScoresFile read_scores(const std::string& path);

}  // namespace cpmi
