#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cpmi/hypotheses.hpp"
#include "cpmi/scorers.hpp"
#include "cpmi/textseq.hpp"

namespace cpmi {

enum class Rating { No, Somewhat, Yes, NA };

std::string_view to_string(Rating rating);

struct AnnotatedSample {
  std::string sample_id;
  std::vector<Turn> context;
  std::string response;
  std::optional<std::string> system_name;
  // Keyed by the dataset's label name (e.g. "Semantically appropriate").
  std::map<std::string, std::vector<Rating>> labels;
  std::vector<int> overall;
};

struct Exclusion {
  std::size_t index = 0;
  std::string sample_id;
  std::string reason;
};

struct FedLoadResult {
  std::vector<AnnotatedSample> samples;
  std::vector<Exclusion> excluded;
  // Dialogue-level entries (no response, dialogue-only annotation keys).
  std::size_t skipped_dialogue_level = 0;
};

struct FedLoadOptions {
  std::string separator{kDefaultSeparator};
  // When set, every turn-level label key must name one of its dimensions.
  const Registry* registry = nullptr;
};

// Loads the FED turn-level JSON.
//
// Accepted layout: a top-level array (or {"samples": [...]}) of objects with
//   "context":     string of "Speaker: text" lines, or an array of such
//                  strings, or an array of {"speaker", "text"} objects
//   "response":    string, optionally prefixed with "Speaker: "
//   "system":      optional string (also read from "model")
//   "annotations": object label -> array of ratings; ratings are
//                  "No"/"Somewhat"/"Yes"/"N/A" (also "NA", null) or 0/1/2.
//                  "Overall" holds 1..5 integers.
//   "id":          optional sample id; defaults to the array index.
// Speakers tagged "System", "Meena", "Mitsuku" (any tag starting with those)
// are System; all other tags are User. Lines without a tag continue the
// previous turn.
//
// Throws ParseError, SchemaError (names the sample index) or EmptyDataset.
// Samples with an empty context, a context not ending in a user turn, or a
// response equal to the final context turn are excluded with a reason.
FedLoadResult parse_fed(std::string_view json_text, const FedLoadOptions& options = {});
FedLoadResult load_fed(const std::string& path, const FedLoadOptions& options = {});

std::vector<ScoringInput> to_scoring_inputs(const std::vector<AnnotatedSample>& samples);

struct RatingMapping {
  double no = 0.0;
  double somewhat = 1.0;
  double yes = 2.0;

  double operator()(Rating rating) const;
};

// Parses "No=0,Somewhat=1,Yes=2" (any subset, any order).
RatingMapping parse_rating_mapping(std::string_view spec);

struct AggregatedLabel {
  std::string sample_id;
  // Normalized dimension name (see normalize_dimension_name).
  std::string dimension;
  double mean_rating = 0.0;
  std::size_t n_raters = 0;
};

struct AggregationResult {
  std::vector<AggregatedLabel> labels;
  // (sample, dimension) pairs with only N/A ratings.
  std::size_t dropped_pairs = 0;
};

AggregationResult aggregate_labels(const std::vector<AnnotatedSample>& samples,
                                   const RatingMapping& mapping = {});

}  // namespace cpmi
