#include "cpmi/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cpmi/error.hpp"

namespace cpmi {

namespace {

using nlohmann::json;

const std::set<std::string>& dialogue_level_keys() {
  static const std::set<std::string> keys = {
      "coherent", "errorrecovery", "consistent", "diverse",   "depth",
      "likeable", "understanding", "flexible",   "informative", "inquisitive"};
  return keys;
}

bool starts_with_icase(std::string_view text, std::string_view prefix) {
  if (text.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(text[i])) !=
        std::tolower(static_cast<unsigned char>(prefix[i]))) {
      return false;
    }
  }
  return true;
}

Speaker speaker_from_tag(std::string_view tag) {
  for (const std::string_view system_tag : {"system", "meena", "mitsuku"}) {
    if (starts_with_icase(tag, system_tag)) return Speaker::System;
  }
  return Speaker::User;
}

// "Speaker: text" -> tag and text. A tag is a short run of letters, digits
// and spaces before the first colon.
std::optional<std::pair<std::string, std::string>> split_tag(std::string_view line) {
  const std::size_t colon = line.find(':');
  if (colon == std::string_view::npos || colon == 0 || colon > 24) return std::nullopt;
  const std::string_view tag = line.substr(0, colon);
  for (const char c : tag) {
    const auto uc = static_cast<unsigned char>(c);
    if (!std::isalnum(uc) && c != ' ' && c != '_' && c != '-') return std::nullopt;
  }
  const std::string trimmed_tag = trim(tag);
  if (trimmed_tag.empty()) return std::nullopt;
  return std::make_pair(trimmed_tag, std::string(line.substr(colon + 1)));
}

struct RawTurn {
  Speaker speaker;
  std::string text;
};

void append_line(std::vector<RawTurn>& turns, std::string_view line) {
  if (trim(line).empty()) return;
  if (auto tagged = split_tag(line)) {
    turns.push_back(RawTurn{speaker_from_tag(tagged->first), std::move(tagged->second)});
  } else if (!turns.empty()) {
    turns.back().text += ' ';
    turns.back().text += line;
  } else {
    turns.push_back(RawTurn{Speaker::User, std::string(line)});
  }
}

std::vector<RawTurn> parse_context(const json& context, const std::string& where) {
  std::vector<RawTurn> turns;
  if (context.is_string()) {
    std::istringstream lines(context.get<std::string>());
    std::string line;
    while (std::getline(lines, line)) append_line(turns, line);
    return turns;
  }
  if (!context.is_array()) {
    throw Error(ErrorCode::SchemaError, where + ".context: expected a string or an array");
  }
  for (std::size_t i = 0; i < context.size(); ++i) {
    const auto& item = context[i];
    if (item.is_string()) {
      append_line(turns, item.get<std::string>());
    } else if (item.is_object() && item.contains("speaker") && item.contains("text") &&
               item["speaker"].is_string() && item["text"].is_string()) {
      turns.push_back(RawTurn{speaker_from_tag(item["speaker"].get<std::string>()),
                              item["text"].get<std::string>()});
    } else {
      throw Error(ErrorCode::SchemaError,
                  where + ".context[" + std::to_string(i) + "]: expected a string or " +
                      "{\"speaker\", \"text\"}");
    }
  }
  return turns;
}

Rating parse_rating(const json& value, const std::string& where) {
  if (value.is_null()) return Rating::NA;
  if (value.is_number_integer()) {
    switch (value.get<int>()) {
      case 0: return Rating::No;
      case 1: return Rating::Somewhat;
      case 2: return Rating::Yes;
      default: break;
    }
  } else if (value.is_string()) {
    std::string s = normalize_dimension_name(value.get<std::string>());
    if (s == "no") return Rating::No;
    if (s == "somewhat") return Rating::Somewhat;
    if (s == "yes") return Rating::Yes;
    if (s == "na") return Rating::NA;
  }
  throw Error(ErrorCode::SchemaError, where + ": unrecognized rating " + value.dump());
}

std::string sample_id_of(const json& entry, std::size_t index) {
  if (entry.contains("id")) {
    if (entry["id"].is_string()) return entry["id"].get<std::string>();
    if (entry["id"].is_number_integer()) return std::to_string(entry["id"].get<long long>());
  }
  return std::to_string(index);
}

bool is_dialogue_level(const json& entry) {
  if (entry.contains("response") || !entry.contains("annotations") ||
      !entry["annotations"].is_object()) {
    return false;
  }
  for (const auto& [key, value] : entry["annotations"].items()) {
    if (dialogue_level_keys().contains(normalize_dimension_name(key))) return true;
  }
  return false;
}

}  // namespace

std::string_view to_string(Rating rating) {
  switch (rating) {
    case Rating::No: return "No";
    case Rating::Somewhat: return "Somewhat";
    case Rating::Yes: return "Yes";
    case Rating::NA: return "N/A";
  }
  return "N/A";
}

FedLoadResult parse_fed(std::string_view json_text, const FedLoadOptions& options) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, std::string("malformed dataset JSON: ") + e.what());
  }
  const json* entries = &root;
  if (root.is_object() && root.contains("samples")) entries = &root["samples"];
  if (!entries->is_array()) {
    throw Error(ErrorCode::SchemaError, "dataset must be an array of samples");
  }

  FedLoadResult result;
  for (std::size_t index = 0; index < entries->size(); ++index) {
    const json& entry = (*entries)[index];
    const std::string where = "sample " + std::to_string(index);
    if (!entry.is_object()) throw Error(ErrorCode::SchemaError, where + ": expected an object");
    if (is_dialogue_level(entry)) {
      ++result.skipped_dialogue_level;
      continue;
    }
    for (const char* field : {"context", "response"}) {
      if (!entry.contains(field)) {
        throw Error(ErrorCode::SchemaError, where + ": missing \"" + field + "\"");
      }
    }
    if (!entry["response"].is_string()) {
      throw Error(ErrorCode::SchemaError, where + ".response: expected a string");
    }

    AnnotatedSample sample;
    sample.sample_id = sample_id_of(entry, index);
    for (const char* key : {"system", "model"}) {
      if (entry.contains(key) && entry[key].is_string()) {
        sample.system_name = entry[key].get<std::string>();
        break;
      }
    }

    if (entry.contains("annotations")) {
      const json& annotations = entry["annotations"];
      if (!annotations.is_object()) {
        throw Error(ErrorCode::SchemaError, where + ".annotations: expected an object");
      }
      for (const auto& [key, ratings] : annotations.items()) {
        const std::string field = where + ".annotations." + key;
        if (!ratings.is_array()) throw Error(ErrorCode::SchemaError, field + ": expected an array");
        if (normalize_dimension_name(key) == "overall") {
          for (const auto& v : ratings) {
            if (v.is_null()) continue;
            if (!v.is_number_integer() || v.get<int>() < 1 || v.get<int>() > 5) {
              throw Error(ErrorCode::SchemaError, field + ": overall ratings must be 1..5");
            }
            sample.overall.push_back(v.get<int>());
          }
          continue;
        }
        if (options.registry != nullptr && options.registry->find(key) == nullptr) {
          throw Error(ErrorCode::SchemaError, field + ": label matches no registry dimension");
        }
        std::vector<Rating>& out = sample.labels[key];
        for (const auto& v : ratings) out.push_back(parse_rating(v, field));
      }
    }

    const auto exclude = [&](std::string reason) {
      result.excluded.push_back(Exclusion{index, sample.sample_id, std::move(reason)});
    };

    std::vector<RawTurn> raw = parse_context(entry["context"], where);
    std::string response_text = entry["response"].get<std::string>();
    if (auto tagged = split_tag(response_text)) response_text = tagged->second;

    if (raw.empty()) {
      exclude("empty context");
      continue;
    }
    try {
      for (const auto& turn : raw) {
        sample.context.push_back(make_turn(turn.speaker, turn.text, options.separator));
      }
      sample.response = make_turn(Speaker::System, response_text, options.separator).text;
    } catch (const Error& e) {
      exclude(e.what());
      continue;
    }
    if (sample.context.back().speaker != Speaker::User) {
      exclude("context does not end with a user turn");
      continue;
    }
    if (sample.response == sample.context.back().text) {
      exclude("response duplicates the final context turn");
      continue;
    }
    result.samples.push_back(std::move(sample));
  }
  if (result.samples.empty()) {
    throw Error(ErrorCode::EmptyDataset, "dataset has no usable turn-level samples");
  }
  return result;
}

FedLoadResult load_fed(const std::string& path, const FedLoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open dataset " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_fed(buffer.str(), options);
  } catch (const Error& e) {
    throw e.with_context(path);
  }
}

std::vector<ScoringInput> to_scoring_inputs(const std::vector<AnnotatedSample>& samples) {
  std::vector<ScoringInput> inputs;
  inputs.reserve(samples.size());
  for (const auto& s : samples) inputs.push_back(ScoringInput{s.sample_id, {s.context, s.response}});
  return inputs;
}

double RatingMapping::operator()(Rating rating) const {
  switch (rating) {
    case Rating::No: return no;
    case Rating::Somewhat: return somewhat;
    case Rating::Yes: return yes;
    case Rating::NA: break;
  }
  throw Error(ErrorCode::InvalidArgument, "N/A has no numeric value");
}

RatingMapping parse_rating_mapping(std::string_view spec) {
  RatingMapping mapping;
  std::size_t start = 0;
  while (start <= spec.size()) {
    std::size_t comma = spec.find(',', start);
    if (comma == std::string_view::npos) comma = spec.size();
    const std::string item = trim(spec.substr(start, comma - start));
    start = comma + 1;
    if (item.empty()) continue;
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::InvalidArgument, "rating mapping item \"" + item + "\" lacks '='");
    }
    const std::string name = normalize_dimension_name(item.substr(0, eq));
    const std::string number = trim(item.substr(eq + 1));
    char* end = nullptr;
    const double value = std::strtod(number.c_str(), &end);
    if (number.empty() || end != number.c_str() + number.size()) {
      throw Error(ErrorCode::InvalidArgument, "bad rating value \"" + number + "\"");
    }
    if (name == "no") {
      mapping.no = value;
    } else if (name == "somewhat") {
      mapping.somewhat = value;
    } else if (name == "yes") {
      mapping.yes = value;
    } else {
      throw Error(ErrorCode::InvalidArgument, "unknown rating \"" + item.substr(0, eq) + "\"");
    }
  }
  return mapping;
}

AggregationResult aggregate_labels(const std::vector<AnnotatedSample>& samples,
                                   const RatingMapping& mapping) {
  AggregationResult result;
  for (const auto& sample : samples) {
    for (const auto& [name, ratings] : sample.labels) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const Rating r : ratings) {
        if (r == Rating::NA) continue;
        sum += mapping(r);
        ++n;
      }
      if (n == 0) {
        ++result.dropped_pairs;
        continue;
      }
      result.labels.push_back(AggregatedLabel{sample.sample_id, normalize_dimension_name(name),
                                              sum / static_cast<double>(n), n});
    }
  }
  return result;
}

}  // namespace cpmi
