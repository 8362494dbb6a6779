#include "cpmi/hypotheses.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cpmi/error.hpp"

namespace cpmi {

namespace {

std::pair<std::size_t, std::size_t> line_and_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

std::vector<Hypothesis> read_hypotheses(const nlohmann::json& list, Polarity polarity,
                                        const std::string& field,
                                        const RegistryLoadOptions& options) {
  if (!list.is_array()) throw Error(ErrorCode::ParseError, field + ": expected an array");
  std::vector<Hypothesis> hypotheses;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string where = field + "[" + std::to_string(i) + "]";
    if (!list[i].is_string()) throw Error(ErrorCode::ParseError, where + ": expected a string");
    std::string text = trim(list[i].get<std::string>());
    if (text.empty()) throw Error(ErrorCode::ParseError, where + ": empty hypothesis");
    if (!options.separator.empty() && text.find(options.separator) != std::string::npos) {
      throw Error(ErrorCode::ParseError, where + ": hypothesis contains the separator literal");
    }
    hypotheses.push_back(Hypothesis{std::move(text), polarity});
  }
  return hypotheses;
}

}  // namespace

std::string normalize_dimension_name(std::string_view name) {
  std::string out;
  for (const char c : name) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc)) out += static_cast<char>(std::tolower(uc));
  }
  return out;
}

Registry::Registry(std::vector<Dimension> dimensions, std::string source)
    : source_(std::move(source)) {
  for (auto& dimension : dimensions) add(std::move(dimension));
}

void Registry::add(Dimension dimension) {
  if (normalize_dimension_name(dimension.name).empty()) {
    throw Error(ErrorCode::ParseError, "dimension name has no alphanumeric characters");
  }
  if (dimension.positives.empty() || dimension.negatives.empty()) {
    throw Error(ErrorCode::EmptyPolaritySet,
                "dimension \"" + dimension.name + "\" needs at least one positive and one " +
                    "negative hypothesis");
  }
  if (find(dimension.name) != nullptr) {
    throw Error(ErrorCode::DuplicateDimension, "duplicate dimension \"" + dimension.name + "\"");
  }
  dimensions_.push_back(std::move(dimension));
}

const Dimension* Registry::find(std::string_view name) const {
  const std::string key = normalize_dimension_name(name);
  for (const auto& dimension : dimensions_) {
    if (normalize_dimension_name(dimension.name) == key) return &dimension;
  }
  return nullptr;
}

std::size_t Registry::hypothesis_count() const {
  std::size_t total = 0;
  for (const auto& d : dimensions_) total += d.positives.size() + d.negatives.size();
  return total;
}

Registry parse_registry(std::string_view json_text, const RegistryLoadOptions& options) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, column] = line_and_column(json_text, e.byte == 0 ? 0 : e.byte - 1);
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ", column " +
                                           std::to_string(column) + ": malformed JSON");
  }
  if (!root.is_object()) throw Error(ErrorCode::ParseError, "top level must be an object");
  if (options.strict) {
    for (const auto& [key, value] : root.items()) {
      if (key != "dimensions" && key != "source") {
        throw Error(ErrorCode::ParseError, "unknown top-level key \"" + key + "\"");
      }
    }
  }
  if (!root.contains("dimensions") || !root["dimensions"].is_array()) {
    throw Error(ErrorCode::ParseError, "\"dimensions\" must be an array");
  }
  std::string source;
  if (root.contains("source")) {
    if (!root["source"].is_string()) throw Error(ErrorCode::ParseError, "\"source\" must be a string");
    source = root["source"].get<std::string>();
  }

  Registry registry({}, std::move(source));
  const auto& dims = root["dimensions"];
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const std::string where = "dimensions[" + std::to_string(i) + "]";
    const auto& entry = dims[i];
    if (!entry.is_object()) throw Error(ErrorCode::ParseError, where + ": expected an object");
    if (options.strict) {
      for (const auto& [key, value] : entry.items()) {
        if (key != "name" && key != "positive" && key != "negative") {
          throw Error(ErrorCode::ParseError, where + ": unknown key \"" + key + "\"");
        }
      }
    }
    if (!entry.contains("name") || !entry["name"].is_string()) {
      throw Error(ErrorCode::ParseError, where + ".name: expected a string");
    }
    Dimension dimension;
    dimension.name = entry["name"].get<std::string>();
    const auto polarity_list = [&](const char* key) {
      return entry.contains(key) ? entry[key] : nlohmann::json::array();
    };
    dimension.positives =
        read_hypotheses(polarity_list("positive"), Polarity::Positive, where + ".positive", options);
    dimension.negatives =
        read_hypotheses(polarity_list("negative"), Polarity::Negative, where + ".negative", options);
    try {
      registry.add(std::move(dimension));
    } catch (const Error& e) {
      throw e.with_context(where);
    }
  }
  return registry;
}

Registry load_registry(const std::string& path, const RegistryLoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open registry file " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_registry(buffer.str(), options);
  } catch (const Error& e) {
    throw e.with_context(path);
  }
}

std::string serialize_registry(const Registry& registry) {
  nlohmann::ordered_json root;
  if (!registry.source().empty()) root["source"] = registry.source();
  auto dims = nlohmann::ordered_json::array();
  for (const auto& d : registry.dimensions()) {
    nlohmann::ordered_json entry;
    entry["name"] = d.name;
    auto texts = [](const std::vector<Hypothesis>& hs) {
      auto out = nlohmann::ordered_json::array();
      for (const auto& h : hs) out.push_back(h.text);
      return out;
    };
    entry["positive"] = texts(d.positives);
    entry["negative"] = texts(d.negatives);
    dims.push_back(std::move(entry));
  }
  root["dimensions"] = std::move(dims);
  return root.dump(2) + "\n";
}

}  // namespace cpmi
