#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cpmi/textseq.hpp"

namespace cpmi {

enum class Polarity { Positive, Negative };

struct Hypothesis {
  std::string text;
  Polarity polarity = Polarity::Positive;

  friend bool operator==(const Hypothesis&, const Hypothesis&) = default;
};

struct Dimension {
  std::string name;
  std::vector<Hypothesis> positives;
  std::vector<Hypothesis> negatives;

  friend bool operator==(const Dimension&, const Dimension&) = default;
};

// Lowercased with non-alphanumerics removed: "Semantically appropriate" and
// "semantically_appropriate" both become "semanticallyappropriate".
std::string normalize_dimension_name(std::string_view name);

class Registry {
 public:
  Registry() = default;
  // Validates the invariants (see add()).
  explicit Registry(std::vector<Dimension> dimensions, std::string source = {});

  // Throws DuplicateDimension (compared after normalization) or
  // EmptyPolaritySet.
  void add(Dimension dimension);

  const std::vector<Dimension>& dimensions() const { return dimensions_; }
  std::size_t size() const { return dimensions_.size(); }
  bool empty() const { return dimensions_.empty(); }
  const std::string& source() const { return source_; }

  // Lookup by normalized name.
  const Dimension* find(std::string_view name) const;

  // Total number of hypotheses over all dimensions.
  std::size_t hypothesis_count() const;

  friend bool operator==(const Registry& a, const Registry& b) {
    return a.dimensions_ == b.dimensions_ && a.source_ == b.source_;
  }

 private:
  std::vector<Dimension> dimensions_;
  std::string source_;
};

struct RegistryLoadOptions {
  // Reject unknown top-level and per-dimension keys.
  bool strict = true;
  std::string separator{kDefaultSeparator};
};

// {"dimensions": [{"name": str, "positive": [str], "negative": [str]}],
//  "source": str (optional)}
Registry parse_registry(std::string_view json_text, const RegistryLoadOptions& options = {});
Registry load_registry(const std::string& path, const RegistryLoadOptions& options = {});
std::string serialize_registry(const Registry& registry);

}  // namespace cpmi
