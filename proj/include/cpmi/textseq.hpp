#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cpmi {

inline constexpr std::string_view kDefaultSeparator = "<|endoftext|>";

enum class Speaker { User, System };

std::string_view to_string(Speaker speaker);

struct Turn {
  Speaker speaker = Speaker::User;
  std::string text;

  friend bool operator==(const Turn&, const Turn&) = default;
};

// Validates and trims a turn at ingestion. Throws EmptyPart when nothing is
// left after trimming and SeparatorInText when the separator literal occurs.
Turn make_turn(Speaker speaker, std::string_view text,
               std::string_view separator = kDefaultSeparator);

// Trims ASCII and Unicode whitespace from both ends.
std::string trim(std::string_view text);

// Parts joined by a separator. part_boundaries[i] is the byte offset where
// part i starts in text.
struct AssembledSequence {
  std::string text;
  std::vector<std::size_t> part_boundaries;
};

// Pure join; parts must be non-empty after trimming (EmptyPart) and the
// separator non-empty (InvalidArgument).
AssembledSequence assemble(std::span<const std::string> parts,
                           std::string_view separator = kDefaultSeparator);

// Splits text on every occurrence of the separator.
std::vector<std::string> split_on_separator(std::string_view text,
                                            std::string_view separator);

using TokenStream = std::vector<std::string>;

// Whitespace tokenizer; each separator occurrence is one atomic token.
TokenStream tokenize(std::string_view text,
                     std::string_view separator = kDefaultSeparator);

// How scorer sequences are built from turns and hypotheses.
struct SequenceOptions {
  std::string separator{kDefaultSeparator};
  // When false, parts are joined by a single space instead of the separator.
  bool use_separator = true;
  // When false, the hypothesis is appended with a space even if turns are
  // joined by the separator.
  bool separator_before_hypothesis = true;

  std::string_view turn_joiner() const;
  std::string_view hypothesis_joiner() const;
};

// {parts..., hypothesis} as one text.
std::string join_with_hypothesis(std::span<const std::string> parts,
                                 std::string_view hypothesis,
                                 const SequenceOptions& options);

}  // namespace cpmi
