#include "cpmi/textseq.hpp"

#include <cstdint>

#include "cpmi/error.hpp"

namespace cpmi {

namespace {

// Decodes one UTF-8 code point at text[pos]. Returns its byte length, or 1
// for malformed input (the byte is then treated as an ordinary character).
std::size_t decode_utf8(std::string_view text, std::size_t pos, char32_t& cp) {
  const auto lead = static_cast<unsigned char>(text[pos]);
  std::size_t len = 1;
  if (lead < 0x80) {
    cp = lead;
    return 1;
  } else if ((lead >> 5) == 0x6) {
    cp = lead & 0x1F;
    len = 2;
  } else if ((lead >> 4) == 0xE) {
    cp = lead & 0x0F;
    len = 3;
  } else if ((lead >> 3) == 0x1E) {
    cp = lead & 0x07;
    len = 4;
  } else {
    cp = lead;
    return 1;
  }
  if (pos + len > text.size()) {
    cp = lead;
    return 1;
  }
  for (std::size_t i = 1; i < len; ++i) {
    const auto cont = static_cast<unsigned char>(text[pos + i]);
    if ((cont >> 6) != 0x2) {
      cp = lead;
      return 1;
    }
    cp = (cp << 6) | (cont & 0x3F);
  }
  return len;
}

bool is_unicode_space(char32_t cp) {
  switch (cp) {
    case U' ': case U'\t': case U'\n': case U'\v': case U'\f': case U'\r':
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

// Length of the whitespace code point at pos, 0 if none.
std::size_t space_at(std::string_view text, std::size_t pos) {
  char32_t cp = 0;
  const std::size_t len = decode_utf8(text, pos, cp);
  return is_unicode_space(cp) ? len : 0;
}

void split_whitespace(std::string_view text, TokenStream& out) {
  std::size_t pos = 0;
  std::size_t start = std::string_view::npos;
  while (pos < text.size()) {
    if (const std::size_t ws = space_at(text, pos); ws > 0) {
      if (start != std::string_view::npos) {
        out.emplace_back(text.substr(start, pos - start));
        start = std::string_view::npos;
      }
      pos += ws;
    } else {
      if (start == std::string_view::npos) start = pos;
      char32_t cp = 0;
      pos += decode_utf8(text, pos, cp);
    }
  }
  if (start != std::string_view::npos) out.emplace_back(text.substr(start));
}

}  // namespace

std::string_view to_string(Speaker speaker) {
  return speaker == Speaker::User ? "User" : "System";
}

std::string trim(std::string_view text) {
  std::size_t begin = 0;
  while (begin < text.size()) {
    const std::size_t ws = space_at(text, begin);
    if (ws == 0) break;
    begin += ws;
  }
  // Walk forward to find the end of the last non-space code point.
  std::size_t end = begin;
  std::size_t pos = begin;
  while (pos < text.size()) {
    if (const std::size_t ws = space_at(text, pos); ws > 0) {
      pos += ws;
    } else {
      char32_t cp = 0;
      pos += decode_utf8(text, pos, cp);
      end = pos;
    }
  }
  return std::string(text.substr(begin, end - begin));
}

Turn make_turn(Speaker speaker, std::string_view text, std::string_view separator) {
  std::string trimmed = trim(text);
  if (trimmed.empty()) {
    throw Error(ErrorCode::EmptyPart, "turn text is empty after trimming");
  }
  if (!separator.empty() && trimmed.find(separator) != std::string::npos) {
    throw Error(ErrorCode::SeparatorInText,
                "turn text contains the separator literal " + std::string(separator));
  }
  return Turn{speaker, std::move(trimmed)};
}

AssembledSequence assemble(std::span<const std::string> parts, std::string_view separator) {
  if (separator.empty()) {
    throw Error(ErrorCode::InvalidArgument, "separator must be non-empty");
  }
  AssembledSequence seq;
  seq.part_boundaries.reserve(parts.size());
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (trim(parts[i]).empty()) {
      throw Error(ErrorCode::EmptyPart, "part " + std::to_string(i) + " is empty");
    }
    if (i > 0) seq.text += separator;
    seq.part_boundaries.push_back(seq.text.size());
    seq.text += parts[i];
  }
  return seq;
}

std::vector<std::string> split_on_separator(std::string_view text, std::string_view separator) {
  std::vector<std::string> parts;
  if (separator.empty()) {
    parts.emplace_back(text);
    return parts;
  }
  std::size_t start = 0;
  for (;;) {
    const std::size_t hit = text.find(separator, start);
    if (hit == std::string_view::npos) {
      parts.emplace_back(text.substr(start));
      return parts;
    }
    parts.emplace_back(text.substr(start, hit - start));
    start = hit + separator.size();
  }
}

TokenStream tokenize(std::string_view text, std::string_view separator) {
  TokenStream tokens;
  if (separator.empty()) {
    split_whitespace(text, tokens);
    return tokens;
  }
  std::size_t start = 0;
  for (;;) {
    const std::size_t hit = text.find(separator, start);
    if (hit == std::string_view::npos) {
      split_whitespace(text.substr(start), tokens);
      return tokens;
    }
    split_whitespace(text.substr(start, hit - start), tokens);
    tokens.emplace_back(separator);
    start = hit + separator.size();
  }
}

std::string_view SequenceOptions::turn_joiner() const {
  return use_separator ? std::string_view(separator) : std::string_view(" ");
}

std::string_view SequenceOptions::hypothesis_joiner() const {
  return use_separator && separator_before_hypothesis ? std::string_view(separator)
                                                      : std::string_view(" ");
}

std::string join_with_hypothesis(std::span<const std::string> parts,
                                 std::string_view hypothesis,
                                 const SequenceOptions& options) {
  if (parts.empty()) {
    throw Error(ErrorCode::InvalidArgument, "no parts to prefix the hypothesis with");
  }
  if (trim(hypothesis).empty()) {
    throw Error(ErrorCode::EmptyPart, "hypothesis is empty");
  }
  std::string text = assemble(parts, options.turn_joiner()).text;
  text += options.hypothesis_joiner();
  text += hypothesis;
  return text;
}

}  // namespace cpmi
