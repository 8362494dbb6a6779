#include "cpmi/ngram.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "cpmi/error.hpp"
#include "cpmi/hash.hpp"

namespace cpmi {

namespace {

constexpr std::string_view kBinaryMagic = "CPMI-NGRAM v";
constexpr std::string_view kBinaryHeader = "CPMI-NGRAM v1\n";
constexpr std::string_view kTextMagic = "CPMI-NGRAM-TEXT v";
constexpr std::string_view kTextHeader = "CPMI-NGRAM-TEXT v1";

// Counts for one corpus position at every context length 0..order-1.
void count_position(std::span<const TokenId> padded, std::size_t target, int order,
                    std::map<NGramModel::Context, NGramModel::ContextCounts>& counts) {
  const TokenId token = padded[target];
  for (int len = 0; len < order; ++len) {
    NGramModel::Context context(padded.begin() + static_cast<std::ptrdiff_t>(target) - len,
                                padded.begin() + static_cast<std::ptrdiff_t>(target));
    auto& entry = counts[std::move(context)];
    ++entry.total;
    ++entry.next[token];
  }
}

// ------------------------------------------------------------ binary io

class ByteWriter {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.append(s);
  }
  std::string take() { return std::move(bytes_); }
  void raw(std::string_view s) { bytes_.append(s); }

 private:
  void put(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) bytes_ += static_cast<char>((v >> (8 * i)) & 0xFF);
  }
  std::string bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(ErrorCode::FormatError, "truncated model file");
  }
  std::uint64_t get(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

template <typename T>
T parse_number(std::string_view field, std::string_view what) {
  T value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw Error(ErrorCode::FormatError,
                "bad " + std::string(what) + " \"" + std::string(field) + "\" in model dump");
  }
  return value;
}

double parse_double(std::string_view field) {
  const std::string copy(field);
  char* end = nullptr;
  const double value = std::strtod(copy.c_str(), &end);
  if (copy.empty() || end != copy.c_str() + copy.size()) {
    throw Error(ErrorCode::FormatError, "bad real \"" + copy + "\" in model dump");
  }
  return value;
}

std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t hit = line.find(delim, start);
    if (hit == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, hit - start));
    start = hit + 1;
  }
}

}  // namespace

// ------------------------------------------------------------------ model

NGramModel::NGramModel(int order, double smoothing_k, std::string separator,
                       std::vector<std::string> vocabulary, std::map<Context, ContextCounts> counts)
    : order_(order),
      k_(smoothing_k),
      separator_(std::move(separator)),
      vocab_(std::move(vocabulary)),
      unk_(-1),
      counts_(std::move(counts)) {
  if (order_ < 1) throw Error(ErrorCode::InvalidArgument, "n-gram order must be >= 1");
  if (!(k_ > 0.0) || !std::isfinite(k_)) {
    throw Error(ErrorCode::InvalidArgument, "smoothing k must be a positive real");
  }
  if (!std::is_sorted(vocab_.begin(), vocab_.end()) ||
      std::adjacent_find(vocab_.begin(), vocab_.end()) != vocab_.end()) {
    throw Error(ErrorCode::FormatError, "vocabulary must be sorted and unique");
  }
  index_.reserve(vocab_.size());
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    index_.emplace(vocab_[i], static_cast<TokenId>(i));
  }
  const auto unk = index_.find(std::string(kUnknownToken));
  if (unk == index_.end()) throw Error(ErrorCode::FormatError, "vocabulary lacks <unk>");
  unk_ = unk->second;

  const auto vocab_size = static_cast<TokenId>(vocab_.size());
  for (const auto& [context, entry] : counts_) {
    if (context.size() >= static_cast<std::size_t>(order_)) {
      throw Error(ErrorCode::FormatError, "context longer than order - 1");
    }
    for (const TokenId id : context) {
      if (id != kBeginMarker && (id < 0 || id >= vocab_size)) {
        throw Error(ErrorCode::FormatError, "context token id out of range");
      }
    }
    std::uint64_t sum = 0;
    for (const auto& [id, count] : entry.next) {
      if (id < 0 || id >= vocab_size) {
        throw Error(ErrorCode::FormatError, "predicted token id out of range");
      }
      sum += count;
    }
    if (sum != entry.total) {
      throw Error(ErrorCode::FormatError, "context total does not match its counts");
    }
  }
}

TokenId NGramModel::id_of(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? unk_ : it->second;
}

double NGramModel::probability(TokenId token, std::span<const TokenId> context) const {
  const auto history = static_cast<std::size_t>(order_ - 1);
  Context padded(history, kBeginMarker);
  const std::size_t take = std::min(history, context.size());
  std::copy(context.end() - static_cast<std::ptrdiff_t>(take), context.end(),
            padded.end() - static_cast<std::ptrdiff_t>(take));

  const double denom_vocab = k_ * static_cast<double>(vocab_.size());
  for (std::size_t len = history + 1; len-- > 0;) {
    const Context suffix(padded.end() - static_cast<std::ptrdiff_t>(len), padded.end());
    const auto it = counts_.find(suffix);
    if (it == counts_.end() || it->second.total == 0) continue;
    const auto hit = it->second.next.find(token);
    const double count = hit == it->second.next.end() ? 0.0 : static_cast<double>(hit->second);
    return (count + k_) / (static_cast<double>(it->second.total) + denom_vocab);
  }
  return 1.0 / static_cast<double>(vocab_.size());
}

double NGramModel::log_probability(TokenId token, std::span<const TokenId> context) const {
  return std::log(probability(token, context));
}

std::vector<TokenId> NGramModel::encode(std::string_view text) const {
  const TokenStream tokens = tokenize(text, separator_);
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& token : tokens) ids.push_back(id_of(token));
  return ids;
}

std::vector<double> NGramModel::token_log_probs(std::string_view text) const {
  const std::vector<TokenId> ids = encode(text);
  std::vector<double> log_probs;
  log_probs.reserve(ids.size());
  const std::span<const TokenId> all(ids);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    log_probs.push_back(log_probability(ids[i], all.first(i)));
  }
  return log_probs;
}

NGramModel train_ngram(std::span<const TokenStream> corpus, const NGramTrainOptions& options) {
  if (options.order < 1) throw Error(ErrorCode::InvalidArgument, "n-gram order must be >= 1");
  if (!(options.smoothing_k > 0.0) || !std::isfinite(options.smoothing_k)) {
    throw Error(ErrorCode::InvalidArgument, "smoothing k must be a positive real");
  }
  std::set<std::string> words;
  std::size_t total_tokens = 0;
  for (const auto& stream : corpus) {
    words.insert(stream.begin(), stream.end());
    total_tokens += stream.size();
  }
  if (total_tokens == 0) throw Error(ErrorCode::EmptyCorpus, "training corpus has no tokens");
  words.emplace(kUnknownToken);
  if (options.separator_in_vocab && !options.separator.empty()) words.insert(options.separator);
  std::vector<std::string> vocab(words.begin(), words.end());

  std::unordered_map<std::string, TokenId> index;
  for (std::size_t i = 0; i < vocab.size(); ++i) index.emplace(vocab[i], static_cast<TokenId>(i));

  const auto history = static_cast<std::size_t>(options.order - 1);
  std::map<NGramModel::Context, NGramModel::ContextCounts> counts;
  std::vector<TokenId> padded;
  for (const auto& stream : corpus) {
    if (stream.empty()) continue;
    padded.assign(history, kBeginMarker);
    for (const auto& token : stream) padded.push_back(index.at(token));
    for (std::size_t i = history; i < padded.size(); ++i) {
      count_position(padded, i, options.order, counts);
    }
  }
  return NGramModel(options.order, options.smoothing_k, options.separator, std::move(vocab),
                    std::move(counts));
}

// --------------------------------------------------------------- binary

std::string serialize_ngram(const NGramModel& model) {
  ByteWriter w;
  w.raw(kBinaryHeader);
  w.u32(static_cast<std::uint32_t>(model.order()));
  w.f64(model.smoothing_k());
  w.str(model.separator());
  w.u32(static_cast<std::uint32_t>(model.vocab_size()));
  for (const auto& token : model.vocabulary()) w.str(token);
  w.u64(model.counts().size());
  for (const auto& [context, entry] : model.counts()) {
    w.u32(static_cast<std::uint32_t>(context.size()));
    for (const TokenId id : context) w.i32(id);
    w.u64(entry.total);
    w.u32(static_cast<std::uint32_t>(entry.next.size()));
    for (const auto& [id, count] : entry.next) {
      w.i32(id);
      w.u64(count);
    }
  }
  return w.take();
}

NGramModel deserialize_ngram(std::string_view bytes) {
  if (!bytes.starts_with(kBinaryHeader)) {
    if (bytes.starts_with(kBinaryMagic)) {
      const std::size_t eol = bytes.find('\n');
      throw Error(ErrorCode::UnsupportedVersion,
                  "unsupported model version \"" + std::string(bytes.substr(0, eol)) + "\"");
    }
    throw Error(ErrorCode::FormatError, "not a CPMI-NGRAM model file");
  }
  ByteReader r(bytes.substr(kBinaryHeader.size()));
  const auto order = static_cast<int>(r.u32());
  const double k = r.f64();
  std::string separator = r.str();
  const std::uint32_t vocab_size = r.u32();
  std::vector<std::string> vocab;
  vocab.reserve(vocab_size);
  for (std::uint32_t i = 0; i < vocab_size; ++i) vocab.push_back(r.str());
  const std::uint64_t n_contexts = r.u64();
  std::map<NGramModel::Context, NGramModel::ContextCounts> counts;
  for (std::uint64_t c = 0; c < n_contexts; ++c) {
    NGramModel::Context context(r.u32());
    for (auto& id : context) id = r.i32();
    NGramModel::ContextCounts entry;
    entry.total = r.u64();
    const std::uint32_t n_next = r.u32();
    for (std::uint32_t j = 0; j < n_next; ++j) {
      const TokenId id = r.i32();
      entry.next[id] = r.u64();
    }
    counts.emplace(std::move(context), std::move(entry));
  }
  if (!r.done()) throw Error(ErrorCode::FormatError, "trailing bytes in model file");
  return NGramModel(order, k, std::move(separator), std::move(vocab), std::move(counts));
}

void save_ngram(const NGramModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write model file " + path);
  out << serialize_ngram(model);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

NGramModel load_ngram(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open model file " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string bytes = buffer.str();
  // Accept either the binary form or the text dump.
  if (std::string_view(bytes).starts_with(kTextMagic)) return parse_ngram_text(bytes);
  return deserialize_ngram(bytes);
}

// ----------------------------------------------------------------- text

std::string dump_ngram_text(const NGramModel& model) {
  std::string out(kTextHeader);
  out += '\n';
  char number[64];
  out += "order " + std::to_string(model.order()) + '\n';
  std::snprintf(number, sizeof number, "k %.17g\n", model.smoothing_k());
  out += number;
  out += "separator " + escape_fixture_text(model.separator()) + '\n';
  out += "vocab " + std::to_string(model.vocab_size()) + '\n';
  for (const auto& token : model.vocabulary()) out += escape_fixture_text(token) + '\n';
  out += "contexts " + std::to_string(model.counts().size()) + '\n';
  for (const auto& [context, entry] : model.counts()) {
    std::string ids;
    for (const TokenId id : context) {
      if (!ids.empty()) ids += ' ';
      ids += std::to_string(id);
    }
    out += ids.empty() ? "-" : ids;
    out += '\t' + std::to_string(entry.total) + '\t';
    bool first = true;
    for (const auto& [id, count] : entry.next) {
      if (!first) out += ' ';
      first = false;
      out += std::to_string(id) + ':' + std::to_string(count);
    }
    out += '\n';
  }
  return out;
}

NGramModel parse_ngram_text(std::string_view text) {
  if (!text.starts_with(kTextMagic)) throw Error(ErrorCode::FormatError, "not a model text dump");
  std::vector<std::string_view> lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.front() != kTextHeader) {
    throw Error(ErrorCode::UnsupportedVersion,
                "unsupported model dump version \"" + std::string(lines.front()) + "\"");
  }
  std::size_t at = 1;
  const auto next_line = [&]() -> std::string_view {
    if (at >= lines.size()) throw Error(ErrorCode::FormatError, "truncated model dump");
    return lines[at++];
  };
  const auto keyed = [&](std::string_view key) {
    const std::string_view line = next_line();
    if (!line.starts_with(key) || line.size() <= key.size() || line[key.size()] != ' ') {
      if (line == key) return std::string_view{};
      throw Error(ErrorCode::FormatError, "expected \"" + std::string(key) + "\" in model dump");
    }
    return line.substr(key.size() + 1);
  };

  const int order = parse_number<int>(keyed("order"), "order");
  const double k = parse_double(keyed("k"));
  std::string separator = unescape_fixture_text(keyed("separator"));
  const auto vocab_size = parse_number<std::size_t>(keyed("vocab"), "vocab size");
  std::vector<std::string> vocab;
  vocab.reserve(vocab_size);
  for (std::size_t i = 0; i < vocab_size; ++i) vocab.push_back(unescape_fixture_text(next_line()));
  const auto n_contexts = parse_number<std::size_t>(keyed("contexts"), "context count");
  std::map<NGramModel::Context, NGramModel::ContextCounts> counts;
  for (std::size_t c = 0; c < n_contexts; ++c) {
    const std::vector<std::string_view> fields = split(next_line(), '\t');
    if (fields.size() != 3) throw Error(ErrorCode::FormatError, "bad context line in model dump");
    NGramModel::Context context;
    if (fields[0] != "-") {
      for (const auto id : split(fields[0], ' ')) context.push_back(parse_number<TokenId>(id, "id"));
    }
    NGramModel::ContextCounts entry;
    entry.total = parse_number<std::uint64_t>(fields[1], "total");
    if (!fields[2].empty()) {
      for (const auto pair : split(fields[2], ' ')) {
        const std::size_t colon = pair.find(':');
        if (colon == std::string_view::npos) {
          throw Error(ErrorCode::FormatError, "bad count pair in model dump");
        }
        entry.next[parse_number<TokenId>(pair.substr(0, colon), "id")] =
            parse_number<std::uint64_t>(pair.substr(colon + 1), "count");
      }
    }
    counts.emplace(std::move(context), std::move(entry));
  }
  if (at != lines.size()) throw Error(ErrorCode::FormatError, "trailing lines in model dump");
  return NGramModel(order, k, std::move(separator), std::move(vocab), std::move(counts));
}

// ------------------------------------------------------------- provider

NGramProvider::NGramProvider(NGramModel model, std::string source)
    : model_(std::move(model)), source_(std::move(source)) {}

LLResult NGramProvider::loglikelihood(std::string_view text) const {
  const std::vector<double> log_probs = model_.token_log_probs(text);
  if (log_probs.empty()) throw Error(ErrorCode::EmptySequence, "text has no tokens");
  double sum = 0.0;
  for (const double lp : log_probs) sum += lp;
  return LLResult::from_sum(sum, log_probs.size());
}

nlohmann::json NGramProvider::describe() const {
  return {{"kind", "ngram"},
          {"model_sha256", sha256_hex(serialize_ngram(model_))},
          {"order", model_.order()},
          {"k", model_.smoothing_k()},
          {"vocab_size", model_.vocab_size()}};
}

}  // namespace cpmi
