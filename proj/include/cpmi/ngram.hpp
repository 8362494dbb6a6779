#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cpmi/llprovider.hpp"
#include "cpmi/textseq.hpp"

namespace cpmi {

inline constexpr std::string_view kUnknownToken = "<unk>";

using TokenId = std::int32_t;
// Left padding for short contexts. Never predicted, not part of V.
inline constexpr TokenId kBeginMarker = -1;

struct NGramTrainOptions {
  int order = 3;
  double smoothing_k = 1.0;
  std::string separator{kDefaultSeparator};
  // Adds the separator to V even if the corpus never contains it.
  bool separator_in_vocab = true;
};

// Add-k smoothed n-gram model with recursive backoff to shorter contexts.
//
// P(v | c) = (count(c, v) + k) / (total(c) + k |V|) at the longest suffix of c
// that was observed as a context during training. The empty context is
// always observed, so the recursion ends at the unigram level.
class NGramModel {
 public:
  struct ContextCounts {
    std::uint64_t total = 0;
    std::map<TokenId, std::uint64_t> next;
    friend bool operator==(const ContextCounts&, const ContextCounts&) = default;
  };
  using Context = std::vector<TokenId>;

  NGramModel(int order, double smoothing_k, std::string separator,
             std::vector<std::string> vocabulary, std::map<Context, ContextCounts> counts);

  int order() const { return order_; }
  double smoothing_k() const { return k_; }
  const std::string& separator() const { return separator_; }
  // Sorted; contains <unk>.
  const std::vector<std::string>& vocabulary() const { return vocab_; }
  std::size_t vocab_size() const { return vocab_.size(); }
  const std::map<Context, ContextCounts>& counts() const { return counts_; }

  // Id of token, or of <unk> when out of vocabulary.
  TokenId id_of(std::string_view token) const;
  TokenId unk_id() const { return unk_; }

  // Context may be longer than order-1 (it is truncated) or shorter (it is
  // left-padded with the begin marker).
  double probability(TokenId token, std::span<const TokenId> context) const;
  double log_probability(TokenId token, std::span<const TokenId> context) const;

  std::vector<TokenId> encode(std::string_view text) const;
  // Per-token natural-log probabilities of text. Empty text yields {}.
  std::vector<double> token_log_probs(std::string_view text) const;

  friend bool operator==(const NGramModel&, const NGramModel&) = default;

 private:
  int order_;
  double k_;
  std::string separator_;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, TokenId> index_;
  TokenId unk_;
  std::map<Context, ContextCounts> counts_;
};

// Throws EmptyCorpus when no stream has a token, InvalidArgument on
// order < 1 or smoothing_k <= 0.
NGramModel train_ngram(std::span<const TokenStream> corpus, const NGramTrainOptions& options);

// Binary model file: "CPMI-NGRAM v1\n" then little-endian fields.
void save_ngram(const NGramModel& model, const std::string& path);
NGramModel load_ngram(const std::string& path);
std::string serialize_ngram(const NGramModel& model);
NGramModel deserialize_ngram(std::string_view bytes);

// Lossless text dump ("CPMI-NGRAM-TEXT v1"), diffable.
std::string dump_ngram_text(const NGramModel& model);
NGramModel parse_ngram_text(std::string_view text);

class NGramProvider final : public LLProvider {
 public:
  explicit NGramProvider(NGramModel model, std::string source = {});

  // sum over tokens of log P(token | preceding order-1 tokens).
  // Throws EmptySequence when text has no tokens.
  LLResult loglikelihood(std::string_view text) const override;
  nlohmann::json describe() const override;

  const NGramModel& model() const { return model_; }
  const std::string& source() const { return source_; }

 private:
  NGramModel model_;
  std::string source_;
};

}  // namespace cpmi
