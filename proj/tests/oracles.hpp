#pragma once

// Brute-force reference implementations. They favour obviousness over speed
// and share no code with the library beyond plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace oracle {

using Tokens = std::vector<std::string>;

// Whitespace split, then every separator occurrence becomes its own token.
inline Tokens tokenize(const std::string& text, const std::string& separator) {
  Tokens out;
  std::string word;
  auto flush_word = [&] {
    if (word.empty()) return;
    std::size_t start = 0;
    while (!separator.empty()) {
      const std::size_t at = word.find(separator, start);
      if (at == std::string::npos) break;
      if (at > start) out.push_back(word.substr(start, at - start));
      out.push_back(separator);
      start = at + separator.size();
    }
    if (start < word.size()) out.push_back(word.substr(start));
    word.clear();
  };
  for (const char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      flush_word();
    } else {
      word.push_back(c);
    }
  }
  flush_word();
  return out;
}

// Add-k n-gram model answered by rescanning the training corpus on every
// query. The begin marker is a string that no tokenizer can produce.
class CountingModel {
 public:
  CountingModel(std::vector<Tokens> corpus, int order, double k, std::string separator,
                bool separator_in_vocab)
      : corpus_(std::move(corpus)), order_(order), k_(k), separator_(std::move(separator)) {
    for (const auto& s : corpus_) vocab_.insert(s.begin(), s.end());
    vocab_.insert("<unk>");
    if (separator_in_vocab) vocab_.insert(separator_);
  }

  std::size_t vocab_size() const { return vocab_.size(); }
  const std::set<std::string>& vocabulary() const { return vocab_; }

  std::string map_oov(const std::string& token) const {
    return vocab_.count(token) ? token : "<unk>";
  }

  double probability(const std::string& raw_token, const Tokens& raw_context) const {
    const std::string token = map_oov(raw_token);
    Tokens context;
    for (const auto& t : raw_context) context.push_back(map_oov(t));
    const std::size_t history = static_cast<std::size_t>(order_ - 1);
    Tokens padded(history, kBegin);
    for (std::size_t i = 0; i < std::min(history, context.size()); ++i) {
      padded[history - 1 - i] = context[context.size() - 1 - i];
    }
    for (std::size_t len = history + 1; len-- > 0;) {
      const Tokens suffix(padded.end() - static_cast<std::ptrdiff_t>(len), padded.end());
      std::uint64_t total = 0;
      std::uint64_t count = 0;
      for (const auto& stream : corpus_) {
        Tokens s(history, kBegin);
        s.insert(s.end(), stream.begin(), stream.end());
        for (std::size_t i = history; i < s.size(); ++i) {
          bool match = true;
          for (std::size_t j = 0; j < len; ++j) {
            if (s[i - len + j] != suffix[j]) match = false;
          }
          if (!match) continue;
          ++total;
          if (s[i] == token) ++count;
        }
      }
      if (total > 0) {
        return (static_cast<double>(count) + k_) /
               (static_cast<double>(total) + k_ * static_cast<double>(vocab_.size()));
      }
    }
    return 1.0 / static_cast<double>(vocab_.size());
  }

  double sum_ll(const std::string& text) const {
    const Tokens tokens = tokenize(text, separator_);
    double sum = 0.0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      sum += std::log(probability(tokens[i], Tokens(tokens.begin(), tokens.begin() + i)));
    }
    return sum;
  }

  double avg_ll(const std::string& text) const {
    return sum_ll(text) / static_cast<double>(tokenize(text, separator_).size());
  }

 private:
  inline static const std::string kBegin = "\x01<s>";
  std::vector<Tokens> corpus_;
  int order_;
  double k_;
  std::string separator_;
  std::set<std::string> vocab_;
};

// Summed-mode C-PMI with turns joined by `joiner` (separator or space).
inline double cpmi_sum(const CountingModel& m, const std::string& r, const std::string& x,
                       const std::string& h, const std::string& joiner) {
  return m.sum_ll(r + joiner + x + joiner + h) + m.sum_ll(h) - m.sum_ll(r + joiner + h) -
         m.sum_ll(x + joiner + h);
}

// rank_i = 1 + #{j : v_j < v_i} + (#{j : v_j == v_i} - 1) / 2
inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0;
    double equal = 0;
    for (const double w : v) {
      if (w < v[i]) ++less;
      if (w == v[i]) ++equal;
    }
    ranks[i] = 1.0 + less + (equal - 1.0) / 2.0;
  }
  return ranks;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

inline double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(average_ranks(x), average_ranks(y));
}

struct Fraction {
  std::uint64_t count = 0;
  std::uint64_t total = 0;
};

// Two-sided permutation p-value: the share of all n! reorderings of y whose
// |rho| is at least the observed |rho|.
inline Fraction permutation_pvalue(const std::vector<double>& x, const std::vector<double>& y) {
  const double observed = std::fabs(spearman_rho(x, y));
  std::vector<std::size_t> order(y.size());
  std::iota(order.begin(), order.end(), 0);
  Fraction f;
  do {
    std::vector<double> permuted(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) permuted[i] = y[order[i]];
    ++f.total;
    if (std::fabs(spearman_rho(x, permuted)) >= observed - 1e-9) ++f.count;
  } while (std::next_permutation(order.begin(), order.end()));
  return f;
}

}  // namespace oracle
