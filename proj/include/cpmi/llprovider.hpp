#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace cpmi {

// Log-likelihood of one text sequence, in nats.
struct LLResult {
  double sum_ll = 0.0;
  std::size_t num_tokens = 1;
  double avg_ll = 0.0;

  // Throws InvalidArgument when num_tokens == 0.
  static LLResult from_sum(double sum_ll, std::size_t num_tokens);

  friend bool operator==(const LLResult&, const LLResult&) = default;
};

// The language model behind every score. Implementations must be safe for
// concurrent calls to the const methods.
class LLProvider {
 public:
  virtual ~LLProvider() = default;

  virtual LLResult loglikelihood(std::string_view text) const = 0;

  // Element i equals loglikelihood(texts[i]). Throws EmptyBatch on an empty
  // list; per-item failures are rethrown with the item index.
  virtual std::vector<LLResult> loglikelihood_batch(std::span<const std::string> texts) const;

  // Identity recorded in run manifests (kind, model hash or URL, ...).
  virtual nlohmann::json describe() const = 0;
};

using ProviderPtr = std::shared_ptr<const LLProvider>;

// Exact-match replay table.
class FixtureProvider final : public LLProvider {
 public:
  explicit FixtureProvider(std::map<std::string, LLResult> table, std::string source = {});

  LLResult loglikelihood(std::string_view text) const override;
  nlohmann::json describe() const override;

  const std::map<std::string, LLResult, std::less<>>& table() const { return table_; }
  // File the table was read from, if any.
  const std::string& source() const { return source_; }

 private:
  std::map<std::string, LLResult, std::less<>> table_;
  std::string source_;
};

// Fixture file: one record per line, "text<TAB>sum_ll<TAB>num_tokens", with
// backslash, tab and newline in text escaped as \\, \t and \n.
std::map<std::string, LLResult> read_fixture(const std::string& path);
std::map<std::string, LLResult> parse_fixture(std::string_view content);
std::string format_fixture(const std::map<std::string, LLResult>& table);
void write_fixture(const std::string& path, const std::map<std::string, LLResult>& table);

std::string escape_fixture_text(std::string_view text);
std::string unescape_fixture_text(std::string_view text);

struct CacheCounters {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t inner_calls = 0;
};

// Exact-text memo around another provider. Concurrent identical queries
// share one inner call; failed lookups are not cached.
class CachedProvider final : public LLProvider {
 public:
  explicit CachedProvider(ProviderPtr inner);

  LLResult loglikelihood(std::string_view text) const override;
  std::vector<LLResult> loglikelihood_batch(std::span<const std::string> texts) const override;
  nlohmann::json describe() const override;

  CacheCounters counters() const;

 private:
  using Slot = std::shared_future<LLResult>;

  ProviderPtr inner_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::string, Slot> slots_;
  mutable std::atomic<std::uint64_t> hits_{0};
  mutable std::atomic<std::uint64_t> misses_{0};
  mutable std::atomic<std::uint64_t> inner_calls_{0};
};

ProviderPtr cached(ProviderPtr inner);

// Counts texts forwarded to the inner provider.
class CountingProvider final : public LLProvider {
 public:
  explicit CountingProvider(ProviderPtr inner) : inner_(std::move(inner)) {}

  LLResult loglikelihood(std::string_view text) const override;
  std::vector<LLResult> loglikelihood_batch(std::span<const std::string> texts) const override;
  nlohmann::json describe() const override { return inner_->describe(); }

  std::uint64_t calls() const { return calls_.load(); }

 private:
  ProviderPtr inner_;
  mutable std::atomic<std::uint64_t> calls_{0};
};

// Remembers every successful query so a run can be replayed from a fixture.
class RecordingProvider final : public LLProvider {
 public:
  explicit RecordingProvider(ProviderPtr inner) : inner_(std::move(inner)) {}

  LLResult loglikelihood(std::string_view text) const override;
  nlohmann::json describe() const override { return inner_->describe(); }

  std::map<std::string, LLResult> recorded() const;

 private:
  ProviderPtr inner_;
  mutable std::mutex mutex_;
  mutable std::map<std::string, LLResult> recorded_;
};

}  // namespace cpmi
