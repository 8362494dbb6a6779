#include "cpmi/llprovider.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cpmi/error.hpp"
#include "cpmi/hash.hpp"

namespace cpmi {

LLResult LLResult::from_sum(double sum_ll, std::size_t num_tokens) {
  if (num_tokens == 0) {
    throw Error(ErrorCode::InvalidArgument, "LLResult requires at least one token");
  }
  return LLResult{sum_ll, num_tokens, sum_ll / static_cast<double>(num_tokens)};
}

std::vector<LLResult> LLProvider::loglikelihood_batch(std::span<const std::string> texts) const {
  if (texts.empty()) throw Error(ErrorCode::EmptyBatch, "empty batch");
  std::vector<LLResult> results;
  results.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    try {
      results.push_back(loglikelihood(texts[i]));
    } catch (const Error& e) {
      throw e.with_context("batch item " + std::to_string(i));
    }
  }
  return results;
}

// ---------------------------------------------------------------- fixtures

FixtureProvider::FixtureProvider(std::map<std::string, LLResult> table, std::string source)
    : table_(table.begin(), table.end()), source_(std::move(source)) {}

LLResult FixtureProvider::loglikelihood(std::string_view text) const {
  const auto it = table_.find(text);
  if (it == table_.end()) {
    throw Error(ErrorCode::FixtureMiss, "no fixture entry for \"" + escape_fixture_text(text) + "\"");
  }
  return it->second;
}

nlohmann::json FixtureProvider::describe() const {
  const std::map<std::string, LLResult> ordered(table_.begin(), table_.end());
  return {{"kind", "fixture"},
          {"table_sha256", sha256_hex(format_fixture(ordered))},
          {"entries", table_.size()}};
}

std::string escape_fixture_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (const char c : text) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape_fixture_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '\\') {
      out += text[i];
      continue;
    }
    if (i + 1 == text.size()) {
      throw Error(ErrorCode::FormatError, "dangling escape in fixture text");
    }
    switch (text[++i]) {
      case '\\': out += '\\'; break;
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      default:
        throw Error(ErrorCode::FormatError,
                    std::string("unknown escape \\") + text[i] + " in fixture text");
    }
  }
  return out;
}

std::map<std::string, LLResult> parse_fixture(std::string_view content) {
  std::map<std::string, LLResult> table;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < content.size()) {
    std::size_t end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    const auto where = [&] { return "fixture line " + std::to_string(line_no); };
    const std::size_t tab2 = line.rfind('\t');
    const std::size_t tab1 = tab2 == std::string_view::npos || tab2 == 0
                                 ? std::string_view::npos
                                 : line.rfind('\t', tab2 - 1);
    if (tab1 == std::string_view::npos) {
      throw Error(ErrorCode::FormatError, where() + ": expected 3 tab-separated fields");
    }
    const std::string text = unescape_fixture_text(line.substr(0, tab1));
    const std::string sum_field(line.substr(tab1 + 1, tab2 - tab1 - 1));
    const std::string_view count_field = line.substr(tab2 + 1);

    char* parse_end = nullptr;
    const double sum_ll = std::strtod(sum_field.c_str(), &parse_end);
    if (sum_field.empty() || parse_end != sum_field.c_str() + sum_field.size() ||
        !std::isfinite(sum_ll)) {
      throw Error(ErrorCode::FormatError, where() + ": bad sum_ll \"" + sum_field + "\"");
    }
    std::size_t num_tokens = 0;
    const auto [ptr, ec] =
        std::from_chars(count_field.data(), count_field.data() + count_field.size(), num_tokens);
    if (ec != std::errc() || ptr != count_field.data() + count_field.size() || num_tokens == 0) {
      throw Error(ErrorCode::FormatError,
                  where() + ": bad num_tokens \"" + std::string(count_field) + "\"");
    }
    if (!table.emplace(text, LLResult::from_sum(sum_ll, num_tokens)).second) {
      throw Error(ErrorCode::FormatError, where() + ": duplicate text");
    }
  }
  return table;
}

std::map<std::string, LLResult> read_fixture(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open fixture file " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_fixture(buffer.str());
  } catch (const Error& e) {
    throw e.with_context(path);
  }
}

std::string format_fixture(const std::map<std::string, LLResult>& table) {
  std::string out;
  char number[64];
  for (const auto& [text, result] : table) {
    out += escape_fixture_text(text);
    std::snprintf(number, sizeof number, "\t%.17g\t%zu\n", result.sum_ll, result.num_tokens);
    out += number;
  }
  return out;
}

void write_fixture(const std::string& path, const std::map<std::string, LLResult>& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write fixture file " + path);
  out << format_fixture(table);
}

// ------------------------------------------------------------------- cache

CachedProvider::CachedProvider(ProviderPtr inner) : inner_(std::move(inner)) {
  if (!inner_) throw Error(ErrorCode::InvalidArgument, "cached() needs an inner provider");
}

LLResult CachedProvider::loglikelihood(std::string_view text) const {
  std::promise<LLResult> promise;
  Slot slot;
  bool owner = false;
  {
    std::lock_guard lock(mutex_);
    auto it = slots_.find(std::string(text));
    if (it != slots_.end()) {
      slot = it->second;
    } else {
      slot = promise.get_future().share();
      slots_.emplace(std::string(text), slot);
      owner = true;
    }
  }
  if (!owner) {
    ++hits_;
    return slot.get();
  }

  ++misses_;
  ++inner_calls_;
  try {
    promise.set_value(inner_->loglikelihood(text));
  } catch (...) {
    {
      std::lock_guard lock(mutex_);
      slots_.erase(std::string(text));
    }
    // Waiters already holding the slot see the same failure.
    promise.set_exception(std::current_exception());
    throw;
  }
  return slot.get();
}

std::vector<LLResult> CachedProvider::loglikelihood_batch(std::span<const std::string> texts) const {
  if (texts.empty()) throw Error(ErrorCode::EmptyBatch, "empty batch");

  std::vector<Slot> slots(texts.size());
  std::vector<std::string> to_fetch;
  std::vector<std::promise<LLResult>> promises;
  {
    std::lock_guard lock(mutex_);
    for (std::size_t i = 0; i < texts.size(); ++i) {
      auto it = slots_.find(texts[i]);
      if (it != slots_.end()) {
        slots[i] = it->second;
        ++hits_;
        continue;
      }
      promises.emplace_back();
      slots[i] = promises.back().get_future().share();
      slots_.emplace(texts[i], slots[i]);
      to_fetch.push_back(texts[i]);
      ++misses_;
    }
  }

  if (!to_fetch.empty()) {
    inner_calls_ += to_fetch.size();
    try {
      const std::vector<LLResult> fetched = inner_->loglikelihood_batch(to_fetch);
      for (std::size_t j = 0; j < fetched.size(); ++j) promises[j].set_value(fetched[j]);
    } catch (...) {
      {
        std::lock_guard lock(mutex_);
        for (const auto& text : to_fetch) slots_.erase(text);
      }
      for (auto& promise : promises) promise.set_exception(std::current_exception());
      throw;
    }
  }

  std::vector<LLResult> results;
  results.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    try {
      results.push_back(slots[i].get());
    } catch (const Error& e) {
      throw e.with_context("batch item " + std::to_string(i));
    }
  }
  return results;
}

nlohmann::json CachedProvider::describe() const { return inner_->describe(); }

CacheCounters CachedProvider::counters() const {
  return CacheCounters{hits_.load(), misses_.load(), inner_calls_.load()};
}

ProviderPtr cached(ProviderPtr inner) {
  return std::make_shared<const CachedProvider>(std::move(inner));
}

// ------------------------------------------------------- instrumentation

LLResult CountingProvider::loglikelihood(std::string_view text) const {
  ++calls_;
  return inner_->loglikelihood(text);
}

std::vector<LLResult> CountingProvider::loglikelihood_batch(
    std::span<const std::string> texts) const {
  calls_ += texts.size();
  return inner_->loglikelihood_batch(texts);
}

LLResult RecordingProvider::loglikelihood(std::string_view text) const {
  LLResult result = inner_->loglikelihood(text);
  std::lock_guard lock(mutex_);
  recorded_.emplace(std::string(text), result);
  return result;
}

std::map<std::string, LLResult> RecordingProvider::recorded() const {
  std::lock_guard lock(mutex_);
  return recorded_;
}

}  // namespace cpmi
