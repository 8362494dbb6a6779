#include "cpmi/remote.hpp"

#include <httplib.h>

#include <cmath>
#include <thread>

#include "cpmi/error.hpp"

namespace cpmi {

namespace {

constexpr const char* kLoglikelihoodPath = "/v1/loglikelihood";
constexpr const char* kInfoPath = "/v1/info";

httplib::Client make_client(const std::string& base, const RemoteOptions& options) {
  httplib::Client client(base);
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(options.timeout);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(options.timeout - seconds);
  client.set_connection_timeout(seconds.count(), micros.count());
  client.set_read_timeout(seconds.count(), micros.count());
  client.set_write_timeout(seconds.count(), micros.count());
  return client;
}

// Runs request() up to max_attempts times. Returns the first 200 body.
template <typename Request>
std::string with_retries(const RemoteOptions& options, const std::string& what, Request request) {
  std::string last_error;
  int last_status = 0;
  const int attempts = std::max(1, options.max_attempts);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    const httplib::Result result = request();
    if (!result) {
      last_status = 0;
      last_error = "transport error: " + httplib::to_string(result.error());
    } else if (result->status == 200) {
      return result->body;
    } else {
      last_status = result->status;
      last_error = "HTTP " + std::to_string(result->status);
      if (!result->body.empty()) last_error += ": " + result->body.substr(0, 200);
      if (result->status < 500) {
        throw RemoteError(what + " failed: " + last_error, last_status, attempt);
      }
    }
    if (attempt < attempts) std::this_thread::sleep_for(options.retry_backoff * attempt);
  }
  throw RemoteError(what + " failed after " + std::to_string(attempts) +
                        " attempt(s): " + last_error,
                    last_status, attempts);
}

}  // namespace

nlohmann::json make_loglikelihood_request(std::span<const std::string> texts,
                                          std::string_view separator) {
  return {{"texts", std::vector<std::string>(texts.begin(), texts.end())},
          {"separator", std::string(separator)}};
}

std::vector<LLResult> parse_loglikelihood_response(const nlohmann::json& body,
                                                   std::size_t expected) {
  const auto protocol_error = [](const std::string& message) {
    return RemoteError("protocol error: " + message, 200, 1);
  };
  if (!body.is_object() || !body.contains("results") || !body["results"].is_array()) {
    throw protocol_error("response lacks a \"results\" array");
  }
  const auto& items = body["results"];
  if (items.size() != expected) {
    throw protocol_error("expected " + std::to_string(expected) + " results, got " +
                         std::to_string(items.size()));
  }
  std::vector<LLResult> results;
  results.reserve(expected);
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    const auto where = "result " + std::to_string(i);
    if (!item.is_object() || !item.contains("sum_ll") || !item["sum_ll"].is_number() ||
        !item.contains("num_tokens") || !item["num_tokens"].is_number_integer()) {
      throw protocol_error(where + " needs numeric sum_ll and integer num_tokens");
    }
    const double sum_ll = item["sum_ll"].get<double>();
    const auto num_tokens = item["num_tokens"].get<std::int64_t>();
    if (!std::isfinite(sum_ll) || num_tokens < 1) {
      throw protocol_error(where + " has non-finite sum_ll or num_tokens < 1");
    }
    results.push_back(LLResult::from_sum(sum_ll, static_cast<std::size_t>(num_tokens)));
  }
  return results;
}

RemoteProvider::RemoteProvider(RemoteOptions options) : options_(std::move(options)) {
  if (options_.url.empty()) throw Error(ErrorCode::InvalidArgument, "remote URL is empty");
  if (options_.max_batch_size == 0) {
    throw Error(ErrorCode::InvalidArgument, "max batch size must be >= 1");
  }
  scheme_host_port_ = options_.url;
  while (!scheme_host_port_.empty() && scheme_host_port_.back() == '/') {
    scheme_host_port_.pop_back();
  }
}

std::vector<LLResult> RemoteProvider::post_chunk(std::span<const std::string> texts) const {
  const std::string body = make_loglikelihood_request(texts, options_.separator).dump();
  const std::string response = with_retries(options_, "POST /v1/loglikelihood", [&] {
    // One client per attempt; httplib clients are not shared across threads.
    httplib::Client client = make_client(scheme_host_port_, options_);
    return client.Post(kLoglikelihoodPath, body, "application/json");
  });
  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(response);
  } catch (const nlohmann::json::parse_error& e) {
    throw RemoteError(std::string("protocol error: response is not JSON: ") + e.what(), 200, 1);
  }
  return parse_loglikelihood_response(parsed, texts.size());
}

LLResult RemoteProvider::loglikelihood(std::string_view text) const {
  const std::string owned(text);
  return post_chunk(std::span<const std::string>(&owned, 1)).front();
}

std::vector<LLResult> RemoteProvider::loglikelihood_batch(std::span<const std::string> texts) const {
  if (texts.empty()) throw Error(ErrorCode::EmptyBatch, "empty batch");
  std::vector<LLResult> results;
  results.reserve(texts.size());
  for (std::size_t start = 0; start < texts.size(); start += options_.max_batch_size) {
    const std::size_t count = std::min(options_.max_batch_size, texts.size() - start);
    try {
      auto chunk = post_chunk(texts.subspan(start, count));
      results.insert(results.end(), chunk.begin(), chunk.end());
    } catch (const RemoteError& e) {
      throw RemoteError("batch items " + std::to_string(start) + ".." +
                            std::to_string(start + count - 1) + ": " + e.what(),
                        e.http_status(), e.attempts());
    }
  }
  return results;
}

nlohmann::json RemoteProvider::fetch_info() const {
  const std::string response = with_retries(options_, "GET /v1/info", [&] {
    httplib::Client client = make_client(scheme_host_port_, options_);
    return client.Get(kInfoPath);
  });
  try {
    return nlohmann::json::parse(response);
  } catch (const nlohmann::json::parse_error& e) {
    throw RemoteError(std::string("protocol error: /v1/info is not JSON: ") + e.what(), 200, 1);
  }
}

nlohmann::json RemoteProvider::describe() const {
  return {{"kind", "remote"}, {"url", scheme_host_port_}, {"separator", options_.separator}};
}

}  // namespace cpmi
