#pragma once

#include <chrono>
#include <optional>
#include <string>

#include "cpmi/llprovider.hpp"
#include "cpmi/textseq.hpp"

namespace cpmi {

struct RemoteOptions {
  // Base URL, e.g. "http://127.0.0.1:8080".
  std::string url;
  std::string separator{kDefaultSeparator};
  std::chrono::milliseconds timeout{30000};
  std::size_t max_batch_size = 32;
  // Transport failures and 5xx responses are retried; 4xx are not.
  int max_attempts = 3;
  std::chrono::milliseconds retry_backoff{200};
};

// Client for the log-likelihood server:
//   POST /v1/loglikelihood  {"texts": [...], "separator": "..."}
//     -> {"results": [{"sum_ll": x, "num_tokens": n}, ...]}
//   GET  /v1/info           -> server descriptor, echoed into manifests
class RemoteProvider final : public LLProvider {
 public:
  explicit RemoteProvider(RemoteOptions options);

  LLResult loglikelihood(std::string_view text) const override;
  // Splits into requests of at most max_batch_size texts.
  std::vector<LLResult> loglikelihood_batch(std::span<const std::string> texts) const override;
  nlohmann::json describe() const override;

  // Fetches GET /v1/info. Throws RemoteError.
  nlohmann::json fetch_info() const;

  const RemoteOptions& options() const { return options_; }

 private:
  std::vector<LLResult> post_chunk(std::span<const std::string> texts) const;

  RemoteOptions options_;
  std::string scheme_host_port_;
};

// Request body for a chunk of texts.
nlohmann::json make_loglikelihood_request(std::span<const std::string> texts,
                                          std::string_view separator);
// Validates a response body against the request size. Throws RemoteError on
// protocol violations.
std::vector<LLResult> parse_loglikelihood_response(const nlohmann::json& body,
                                                   std::size_t expected);

}  // namespace cpmi
