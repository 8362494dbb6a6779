#pragma once

#include <chrono>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "cpmi/error.hpp"
#include "cpmi/llprovider.hpp"

namespace cpmi {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitProvider = 3,
  kExitData = 4,
};

int exit_code_for(ErrorCode code);

struct ProviderOpenOptions {
  std::string separator{"<|endoftext|>"};
  std::chrono::milliseconds timeout{30000};
  std::size_t max_batch_size = 32;
};

struct OpenedProvider {
  ProviderPtr provider;
  // describe() plus, for remote providers, the /v1/info echo.
  nlohmann::json descriptor;
};

// "ngram:PATH", "fixture:PATH" or "remote:URL". Throws InvalidArgument on an
// unknown kind, IoError/FormatError on unreadable files and RemoteError when
// the server cannot be reached.
OpenedProvider open_provider(std::string_view spec, const ProviderOpenOptions& options);

// Runs the command-line tool. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cpmi
