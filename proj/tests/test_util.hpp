#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cpmi/llprovider.hpp"

namespace testutil {

namespace fs = std::filesystem;

inline std::string data_path(const std::string& relative) {
  return std::string(CPMI_DATA_DIR) + "/" + relative;
}

class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = fs::temp_directory_path() / ("cpmi-test-" + std::to_string(rng()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

inline void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline std::map<std::string, cpmi::LLResult> table(
    std::initializer_list<std::pair<std::string, std::pair<double, std::size_t>>> rows) {
  std::map<std::string, cpmi::LLResult> t;
  for (const auto& [text, v] : rows) t[text] = cpmi::LLResult::from_sum(v.first, v.second);
  return t;
}

// Fixture table whose every entry is a single token with the given LL, so
// avg and sum modes agree.
inline cpmi::FixtureProvider single_token_fixture(
    std::initializer_list<std::pair<std::string, double>> rows) {
  std::map<std::string, cpmi::LLResult> t;
  for (const auto& [text, ll] : rows) t[text] = cpmi::LLResult::from_sum(ll, 1);
  return cpmi::FixtureProvider(std::move(t));
}

// Random word from a small alphabet: "w0".."w{n-1}".
inline std::string random_word(std::mt19937_64& rng, int alphabet) {
  return "w" + std::to_string(std::uniform_int_distribution<int>(0, alphabet - 1)(rng));
}

inline std::vector<std::string> random_stream(std::mt19937_64& rng, int alphabet, int min_len,
                                              int max_len) {
  const int len = std::uniform_int_distribution<int>(min_len, max_len)(rng);
  std::vector<std::string> out;
  for (int i = 0; i < len; ++i) out.push_back(random_word(rng, alphabet));
  return out;
}

inline std::string join(const std::vector<std::string>& words, const std::string& glue = " ") {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += glue;
    out += words[i];
  }
  return out;
}

}  // namespace testutil
