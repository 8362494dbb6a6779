#include "cpmi/llprovider.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <thread>

#include "cpmi/error.hpp"
#include "test_util.hpp"

using namespace cpmi;

namespace {

// Fails the first `failures` calls, then answers -1 per character.
class FlakyProvider final : public LLProvider {
 public:
  explicit FlakyProvider(int failures) : failures_(failures) {}
  LLResult loglikelihood(std::string_view text) const override {
    if (calls_.fetch_add(1) < failures_) throw Error(ErrorCode::RemoteError, "flaky");
    return LLResult::from_sum(-static_cast<double>(text.size()), text.size());
  }
  nlohmann::json describe() const override { return {{"kind", "flaky"}}; }
  int calls() const { return calls_.load(); }

 private:
  int failures_;
  mutable std::atomic<int> calls_{0};
};

// Slow provider for the single-flight test.
class SlowProvider final : public LLProvider {
 public:
  LLResult loglikelihood(std::string_view) const override {
    ++calls_;
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    return LLResult::from_sum(-2.0, 2);
  }
  nlohmann::json describe() const override { return {{"kind", "slow"}}; }
  mutable std::atomic<int> calls_{0};
};

}  // namespace

TEST(LLResult, AverageIsSumOverTokens) {
  const LLResult r = LLResult::from_sum(-7.5, 3);
  EXPECT_NEAR(r.avg_ll, r.sum_ll / 3.0, 1e-12 * std::fabs(r.sum_ll));
  EXPECT_THROW(LLResult::from_sum(-1.0, 0), Error);
}

TEST(FixtureProvider, Lookup) {
  const FixtureProvider p(testutil::table({{"h", {-2.0, 2}}, {"one", {-0.7, 1}}}));
  EXPECT_DOUBLE_EQ(p.loglikelihood("h").avg_ll, -1.0);
  const LLResult single = p.loglikelihood("one");
  EXPECT_EQ(single.avg_ll, single.sum_ll);
  try {
    p.loglikelihood("missing");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::FixtureMiss);
  }
}

TEST(FixtureProvider, BatchContract) {
  const FixtureProvider p(testutil::table({{"a", {-1.0, 1}}, {"b", {-3.0, 2}}}));
  const std::vector<std::string> twice{"a", "a"};
  const auto r = p.loglikelihood_batch(twice);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0], r[1]);

  const std::vector<std::string> ab{"a", "b"};
  const std::vector<std::string> ba{"b", "a"};
  const auto rab = p.loglikelihood_batch(ab);
  const auto rba = p.loglikelihood_batch(ba);
  EXPECT_EQ(rab[0], rba[1]);
  EXPECT_EQ(rab[1], rba[0]);

  try {
    p.loglikelihood_batch({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyBatch);
  }
  const std::vector<std::string> bad{"a", "zzz"};
  try {
    p.loglikelihood_batch(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::FixtureMiss);
    EXPECT_NE(std::string(e.what()).find("batch item 1"), std::string::npos);
  }
}

TEST(FixtureProvider, DescribeHashesTable) {
  const FixtureProvider a(testutil::table({{"a", {-1.0, 1}}}), "/some/path.tsv");
  const FixtureProvider b(testutil::table({{"a", {-1.0, 1}}}), "/other/path.tsv");
  const FixtureProvider c(testutil::table({{"a", {-1.5, 1}}}));
  EXPECT_EQ(a.describe(), b.describe());
  EXPECT_NE(a.describe(), c.describe());
  EXPECT_EQ(a.describe()["kind"], "fixture");
}

TEST(FixtureFile, RoundTripWithEscapes) {
  const auto t = testutil::table({{"tab\there", {-1.25, 2}},
                                  {"line\nbreak", {-0.1, 1}},
                                  {"back\\slash<|endoftext|>x", {-1e-300, 7}},
                                  {"plain", {-3.0000000000000004, 3}}});
  const auto parsed = parse_fixture(format_fixture(t));
  EXPECT_EQ(parsed, t);
  EXPECT_EQ(unescape_fixture_text(escape_fixture_text("a\\tb\t\n")), "a\\tb\t\n");

  testutil::TempDir dir;
  write_fixture(dir.file("f.tsv"), t);
  EXPECT_EQ(read_fixture(dir.file("f.tsv")), t);
}

TEST(FixtureFile, RejectsMalformedLines) {
  for (const char* bad : {"text\t-1.0\n", "text\tx\t1\n", "text\t-1\t0\n", "a\t-1\t1\na\t-2\t1\n",
                          "text\t-1\t1\textra\n"}) {
    try {
      parse_fixture(bad);
      ADD_FAILURE() << "accepted: " << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::FormatError) << bad;
    }
  }
  try {
    read_fixture("/nonexistent/fixture.tsv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoError);
  }
}

TEST(CachedProvider, MemoCounters) {
  auto inner = std::make_shared<const FixtureProvider>(
      testutil::table({{"h", {-2.0, 2}}, {"a", {-1.0, 1}}, {"b", {-1.0, 1}}}));
  CachedProvider once(inner);
  once.loglikelihood("h");
  once.loglikelihood("h");
  EXPECT_EQ(once.counters().inner_calls, 1u);
  EXPECT_EQ(once.counters().hits, 1u);

  CachedProvider two(inner);
  two.loglikelihood("a");
  two.loglikelihood("b");
  EXPECT_EQ(two.counters().inner_calls, 2u);
}

TEST(CachedProvider, TransparentAndBatchAware) {
  auto inner = std::make_shared<const FixtureProvider>(
      testutil::table({{"a", {-1.0, 1}}, {"b", {-4.0, 3}}, {"c", {-2.0, 2}}}));
  CachedProvider cache(inner);
  const std::vector<std::string> texts{"a", "b", "a", "c"};
  EXPECT_EQ(cache.loglikelihood_batch(texts), inner->loglikelihood_batch(texts));
  EXPECT_EQ(cache.counters().inner_calls, 3u);
  EXPECT_EQ(cache.loglikelihood("b"), inner->loglikelihood("b"));
  EXPECT_EQ(cache.counters().inner_calls, 3u);
  EXPECT_EQ(cache.describe(), inner->describe());
}

TEST(CachedProvider, FailuresAreNotCached) {
  auto flaky = std::make_shared<const FlakyProvider>(1);
  CachedProvider cache(flaky);
  EXPECT_THROW(cache.loglikelihood("abc"), Error);
  EXPECT_DOUBLE_EQ(cache.loglikelihood("abc").sum_ll, -3.0);
  EXPECT_DOUBLE_EQ(cache.loglikelihood("abc").sum_ll, -3.0);
  EXPECT_EQ(flaky->calls(), 2);
}

TEST(CachedProvider, SingleFlightUnderConcurrency) {
  auto slow = std::make_shared<const SlowProvider>();
  CachedProvider cache(slow);
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) threads.emplace_back([&] { cache.loglikelihood("same"); });
  for (auto& t : threads) t.join();
  EXPECT_EQ(slow->calls_.load(), 1);
  EXPECT_EQ(cache.counters().inner_calls, 1u);
  EXPECT_EQ(cache.counters().hits, 7u);
}

TEST(CountingAndRecording, ForwardAndObserve) {
  auto inner = std::make_shared<const FixtureProvider>(
      testutil::table({{"a", {-1.0, 1}}, {"b", {-2.0, 1}}}));
  auto counting = std::make_shared<const CountingProvider>(inner);
  RecordingProvider recorder(counting);
  recorder.loglikelihood("a");
  recorder.loglikelihood("a");
  recorder.loglikelihood("b");
  EXPECT_THROW(recorder.loglikelihood("c"), Error);
  EXPECT_EQ(counting->calls(), 4u);
  EXPECT_EQ(recorder.recorded(), testutil::table({{"a", {-1.0, 1}}, {"b", {-2.0, 1}}}));
}
