#include "cpmi/ngram.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "cpmi/error.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace cpmi;

namespace {

NGramModel train(std::vector<TokenStream> corpus, int order, double k = 1.0,
                 bool separator_in_vocab = true) {
  NGramTrainOptions opts;
  opts.order = order;
  opts.smoothing_k = k;
  opts.separator_in_vocab = separator_in_vocab;
  return train_ngram(corpus, opts);
}

double mass(const NGramModel& m, std::span<const TokenId> context) {
  double total = 0.0;
  for (std::size_t v = 0; v < m.vocab_size(); ++v) {
    total += m.probability(static_cast<TokenId>(v), context);
  }
  return total;
}

}  // namespace

TEST(NGram, HandCountedBigram) {
  const NGramModel m = train({{"a", "b", "a", "b"}}, 2, 1.0, false);
  ASSERT_EQ(m.vocabulary(), (std::vector<std::string>{"<unk>", "a", "b"}));
  const TokenId a = m.id_of("a");
  EXPECT_NEAR(m.probability(m.id_of("b"), std::vector<TokenId>{a}), 0.6, 1e-15);
  const oracle::CountingModel o({{"a", "b", "a", "b"}}, 2, 1.0, std::string(kDefaultSeparator),
                                false);
  EXPECT_NEAR(o.probability("b", {"a"}), 0.6, 1e-15);
}

TEST(NGram, UnseenContextBacksOffToUnigram) {
  const NGramModel m = train({{"a", "b", "a", "b"}}, 2, 1.0, false);
  const std::vector<TokenId> z{m.id_of("z")};
  EXPECT_EQ(z[0], m.unk_id());
  // Unigram counts: a=2, b=2 of 4, so (count + 1) / (4 + 3).
  EXPECT_NEAR(m.probability(m.id_of("a"), z), 3.0 / 7.0, 1e-15);
  EXPECT_NEAR(m.probability(m.unk_id(), z), 1.0 / 7.0, 1e-15);
}

TEST(NGram, UniformUnigramLogLikelihood) {
  // Every vocabulary entry, <unk> included, is seen once: P = (1+1)/(4+4).
  const NGramModel m = train({{"a", "b", "c", "<unk>"}}, 1, 1.0, false);
  ASSERT_EQ(m.vocab_size(), 4u);
  const LLResult r = NGramProvider(m).loglikelihood("a b c");
  EXPECT_EQ(r.num_tokens, 3u);
  EXPECT_NEAR(r.sum_ll, -4.158883083359672, 1e-9);
  EXPECT_NEAR(r.avg_ll, -1.3862943611198906, 1e-9);

  const LLResult one = NGramProvider(m).loglikelihood("b");
  EXPECT_EQ(one.avg_ll, one.sum_ll);
}

TEST(NGram, SeparatorIsOneToken) {
  const NGramModel m = train({{"hi", "<|endoftext|>", "there"}}, 2);
  EXPECT_EQ(m.encode("hi<|endoftext|>there").size(), 3u);
  EXPECT_EQ(NGramProvider(m).loglikelihood("hi<|endoftext|>there").num_tokens, 3u);
}

TEST(NGram, EmptyTextIsEmptySequence) {
  const NGramProvider p(train({{"a"}}, 1));
  try {
    p.loglikelihood("   ");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptySequence);
  }
}

TEST(NGram, TrainingPreconditions) {
  NGramTrainOptions opts;
  std::vector<TokenStream> empty{{}, {}};
  EXPECT_THROW(train_ngram(empty, opts), Error);
  std::vector<TokenStream> one{{"a"}};
  opts.order = 0;
  EXPECT_THROW(train_ngram(one, opts), Error);
  opts.order = 2;
  opts.smoothing_k = 0.0;
  EXPECT_THROW(train_ngram(one, opts), Error);
}

TEST(NGram, CountsAreConsistent) {
  std::mt19937_64 rng(3);
  std::vector<TokenStream> corpus;
  for (int i = 0; i < 20; ++i) corpus.push_back(testutil::random_stream(rng, 6, 1, 12));
  const NGramModel m = train(corpus, 3);
  for (const auto& [context, entry] : m.counts()) {
    std::uint64_t sum = 0;
    for (const auto& [token, count] : entry.next) sum += count;
    EXPECT_EQ(sum, entry.total);
  }
}

TEST(NGram, NormalizationOverRandomContexts) {
  std::mt19937_64 rng(5);
  for (int model = 0; model < 20; ++model) {
    std::vector<TokenStream> corpus;
    for (int i = 0; i < 8; ++i) corpus.push_back(testutil::random_stream(rng, 5, 1, 10));
    const int order = 1 + static_cast<int>(rng() % 4);
    const NGramModel m = train(corpus, order, 0.1 + static_cast<double>(rng() % 20) / 10.0);
    for (int c = 0; c < 20; ++c) {
      std::vector<TokenId> ctx;
      const int len = static_cast<int>(rng() % 6);
      for (int i = 0; i < len; ++i) ctx.push_back(static_cast<TokenId>(rng() % m.vocab_size()));
      EXPECT_NEAR(mass(m, ctx), 1.0, 1e-9);
    }
  }
}

TEST(NGram, MatchesCountingOracle) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 15; ++trial) {
    std::vector<TokenStream> corpus;
    for (int i = 0; i < 5; ++i) corpus.push_back(testutil::random_stream(rng, 4, 1, 8));
    const int order = 1 + static_cast<int>(rng() % 3);
    const NGramModel m = train(corpus, order, 0.5);
    const oracle::CountingModel o(corpus, order, 0.5, std::string(kDefaultSeparator), true);
    ASSERT_EQ(m.vocab_size(), o.vocab_size());
    for (int q = 0; q < 10; ++q) {
      const std::string text = testutil::join(testutil::random_stream(rng, 5, 1, 7));
      EXPECT_NEAR(NGramProvider(m).loglikelihood(text).sum_ll, o.sum_ll(text), 1e-9) << text;
    }
  }
}

TEST(NGram, UnigramAdditivity) {
  std::mt19937_64 rng(23);
  std::vector<TokenStream> corpus;
  for (int i = 0; i < 10; ++i) corpus.push_back(testutil::random_stream(rng, 6, 1, 10));
  const NGramProvider p(train(corpus, 1));
  for (int i = 0; i < 50; ++i) {
    const std::string a = testutil::join(testutil::random_stream(rng, 7, 1, 5));
    const std::string b = testutil::join(testutil::random_stream(rng, 7, 1, 5));
    EXPECT_NEAR(p.loglikelihood(a + " " + b).sum_ll,
                p.loglikelihood(a).sum_ll + p.loglikelihood(b).sum_ll, 1e-9);
    const double sep = p.loglikelihood("<|endoftext|>").sum_ll;
    EXPECT_NEAR(p.loglikelihood(a + "<|endoftext|>" + b).sum_ll,
                p.loglikelihood(a).sum_ll + sep + p.loglikelihood(b).sum_ll, 1e-9);
  }
}

TEST(NGram, DeterministicResults) {
  const NGramProvider p(train({{"x", "y", "z", "x", "y"}}, 3));
  EXPECT_EQ(p.loglikelihood("x y q x"), p.loglikelihood("x y q x"));
}

TEST(NGramIO, BinaryAndTextRoundTrip) {
  std::mt19937_64 rng(29);
  std::vector<TokenStream> corpus;
  for (int i = 0; i < 6; ++i) corpus.push_back(testutil::random_stream(rng, 5, 1, 9));
  corpus.push_back({"quote\"mark", "<|endoftext|>", "ünïcode"});
  const NGramModel m = train(corpus, 3, 0.37);
  EXPECT_EQ(deserialize_ngram(serialize_ngram(m)), m);
  EXPECT_EQ(parse_ngram_text(dump_ngram_text(m)), m);

  testutil::TempDir dir;
  save_ngram(m, dir.file("m.bin"));
  EXPECT_EQ(load_ngram(dir.file("m.bin")), m);
  testutil::write_text(dir.file("m.txt"), dump_ngram_text(m));
  EXPECT_EQ(load_ngram(dir.file("m.txt")), m);
}

TEST(NGramIO, RejectsBadInput) {
  const NGramModel m = train({{"a", "b"}}, 2);
  std::string bytes = serialize_ngram(m);
  try {
    deserialize_ngram(bytes.substr(0, bytes.size() - 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::FormatError);
  }
  std::string future = bytes;
  future.replace(future.find("v1"), 2, "v9");
  try {
    deserialize_ngram(future);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnsupportedVersion);
  }
  EXPECT_THROW(deserialize_ngram("not a model"), Error);
  EXPECT_THROW(load_ngram("/nonexistent/model.bin"), Error);
}

TEST(NGramModel, ConstructorValidates) {
  EXPECT_THROW(NGramModel(0, 1.0, "s", {"<unk>"}, {}), Error);
  EXPECT_THROW(NGramModel(1, -1.0, "s", {"<unk>"}, {}), Error);
  EXPECT_THROW(NGramModel(1, 1.0, "s", {"a"}, {}), Error);
  EXPECT_THROW(NGramModel(1, 1.0, "s", {"b", "a", "<unk>"}, {}), Error);
  std::map<NGramModel::Context, NGramModel::ContextCounts> bad;
  bad[{}] = NGramModel::ContextCounts{5, {{0, 1}}};
  EXPECT_THROW(NGramModel(1, 1.0, "s", {"<unk>", "a"}, bad), Error);
}

TEST(NGramProvider, DescribeIsPathIndependent) {
  const NGramModel m = train({{"a", "b"}}, 2);
  EXPECT_EQ(NGramProvider(m, "/x").describe(), NGramProvider(m, "/y").describe());
  EXPECT_EQ(NGramProvider(m).describe()["kind"], "ngram");
}
