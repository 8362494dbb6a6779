#include "cpmi/hypotheses.hpp"

#include <gtest/gtest.h>

#include "cpmi/error.hpp"
#include "test_util.hpp"

using namespace cpmi;

namespace {

ErrorCode parse_code(const std::string& text, RegistryLoadOptions options = {}) {
  try {
    parse_registry(text, options);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "accepted: " << text;
  return ErrorCode::InvalidArgument;
}

bool has(const std::vector<Hypothesis>& list, const std::string& text) {
  for (const auto& h : list) {
    if (h.text == text) return true;
  }
  return false;
}

}  // namespace

TEST(DefaultRegistry, HasTheEightTurnLevelDimensions) {
  const Registry r = load_registry(testutil::data_path("registry/fed_turn_level.json"));
  ASSERT_EQ(r.size(), 8u);
  const std::vector<std::string> expected{"interesting", "fluent",   "engaging",
                                          "specific",    "relevant", "correct",
                                          "semantically_appropriate", "understandable"};
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_EQ(r.dimensions()[i].name, expected[i]);

  const Dimension* interesting = r.find("Interesting");
  ASSERT_NE(interesting, nullptr);
  EXPECT_TRUE(has(interesting->positives, "That's really interesting!"));
  EXPECT_TRUE(has(interesting->negatives, "That's really boring."));
  for (const auto& d : r.dimensions()) {
    EXPECT_FALSE(d.positives.empty()) << d.name;
    EXPECT_FALSE(d.negatives.empty()) << d.name;
    for (const auto& h : d.positives) EXPECT_EQ(h.polarity, Polarity::Positive);
    for (const auto& h : d.negatives) EXPECT_EQ(h.polarity, Polarity::Negative);
  }
  EXPECT_FALSE(r.source().empty());
}

TEST(Registry, RoundTripIsIdentity) {
  const Registry r = load_registry(testutil::data_path("registry/fed_turn_level.json"));
  const Registry again = parse_registry(serialize_registry(r));
  EXPECT_EQ(again, r);
  EXPECT_EQ(serialize_registry(again), serialize_registry(r));
}

TEST(Registry, InvariantViolations) {
  EXPECT_EQ(parse_code(R"({"dimensions": [
      {"name": "a", "positive": ["p"], "negative": ["n"]},
      {"name": "a", "positive": ["q"], "negative": ["m"]}]})"),
            ErrorCode::DuplicateDimension);
  EXPECT_EQ(parse_code(R"({"dimensions": [
      {"name": "Semantically appropriate", "positive": ["p"], "negative": ["n"]},
      {"name": "semantically_appropriate", "positive": ["q"], "negative": ["m"]}]})"),
            ErrorCode::DuplicateDimension);
  EXPECT_EQ(parse_code(R"({"dimensions": [{"name": "a", "positive": ["p"], "negative": []}]})"),
            ErrorCode::EmptyPolaritySet);
  EXPECT_EQ(parse_code(R"({"dimensions": [{"name": "a", "positive": [], "negative": ["n"]}]})"),
            ErrorCode::EmptyPolaritySet);

  Registry manual;
  manual.add(Dimension{"x", {{"p", Polarity::Positive}}, {{"n", Polarity::Negative}}});
  EXPECT_THROW(manual.add(Dimension{"X", {{"p", Polarity::Positive}}, {{"n", Polarity::Negative}}}),
               Error);
}

TEST(Registry, SchemaErrors) {
  EXPECT_EQ(parse_code("{\"dimensions\": [\n  {\"name\": \"a\",,}\n]}"), ErrorCode::ParseError);
  try {
    parse_registry("{\"dimensions\": [\n  {\"name\": \"a\",,}\n]}");
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_EQ(parse_code(R"({"dimensions": [], "extra": 1})"), ErrorCode::ParseError);
  EXPECT_EQ(parse_code(R"({"dimensions": [{"name": "a", "positive": ["p"], "negative": ["n"],
                                          "weight": 2}]})"),
            ErrorCode::ParseError);
  EXPECT_EQ(parse_code(R"({"dimensions": [{"name": "a", "positive": ["  "], "negative": ["n"]}]})"),
            ErrorCode::ParseError);
  EXPECT_EQ(parse_code(R"({"dimensions": [{"name": "a", "positive": [3], "negative": ["n"]}]})"),
            ErrorCode::ParseError);
  EXPECT_EQ(parse_code(
                R"({"dimensions": [{"name": "a", "positive": ["x<|endoftext|>y"], "negative": ["n"]}]})"),
            ErrorCode::ParseError);
  EXPECT_THROW(load_registry("/nonexistent/registry.json"), Error);
}

TEST(Registry, LenientModeIgnoresUnknownKeys) {
  RegistryLoadOptions lenient;
  lenient.strict = false;
  const Registry r = parse_registry(
      R"({"version": 2, "dimensions": [{"name": "a", "positive": [" p "], "negative": ["n"],
          "weight": 2}]})",
      lenient);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r.dimensions()[0].positives[0].text, "p");
}

TEST(Registry, NormalizedLookup) {
  EXPECT_EQ(normalize_dimension_name("Semantically Appropriate"), "semanticallyappropriate");
  EXPECT_EQ(normalize_dimension_name("semantically_appropriate"), "semanticallyappropriate");
  const Registry r = parse_registry(
      R"({"dimensions": [{"name": "Semantically appropriate", "positive": ["p", "q"],
                          "negative": ["n"]}]})");
  EXPECT_NE(r.find("semantically_appropriate"), nullptr);
  EXPECT_EQ(r.find("fluent"), nullptr);
  EXPECT_EQ(r.hypothesis_count(), 3u);
}
