#include <gtest/gtest.h>

#include "csi/rng.hpp"
#include "csi/text.hpp"

using namespace csi;

TEST(Tokenize, LowercasesDropsStopwordsAndPunctuation) {
  EXPECT_EQ(tokenize("Use the CONES as planters!"), (Tokens{"use", "cones", "planters"}));
  EXPECT_EQ(tokenize("don't it's the cone's"), (Tokens{"cones"}));
  EXPECT_EQ(tokenize("cones, cones; cones"), (Tokens{"cones", "cones", "cones"}));
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_TRUE(tokenize("  ... !!! ").empty());
}

TEST(Tokenize, CurlyApostropheRemoved) {
  EXPECT_EQ(tokenize("cone\xE2\x80\x99s"), (Tokens{"cones"}));
  EXPECT_TRUE(tokenize("won\xE2\x80\x99t").empty());
}

TEST(Tokenize, StopwordsFromShippedList) {
  EXPECT_TRUE(is_stopword("the"));
  EXPECT_TRUE(is_stopword("youre"));
  EXPECT_FALSE(is_stopword("cone"));
}

TEST(TokenSet, SortedUnique) {
  TokenSet s(Tokens{"b", "a", "b"});
  EXPECT_EQ(s.items(), (std::vector<std::string>{"a", "b"}));
  EXPECT_TRUE(s.contains("a"));
  EXPECT_FALSE(s.contains("c"));
}

TEST(Jaccard, Basics) {
  TokenSet a(Tokens{"x", "y"});
  TokenSet b(Tokens{"y", "z"});
  EXPECT_DOUBLE_EQ(jaccard(a, b), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(jaccard(TokenSet{}, TokenSet{}), 1.0);
  EXPECT_DOUBLE_EQ(jaccard(a, TokenSet{}), 0.0);
  EXPECT_EQ(intersection_size(a, b), 1u);
}

TEST(Novelty, AgainstProfile) {
  ContentProfile profile(2);
  profile.add(tokenize("cones as planters"));
  EXPECT_DOUBLE_EQ(novelty(TokenSet(tokenize("cones planters")), profile), 0.0);
  EXPECT_DOUBLE_EQ(novelty(TokenSet(tokenize("hats")), profile), 1.0);
  EXPECT_DOUBLE_EQ(novelty(TokenSet{}, ContentProfile{}), 0.0);
}

TEST(ContentProfile, SlidingWindowForgetsOldMessages) {
  ContentProfile profile(2);
  profile.add({"a", "a"});
  profile.add({"b"});
  EXPECT_EQ(profile.counts().at("a"), 2u);
  profile.add({"c"});
  EXPECT_FALSE(profile.contains("a"));
  EXPECT_TRUE(profile.contains("b"));
  EXPECT_EQ(profile.message_count(), 2u);
  EXPECT_EQ(profile.distinct_size(), 2u);
}

TEST(ContentProfile, CountsMatchRecomputation) {
  Rng rng(11);
  const std::vector<std::string> vocab{"a", "b", "c", "d", "e", "f"};
  ContentProfile profile(5);
  std::vector<Tokens> history;
  for (int i = 0; i < 200; ++i) {
    Tokens t;
    const auto len = rng.below(4);
    for (std::uint64_t k = 0; k < len; ++k) t.push_back(vocab[rng.below(vocab.size())]);
    profile.add(t);
    history.push_back(t);
    std::map<std::string, std::size_t, std::less<>> expected;
    const std::size_t from = history.size() > 5 ? history.size() - 5 : 0;
    for (std::size_t h = from; h < history.size(); ++h)
      for (const auto& tok : history[h]) ++expected[tok];
    ASSERT_EQ(profile.counts(), expected) << "after message " << i;
  }
}

TEST(Rng, DeterministicAndInRange) {
  Rng a(5), b(5);
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.below(7);
    EXPECT_EQ(x, b.below(7));
    EXPECT_LT(x, 7u);
    const double u = a.uniform();
    b.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
  EXPECT_NE(mix_seed(1, 0), mix_seed(1, 1));
}
