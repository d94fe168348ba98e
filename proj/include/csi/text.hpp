#pragma once

#include <cstddef>
#include <deque>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace csi {

/// Content tokens in utterance order; duplicates are kept (a multiset).
using Tokens = std::vector<std::string>;

/// Sorted, duplicate-free token set.
class TokenSet {
 public:
  TokenSet() = default;
  explicit TokenSet(Tokens tokens);

  const std::vector<std::string>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  bool contains(std::string_view token) const;

  friend bool operator==(const TokenSet&, const TokenSet&) = default;

 private:
  std::vector<std::string> items_;
};

/// Lowercases ASCII, deletes apostrophes, turns other ASCII punctuation into
/// separators, splits on whitespace, and drops stopwords from the shipped list.
Tokens tokenize(std::string_view text);

bool is_stopword(std::string_view token);

std::size_t intersection_size(const TokenSet& a, const TokenSet& b);

/// |a ∩ b| / |a ∪ b|; two empty sets are identical (1).
double jaccard(const TokenSet& a, const TokenSet& b);

/// Token multiset over a subgroup's last `window` messages.
class ContentProfile {
 public:
  explicit ContentProfile(std::size_t window = 30) : window_(window) {}

  void add(const Tokens& message_tokens);

  std::size_t window() const { return window_; }
  std::size_t message_count() const { return messages_.size(); }
  std::size_t distinct_size() const { return counts_.size(); }
  bool contains(std::string_view token) const;
  const std::map<std::string, std::size_t, std::less<>>& counts() const { return counts_; }
  TokenSet token_set() const;

  friend bool operator==(const ContentProfile&, const ContentProfile&) = default;

 private:
  std::size_t window_;
  std::deque<Tokens> messages_;
  std::map<std::string, std::size_t, std::less<>> counts_;
};

/// 1 − Jaccard(insight tokens, set(profile)). Both empty → 0.
double novelty(const TokenSet& insight, const ContentProfile& profile);
double novelty(const TokenSet& insight, const TokenSet& profile);
double novelty(std::string_view insight_text, const ContentProfile& profile);

/// Scoring backend for "how much would this insight change the receiver".
/// The Jaccard scorer is the reference; an embedding scorer can replace it.
class NoveltyScorer {
 public:
  virtual ~NoveltyScorer() = default;
  virtual double score(std::string_view insight_text, const TokenSet& insight_tokens,
                       const ContentProfile& profile) const = 0;
};

class JaccardNovelty final : public NoveltyScorer {
 public:
  double score(std::string_view, const TokenSet& insight_tokens,
               const ContentProfile& profile) const override {
    return novelty(insight_tokens, profile);
  }
};

}  // namespace csi
