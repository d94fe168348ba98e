#include "csi/text.hpp"

#include <algorithm>
#include <set>

#include "csi/data.hpp"

namespace csi {

namespace {

bool is_ascii_punct(unsigned char c) {
  return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
         (c >= 123 && c <= 126);
}

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Lowercase, strip apostrophes (ASCII and U+2019), other punctuation → space.
std::string normalize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c == '\'') continue;
    if (c == 0xE2 && i + 2 < text.size() && static_cast<unsigned char>(text[i + 1]) == 0x80 &&
        static_cast<unsigned char>(text[i + 2]) == 0x99) {
      i += 2;
      continue;
    }
    if (c >= 'A' && c <= 'Z') {
      out += static_cast<char>(c - 'A' + 'a');
    } else if (is_ascii_punct(c)) {
      out += ' ';
    } else {
      out += static_cast<char>(c);
    }
  }
  return out;
}

Tokens split(std::string_view normalized) {
  Tokens out;
  std::size_t i = 0;
  while (i < normalized.size()) {
    while (i < normalized.size() && is_space(static_cast<unsigned char>(normalized[i]))) ++i;
    std::size_t j = i;
    while (j < normalized.size() && !is_space(static_cast<unsigned char>(normalized[j]))) ++j;
    if (j > i) out.emplace_back(normalized.substr(i, j - i));
    i = j;
  }
  return out;
}

const std::set<std::string, std::less<>>& stopwords() {
  static const std::set<std::string, std::less<>> words = [] {
    std::set<std::string, std::less<>> s;
    for (const auto& line : data::lines("stopwords"))
      for (auto& token : split(normalize(line))) s.insert(std::move(token));
    return s;
  }();
  return words;
}

}  // namespace

TokenSet::TokenSet(Tokens tokens) : items_(std::move(tokens)) {
  std::sort(items_.begin(), items_.end());
  items_.erase(std::unique(items_.begin(), items_.end()), items_.end());
}

bool TokenSet::contains(std::string_view token) const {
  return std::binary_search(items_.begin(), items_.end(), token);
}

bool is_stopword(std::string_view token) { return stopwords().contains(token); }

Tokens tokenize(std::string_view text) {
  Tokens tokens = split(normalize(text));
  std::erase_if(tokens, [](const std::string& t) { return is_stopword(t); });
  return tokens;
}

std::size_t intersection_size(const TokenSet& a, const TokenSet& b) {
  std::size_t n = 0;
  auto i = a.items().begin();
  auto j = b.items().begin();
  while (i != a.items().end() && j != b.items().end()) {
    if (*i == *j) {
      ++n;
      ++i;
      ++j;
    } else if (*i < *j) {
      ++i;
    } else {
      ++j;
    }
  }
  return n;
}

double jaccard(const TokenSet& a, const TokenSet& b) {
  if (a.empty() && b.empty()) return 1.0;
  const std::size_t inter = intersection_size(a, b);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

void ContentProfile::add(const Tokens& message_tokens) {
  messages_.push_back(message_tokens);
  for (const auto& t : message_tokens) ++counts_[t];
  while (messages_.size() > window_) {
    for (const auto& t : messages_.front()) {
      auto it = counts_.find(t);
      if (--it->second == 0) counts_.erase(it);
    }
    messages_.pop_front();
  }
}

bool ContentProfile::contains(std::string_view token) const { return counts_.contains(token); }

TokenSet ContentProfile::token_set() const {
  Tokens keys;
  keys.reserve(counts_.size());
  for (const auto& [token, count] : counts_) keys.push_back(token);
  return TokenSet(std::move(keys));
}

double novelty(const TokenSet& insight, const ContentProfile& profile) {
  if (insight.empty() && profile.distinct_size() == 0) return 0.0;
  std::size_t inter = 0;
  for (const auto& t : insight.items())
    if (profile.contains(t)) ++inter;
  const std::size_t uni = insight.size() + profile.distinct_size() - inter;
  return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

double novelty(const TokenSet& insight, const TokenSet& profile) {
  if (insight.empty() && profile.empty()) return 0.0;
  return 1.0 - jaccard(insight, profile);
}

double novelty(std::string_view insight_text, const ContentProfile& profile) {
  return novelty(TokenSet(tokenize(insight_text)), profile);
}

}  // namespace csi
