#include "csi/taxonomy.hpp"

#include <algorithm>

#include "csi/data.hpp"

namespace csi {

namespace {

bool is_word_char(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '\'' || c == '+' || c >= 0x80;
}

// Lowercased words for lexicon matching; keeps apostrophes and '+'.
std::vector<std::string> lexicon_words(std::string_view text) {
  std::string lowered;
  lowered.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    auto c = static_cast<unsigned char>(text[i]);
    if (c == 0xE2 && i + 2 < text.size() && static_cast<unsigned char>(text[i + 1]) == 0x80 &&
        static_cast<unsigned char>(text[i + 2]) == 0x99) {
      lowered += '\'';
      i += 2;
      continue;
    }
    if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
    lowered += static_cast<char>(c);
  }
  std::vector<std::string> words;
  std::string current;
  for (char ch : lowered) {
    if (is_word_char(static_cast<unsigned char>(ch))) {
      current += ch;
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

using Lexicon = std::vector<std::vector<std::string>>;

Lexicon load_lexicon(std::string_view name) {
  Lexicon out;
  for (const auto& line : data::lines(name)) out.push_back(lexicon_words(line));
  return out;
}

std::size_t count_hits(const std::vector<std::string>& words, const Lexicon& lexicon) {
  std::size_t hits = 0;
  for (const auto& phrase : lexicon) {
    if (phrase.empty() || phrase.size() > words.size()) continue;
    for (std::size_t i = 0; i + phrase.size() <= words.size(); ++i) {
      if (std::equal(phrase.begin(), phrase.end(),
                     words.begin() + static_cast<std::ptrdiff_t>(i)))
        ++hits;
    }
  }
  return hits;
}

}  // namespace

std::string_view to_string(Stance stance) {
  switch (stance) {
    case Stance::support: return "support";
    case Stance::oppose: return "oppose";
    case Stance::neutral: return "neutral";
  }
  return "neutral";
}

TaxonomyConfig TaxonomyConfig::from(const SessionConfig& config) {
  return TaxonomyConfig{config.merge_threshold, config.assertion_min_tokens,
                        config.stance_thread_window};
}

Stance classify_stance(std::string_view text) {
  static const Lexicon support = load_lexicon("support");
  static const Lexicon oppose = load_lexicon("oppose");
  const auto words = lexicon_words(text);
  const std::size_t pro = count_hits(words, support);
  const std::size_t con = count_hits(words, oppose);
  if (pro > con) return Stance::support;
  if (con > pro) return Stance::oppose;
  return Stance::neutral;
}

StanceLink classify_stance(const ChatMessage& message, const IdeaNode& idea) {
  return StanceLink{message.id, idea.id, classify_stance(message.text)};
}

const IdeaNode* IdeaIndex::find(const IdeaId& id) const {
  auto it = std::find_if(ideas_.begin(), ideas_.end(), [&](const IdeaNode& n) { return n.id == id; });
  return it == ideas_.end() ? nullptr : &*it;
}

StanceTally IdeaIndex::tally(const IdeaId& id) const {
  StanceTally t;
  for (const auto& link : links_) {
    if (link.idea_id != id) continue;
    switch (link.stance) {
      case Stance::support: ++t.support; break;
      case Stance::oppose: ++t.oppose; break;
      case Stance::neutral: ++t.neutral; break;
    }
  }
  return t;
}

std::optional<IdeaId> IdeaIndex::record_assertion(const ChatMessage& message) {
  if (!message.is_human()) return std::nullopt;
  TokenSet tokens(tokenize(message.text));

  if (tokens.size() < config_.min_tokens) {
    const Stance stance = classify_stance(message.text);
    auto recent = recent_.find(message.subgroup);
    if (stance != Stance::neutral && recent != recent_.end() &&
        message.timestamp - recent->second.at <= config_.thread_window) {
      links_.push_back(StanceLink{message.id, recent->second.id, stance});
    }
    return std::nullopt;
  }

  IdeaNode* best = nullptr;
  double best_similarity = -1.0;
  for (auto& idea : ideas_) {
    const double similarity = jaccard(tokens, idea.canonical_tokens);
    if (similarity > best_similarity) {
      best = &idea;
      best_similarity = similarity;
    }
  }
  if (best == nullptr || best_similarity < config_.merge_threshold) {
    IdeaNode node;
    node.id = IdeaId(sequential_id("idea", ideas_.size() + 1, 4));
    node.canonical_tokens = std::move(tokens);
    node.first_message_id = message.id;
    node.first_mentioned_at = message.timestamp;
    ideas_.push_back(std::move(node));
    best = &ideas_.back();
  }
  best->mention_message_ids.push_back(message.id);
  best->subgroups_mentioning.insert(message.subgroup);
  links_.push_back(classify_stance(message, *best));
  recent_[message.subgroup] = RecentIdea{best->id, message.timestamp};
  return best->id;
}

std::vector<ImpactRecord> impact(const Insight& insight, std::span<const SessionEvent> log,
                                 Millis window) {
  std::vector<ImpactRecord> records;
  for (const auto& event : log) {
    const auto* delivered = std::get_if<InsightDelivered>(&event.payload);
    if (delivered == nullptr || delivered->insight_id != insight.id) continue;
    records.push_back({insight.id, delivered->receiver, event.wall_time, 0});
  }
  if (records.empty()) return records;

  const TokenSet insight_tokens(tokenize(insight.text));
  for (const auto& event : log) {
    const auto* posted = std::get_if<MessagePosted>(&event.payload);
    if (posted == nullptr || !posted->message.is_human()) continue;
    const ChatMessage& m = posted->message;
    for (auto& record : records) {
      if (m.subgroup != record.receiving_subgroup) continue;
      if (m.timestamp <= record.delivered_at || m.timestamp > record.delivered_at + window) continue;
      if (intersection_size(TokenSet(tokenize(m.text)), insight_tokens) >= 2)
        ++record.follow_on_count;
    }
  }
  return records;
}

}  // namespace csi
