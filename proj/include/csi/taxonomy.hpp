#pragma once

#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "csi/model.hpp"
#include "csi/text.hpp"

namespace csi {

enum class Stance { support, oppose, neutral };

std::string_view to_string(Stance stance);

struct IdeaNode {
  IdeaId id;
  TokenSet canonical_tokens;
  MessageId first_message_id;
  Millis first_mentioned_at{0};
  std::vector<MessageId> mention_message_ids;
  std::set<SubgroupId> subgroups_mentioning;

  friend bool operator==(const IdeaNode&, const IdeaNode&) = default;
};

struct StanceLink {
  MessageId message_id;
  IdeaId idea_id;
  Stance stance = Stance::neutral;

  friend bool operator==(const StanceLink&, const StanceLink&) = default;
};

struct StanceTally {
  std::size_t support = 0;
  std::size_t oppose = 0;
  std::size_t neutral = 0;

  long net() const { return static_cast<long>(support) - static_cast<long>(oppose); }

  friend bool operator==(const StanceTally&, const StanceTally&) = default;
};

struct TaxonomyConfig {
  double merge_threshold = 0.5;
  std::size_t min_tokens = 3;
  Millis thread_window{60'000};

  static TaxonomyConfig from(const SessionConfig& config);

  friend bool operator==(const TaxonomyConfig&, const TaxonomyConfig&) = default;
};

/// Lexicon stance: more support markers than oppose markers → support, the
/// reverse → oppose, otherwise neutral. Markers match whole words or word
/// sequences, so "disagree" never counts as "agree".
Stance classify_stance(std::string_view text);
StanceLink classify_stance(const ChatMessage& message, const IdeaNode& idea);

/// Greedy incremental clustering of assertions into ideas.
///
/// A qualifying human message joins the idea whose canonical tokens have the
/// highest Jaccard similarity with it, if that reaches merge_threshold;
/// otherwise it founds a new idea. Results depend on arrival order, which is
/// why the offline report replays messages in log order.
class IdeaIndex {
 public:
  explicit IdeaIndex(TaxonomyConfig config = {}) : config_(config) {}

  /// The idea the message mentions, or none for surrogate messages and
  /// messages under min_tokens. Short messages carrying a stance marker are
  /// linked to the subgroup's most recent idea within the thread window.
  std::optional<IdeaId> record_assertion(const ChatMessage& message);

  const std::vector<IdeaNode>& ideas() const { return ideas_; }
  const IdeaNode* find(const IdeaId& id) const;
  const std::vector<StanceLink>& stance_links() const { return links_; }
  StanceTally tally(const IdeaId& id) const;
  const TaxonomyConfig& config() const { return config_; }

  friend bool operator==(const IdeaIndex&, const IdeaIndex&) = default;

 private:
  struct RecentIdea {
    IdeaId id;
    Millis at{0};
    friend bool operator==(const RecentIdea&, const RecentIdea&) = default;
  };

  TaxonomyConfig config_;
  std::vector<IdeaNode> ideas_;
  std::vector<StanceLink> links_;
  std::map<SubgroupId, RecentIdea> recent_;
};

struct ImpactRecord {
  InsightId insight_id;
  SubgroupId receiving_subgroup;
  Millis delivered_at{0};
  std::size_t follow_on_count = 0;

  friend bool operator==(const ImpactRecord&, const ImpactRecord&) = default;
};

/// Per delivery of `insight`: human messages in the receiving subgroup that
/// postdate the delivery by at most `window` and share ≥2 content tokens with
/// the insight text.
std::vector<ImpactRecord> impact(const Insight& insight, std::span<const SessionEvent> log,
                                 Millis window = Millis{120'000});

}  // namespace csi
