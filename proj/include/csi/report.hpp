#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csi/metrics.hpp"
#include "csi/model.hpp"
#include "csi/taxonomy.hpp"

namespace csi {

struct IdeaMention {
  MessageId message_id;
  SubgroupId subgroup;
  ParticipantId author;
  Millis at{0};
  Stance stance = Stance::neutral;
  bool assertion = true;  // false for a short stance-only reply
};

struct IdeaSummary {
  IdeaId id;
  std::string text;  // the founding message
  MessageId first_message_id;
  SubgroupId first_subgroup;
  Millis first_mentioned_at{0};
  std::vector<SubgroupId> subgroups;
  StanceTally stance;
  std::vector<IdeaMention> timeline;  // chronological
};

struct PropagationEdge {
  SubgroupId receiver;
  Millis delivered_at{0};
  std::size_t follow_on_count = 0;
};

struct InsightSummary {
  InsightId id;
  SubgroupId source;
  std::string text;
  Millis created_at{0};
  std::vector<MessageId> source_message_ids;
  std::size_t eligible_receivers = 0;
  std::vector<PropagationEdge> edges;  // delivery order
};

struct ForensicReport {
  SessionId session_id;
  SessionMode mode = SessionMode::csi;
  RoutingTopology topology = RoutingTopology::fully_connected;
  std::optional<Millis> started_at;
  std::optional<Millis> ended_at;
  std::string end_reason;
  std::vector<Subgroup> subgroups;
  std::size_t human_messages = 0;
  std::size_t relayed_messages = 0;
  std::vector<IdeaSummary> ideas;  // ranked
  std::vector<InsightSummary> insights;
  ParticipationMetrics participation;
};

/// Offline analysis of a finished (or partial) log. Ideas are rebuilt by
/// replaying human messages in log order, then ranked by subgroup reach, net
/// support, earliest mention and id. Throws std::runtime_error for an
/// inconsistent log; an empty log gives an empty report.
ForensicReport forensic_report(std::span<const SessionEvent> log);

/// Deterministic JSON document (same log, same bytes).
std::string report_json(const ForensicReport& report);

/// Readable summary for facilitators.
std::string render_report_text(const ForensicReport& report, std::size_t max_ideas = 15);

}  // namespace csi
