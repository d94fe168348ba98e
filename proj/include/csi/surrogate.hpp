#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "csi/model.hpp"

namespace csi {

struct DistillerPolicy {
  DistillerBackend backend = DistillerBackend::stub_extractive;
  std::size_t min_tokens = 5;
  std::size_t every_messages = 6;
  Millis every{60'000};

  static DistillerPolicy from(const SessionConfig& config);
};

/// One conversational surrogate: watches its own subgroup and remembers what
/// it has already passed on.
struct SurrogateState {
  SurrogateId surrogate_id;
  SubgroupId subgroup_id;
  std::vector<ChatMessage> observation_buffer;  // human messages since last distillation
  std::set<MessageId> covered_message_ids;
  Millis last_distilled_at{0};

  friend bool operator==(const SurrogateState&, const SurrogateState&) = default;
};

/// Appends human messages; ignores surrogate messages so relays never echo.
/// Throws ContractViolation for a message from another subgroup.
void observe(SurrogateState& state, const ChatMessage& message);

/// K buffered messages, or a non-empty buffer and T elapsed since the last
/// distillation.
bool distill_due(const SurrogateState& state, const DistillerPolicy& policy, Millis now);

/// Content-token count.
std::size_t salience(std::string_view text);

struct InsightDraft {
  std::string text;
  std::vector<MessageId> source_message_ids;

  friend bool operator==(const InsightDraft&, const InsightDraft&) = default;
};

using DraftFilter = std::function<bool(const InsightDraft&)>;

/// Extractive proposal: the uncovered buffered message with the most content
/// tokens (earliest on ties), verbatim. Messages under min_tokens and drafts
/// rejected by `accept` are skipped.
std::optional<InsightDraft> propose_extractive(const SurrogateState& state,
                                               const DistillerPolicy& policy,
                                               const DraftFilter& accept = {});

/// Marks the insight's sources covered and starts a new observation window.
void commit_distillation(SurrogateState& state, const Insight& insight);

/// Stub distillation end to end: propose, build the Insight, commit.
std::optional<Insight> distill(SurrogateState& state, const DistillerPolicy& policy,
                               InsightId id, Millis now);

/// Backend that turns a surrogate's buffer into an insight draft.
class Distiller {
 public:
  virtual ~Distiller() = default;
  /// none when there is nothing worth relaying or the backend failed.
  virtual std::optional<InsightDraft> distill(const SurrogateState& state,
                                              const DistillerPolicy& policy,
                                              const DraftFilter& accept) = 0;
};

class ExtractiveDistiller final : public Distiller {
 public:
  std::optional<InsightDraft> distill(const SurrogateState& state, const DistillerPolicy& policy,
                                      const DraftFilter& accept) override {
    return propose_extractive(state, policy, accept);
  }
};

const std::vector<std::string>& framing_phrases();

/// Framing phrase by seeded rotation over the shipped list.
std::string_view framing_phrase(std::uint64_t template_seed);

/// Surrogate-authored relay: "<framing phrase> <insight text>".
ChatMessage render_insight(const Insight& insight, std::uint64_t template_seed,
                           const SurrogateId& surrogate, const SubgroupId& receiver,
                           MessageId id, Millis now);

/// Inverse of the framing: the relayed body if `text` starts with a shipped
/// framing phrase followed by a space.
std::optional<std::string> strip_framing(std::string_view text);

}  // namespace csi
