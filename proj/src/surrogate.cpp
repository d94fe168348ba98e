#include "csi/surrogate.hpp"

#include "csi/data.hpp"
#include "csi/text.hpp"

namespace csi {

DistillerPolicy DistillerPolicy::from(const SessionConfig& config) {
  return DistillerPolicy{config.distiller_backend, config.distill_min_tokens,
                         config.distill_every_messages, config.distill_every};
}

void observe(SurrogateState& state, const ChatMessage& message) {
  if (message.subgroup != state.subgroup_id)
    throw ContractViolation("surrogate " + state.surrogate_id.value + " observed message from " +
                            message.subgroup.value);
  if (!message.is_human()) return;
  if (state.covered_message_ids.contains(message.id)) return;
  state.observation_buffer.push_back(message);
}

bool distill_due(const SurrogateState& state, const DistillerPolicy& policy, Millis now) {
  if (state.observation_buffer.empty()) return false;
  return state.observation_buffer.size() >= policy.every_messages ||
         now - state.last_distilled_at >= policy.every;
}

std::size_t salience(std::string_view text) { return tokenize(text).size(); }

std::optional<InsightDraft> propose_extractive(const SurrogateState& state,
                                               const DistillerPolicy& policy,
                                               const DraftFilter& accept) {
  std::optional<InsightDraft> best;
  std::size_t best_salience = 0;
  for (const auto& message : state.observation_buffer) {
    if (!message.is_human() || state.covered_message_ids.contains(message.id)) continue;
    const std::size_t s = salience(message.text);
    if (s < policy.min_tokens || s <= best_salience) continue;
    InsightDraft draft{message.text, {message.id}};
    if (accept && !accept(draft)) continue;
    best = std::move(draft);
    best_salience = s;
  }
  return best;
}

void commit_distillation(SurrogateState& state, const Insight& insight) {
  for (const auto& id : insight.source_message_ids) state.covered_message_ids.insert(id);
  state.observation_buffer.clear();
  state.last_distilled_at = insight.created_at;
}

std::optional<Insight> distill(SurrogateState& state, const DistillerPolicy& policy,
                               InsightId id, Millis now) {
  auto draft = propose_extractive(state, policy);
  if (!draft) return std::nullopt;
  Insight insight{std::move(id), state.subgroup_id, std::move(draft->text),
                  std::move(draft->source_message_ids), now, {}};
  commit_distillation(state, insight);
  return insight;
}

const std::vector<std::string>& framing_phrases() { return data::lines("framing"); }

std::string_view framing_phrase(std::uint64_t template_seed) {
  const auto& phrases = framing_phrases();
  return phrases[template_seed % phrases.size()];
}

ChatMessage render_insight(const Insight& insight, std::uint64_t template_seed,
                           const SurrogateId& surrogate, const SubgroupId& receiver,
                           MessageId id, Millis now) {
  std::string text(framing_phrase(template_seed));
  text += ' ';
  text += insight.text;
  return make_relay_message(std::move(id), receiver, surrogate, now, std::move(text), insight.id);
}

std::optional<std::string> strip_framing(std::string_view text) {
  for (const auto& phrase : framing_phrases()) {
    if (text.size() > phrase.size() && text.starts_with(phrase) && text[phrase.size()] == ' ')
      return std::string(text.substr(phrase.size() + 1));
  }
  return std::nullopt;
}

}  // namespace csi
