#pragma once

#include <atomic>
#include <functional>
#include <string>
#include <string_view>

#include "csi/surrogate.hpp"

namespace csi {

/// Distiller backed by an external completion endpoint.
///
/// Request: HTTP POST to the configured URL with a JSON body
/// {"model": ..., "prompt": ..., "max_tokens": ...}. Response: the completion
/// as plain text. One retry on failure; after that the cycle yields nothing
/// and the degradation callback fires. The session keeps running either way.
class LlmDistiller final : public Distiller {
 public:
  using DegradationSink = std::function<void(std::string_view reason)>;

  explicit LlmDistiller(LlmEndpoint endpoint, DegradationSink on_degraded = {});

  std::optional<InsightDraft> distill(const SurrogateState& state, const DistillerPolicy& policy,
                                      const DraftFilter& accept) override;

  std::size_t degradations() const { return degradations_.load(); }

  /// The fixed prompt sent for a buffer of messages.
  static std::string build_prompt(const std::vector<const ChatMessage*>& messages);

 private:
  void degrade(std::string_view reason);

  LlmEndpoint endpoint_;
  DegradationSink on_degraded_;
  std::atomic<std::size_t> degradations_{0};
};

}  // namespace csi
