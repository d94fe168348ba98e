#include "csi/llm_distiller.hpp"

#include <httplib.h>

#include <json.hpp>

#include "csi/text.hpp"

namespace csi {

namespace {

constexpr int kMaxCompletionTokens = 120;

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

LlmDistiller::LlmDistiller(LlmEndpoint endpoint, DegradationSink on_degraded)
    : endpoint_(std::move(endpoint)), on_degraded_(std::move(on_degraded)) {}

std::string LlmDistiller::build_prompt(const std::vector<const ChatMessage*>& messages) {
  std::string prompt =
      "You relay ideas between small discussion groups. Read the messages below and "
      "restate the single most important idea in one sentence, quoting the participants' "
      "own words. Do not add ideas, opinions or facts of your own.\n\nMessages:\n";
  for (const auto* m : messages) {
    prompt += "- ";
    prompt += m->text;
    prompt += '\n';
  }
  prompt += "\nOne-sentence distillation:";
  return prompt;
}

void LlmDistiller::degrade(std::string_view reason) {
  ++degradations_;
  if (on_degraded_) on_degraded_(reason);
}

std::optional<InsightDraft> LlmDistiller::distill(const SurrogateState& state,
                                                  const DistillerPolicy& policy,
                                                  const DraftFilter& accept) {
  std::vector<const ChatMessage*> sources;
  bool any_salient = false;
  for (const auto& m : state.observation_buffer) {
    if (!m.is_human() || state.covered_message_ids.contains(m.id)) continue;
    sources.push_back(&m);
    any_salient = any_salient || salience(m.text) >= policy.min_tokens;
  }
  if (!any_salient) return std::nullopt;

  nlohmann::json body = {{"model", endpoint_.model},
                         {"prompt", build_prompt(sources)},
                         {"max_tokens", kMaxCompletionTokens}};
  const auto [origin, path] = split_url(endpoint_.url);
  httplib::Client client(origin);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(endpoint_.timeout);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  std::string failure;
  for (int attempt = 0; attempt < 2; ++attempt) {
    auto res = client.Post(path, body.dump(), "application/json");
    if (!res) {
      failure = "llm endpoint unreachable: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      failure = "llm endpoint returned status " + std::to_string(res->status);
      continue;
    }
    std::string text = trim(res->body);
    if (text.empty()) {
      failure = "llm endpoint returned an empty completion";
      continue;
    }
    InsightDraft draft{std::move(text), {}};
    for (const auto* m : sources) draft.source_message_ids.push_back(m->id);
    if (accept && !accept(draft)) return std::nullopt;
    return draft;
  }
  degrade(failure);
  return std::nullopt;
}

}  // namespace csi
