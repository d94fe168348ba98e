#include "csi/scenario.hpp"

#include <fstream>

#include "csi/data.hpp"
#include "csi/serialize.hpp"

namespace csi {

namespace {

std::string_view to_string(ReplyPolicy::Kind kind) {
  return kind == ReplyPolicy::Kind::echo_topic ? "echo_topic" : "silent";
}

ReplyPolicy::Kind parse_reply_kind(const std::string& text) {
  if (text == "silent") return ReplyPolicy::Kind::silent;
  if (text == "echo_topic") return ReplyPolicy::Kind::echo_topic;
  throw std::invalid_argument("unknown reply policy: " + text);
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
  return s;
}

}  // namespace

Scenario parse_scenario(const nlohmann::json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("scenario must be a JSON object");
  Scenario s;
  if (auto it = doc.find("name"); it != doc.end()) s.name = it->get<std::string>();
  if (auto it = doc.find("config"); it != doc.end()) from_json(*it, s.config);
  if (auto it = doc.find("topology"); it != doc.end())
    s.topology = parse_routing_topology(it->get<std::string>());
  if (auto it = doc.find("roster_size"); it != doc.end()) s.roster_size = it->get<std::size_t>();
  if (auto it = doc.find("seed"); it != doc.end()) s.seed = it->get<std::uint64_t>();
  if (auto it = doc.find("script"); it != doc.end()) {
    const auto& j = *it;
    if (auto f = j.find("object"); f != j.end()) s.script.object = f->get<std::string>();
    if (auto f = j.find("message_interval"); f != j.end())
      s.script.message_interval = seconds_from_json(*f);
    if (auto f = j.find("jitter"); f != j.end()) s.script.jitter = seconds_from_json(*f);
    if (auto f = j.find("silent_fraction"); f != j.end())
      s.script.silent_fraction = f->get<double>();
    if (auto f = j.find("reply_policy"); f != j.end()) {
      s.script.reply.kind = parse_reply_kind(f->at("kind").get<std::string>());
      if (auto p = f->find("probability"); p != f->end())
        s.script.reply.probability = p->get<double>();
    }
  }
  if (s.script.jitter > s.script.message_interval)
    throw std::invalid_argument("script jitter exceeds message_interval");
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario " + path.string());
  return parse_scenario(nlohmann::json::parse(in));
}

nlohmann::json scenario_to_json(const Scenario& s) {
  return {{"name", s.name},
          {"config", s.config},
          {"topology", to_string(s.topology)},
          {"roster_size", s.roster_size},
          {"seed", s.seed},
          {"script",
           {{"object", s.script.object},
            {"message_interval", seconds_to_json(s.script.message_interval)},
            {"jitter", seconds_to_json(s.script.jitter)},
            {"silent_fraction", s.script.silent_fraction},
            {"reply_policy",
             {{"kind", to_string(s.script.reply.kind)},
              {"probability", s.script.reply.probability}}}}}};
}

Scenario default_scenario() {
  Scenario s;
  s.name = "default";
  s.config.task_prompt = "List as many alternative uses for traffic cones as you can.";
  s.config.tick_interval = Millis{5'000};
  s.config.starvation_threshold = Millis{5'000};
  s.config.distill_every_messages = 30;
  s.config.distill_every = Millis{110'000};
  s.script.reply = {ReplyPolicy::Kind::echo_topic, 0.1};
  return s;
}

std::string bot_utterance(const std::string& object, Rng& rng) {
  const auto& templates = data::lines("aut_templates");
  const auto& uses = data::lines("aut_" + object);
  const std::string& t = templates[rng.below(templates.size())];
  const std::string& use = uses[rng.below(uses.size())];
  return replace_all(replace_all(t, "{object}", replace_all(object, "_", " ")), "{use}", use);
}

std::vector<BotScript> generate_scripts(const ScriptSpec& spec, std::size_t roster_size,
                                        Millis duration, std::uint64_t seed) {
  std::vector<bool> silent(roster_size, false);
  const auto n_silent = static_cast<std::size_t>(spec.silent_fraction *
                                                 static_cast<double>(roster_size));
  std::vector<std::size_t> order(roster_size);
  for (std::size_t i = 0; i < roster_size; ++i) order[i] = i;
  Rng pick(mix_seed(seed, 0xC0FFEE));
  pick.shuffle(std::span<std::size_t>(order));
  for (std::size_t i = 0; i < n_silent && i < roster_size; ++i) silent[order[i]] = true;

  std::vector<BotScript> scripts;
  for (std::size_t b = 0; b < roster_size; ++b) {
    BotScript script{sequential_id("bot", b + 1, 3), {}, spec.reply};
    Rng rng(mix_seed(seed, 1'000'000 + b));
    const auto interval = spec.message_interval.count();
    if (!silent[b] && interval > 0) {
      const auto jitter = spec.jitter.count();
      auto t = static_cast<long long>(rng.below(static_cast<std::uint64_t>(interval)));
      while (Millis{t} < duration) {
        script.schedule.push_back({Millis{t}, bot_utterance(spec.object, rng)});
        const auto gap = interval - jitter +
                         static_cast<long long>(rng.below(static_cast<std::uint64_t>(2 * jitter + 1)));
        t += std::max<long long>(gap, 1'000);
      }
    }
    scripts.push_back(std::move(script));
  }
  return scripts;
}

ScenarioResult run_scenario(const Scenario& scenario, std::uint64_t seed,
                            const ScenarioOptions& options) {
  ScenarioOptions opts = options;
  opts.topology = scenario.topology;
  SessionConfig config = scenario.config;
  if (config.session_id.empty())
    config.session_id = SessionId("sim-" + scenario.name + "-" + std::to_string(seed));
  const auto scripts =
      generate_scripts(scenario.script, scenario.roster_size, scenario.config.duration, seed);
  return run_scenario(config, scripts, seed, opts);
}

nlohmann::json metrics_json(const ScenarioResult& result) {
  const ScenarioSummary s = summarize(result);
  nlohmann::json insights = nlohmann::json::array();
  for (const auto& r : result.propagation) {
    nlohmann::json deliveries = nlohmann::json::array();
    for (const auto& [receiver, at] : r.deliveries)
      deliveries.push_back({{"receiver", receiver}, {"latency_ms", (at - r.created_at).count()}});
    const auto full = r.time_to_full_coverage();
    insights.push_back({{"insight_id", r.insight_id},
                        {"source_subgroup", r.source},
                        {"created_at", r.created_at.count()},
                        {"coverage", r.coverage()},
                        {"eligible_receivers", r.eligible_receivers},
                        {"time_to_full_coverage_ms", full ? nlohmann::json(full->count())
                                                          : nlohmann::json(nullptr)},
                        {"deliveries", deliveries}});
  }
  nlohmann::json people = nlohmann::json::array();
  for (const auto& p : result.participation.per_participant)
    people.push_back({{"participant_id", p.participant},
                      {"display_name", p.display_name},
                      {"messages", p.messages}});
  const auto& a = result.audit;
  return {{"summary",
           {{"subgroups", s.subgroups},
            {"insights", s.insights},
            {"deliveries", s.deliveries},
            {"human_messages", s.human_messages},
            {"relayed_messages", s.relayed_messages},
            {"reach_target", s.reach_target},
            {"reach_share", s.reach_share},
            {"median_time_to_full_coverage_ms",
             s.median_full_coverage ? nlohmann::json(s.median_full_coverage->count())
                                    : nlohmann::json(nullptr)},
            {"gini", s.gini},
            {"spread", s.spread}}},
          {"audit",
           {{"ticks", a.ticks},
            {"self_deliveries", a.self_deliveries},
            {"duplicate_deliveries", a.duplicate_deliveries},
            {"starvation_violations", a.starvation_violations},
            {"longest_qualified_wait_ms", a.longest_qualified_wait.count()},
            {"order_mismatches", a.order_mismatches},
            {"foreign_receipts", a.foreign_receipts}}},
          {"insights", insights},
          {"participation",
           {{"participants", people},
            {"spread", result.participation.spread},
            {"gini", result.participation.gini}}}};
}

}  // namespace csi
