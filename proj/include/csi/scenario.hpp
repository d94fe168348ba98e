#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "csi/model.hpp"
#include "csi/rng.hpp"
#include "csi/simharness.hpp"

namespace csi {

/// Parameters for generated bot scripts.
struct ScriptSpec {
  std::string object = "traffic_cones";  // phrase list data/aut_<object>.txt
  Millis message_interval{20'000};       // 0 = bots never speak
  Millis jitter{4'000};                  // each gap is interval ± jitter
  double silent_fraction = 0.0;          // share of bots that never speak
  ReplyPolicy reply;
};

/// A simulation run description, as stored in scenario files.
struct Scenario {
  std::string name = "scenario";
  SessionConfig config;
  RoutingTopology topology = RoutingTopology::fully_connected;
  std::size_t roster_size = 75;
  ScriptSpec script;
  std::uint64_t seed = 1;
};

/// Missing fields keep their defaults.
Scenario parse_scenario(const nlohmann::json& doc);
Scenario load_scenario(const std::filesystem::path& path);
nlohmann::json scenario_to_json(const Scenario& scenario);

/// The 15x5 brainstorm with talkative bots that ships as scenarios/default.json.
Scenario default_scenario();

/// Alternative-use utterance from the shipped templates and phrase lists.
std::string bot_utterance(const std::string& object, Rng& rng);

/// One script per bot, bot-001 upwards. Deterministic in `seed`.
std::vector<BotScript> generate_scripts(const ScriptSpec& spec, std::size_t roster_size,
                                        Millis duration, std::uint64_t seed);

ScenarioResult run_scenario(const Scenario& scenario, std::uint64_t seed,
                            const ScenarioOptions& options = {});

/// Metrics document written next to the event log by `simulate`.
nlohmann::json metrics_json(const ScenarioResult& result);

}  // namespace csi
