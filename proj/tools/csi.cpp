// csi: session server, report generator, simulator and survey analysis.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "csi/event_log.hpp"
#include "csi/report.hpp"
#include "csi/scenario.hpp"
#include "csi/serialize.hpp"
#include "csi/server.hpp"
#include "csi/survey.hpp"

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << contents;
}

fs::path text_sibling(const fs::path& json_path) {
  fs::path p = json_path;
  p.replace_extension(".txt");
  if (p == json_path) p += ".txt";
  return p;
}

int serve(int port, int chat_port, const std::string& host, const std::string& config_path,
          const std::string& data_dir) {
  csi::ServerOptions options;
  options.host = host;
  options.http_port = port;
  options.chat_port = chat_port;
  options.data_dir = data_dir;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw std::runtime_error("cannot open config " + config_path);
    csi::from_json(nlohmann::json::parse(in), options.defaults);
    if (auto problems = csi::validate_config(options.defaults); !problems.empty()) {
      for (const auto& p : problems) std::cerr << "config: " << p << "\n";
      return 2;
    }
  }

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  csi::Server server(options);
  server.start();
  std::cout << "control api on http://" << host << ":" << server.http_port() << "\n"
            << "chat records on " << host << ":" << server.chat_port()
            << " (line-delimited JSON or WebSocket)\n"
            << "data in " << fs::absolute(options.data_dir).string() << "\n"
            << std::flush;
  int sig = 0;
  sigwait(&signals, &sig);
  std::cout << "stopping\n";
  server.stop();
  return 0;
}

int report(const std::string& log_path, const std::string& out) {
  const auto events = csi::read_log_file(log_path);
  const auto doc = csi::forensic_report(events);
  write_text(out, csi::report_json(doc));
  write_text(text_sibling(out), csi::render_report_text(doc));
  return 0;
}

int simulate(const std::string& scenario_path, std::optional<std::uint64_t> seed,
             const std::string& out_dir, const std::string& topology) {
  csi::Scenario scenario =
      scenario_path.empty() ? csi::default_scenario() : csi::load_scenario(scenario_path);
  if (!topology.empty()) scenario.topology = csi::parse_routing_topology(topology);
  const std::uint64_t run_seed = seed.value_or(scenario.seed);
  const auto result = csi::run_scenario(scenario, run_seed);
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  csi::write_log_file(dir / "events.log", result.log);
  write_text(dir / "metrics.json", csi::metrics_json(result).dump(2) + "\n");
  const auto doc = csi::forensic_report(result.log);
  write_text(dir / "report.json", csi::report_json(doc));
  write_text(dir / "report.txt", csi::render_report_text(doc));

  const auto s = csi::summarize(result);
  std::cout << scenario.name << " seed " << run_seed << ": " << s.subgroups << " subgroups, "
            << s.human_messages << " human messages, " << s.insights << " insights, "
            << s.deliveries << " deliveries\n"
            << "  reach >= " << s.reach_target << ": " << s.reach_share * 100.0 << "%\n"
            << "  median time to full coverage: "
            << (s.median_full_coverage ? std::to_string(s.median_full_coverage->count() / 1000.0) + " s"
                                       : std::string("not reached"))
            << "\n  gini " << s.gini << ", spread " << s.spread << "\n"
            << "  audit: " << (result.audit.clean() ? "clean" : "VIOLATIONS") << "\n";
  return result.audit.clean() ? 0 : 3;
}

int analyze(const std::string& in_path, double family_alpha, std::size_t tests,
            const std::string& out, const std::string& sided, const std::string& interval) {
  std::ifstream in(in_path);
  if (!in) throw std::runtime_error("cannot open " + in_path);
  const auto responses = csi::survey::parse_survey_csv(in);
  csi::survey::AnalysisOptions options;
  options.family_alpha = family_alpha;
  options.tests = tests;
  options.sidedness = sided == "greater" ? csi::survey::Sidedness::greater
                                         : csi::survey::Sidedness::two_sided;
  options.interval = interval == "wilson" ? csi::survey::IntervalMethod::wilson
                                          : csi::survey::IntervalMethod::wald;
  const auto results = csi::survey::analyze_surveys(responses, options);
  const std::string table = csi::survey::results_table(results, options);
  write_text(out, csi::survey::results_json(results, options));
  write_text(text_sibling(out), table);
  std::cout << table;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conversational swarm deliberation engine"};
  app.require_subcommand(1);

  auto* serve_cmd = app.add_subcommand("serve", "Run the session server");
  int port = 8080;
  int chat_port = 0;
  std::string host = "127.0.0.1";
  std::string config_path;
  std::string data_dir = "csi-data";
  serve_cmd->add_option("--port", port, "HTTP control port")->required();
  serve_cmd->add_option("--chat-port", chat_port, "Chat record port (default: port + 1)");
  serve_cmd->add_option("--host", host, "Listen address");
  serve_cmd->add_option("--config", config_path, "Default session config (JSON)")
      ->check(CLI::ExistingFile);
  serve_cmd->add_option("--data-dir", data_dir, "Directory for logs, reports and surveys");

  auto* report_cmd = app.add_subcommand("report", "Forensic report from an event log");
  std::string log_path;
  std::string report_out;
  report_cmd->add_option("--log", log_path, "Event log")->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--out", report_out, "Report JSON (text version written alongside)")
      ->required();

  auto* sim_cmd = app.add_subcommand("simulate", "Run a scripted-bot scenario");
  std::string scenario_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string topology;
  sim_cmd->add_option("--scenario", scenario_path, "Scenario file (default: built-in)")
      ->check(CLI::ExistingFile);
  sim_cmd->add_option("--seed", seed, "Seed (default: the scenario's)");
  sim_cmd->add_option("--out", out_dir, "Output directory")->required();
  sim_cmd->add_option("--topology", topology, "Override routing: fully_connected | ring")
      ->check(CLI::IsMember({"fully_connected", "ring"}));

  auto* analyze_cmd = app.add_subcommand("analyze", "Survey preference statistics");
  std::string in_path;
  double family_alpha = 0.01;
  std::size_t tests = 7;
  std::string analyze_out;
  std::string sided = "two-sided";
  std::string interval = "wald";
  analyze_cmd->add_option("--in", in_path, "Survey CSV")->required()->check(CLI::ExistingFile);
  analyze_cmd->add_option("--family-alpha", family_alpha, "Family-wise alpha");
  analyze_cmd->add_option("--tests", tests, "Bonferroni test count");
  analyze_cmd->add_option("--out", analyze_out, "Results JSON (table written alongside)")
      ->required();
  analyze_cmd->add_option("--sided", sided, "two-sided | greater")
      ->check(CLI::IsMember({"two-sided", "greater"}));
  analyze_cmd->add_option("--interval", interval, "wald | wilson")
      ->check(CLI::IsMember({"wald", "wilson"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve_cmd)
      return serve(port, chat_port == 0 ? port + 1 : chat_port, host, config_path, data_dir);
    if (*report_cmd) return report(log_path, report_out);
    if (*sim_cmd) return simulate(scenario_path, seed, out_dir, topology);
    if (*analyze_cmd)
      return analyze(in_path, family_alpha, tests, analyze_out, sided, interval);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
