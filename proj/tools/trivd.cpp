// trivd: simulate scenarios, run the tracker, score tracks, check gradients.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "trivd/harness.hpp"
#include "trivd/io.hpp"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitTolerance = 2;

void configure_logging() {
  const char* level = std::getenv("TRIVD_LOG");
  spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::warn);
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

int cmd_simulate(const std::string& config_path, const std::string& out_path) {
  const auto cfg = trivd::read_json_file(config_path).get<trivd::ScenarioConfig>();
  const auto scenario = trivd::generate_scenario(cfg);
  spdlog::info("generated {} frames, {} gt trajectories", scenario.detections.size(),
               scenario.gt.trajectories().size());
  trivd::write_json_file(out_path, trivd::scenario_to_json(scenario));
  return 0;
}

int cmd_track(const std::string& scenario_path, const std::string& tracker_path,
              const std::string& prompt, const std::string& out_path,
              const std::string& json_path) {
  const auto scenario = trivd::scenario_from_json(trivd::read_json_file(scenario_path));
  trivd::TrackerConfig cfg;
  if (!tracker_path.empty()) {
    cfg = trivd::read_json_file(tracker_path).get<trivd::TrackerConfig>();
  }
  std::optional<std::vector<std::string>> categories;
  if (!prompt.empty()) {
    categories = trivd::parse_prompt_categories(prompt, scenario.prompt.categories());
  }
  const auto result = trivd::run_pipeline(scenario, cfg, categories);
  spdlog::info("{} tracks, MOTA {:.4f}, IDF1 {:.4f}",
               result.tracks.trajectories().size(), result.report.mota,
               result.report.idf1);
  std::ofstream out(out_path);
  if (!out) throw trivd::ValidationError("cannot write '" + out_path + "'");
  trivd::write_tracks_csv(out, result.tracks);
  if (!json_path.empty()) trivd::write_json_file(json_path, trivd::Json(result.tracks));
  return 0;
}

int cmd_evaluate(const std::string& scenario_path, const std::string& tracks_path,
                 const std::string& prompt, double iou_thr,
                 const std::string& out_path) {
  const auto scenario = trivd::scenario_from_json(trivd::read_json_file(scenario_path));
  trivd::TrajectorySet tracks;
  if (ends_with(tracks_path, ".json")) {
    tracks = trivd::read_json_file(tracks_path).get<trivd::TrajectorySet>();
  } else {
    std::ifstream in(tracks_path);
    if (!in) throw trivd::ValidationError("cannot open '" + tracks_path + "'");
    tracks = trivd::read_tracks_csv(in);
  }
  auto gt = scenario.gt;
  if (!prompt.empty()) {
    const auto categories =
        trivd::parse_prompt_categories(prompt, scenario.prompt.categories());
    gt = gt.restricted_to(categories);
    tracks = tracks.restricted_to(categories);
  }
  const trivd::Json report = trivd::evaluate(gt, tracks, iou_thr);
  if (out_path.empty()) {
    std::cout << report.dump(2) << '\n';
  } else {
    trivd::write_json_file(out_path, report);
  }
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t fixtures, double tolerance) {
  const auto summary = trivd::gradcheck_all(seed, fixtures);
  for (const auto& l : summary.losses) {
    std::cout << l.loss << ": fixtures=" << l.fixtures
              << " max_abs_err=" << l.max_abs_err
              << " max_rel_err=" << l.max_rel_err
              << (l.max_rel_err < tolerance ? " ok" : " FAIL") << '\n';
  }
  return summary.passed(tolerance) ? 0 : kExitTolerance;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"trivd: synthetic detection-tracking engine"};
  app.require_subcommand(1);

  std::string config_path, out_path, scenario_path, tracker_path, prompt,
      tracks_path, json_path;
  double iou_thr = trivd::kDefaultMatchIou;
  std::uint64_t seed = 0;
  std::size_t fixtures = 50;
  double tolerance = 1e-3;

  auto* simulate = app.add_subcommand("simulate", "generate a synthetic scenario");
  simulate->add_option("--config", config_path, "scenario config JSON")->required();
  simulate->add_option("--out", out_path, "scenario JSON output")->required();

  auto* track = app.add_subcommand("track", "run the tracker over a scenario");
  track->add_option("--scenario", scenario_path)->required();
  track->add_option("--tracker", tracker_path, "tracker config JSON");
  track->add_option("--prompt", prompt, "categories to track, e.g. \"person car\"");
  track->add_option("--out", out_path, "tracks CSV output")->required();
  track->add_option("--json", json_path, "optional tracks JSON output");

  auto* evaluate = app.add_subcommand("evaluate", "score tracks against a scenario");
  evaluate->add_option("--scenario", scenario_path)->required();
  evaluate->add_option("--tracks", tracks_path, "tracks CSV or JSON")->required();
  evaluate->add_option("--prompt", prompt, "score only these categories");
  evaluate->add_option("--iou", iou_thr, "match IoU threshold");
  evaluate->add_option("--out", out_path, "report JSON output (stdout if absent)");

  auto* gradcheck = app.add_subcommand("gradcheck", "check analytic loss gradients");
  gradcheck->add_option("--seed", seed)->required();
  gradcheck->add_option("--fixtures", fixtures);
  gradcheck->add_option("--tolerance", tolerance);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitValidation;
  }

  try {
    if (*simulate) return cmd_simulate(config_path, out_path);
    if (*track) return cmd_track(scenario_path, tracker_path, prompt, out_path, json_path);
    if (*evaluate) return cmd_evaluate(scenario_path, tracks_path, prompt, iou_thr, out_path);
    if (*gradcheck) return cmd_gradcheck(seed, fixtures, tolerance);
  } catch (const trivd::Error& e) {
    spdlog::error("{}", e.what());
    return kExitValidation;
  } catch (const nlohmann::json::exception& e) {
    spdlog::error("malformed JSON input: {}", e.what());
    return kExitValidation;
  }
  return 0;
}
