#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trivd/assignment.hpp"
#include "trivd/grounding.hpp"
#include "trivd/mot_metrics.hpp"
#include "trivd/tracker.hpp"

namespace trivd {

/// Object `object` is hidden (no annotation, no detection) on frames
/// [first, last].
struct OcclusionWindow {
  std::size_t object = 0;
  std::int64_t first = 0;
  std::int64_t last = 0;
};

struct ScenarioConfig {
  std::uint64_t seed = 0;
  std::size_t frames = 50;
  std::vector<std::string> categories{"person", "car"};
  std::size_t objects_per_category = 5;
  double image_width = 1280;
  double image_height = 720;
  double max_speed = 6;  // per-axis velocity drawn from [-max_speed, max_speed]
  double min_box = 40;
  double max_box = 120;
  double box_jitter = 0;    // stddev of per-coordinate Gaussian noise
  double score_noise = 0;   // stddev; scores are 1 - |noise|
  double drop_prob = 0;     // per detection
  double fp_rate = 0;       // mean false positives per frame (Poisson)
  double embed_noise = 0;   // stddev added to identity directions
  std::size_t embed_dim = 32;
  std::vector<OcclusionWindow> occlusions;
  std::size_t clip_len = 3;
  bool track_queries = false;  // simulate track-query inheritance

  void validate() const;
};

struct Scenario {
  ScenarioConfig config;
  TextPrompt prompt;
  TrajectorySet gt;
  std::vector<std::vector<Prediction>> detections;
  /// Ground-truth object behind each detection; -1 for false positives.
  /// Track-query origins in `detections` use these object ids.
  std::vector<std::vector<std::int64_t>> sources;
};

Scenario generate_scenario(const ScenarioConfig& cfg);

struct PipelineResult {
  TrajectorySet tracks;
  MetricsReport report;
  std::vector<std::vector<Track>> per_frame;
};

/// Filters detections to the prompted categories, tracks them, and scores the
/// tracks against the ground truth of the same categories. An empty
/// `prompt_categories` optional means every scenario category.
PipelineResult run_pipeline(
    const Scenario& scenario, const TrackerConfig& cfg,
    const std::optional<std::vector<std::string>>& prompt_categories =
        std::nullopt,
    double iou_thr = kDefaultMatchIou);

/// Splits free text such as "person traffic light" into known category names,
/// preferring the longest category that matches at each position.
std::vector<std::string> parse_prompt_categories(
    const std::string& text, const std::vector<std::string>& categories);

/// Per-frame tracker outputs flattened into trajectories.
TrajectorySet tracks_to_trajectories(
    const std::vector<std::vector<Track>>& per_frame);

struct LossGradCheck {
  std::string loss;
  std::size_t fixtures = 0;
  double max_abs_err = 0;
  double max_rel_err = 0;
};

struct GradCheckSummary {
  std::vector<LossGradCheck> losses;
  bool passed(double tolerance = 1e-3) const;
};

/// Analytic-vs-central-difference checks for soft_token_loss,
/// contrastive_alignment_loss, box_loss and total_loss on randomized small
/// fixtures.
GradCheckSummary gradcheck_all(std::uint64_t seed, std::size_t fixtures = 50,
                               double eps = 1e-5);

}  // namespace trivd
