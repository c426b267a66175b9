#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "trivd/assignment.hpp"
#include "trivd/box.hpp"
#include "trivd/grounding.hpp"

namespace trivd {

struct TrackerConfig {
  double sigma_track = 0.4;   // deactivate below this score
  double sigma_nms = 0.9;     // suppress the weaker of two tracks above this IoU
  int n_reid = 5;             // frames an inactive track is kept
  double sigma_reid = 0.4;    // minimum score that can re-identify
  double init_iou = 0.5;      // public-detection overlap needed to start a track
  std::size_t n_box = 500;    // detections per frame
  double min_similarity = 0.5;  // embedding cosine needed to bind or re-identify

  void validate() const;
};

enum class TrackStatus { active, inactive, removed };

struct Track {
  TrackId id = 0;
  Box box;
  std::string category;
  double score = 0;
  Eigen::VectorXd embed;
  TrackStatus status = TrackStatus::active;
  int frames_inactive = 0;
  std::vector<std::pair<std::int64_t, Box>> history;
};

struct TrackState {
  std::int64_t frame_index = 0;
  std::vector<Track> tracks;   // active and inactive, ordered by id
  std::vector<Track> retired;  // removed tracks, kept for inspection
  TrackId next_id = 0;
};

struct StepResult {
  std::vector<Track> outputs;                    // active tracks, by id
  std::vector<std::optional<TrackId>> bindings;  // detection -> track
};

/// Advances `state` by one frame. Phases run in this order:
///  1. track-query detections update their track; other detections bind to
///     the remaining active tracks by embedding similarity;
///  2. active tracks without a detection, or scoring below sigma_track, go
///     inactive;
///  3. NMS among active tracks;
///  4. re-identification of previously inactive tracks;
///  5. new tracks from the leftover confident detections (gated by
///     `public_boxes` when given);
///  6. inactive patience counters advance and expired tracks are retired.
StepResult step(TrackState& state, const std::vector<Prediction>& detections,
                const TextPrompt& prompt, const TrackerConfig& cfg,
                const std::optional<std::vector<Box>>& public_boxes =
                    std::nullopt);

/// Greedy re-identification: pairs by descending embedding cosine (ties by
/// IoU with the track's last box) among candidates scoring at least
/// sigma_reid with the track's category.
std::vector<std::pair<TrackId, std::size_t>> reidentify(
    const std::vector<Track>& inactive, const std::vector<Prediction>& candidates,
    const TextPrompt& prompt, const TrackerConfig& cfg);

std::vector<std::vector<Track>> run_sequence(
    const std::vector<std::vector<Prediction>>& frames, const TextPrompt& prompt,
    const TrackerConfig& cfg);

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace trivd
