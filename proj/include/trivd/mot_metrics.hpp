#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trivd/assignment.hpp"
#include "trivd/box.hpp"

namespace trivd {

struct Observation {
  std::int64_t frame = 0;
  Box box;
  std::string category;
  double score = 1.0;
};

/// Trajectories keyed by identity; each is ordered by strictly increasing frame.
class TrajectorySet {
 public:
  TrajectorySet() = default;
  explicit TrajectorySet(std::map<TrackId, std::vector<Observation>> trajectories);

  /// Appends one observation, keeping the per-id frame order invariant.
  void add(TrackId id, const Observation& obs);

  const std::map<TrackId, std::vector<Observation>>& trajectories() const {
    return trajectories_;
  }
  bool empty() const { return trajectories_.empty(); }
  std::size_t observation_count() const;

  /// [first, last] frame over all trajectories; nullopt when empty.
  std::optional<std::pair<std::int64_t, std::int64_t>> frame_range() const;

  /// Observations present at `frame`, as (id, observation) in id order.
  std::vector<std::pair<TrackId, Observation>> at_frame(std::int64_t frame) const;

  /// Only the trajectories whose observations have one of `categories`.
  TrajectorySet restricted_to(const std::vector<std::string>& categories) const;

 private:
  std::map<TrackId, std::vector<Observation>> trajectories_;
};

struct FrameMatch {
  std::int64_t frame = 0;
  TrackId gt = 0;
  TrackId pred = 0;
  double iou = 0;
};

struct ClearMotResult {
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t ids = 0;
  std::size_t n_gt = 0;
  std::vector<FrameMatch> matches;
};

inline constexpr double kDefaultMatchIou = 0.5;

/// Frame-by-frame CLEAR-MOT matching: the last known (gt, pred) pairing is
/// kept while the boxes still overlap by iou_thr, the rest is matched by
/// Hungarian on 1 - IoU over pairs with IoU >= iou_thr.
ClearMotResult clear_mot(const TrajectorySet& gt, const TrajectorySet& pred,
                         double iou_thr = kDefaultMatchIou);

/// 1 - (fn + fp + ids) / n_gt; may be negative.
double mota(std::size_t fp, std::size_t fn, std::size_t ids, std::size_t n_gt);

struct IdentityCounts {
  std::size_t idtp = 0;
  std::size_t idfp = 0;
  std::size_t idfn = 0;
  std::map<TrackId, TrackId> pairing;  // gt id -> pred id
  double idf1() const;
};

/// Identity counts from the sequence-level trajectory pairing that maximizes
/// the number of frames on which paired boxes overlap by iou_thr.
IdentityCounts identity_counts(const TrajectorySet& gt, const TrajectorySet& pred,
                               double iou_thr = kDefaultMatchIou);

double idf1(const TrajectorySet& gt, const TrajectorySet& pred,
            double iou_thr = kDefaultMatchIou);

struct TrackedCoverage {
  std::size_t mt = 0;
  std::size_t ml = 0;
};

/// Mostly tracked (> 80% of frames matched) and mostly lost (< 20%).
TrackedCoverage mt_ml(const TrajectorySet& gt,
                      const std::vector<FrameMatch>& matches);

struct ScoredBox {
  std::int64_t frame = 0;
  Box box;
  double score = 0;
};

/// Single-class AP at one IoU threshold with all-point interpolation.
double average_precision(const std::vector<ScoredBox>& dets,
                         const std::vector<std::pair<std::int64_t, Box>>& gts,
                         double iou_thr = kDefaultMatchIou);

/// Mean AP over a list of IoU thresholds.
double average_precision_sweep(const std::vector<ScoredBox>& dets,
                               const std::vector<std::pair<std::int64_t, Box>>& gts,
                               const std::vector<double>& thresholds);

struct MetricsReport {
  double mota = 0;
  double idf1 = 0;
  std::size_t mt = 0;
  std::size_t ml = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t ids = 0;
  std::size_t n_gt = 0;
  std::optional<double> ap;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// All metrics at once. AP is computed per category over the predicted
/// observations (using their scores) and averaged over gt categories.
MetricsReport evaluate(const TrajectorySet& gt, const TrajectorySet& pred,
                       double iou_thr = kDefaultMatchIou);

}  // namespace trivd
