#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "trivd/box.hpp"
#include "trivd/grounding.hpp"
#include "trivd/hungarian.hpp"

namespace trivd {

using TrackId = std::int64_t;

/// Which decoder query produced a prediction: a fresh (empty) object query or
/// the track query carried over for an existing identity.
class QueryOrigin {
 public:
  static QueryOrigin empty() { return QueryOrigin{}; }
  static QueryOrigin track(TrackId id) { return QueryOrigin{id}; }

  bool is_track_query() const { return track_id_.has_value(); }
  TrackId track_id() const { return track_id_.value(); }

  friend bool operator==(const QueryOrigin&, const QueryOrigin&) = default;

 private:
  QueryOrigin() = default;
  explicit QueryOrigin(TrackId id) : track_id_(id) {}
  std::optional<TrackId> track_id_;
};

struct Prediction {
  Box box;
  TokenSpanDistribution span_dist;
  double score = 1.0;
  QueryOrigin origin = QueryOrigin::empty();
  Eigen::VectorXd embed;  // decoder output embedding; may be empty
};

struct GroundTruth {
  Box box;
  std::string category;
  std::optional<TrackId> track_id;
};

struct LossWeights {
  double lambda_l1 = 5.0;
  double lambda_giou = 2.0;

  void validate() const;
};

inline constexpr double kDefaultClassWeight = 2.0;

enum class MatchMode { detection, tracking };

/// Injective ground-truth -> prediction mapping; predictions left out are
/// assigned the no-object label.
struct AssignmentResult {
  struct Pair {
    std::size_t gt = 0;
    std::size_t pred = 0;
    double cost = 0;
    friend bool operator==(const Pair&, const Pair&) = default;
  };

  MatchMode mode = MatchMode::detection;
  std::vector<Pair> pairs;
  std::vector<std::size_t> unmatched_preds;
  std::vector<std::size_t> unmatched_gts;
  double total_cost = 0;

  /// Matched ground truth of prediction `pred`, if any.
  std::optional<std::size_t> gt_of(std::size_t pred) const;
};

/// Generic solver entry point: rows are ground truths, columns predictions.
AssignmentResult hungarian(const Eigen::MatrixXd& cost);

/// lambda_l1 * |gt - pred|_1 + lambda_giou * (1 - giou(gt, pred)).
double box_loss(const Box& gt, const Box& pred, const LossWeights& w);

/// d box_loss / d pred in (x0,y0,x1,y1) order.
std::array<double, 4> box_loss_grad(const Box& gt, const Box& pred,
                                    const LossWeights& w);

/// class_weight * (1 - pred mass on gt span) + box_loss; rows = gts.
Eigen::MatrixXd detection_cost_matrix(const std::vector<Prediction>& preds,
                                      const std::vector<GroundTruth>& gts,
                                      const TextPrompt& prompt,
                                      const LossWeights& w,
                                      double class_weight = kDefaultClassWeight);

/// Detection matching: every prediction competes as a newly appeared object.
AssignmentResult match_detection(const std::vector<Prediction>& preds,
                                 const std::vector<GroundTruth>& gts,
                                 const TextPrompt& prompt, const LossWeights& w,
                                 double class_weight = kDefaultClassWeight);

/// Tracking matching. Track queries whose identity is present in `gts` are
/// paired with it unconditionally; track queries whose identity vanished go
/// to no-object; the remaining ground truths are matched against the empty
/// queries exactly as in match_detection.
AssignmentResult match_tracking(const std::vector<Prediction>& preds,
                                const std::vector<GroundTruth>& gts,
                                const std::set<TrackId>& prev_ids,
                                const TextPrompt& prompt, const LossWeights& w,
                                double class_weight = kDefaultClassWeight);

struct LossBreakdown {
  double soft = 0;
  double contrast = 0;
  double box_detect = 0;
  double box_track = 0;
  double total() const { return soft + contrast + box_detect + box_track; }
};

/// Combined training loss for one frame.
///
/// Box terms are summed over matched pairs; a pair counts toward box_track
/// when the assignment came from tracking and the prediction is a track
/// query, otherwise toward box_detect. Unmatched predictions only receive the
/// soft-token loss toward no-object. The soft-token term averages over all
/// predictions.
LossBreakdown total_loss(const AssignmentResult& assignment,
                         const std::vector<Prediction>& preds,
                         const std::vector<GroundTruth>& gts,
                         const TextPrompt& prompt,
                         const AlignmentBatch& align_batch,
                         const LossWeights& w);

/// Differentiable view of a prediction set: boxes as [N,4] corner rows and
/// span distributions as [N,L+1] rows, which need not be normalized.
struct PredictionParameters {
  Eigen::MatrixXd boxes;
  Eigen::MatrixXd span_probs;
  std::vector<QueryOrigin> origins;
};

PredictionParameters to_parameters(const std::vector<Prediction>& preds);

LossBreakdown total_loss(const AssignmentResult& assignment,
                         const PredictionParameters& params,
                         const std::vector<GroundTruth>& gts,
                         const TextPrompt& prompt,
                         const AlignmentBatch& align_batch,
                         const LossWeights& w);

struct TotalLossGrad {
  Eigen::MatrixXd pred_boxes;   // [N_pred, 4]
  Eigen::MatrixXd span_probs;   // [N_pred, L+1]
  Eigen::MatrixXd object_embeds;
  Eigen::MatrixXd token_embeds;
};

/// Gradient of total_loss().total() with the assignment held fixed. Span
/// probabilities are treated as free coordinates.
TotalLossGrad total_loss_grad(const AssignmentResult& assignment,
                              const PredictionParameters& params,
                              const std::vector<GroundTruth>& gts,
                              const TextPrompt& prompt,
                              const AlignmentBatch& align_batch,
                              const LossWeights& w);

/// Soft-token targets implied by an assignment, one per prediction.
std::vector<TokenSpanDistribution> soft_targets(
    const AssignmentResult& assignment, const std::vector<Prediction>& preds,
    const std::vector<GroundTruth>& gts, const TextPrompt& prompt);

}  // namespace trivd
