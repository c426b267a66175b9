#include "trivd/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace trivd {

void LossWeights::validate() const {
  if (!(lambda_l1 >= 0) || !(lambda_giou >= 0) || !std::isfinite(lambda_l1) ||
      !std::isfinite(lambda_giou)) {
    throw ValidationError("loss weights must be finite and >= 0");
  }
  if (lambda_l1 == 0 && lambda_giou == 0) {
    throw ValidationError("loss weights must not both be zero");
  }
}

std::optional<std::size_t> AssignmentResult::gt_of(std::size_t pred) const {
  for (const auto& p : pairs) {
    if (p.pred == pred) return p.gt;
  }
  return std::nullopt;
}

namespace {

AssignmentResult finish(MatchMode mode, std::vector<AssignmentResult::Pair> pairs,
                        std::size_t n_gts, std::size_t n_preds) {
  AssignmentResult result;
  result.mode = mode;
  std::sort(pairs.begin(), pairs.end(),
            [](const auto& a, const auto& b) { return a.gt < b.gt; });
  std::vector<bool> gt_used(n_gts, false), pred_used(n_preds, false);
  for (const auto& p : pairs) {
    gt_used[p.gt] = true;
    pred_used[p.pred] = true;
    result.total_cost += p.cost;
  }
  for (std::size_t j = 0; j < n_preds; ++j) {
    if (!pred_used[j]) result.unmatched_preds.push_back(j);
  }
  for (std::size_t i = 0; i < n_gts; ++i) {
    if (!gt_used[i]) result.unmatched_gts.push_back(i);
  }
  result.pairs = std::move(pairs);
  return result;
}

double l1_distance(const Box& a, const Box& b) {
  return std::abs(a.x0 - b.x0) + std::abs(a.y0 - b.y0) +
         std::abs(a.x1 - b.x1) + std::abs(a.y1 - b.y1);
}

double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

Box box_row(const Eigen::MatrixXd& boxes, Eigen::Index i) {
  return Box{boxes(i, 0), boxes(i, 1), boxes(i, 2), boxes(i, 3)};
}

}  // namespace

AssignmentResult hungarian(const Eigen::MatrixXd& cost) {
  std::vector<AssignmentResult::Pair> pairs;
  for (const auto& m : solve_assignment(cost)) {
    pairs.push_back({m.row, m.col, m.cost});
  }
  return finish(MatchMode::detection, std::move(pairs),
                static_cast<std::size_t>(cost.rows()),
                static_cast<std::size_t>(cost.cols()));
}

double box_loss(const Box& gt, const Box& pred, const LossWeights& w) {
  require_valid(gt);
  require_valid(pred);
  return w.lambda_l1 * l1_distance(gt, pred) +
         w.lambda_giou * (1.0 - giou(gt, pred));
}

std::array<double, 4> box_loss_grad(const Box& gt, const Box& pred,
                                    const LossWeights& w) {
  require_valid(gt);
  require_valid(pred);
  const auto g = gt.coords();
  const auto p = pred.coords();
  const auto dg = giou_grad_second(gt, pred);
  std::array<double, 4> out{};
  for (int k = 0; k < 4; ++k) {
    out[k] = w.lambda_l1 * sign(p[k] - g[k]) - w.lambda_giou * dg[k];
  }
  return out;
}

Eigen::MatrixXd detection_cost_matrix(const std::vector<Prediction>& preds,
                                      const std::vector<GroundTruth>& gts,
                                      const TextPrompt& prompt,
                                      const LossWeights& w,
                                      double class_weight) {
  w.validate();
  Eigen::MatrixXd cost(static_cast<Eigen::Index>(gts.size()),
                       static_cast<Eigen::Index>(preds.size()));
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const TokenSpan& span = prompt.span_of(gts[i].category);
    for (std::size_t j = 0; j < preds.size(); ++j) {
      if (preds[j].span_dist.token_count() != prompt.token_count()) {
        throw ValidationError("prediction span distribution does not fit prompt");
      }
      cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          class_weight * (1.0 - preds[j].span_dist.span_mass(span)) +
          box_loss(gts[i].box, preds[j].box, w);
    }
  }
  return cost;
}

AssignmentResult match_detection(const std::vector<Prediction>& preds,
                                 const std::vector<GroundTruth>& gts,
                                 const TextPrompt& prompt, const LossWeights& w,
                                 double class_weight) {
  const Eigen::MatrixXd cost =
      detection_cost_matrix(preds, gts, prompt, w, class_weight);
  std::vector<AssignmentResult::Pair> pairs;
  for (const auto& m : solve_assignment(cost)) {
    pairs.push_back({m.row, m.col, m.cost});
  }
  return finish(MatchMode::detection, std::move(pairs), gts.size(),
                preds.size());
}

AssignmentResult match_tracking(const std::vector<Prediction>& preds,
                                const std::vector<GroundTruth>& gts,
                                const std::set<TrackId>& prev_ids,
                                const TextPrompt& prompt, const LossWeights& w,
                                double class_weight) {
  std::map<TrackId, std::size_t> query_of;  // track id -> pred index
  for (std::size_t j = 0; j < preds.size(); ++j) {
    if (!preds[j].origin.is_track_query()) continue;
    const TrackId id = preds[j].origin.track_id();
    if (!prev_ids.count(id)) {
      throw ValidationError("track query " + std::to_string(id) +
                            " is not among the previous identities");
    }
    if (!query_of.emplace(id, j).second) {
      throw ValidationError("duplicate track query id " + std::to_string(id));
    }
  }
  std::set<TrackId> gt_ids;
  for (const auto& g : gts) {
    if (g.track_id && !gt_ids.insert(*g.track_id).second) {
      throw ValidationError("duplicate ground-truth track id " +
                            std::to_string(*g.track_id));
    }
  }

  const Eigen::MatrixXd cost =
      detection_cost_matrix(preds, gts, prompt, w, class_weight);
  std::vector<AssignmentResult::Pair> pairs;

  // Continuing identities pair by id, whatever their cost.
  std::vector<std::size_t> new_gts;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const auto& id = gts[i].track_id;
    const auto it = id ? query_of.find(*id) : query_of.end();
    if (it != query_of.end()) {
      pairs.push_back({i, it->second,
                       cost(static_cast<Eigen::Index>(i),
                            static_cast<Eigen::Index>(it->second))});
    } else {
      new_gts.push_back(i);
    }
  }

  // Newly appeared objects compete for the empty queries. Track queries
  // without a partner stay unmatched (no-object).
  std::vector<std::size_t> empty_queries;
  for (std::size_t j = 0; j < preds.size(); ++j) {
    if (!preds[j].origin.is_track_query()) empty_queries.push_back(j);
  }
  Eigen::MatrixXd residual(static_cast<Eigen::Index>(new_gts.size()),
                           static_cast<Eigen::Index>(empty_queries.size()));
  for (std::size_t r = 0; r < new_gts.size(); ++r) {
    for (std::size_t c = 0; c < empty_queries.size(); ++c) {
      residual(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          cost(static_cast<Eigen::Index>(new_gts[r]),
               static_cast<Eigen::Index>(empty_queries[c]));
    }
  }
  for (const auto& m : solve_assignment(residual)) {
    pairs.push_back({new_gts[m.row], empty_queries[m.col], m.cost});
  }
  return finish(MatchMode::tracking, std::move(pairs), gts.size(),
                preds.size());
}

// ---------------------------------------------------------------------------

PredictionParameters to_parameters(const std::vector<Prediction>& preds) {
  PredictionParameters params;
  const auto n = static_cast<Eigen::Index>(preds.size());
  const Eigen::Index width =
      preds.empty() ? 0 : preds.front().span_dist.probs().size();
  params.boxes.resize(n, 4);
  params.span_probs.resize(n, width);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = preds[static_cast<std::size_t>(i)];
    if (p.span_dist.probs().size() != width) {
      throw ValidationError("predictions disagree on token_count");
    }
    params.boxes.row(i) << p.box.x0, p.box.y0, p.box.x1, p.box.y1;
    params.span_probs.row(i) = p.span_dist.probs().transpose();
    params.origins.push_back(p.origin);
  }
  return params;
}

namespace {

void check_assignment(const AssignmentResult& a, std::size_t n_preds,
                      std::size_t n_gts) {
  std::vector<int> pred_seen(n_preds, 0), gt_seen(n_gts, 0);
  for (const auto& p : a.pairs) {
    if (p.pred >= n_preds || p.gt >= n_gts) {
      throw ValidationError("assignment refers to an index out of range");
    }
    ++pred_seen[p.pred];
    if (++gt_seen[p.gt] > 1) {
      throw ValidationError("assignment matches a ground truth twice");
    }
  }
  for (std::size_t j : a.unmatched_preds) {
    if (j >= n_preds) throw ValidationError("unmatched index out of range");
    ++pred_seen[j];
  }
  for (int c : pred_seen) {
    if (c != 1) {
      throw ValidationError(
          "assignment must cover every prediction exactly once");
    }
  }
}

Eigen::MatrixXd target_matrix(const AssignmentResult& a,
                              const PredictionParameters& params,
                              const std::vector<GroundTruth>& gts,
                              const TextPrompt& prompt) {
  const Eigen::Index n = params.span_probs.rows();
  const Eigen::Index width = params.span_probs.cols();
  if (n > 0 && width != static_cast<Eigen::Index>(prompt.token_count() + 1)) {
    throw ValidationError("span distributions do not fit the prompt");
  }
  Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(n, width);
  for (Eigen::Index j = 0; j < n; ++j) targets(j, width - 1) = 1.0;
  for (const auto& p : a.pairs) {
    const auto row = static_cast<Eigen::Index>(p.pred);
    targets.row(row) =
        target_distribution(prompt.span_of(gts[p.gt].category),
                            prompt.token_count())
            .probs()
            .transpose();
  }
  return targets;
}

bool counts_as_track(const AssignmentResult& a,
                     const PredictionParameters& params, std::size_t pred) {
  return a.mode == MatchMode::tracking &&
         params.origins.at(pred).is_track_query();
}

void check_params(const PredictionParameters& params) {
  if (params.boxes.rows() != params.span_probs.rows() ||
      params.boxes.cols() != 4 ||
      static_cast<std::size_t>(params.boxes.rows()) != params.origins.size()) {
    throw ShapeError("prediction parameters have inconsistent sizes");
  }
}

}  // namespace

std::vector<TokenSpanDistribution> soft_targets(
    const AssignmentResult& assignment, const std::vector<Prediction>& preds,
    const std::vector<GroundTruth>& gts, const TextPrompt& prompt) {
  check_assignment(assignment, preds.size(), gts.size());
  const Eigen::MatrixXd t =
      target_matrix(assignment, to_parameters(preds), gts, prompt);
  std::vector<TokenSpanDistribution> out;
  for (Eigen::Index j = 0; j < t.rows(); ++j) {
    out.emplace_back(t.row(j).transpose());
  }
  return out;
}

LossBreakdown total_loss(const AssignmentResult& assignment,
                         const PredictionParameters& params,
                         const std::vector<GroundTruth>& gts,
                         const TextPrompt& prompt,
                         const AlignmentBatch& align_batch,
                         const LossWeights& w) {
  check_params(params);
  w.validate();
  const auto n = static_cast<std::size_t>(params.boxes.rows());
  check_assignment(assignment, n, gts.size());

  LossBreakdown out;
  const Eigen::MatrixXd targets = target_matrix(assignment, params, gts, prompt);
  for (Eigen::Index j = 0; j < targets.rows(); ++j) {
    for (Eigen::Index k = 0; k < targets.cols(); ++k) {
      const double t = targets(j, k);
      if (t != 0) {
        out.soft -= t * std::log(std::max(params.span_probs(j, k), kLogEpsilon));
      }
    }
  }
  if (n > 0) out.soft /= static_cast<double>(n);

  out.contrast = contrastive_alignment_loss(align_batch);

  for (const auto& p : assignment.pairs) {
    const double term = box_loss(gts[p.gt].box,
                                 box_row(params.boxes,
                                         static_cast<Eigen::Index>(p.pred)),
                                 w);
    (counts_as_track(assignment, params, p.pred) ? out.box_track
                                                 : out.box_detect) += term;
  }
  return out;
}

LossBreakdown total_loss(const AssignmentResult& assignment,
                         const std::vector<Prediction>& preds,
                         const std::vector<GroundTruth>& gts,
                         const TextPrompt& prompt,
                         const AlignmentBatch& align_batch,
                         const LossWeights& w) {
  return total_loss(assignment, to_parameters(preds), gts, prompt, align_batch,
                    w);
}

TotalLossGrad total_loss_grad(const AssignmentResult& assignment,
                              const PredictionParameters& params,
                              const std::vector<GroundTruth>& gts,
                              const TextPrompt& prompt,
                              const AlignmentBatch& align_batch,
                              const LossWeights& w) {
  check_params(params);
  w.validate();
  const auto n = static_cast<std::size_t>(params.boxes.rows());
  check_assignment(assignment, n, gts.size());

  TotalLossGrad grad;
  grad.pred_boxes = Eigen::MatrixXd::Zero(params.boxes.rows(), 4);
  grad.span_probs =
      Eigen::MatrixXd::Zero(params.span_probs.rows(), params.span_probs.cols());

  const Eigen::MatrixXd targets = target_matrix(assignment, params, gts, prompt);
  const double scale = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
  for (Eigen::Index j = 0; j < targets.rows(); ++j) {
    for (Eigen::Index k = 0; k < targets.cols(); ++k) {
      const double t = targets(j, k);
      const double p = params.span_probs(j, k);
      if (t != 0 && p > kLogEpsilon) grad.span_probs(j, k) = -scale * t / p;
    }
  }

  for (const auto& pair : assignment.pairs) {
    const auto row = static_cast<Eigen::Index>(pair.pred);
    const auto g = box_loss_grad(gts[pair.gt].box, box_row(params.boxes, row), w);
    for (int k = 0; k < 4; ++k) grad.pred_boxes(row, k) += g[k];
  }

  auto contrast = contrastive_alignment_grad(align_batch);
  grad.object_embeds = std::move(contrast.object_embeds);
  grad.token_embeds = std::move(contrast.token_embeds);
  return grad;
}

}  // namespace trivd
