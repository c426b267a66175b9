#include "trivd/harness.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace trivd {

TrajectorySet tracks_to_trajectories(
    const std::vector<std::vector<Track>>& per_frame) {
  TrajectorySet out;
  for (std::size_t f = 0; f < per_frame.size(); ++f) {
    for (const auto& t : per_frame[f]) {
      out.add(t.id, Observation{static_cast<std::int64_t>(f), t.box, t.category,
                                t.score});
    }
  }
  return out;
}

std::vector<std::string> parse_prompt_categories(
    const std::string& text, const std::vector<std::string>& categories) {
  std::vector<std::string> words;
  std::istringstream in(text);
  for (std::string w; in >> w;) words.push_back(w);
  if (words.empty()) throw ValidationError("empty prompt");

  std::vector<std::vector<std::string>> split;
  for (const auto& c : categories) {
    std::vector<std::string> parts;
    std::istringstream cin(c);
    for (std::string w; cin >> w;) parts.push_back(w);
    split.push_back(std::move(parts));
  }
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < words.size()) {
    std::optional<std::size_t> best;
    for (std::size_t c = 0; c < split.size(); ++c) {
      const auto& parts = split[c];
      if (parts.empty() || i + parts.size() > words.size()) continue;
      if (!std::equal(parts.begin(), parts.end(), words.begin() + i)) continue;
      if (!best || parts.size() > split[*best].size()) best = c;
    }
    if (!best) throw ValidationError("unknown prompt word '" + words[i] + "'");
    if (std::find(out.begin(), out.end(), categories[*best]) == out.end()) {
      out.push_back(categories[*best]);
    }
    i += split[*best].size();
  }
  return out;
}

PipelineResult run_pipeline(
    const Scenario& scenario, const TrackerConfig& cfg,
    const std::optional<std::vector<std::string>>& prompt_categories,
    double iou_thr) {
  const TextPrompt& prompt = scenario.prompt;
  std::vector<std::string> wanted = prompt.categories();
  if (prompt_categories) {
    if (prompt_categories->empty()) throw ValidationError("empty prompt");
    std::set<std::string> seen;
    for (const auto& c : *prompt_categories) {
      if (!prompt.find(c)) {
        throw ValidationError("prompt category '" + c + "' not in scenario");
      }
      if (!seen.insert(c).second) {
        throw ValidationError("duplicate prompt category '" + c + "'");
      }
    }
    wanted = *prompt_categories;
  }
  std::set<std::size_t> wanted_idx;
  for (const auto& c : wanted) wanted_idx.insert(*prompt.find(c));

  if (scenario.detections.size() != scenario.sources.size()) {
    throw ValidationError("scenario detections and sources disagree in length");
  }

  TrackState state;
  PipelineResult result;
  std::map<std::int64_t, TrackId> previous;  // gt object -> track bound last frame
  for (std::size_t f = 0; f < scenario.detections.size(); ++f) {
    const auto& dets = scenario.detections[f];
    const auto& srcs = scenario.sources[f];
    if (dets.size() != srcs.size()) {
      throw ValidationError("frame " + std::to_string(f) +
                            ": detections and sources disagree in length");
    }
    std::vector<Prediction> kept;
    std::vector<std::int64_t> kept_src;
    for (std::size_t d = 0; d < dets.size(); ++d) {
      const auto cls = classify_by_alignment(dets[d].span_dist, prompt);
      if (!cls.category || !wanted_idx.count(*cls.category)) continue;
      Prediction p = dets[d];
      if (p.origin.is_track_query()) {
        const auto it = previous.find(p.origin.track_id());
        p.origin = it != previous.end() ? QueryOrigin::track(it->second)
                                         : QueryOrigin::empty();
      }
      kept.push_back(std::move(p));
      kept_src.push_back(srcs[d]);
    }
    StepResult r = step(state, kept, prompt, cfg);
    previous.clear();
    for (std::size_t d = 0; d < kept.size(); ++d) {
      if (r.bindings[d] && kept_src[d] >= 0) previous[kept_src[d]] = *r.bindings[d];
    }
    result.per_frame.push_back(std::move(r.outputs));
  }
  result.tracks = tracks_to_trajectories(result.per_frame);
  result.report =
      evaluate(scenario.gt.restricted_to(wanted), result.tracks, iou_thr);
  return result;
}

// ---------------------------------------------------------------------------
// Gradient checks

bool GradCheckSummary::passed(double tolerance) const {
  return !losses.empty() &&
         std::all_of(losses.begin(), losses.end(), [&](const LossGradCheck& l) {
           return l.max_rel_err < tolerance;
         });
}

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

Eigen::MatrixXd normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols,
                              double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  }
  return m;
}

Box random_box(Rng& rng) {
  const double x = uniform(rng, 0, 20);
  const double y = uniform(rng, 0, 20);
  return Box::from_xywh(x, y, uniform(rng, 4, 15), uniform(rng, 4, 15));
}

Box near_box(Rng& rng, const Box& b) {
  return Box{b.x0 + uniform(rng, -2, 2), b.y0 + uniform(rng, -2, 2),
             b.x1 + uniform(rng, -2, 2), b.y1 + uniform(rng, -2, 2)};
}

// Row-major flattening of a list of matrices into one tensor.
Tensor pack(const std::vector<const Eigen::MatrixXd*>& parts) {
  std::vector<double> flat;
  for (const auto* m : parts) {
    for (Eigen::Index i = 0; i < m->rows(); ++i) {
      for (Eigen::Index j = 0; j < m->cols(); ++j) flat.push_back((*m)(i, j));
    }
  }
  return Tensor({flat.size()}, flat);
}

void unpack(const Tensor& x, const std::vector<Eigen::MatrixXd*>& parts) {
  std::size_t k = 0;
  for (auto* m : parts) {
    for (Eigen::Index i = 0; i < m->rows(); ++i) {
      for (Eigen::Index j = 0; j < m->cols(); ++j) (*m)(i, j) = x[k++];
    }
  }
}

void record(LossGradCheck& entry, const GradCheckReport& r) {
  ++entry.fixtures;
  entry.max_abs_err = std::max(entry.max_abs_err, r.max_abs_err);
  entry.max_rel_err = std::max(entry.max_rel_err, r.max_rel_err);
}

AlignmentBatch random_alignment(Rng& rng, Eigen::Index n_obj, Eigen::Index n_tok) {
  const auto dim = static_cast<Eigen::Index>(pick(rng, 2, 5));
  AlignmentBatch::Incidence pos(n_obj, n_tok);
  for (Eigen::Index i = 0; i < n_obj; ++i) {
    for (Eigen::Index j = 0; j < n_tok; ++j) pos(i, j) = uniform(rng, 0, 1) < 0.4;
  }
  pos(static_cast<Eigen::Index>(pick(rng, 0, static_cast<std::size_t>(n_obj - 1))),
      static_cast<Eigen::Index>(pick(rng, 0, static_cast<std::size_t>(n_tok - 1)))) =
      true;
  return AlignmentBatch(normal_matrix(rng, n_obj, dim, 0.3),
                        normal_matrix(rng, n_tok, dim, 0.3), pos);
}

void check_soft_token(Rng& rng, LossGradCheck& entry, double eps) {
  const auto n = static_cast<Eigen::Index>(pick(rng, 1, 4));
  const auto width = static_cast<Eigen::Index>(pick(rng, 2, 6));
  const Eigen::MatrixXd logits = normal_matrix(rng, n, width, 1.5);
  Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(n, width);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < width; ++j) targets(i, j) = uniform(rng, 0, 1);
    targets.row(i) /= targets.row(i).sum();
  }
  const auto analytic = soft_token_loss_logits(logits, targets);
  Eigen::MatrixXd probe = logits;
  auto fn = [&](const Tensor& x) {
    unpack(x, {&probe});
    return soft_token_loss_logits(probe, targets).value;
  };
  record(entry, grad_check(fn, pack({&analytic.grad}), pack({&logits}), eps));
}

void check_contrastive(Rng& rng, LossGradCheck& entry, double eps) {
  const auto batch = random_alignment(rng, static_cast<Eigen::Index>(pick(rng, 1, 4)),
                                      static_cast<Eigen::Index>(pick(rng, 1, 5)));
  const auto g = contrastive_alignment_grad(batch);
  Eigen::MatrixXd objects = batch.object_embeds();
  Eigen::MatrixXd tokens = batch.token_embeds();
  auto fn = [&](const Tensor& x) {
    unpack(x, {&objects, &tokens});
    return contrastive_alignment_loss(batch.with_embeds(objects, tokens));
  };
  record(entry, grad_check(fn, pack({&g.object_embeds, &g.token_embeds}),
                           pack({&batch.object_embeds(), &batch.token_embeds()}),
                           eps));
}

void check_box(Rng& rng, LossGradCheck& entry, double eps) {
  const Box gt = random_box(rng);
  // Half the fixtures overlap the target, half are disjoint from it.
  const Box pred = pick(rng, 0, 1) ? near_box(rng, gt) : random_box(rng);
  const LossWeights w{uniform(rng, 0.5, 6), uniform(rng, 0.5, 3)};
  const auto grad = box_loss_grad(gt, pred, w);
  Eigen::MatrixXd analytic(1, 4);
  Eigen::MatrixXd coords(1, 4);
  for (int k = 0; k < 4; ++k) {
    analytic(0, k) = grad[k];
    coords(0, k) = pred.coords()[k];
  }
  auto fn = [&](const Tensor& x) {
    return box_loss(gt, Box{x[0], x[1], x[2], x[3]}, w);
  };
  record(entry, grad_check(fn, pack({&analytic}), pack({&coords}), eps));
}

void check_total(Rng& rng, LossGradCheck& entry, double eps) {
  const TextPrompt prompt = build_prompt({"person", "car", "traffic light"});
  const std::size_t n_gt = pick(rng, 1, 3);
  const std::size_t n_pred = n_gt + pick(rng, 0, 2);
  const bool tracking = pick(rng, 0, 1) == 1;

  std::vector<GroundTruth> gts;
  std::set<TrackId> prev_ids;
  for (std::size_t g = 0; g < n_gt; ++g) {
    const std::size_t cat = pick(rng, 0, prompt.categories().size() - 1);
    gts.push_back({random_box(rng), prompt.categories()[cat],
                   static_cast<TrackId>(g + 10)});
  }
  std::vector<Prediction> preds;
  for (std::size_t p = 0; p < n_pred; ++p) {
    Eigen::VectorXd probs(static_cast<Eigen::Index>(prompt.token_count() + 1));
    for (Eigen::Index k = 0; k < probs.size(); ++k) probs[k] = uniform(rng, 0.05, 1);
    probs /= probs.sum();
    const Box box = p < n_gt ? near_box(rng, gts[p].box) : random_box(rng);
    QueryOrigin origin = QueryOrigin::empty();
    if (tracking && p < n_gt && pick(rng, 0, 1)) {
      origin = QueryOrigin::track(*gts[p].track_id);
      prev_ids.insert(*gts[p].track_id);
    }
    preds.push_back({box, TokenSpanDistribution(probs), 1.0, origin, {}});
  }
  const LossWeights w;
  const AssignmentResult assignment =
      tracking ? match_tracking(preds, gts, prev_ids, prompt, w)
               : match_detection(preds, gts, prompt, w);
  const AlignmentBatch batch =
      random_alignment(rng, static_cast<Eigen::Index>(n_pred),
                       static_cast<Eigen::Index>(prompt.token_count()));
  const PredictionParameters params = to_parameters(preds);
  const auto g = total_loss_grad(assignment, params, gts, prompt, batch, w);

  PredictionParameters probe = params;
  Eigen::MatrixXd objects = batch.object_embeds();
  Eigen::MatrixXd tokens = batch.token_embeds();
  auto fn = [&](const Tensor& x) {
    unpack(x, {&probe.boxes, &probe.span_probs, &objects, &tokens});
    return total_loss(assignment, probe, gts, prompt,
                      batch.with_embeds(objects, tokens), w)
        .total();
  };
  record(entry,
         grad_check(fn,
                    pack({&g.pred_boxes, &g.span_probs, &g.object_embeds,
                          &g.token_embeds}),
                    pack({&params.boxes, &params.span_probs,
                          &batch.object_embeds(), &batch.token_embeds()}),
                    eps));
}

}  // namespace

GradCheckSummary gradcheck_all(std::uint64_t seed, std::size_t fixtures,
                               double eps) {
  Rng rng(seed);
  GradCheckSummary out;
  out.losses = {{"soft_token_loss"}, {"contrastive_alignment_loss"},
                {"box_loss"}, {"total_loss"}};
  for (std::size_t i = 0; i < fixtures; ++i) {
    check_soft_token(rng, out.losses[0], eps);
    check_contrastive(rng, out.losses[1], eps);
    check_box(rng, out.losses[2], eps);
    check_total(rng, out.losses[3], eps);
  }
  return out;
}

}  // namespace trivd
