#include "trivd/mot_metrics.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <tuple>

#include "trivd/hungarian.hpp"

namespace trivd {

TrajectorySet::TrajectorySet(
    std::map<TrackId, std::vector<Observation>> trajectories) {
  for (const auto& [id, obs] : trajectories) {
    for (const auto& o : obs) add(id, o);
  }
}

void TrajectorySet::add(TrackId id, const Observation& obs) {
  require_valid(obs.box);
  auto& traj = trajectories_[id];
  if (!traj.empty() && traj.back().frame >= obs.frame) {
    throw ValidationError("trajectory " + std::to_string(id) +
                          " frames must be strictly increasing");
  }
  traj.push_back(obs);
}

std::size_t TrajectorySet::observation_count() const {
  std::size_t n = 0;
  for (const auto& [id, obs] : trajectories_) n += obs.size();
  return n;
}

std::optional<std::pair<std::int64_t, std::int64_t>> TrajectorySet::frame_range()
    const {
  std::optional<std::pair<std::int64_t, std::int64_t>> range;
  for (const auto& [id, obs] : trajectories_) {
    if (obs.empty()) continue;
    if (!range) {
      range.emplace(obs.front().frame, obs.back().frame);
    } else {
      range->first = std::min(range->first, obs.front().frame);
      range->second = std::max(range->second, obs.back().frame);
    }
  }
  return range;
}

std::vector<std::pair<TrackId, Observation>> TrajectorySet::at_frame(
    std::int64_t frame) const {
  std::vector<std::pair<TrackId, Observation>> out;
  for (const auto& [id, obs] : trajectories_) {
    const auto it = std::lower_bound(
        obs.begin(), obs.end(), frame,
        [](const Observation& o, std::int64_t f) { return o.frame < f; });
    if (it != obs.end() && it->frame == frame) out.emplace_back(id, *it);
  }
  return out;
}

TrajectorySet TrajectorySet::restricted_to(
    const std::vector<std::string>& categories) const {
  const std::set<std::string> keep(categories.begin(), categories.end());
  TrajectorySet out;
  for (const auto& [id, obs] : trajectories_) {
    for (const auto& o : obs) {
      if (keep.count(o.category)) out.add(id, o);
    }
  }
  return out;
}

namespace {

std::pair<std::int64_t, std::int64_t> joint_range(const TrajectorySet& a,
                                                  const TrajectorySet& b) {
  const auto ra = a.frame_range();
  const auto rb = b.frame_range();
  if (!ra) return *rb;
  if (!rb) return *ra;
  return {std::min(ra->first, rb->first), std::max(ra->second, rb->second)};
}

}  // namespace

ClearMotResult clear_mot(const TrajectorySet& gt, const TrajectorySet& pred,
                         double iou_thr) {
  if (!(iou_thr > 0 && iou_thr <= 1)) {
    throw ValidationError("iou threshold must lie in (0,1]");
  }
  ClearMotResult result;
  if (gt.empty() && pred.empty()) return result;
  const auto [first, last] = joint_range(gt, pred);

  std::map<TrackId, TrackId> last_match;  // gt id -> pred id
  for (std::int64_t f = first; f <= last; ++f) {
    const auto gts = gt.at_frame(f);
    const auto preds = pred.at_frame(f);
    result.n_gt += gts.size();
    std::vector<bool> gt_done(gts.size(), false), pred_done(preds.size(), false);
    std::size_t matched = 0;

    auto record = [&](std::size_t gi, std::size_t pj, double overlap) {
      gt_done[gi] = true;
      pred_done[pj] = true;
      ++matched;
      result.matches.push_back({f, gts[gi].first, preds[pj].first, overlap});
      last_match[gts[gi].first] = preds[pj].first;
    };

    // Keep established correspondences that still overlap.
    for (std::size_t gi = 0; gi < gts.size(); ++gi) {
      const auto it = last_match.find(gts[gi].first);
      if (it == last_match.end()) continue;
      for (std::size_t pj = 0; pj < preds.size(); ++pj) {
        if (pred_done[pj] || preds[pj].first != it->second) continue;
        const double overlap = iou(gts[gi].second.box, preds[pj].second.box);
        if (overlap >= iou_thr) record(gi, pj, overlap);
      }
    }

    std::vector<std::size_t> rows, cols;
    for (std::size_t gi = 0; gi < gts.size(); ++gi) {
      if (!gt_done[gi]) rows.push_back(gi);
    }
    for (std::size_t pj = 0; pj < preds.size(); ++pj) {
      if (!pred_done[pj]) cols.push_back(pj);
    }
    if (!rows.empty() && !cols.empty()) {
      // Disallowed pairs cost more than any set of allowed ones can save.
      const double blocked =
          1.0 + static_cast<double>(std::min(rows.size(), cols.size()));
      Eigen::MatrixXd cost(static_cast<Eigen::Index>(rows.size()),
                           static_cast<Eigen::Index>(cols.size()));
      Eigen::MatrixXd overlaps(cost.rows(), cost.cols());
      for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < cols.size(); ++c) {
          const double o =
              iou(gts[rows[r]].second.box, preds[cols[c]].second.box);
          const auto ri = static_cast<Eigen::Index>(r);
          const auto ci = static_cast<Eigen::Index>(c);
          overlaps(ri, ci) = o;
          cost(ri, ci) = o >= iou_thr ? 1.0 - o : blocked;
        }
      }
      for (const auto& m : solve_assignment(cost)) {
        const double o = overlaps(static_cast<Eigen::Index>(m.row),
                                  static_cast<Eigen::Index>(m.col));
        if (o < iou_thr) continue;
        const TrackId g = gts[rows[m.row]].first;
        const TrackId p = preds[cols[m.col]].first;
        const auto prev = last_match.find(g);
        if (prev != last_match.end() && prev->second != p) ++result.ids;
        record(rows[m.row], cols[m.col], o);
      }
    }
    result.fn += gts.size() - matched;
    result.fp += preds.size() - matched;
  }
  std::sort(result.matches.begin(), result.matches.end(),
            [](const FrameMatch& a, const FrameMatch& b) {
              return std::tie(a.frame, a.gt) < std::tie(b.frame, b.gt);
            });
  return result;
}

double mota(std::size_t fp, std::size_t fn, std::size_t ids, std::size_t n_gt) {
  if (n_gt == 0) throw ValidationError("MOTA is undefined without ground truth");
  return 1.0 - static_cast<double>(fn + fp + ids) / static_cast<double>(n_gt);
}

double IdentityCounts::idf1() const {
  const std::size_t denom = 2 * idtp + idfp + idfn;
  if (denom == 0) return 1.0;
  return 2.0 * static_cast<double>(idtp) / static_cast<double>(denom);
}

IdentityCounts identity_counts(const TrajectorySet& gt, const TrajectorySet& pred,
                               double iou_thr) {
  if (!(iou_thr > 0 && iou_thr <= 1)) {
    throw ValidationError("iou threshold must lie in (0,1]");
  }
  std::vector<TrackId> gt_ids, pred_ids;
  for (const auto& [id, obs] : gt.trajectories()) gt_ids.push_back(id);
  for (const auto& [id, obs] : pred.trajectories()) pred_ids.push_back(id);

  // overlap(g, p): frames on which both exist and overlap by iou_thr.
  Eigen::MatrixXd overlap = Eigen::MatrixXd::Zero(
      static_cast<Eigen::Index>(gt_ids.size()),
      static_cast<Eigen::Index>(pred_ids.size()));
  for (std::size_t g = 0; g < gt_ids.size(); ++g) {
    const auto& gobs = gt.trajectories().at(gt_ids[g]);
    for (std::size_t p = 0; p < pred_ids.size(); ++p) {
      const auto& pobs = pred.trajectories().at(pred_ids[p]);
      std::size_t a = 0, b = 0, hits = 0;
      while (a < gobs.size() && b < pobs.size()) {
        if (gobs[a].frame < pobs[b].frame) {
          ++a;
        } else if (pobs[b].frame < gobs[a].frame) {
          ++b;
        } else {
          if (iou(gobs[a].box, pobs[b].box) >= iou_thr) ++hits;
          ++a;
          ++b;
        }
      }
      overlap(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(p)) =
          static_cast<double>(hits);
    }
  }

  IdentityCounts counts;
  // Only the optimal total matters here, so skip the tie-breaking solver.
  const auto match = solve_assignment_raw(-overlap);
  for (std::size_t g = 0; g < match.size(); ++g) {
    if (!match[g]) continue;
    const auto hits = static_cast<std::size_t>(overlap(
        static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(*match[g])));
    if (hits == 0) continue;
    counts.idtp += hits;
    counts.pairing[gt_ids[g]] = pred_ids[*match[g]];
  }
  counts.idfn = gt.observation_count() - counts.idtp;
  counts.idfp = pred.observation_count() - counts.idtp;
  return counts;
}

double idf1(const TrajectorySet& gt, const TrajectorySet& pred, double iou_thr) {
  return identity_counts(gt, pred, iou_thr).idf1();
}

TrackedCoverage mt_ml(const TrajectorySet& gt,
                      const std::vector<FrameMatch>& matches) {
  std::map<TrackId, std::size_t> hit;
  for (const auto& m : matches) ++hit[m.gt];
  TrackedCoverage out;
  for (const auto& [id, obs] : gt.trajectories()) {
    const std::size_t len = obs.size();
    if (len == 0) continue;
    const std::size_t covered = hit.count(id) ? hit.at(id) : 0;
    // covered/len > 0.8 and < 0.2, kept in integers.
    if (5 * covered > 4 * len) ++out.mt;
    if (5 * covered < len) ++out.ml;
  }
  return out;
}

double average_precision(const std::vector<ScoredBox>& dets,
                         const std::vector<std::pair<std::int64_t, Box>>& gts,
                         double iou_thr) {
  for (const auto& d : dets) {
    if (!(d.score >= 0 && d.score <= 1)) {
      throw ValidationError("detection score outside [0,1]");
    }
  }
  if (gts.empty()) return 0.0;

  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });

  std::vector<bool> claimed(gts.size(), false);
  std::vector<double> precision, recall;
  std::size_t tp = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const auto& d = dets[order[rank]];
    double best = -1;
    std::size_t best_gt = 0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (claimed[g] || gts[g].first != d.frame) continue;
      const double o = iou(gts[g].second, d.box);
      if (o > best) {
        best = o;
        best_gt = g;
      }
    }
    if (best >= iou_thr) {
      claimed[best_gt] = true;
      ++tp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(rank + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(gts.size()));
  }

  // Area under the monotone (right-max) precision envelope.
  for (std::size_t i = precision.size(); i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double ap = 0;
  double prev_recall = 0;
  for (std::size_t i = 0; i < precision.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

double average_precision_sweep(const std::vector<ScoredBox>& dets,
                               const std::vector<std::pair<std::int64_t, Box>>& gts,
                               const std::vector<double>& thresholds) {
  if (thresholds.empty()) throw ValidationError("no IoU thresholds given");
  double sum = 0;
  for (double t : thresholds) sum += average_precision(dets, gts, t);
  return sum / static_cast<double>(thresholds.size());
}

MetricsReport evaluate(const TrajectorySet& gt, const TrajectorySet& pred,
                       double iou_thr) {
  MetricsReport report;
  const auto mot = clear_mot(gt, pred, iou_thr);
  report.fp = mot.fp;
  report.fn = mot.fn;
  report.ids = mot.ids;
  report.n_gt = mot.n_gt;
  report.mota = mota(mot.fp, mot.fn, mot.ids, mot.n_gt);
  report.idf1 = idf1(gt, pred, iou_thr);
  const auto cov = mt_ml(gt, mot.matches);
  report.mt = cov.mt;
  report.ml = cov.ml;

  std::set<std::string> categories;
  for (const auto& [id, obs] : gt.trajectories()) {
    for (const auto& o : obs) categories.insert(o.category);
  }
  if (!categories.empty()) {
    double sum = 0;
    for (const auto& cat : categories) {
      std::vector<ScoredBox> dets;
      std::vector<std::pair<std::int64_t, Box>> boxes;
      for (const auto& [id, obs] : pred.trajectories()) {
        for (const auto& o : obs) {
          if (o.category == cat) dets.push_back({o.frame, o.box, o.score});
        }
      }
      for (const auto& [id, obs] : gt.trajectories()) {
        for (const auto& o : obs) {
          if (o.category == cat) boxes.emplace_back(o.frame, o.box);
        }
      }
      sum += average_precision(dets, boxes, iou_thr);
    }
    report.ap = sum / static_cast<double>(categories.size());
  }
  return report;
}

}  // namespace trivd
