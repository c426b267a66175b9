#include "trivd/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

namespace trivd {

void TrackerConfig::validate() const {
  for (double v : {sigma_track, sigma_nms, sigma_reid, init_iou}) {
    if (!(v >= 0 && v <= 1)) {
      throw ValidationError("tracker thresholds must lie in [0,1]");
    }
  }
  if (!(min_similarity >= -1 && min_similarity <= 1)) {
    throw ValidationError("min_similarity must lie in [-1,1]");
  }
  if (n_reid < 0) throw ValidationError("n_reid must be >= 0");
  if (n_box < 1) throw ValidationError("n_box must be >= 1");
}

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() == 0 || a.size() != b.size()) return 0.0;
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0 || nb == 0) return 0.0;
  return a.dot(b) / (na * nb);
}

namespace {

std::string category_of(const Prediction& p, const TextPrompt& prompt) {
  const auto c = classify_by_alignment(p.span_dist, prompt, true);
  return prompt.categories()[*c.category];
}

struct Candidate {
  double similarity;
  double overlap;
  std::size_t track;  // index into the track list
  std::size_t det;
};

// Greedy one-to-one pairing by descending similarity, then IoU, then the
// smaller track id / detection index.
std::vector<std::pair<std::size_t, std::size_t>> greedy_pairs(
    std::vector<Candidate> cands, const std::vector<const Track*>& tracks) {
  std::sort(cands.begin(), cands.end(), [&](const auto& a, const auto& b) {
    return std::make_tuple(-a.similarity, -a.overlap, tracks[a.track]->id, a.det) <
           std::make_tuple(-b.similarity, -b.overlap, tracks[b.track]->id, b.det);
  });
  std::set<std::size_t> used_tracks, used_dets;
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& c : cands) {
    if (used_tracks.count(c.track) || used_dets.count(c.det)) continue;
    used_tracks.insert(c.track);
    used_dets.insert(c.det);
    out.emplace_back(c.track, c.det);
  }
  return out;
}

void absorb(Track& t, const Prediction& d, std::int64_t frame) {
  t.box = d.box;
  t.score = d.score;
  if (d.embed.size() > 0) t.embed = d.embed;
  t.status = TrackStatus::active;
  t.frames_inactive = 0;
  t.history.emplace_back(frame, d.box);
}

void deactivate(Track& t) {
  t.status = TrackStatus::inactive;
  t.frames_inactive = 0;
}

bool overlaps_active(const std::vector<Track>& tracks, const Box& box,
                     double threshold) {
  return std::any_of(tracks.begin(), tracks.end(), [&](const Track& t) {
    return t.status == TrackStatus::active && iou(t.box, box) > threshold;
  });
}

}  // namespace

std::vector<std::pair<TrackId, std::size_t>> reidentify(
    const std::vector<Track>& inactive, const std::vector<Prediction>& candidates,
    const TextPrompt& prompt, const TrackerConfig& cfg) {
  std::vector<const Track*> tracks;
  for (const auto& t : inactive) tracks.push_back(&t);
  std::vector<Candidate> cands;
  for (std::size_t ti = 0; ti < tracks.size(); ++ti) {
    for (std::size_t d = 0; d < candidates.size(); ++d) {
      const auto& det = candidates[d];
      if (det.score < cfg.sigma_reid) continue;
      if (category_of(det, prompt) != tracks[ti]->category) continue;
      const double sim = cosine_similarity(tracks[ti]->embed, det.embed);
      if (sim < cfg.min_similarity) continue;
      cands.push_back({sim, iou(tracks[ti]->box, det.box), ti, d});
    }
  }
  std::vector<std::pair<TrackId, std::size_t>> out;
  for (const auto& [ti, d] : greedy_pairs(std::move(cands), tracks)) {
    out.emplace_back(tracks[ti]->id, d);
  }
  return out;
}

StepResult step(TrackState& state, const std::vector<Prediction>& detections,
                const TextPrompt& prompt, const TrackerConfig& cfg,
                const std::optional<std::vector<Box>>& public_boxes) {
  cfg.validate();
  if (detections.size() > cfg.n_box) {
    throw ValidationError("frame has more detections than n_box");
  }
  std::set<TrackId> query_ids;
  for (const auto& d : detections) {
    require_valid(d.box);
    if (!(d.score >= 0 && d.score <= 1)) {
      throw ValidationError("detection score outside [0,1]");
    }
    if (d.span_dist.token_count() != prompt.token_count()) {
      throw ValidationError("detection span distribution does not fit prompt");
    }
    if (d.origin.is_track_query() &&
        !query_ids.insert(d.origin.track_id()).second) {
      throw ValidationError("duplicate track query id " +
                            std::to_string(d.origin.track_id()));
    }
  }

  const std::int64_t frame = state.frame_index;
  auto& tracks = state.tracks;
  StepResult result;
  result.bindings.assign(detections.size(), std::nullopt);
  std::set<TrackId> touched;  // tracks that received a detection this frame
  std::set<TrackId> was_inactive;
  for (const auto& t : tracks) {
    if (t.status == TrackStatus::inactive) was_inactive.insert(t.id);
  }
  auto find_track = [&](TrackId id) -> Track* {
    for (auto& t : tracks) {
      if (t.id == id) return &t;
    }
    return nullptr;
  };
  auto bind = [&](Track& t, std::size_t d) {
    absorb(t, detections[d], frame);
    result.bindings[d] = t.id;
    touched.insert(t.id);
  };

  // 1. Association.
  for (std::size_t d = 0; d < detections.size(); ++d) {
    if (!detections[d].origin.is_track_query()) continue;
    Track* t = find_track(detections[d].origin.track_id());
    if (t && t->status == TrackStatus::active) bind(*t, d);
  }
  {
    std::vector<const Track*> open;
    std::vector<Track*> open_mut;
    for (auto& t : tracks) {
      if (t.status == TrackStatus::active && !touched.count(t.id)) {
        open.push_back(&t);
        open_mut.push_back(&t);
      }
    }
    std::vector<Candidate> cands;
    for (std::size_t ti = 0; ti < open.size(); ++ti) {
      for (std::size_t d = 0; d < detections.size(); ++d) {
        const auto& det = detections[d];
        if (det.origin.is_track_query() || result.bindings[d]) continue;
        if (category_of(det, prompt) != open[ti]->category) continue;
        const double sim = cosine_similarity(open[ti]->embed, det.embed);
        if (sim < cfg.min_similarity) continue;
        cands.push_back({sim, iou(open[ti]->box, det.box), ti, d});
      }
    }
    for (const auto& [ti, d] : greedy_pairs(std::move(cands), open)) {
      bind(*open_mut[ti], d);
    }
  }

  // 2. Deactivation.
  for (auto& t : tracks) {
    if (t.status != TrackStatus::active) continue;
    if (!touched.count(t.id) || t.score < cfg.sigma_track) deactivate(t);
  }

  // 3. NMS: visit by descending score, suppress anything overlapping a keeper.
  {
    std::vector<Track*> order;
    for (auto& t : tracks) {
      if (t.status == TrackStatus::active) order.push_back(&t);
    }
    std::stable_sort(order.begin(), order.end(), [](const Track* a, const Track* b) {
      return a->score > b->score;
    });
    std::vector<const Track*> kept;
    for (Track* t : order) {
      const bool suppressed =
          std::any_of(kept.begin(), kept.end(), [&](const Track* k) {
            return iou(k->box, t->box) > cfg.sigma_nms;
          });
      if (suppressed) {
        deactivate(*t);
      } else {
        kept.push_back(t);
      }
    }
  }

  // 4. Re-identification against the detections nobody claimed.
  {
    std::vector<std::size_t> free_dets;
    std::vector<Prediction> free_preds;
    for (std::size_t d = 0; d < detections.size(); ++d) {
      if (result.bindings[d]) continue;
      if (overlaps_active(tracks, detections[d].box, cfg.sigma_nms)) continue;
      free_dets.push_back(d);
      free_preds.push_back(detections[d]);
    }
    std::vector<Track> inactive;
    for (const auto& t : tracks) {
      if (was_inactive.count(t.id) && t.status == TrackStatus::inactive) {
        inactive.push_back(t);
      }
    }
    for (const auto& [id, k] : reidentify(inactive, free_preds, prompt, cfg)) {
      const std::size_t d = free_dets[k];
      if (overlaps_active(tracks, detections[d].box, cfg.sigma_nms)) continue;
      bind(*find_track(id), d);
    }
  }

  // 5. Track initialization.
  for (std::size_t d = 0; d < detections.size(); ++d) {
    const auto& det = detections[d];
    if (result.bindings[d] || det.score < cfg.sigma_track) continue;
    const auto cls = classify_by_alignment(det.span_dist, prompt);
    if (!cls.category) continue;
    if (overlaps_active(tracks, det.box, cfg.sigma_nms)) continue;
    if (public_boxes) {
      const bool supported =
          std::any_of(public_boxes->begin(), public_boxes->end(),
                      [&](const Box& b) { return iou(b, det.box) > cfg.init_iou; });
      if (!supported) continue;
    }
    Track t;
    t.id = state.next_id++;
    t.category = prompt.categories()[*cls.category];
    tracks.push_back(std::move(t));
    bind(tracks.back(), d);
  }

  // 6. Patience.
  for (auto& t : tracks) {
    if (t.status != TrackStatus::inactive) continue;
    if (++t.frames_inactive > cfg.n_reid) t.status = TrackStatus::removed;
  }
  for (auto& t : tracks) {
    if (t.status == TrackStatus::removed) state.retired.push_back(t);
  }
  std::erase_if(tracks,
                [](const Track& t) { return t.status == TrackStatus::removed; });

  for (const auto& t : tracks) {
    if (t.status == TrackStatus::active) result.outputs.push_back(t);
  }
  ++state.frame_index;
  return result;
}

std::vector<std::vector<Track>> run_sequence(
    const std::vector<std::vector<Prediction>>& frames, const TextPrompt& prompt,
    const TrackerConfig& cfg) {
  if (frames.empty()) throw ValidationError("run_sequence needs at least one frame");
  TrackState state;
  std::vector<std::vector<Track>> out;
  out.reserve(frames.size());
  for (const auto& dets : frames) {
    out.push_back(step(state, dets, prompt, cfg).outputs);
  }
  return out;
}

}  // namespace trivd
