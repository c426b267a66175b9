#pragma once

// Hand-built fixture suites shared by the unit tests and the acceptance run.
// Each fixture returns an empty string on success or a failure description.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "support.hpp"
#include "trivd/assignment.hpp"
#include "trivd/mot_metrics.hpp"
#include "trivd/tracker.hpp"

namespace fixtures {

struct Fixture {
  std::string name;
  std::function<std::string()> run;
};

template <typename T>
std::string to_text(const T& v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

template <typename T>
std::string to_text(const std::vector<T>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + to_text(v[i]);
  return s + "]";
}

template <typename A, typename B>
std::string expect_eq(const A& actual, const B& expected, const std::string& what) {
  if (actual == expected) return {};
  return what + ": got " + to_text(actual) + ", expected " + to_text(expected);
}

inline std::string first_failure(std::initializer_list<std::string> checks) {
  for (const auto& c : checks) {
    if (!c.empty()) return c;
  }
  return {};
}

// ---------------------------------------------------------------------------
// Matching scenarios

inline const trivd::TextPrompt& matching_prompt() {
  static const trivd::TextPrompt p = trivd::build_prompt({"person", "car"});
  return p;
}

inline trivd::TokenSpanDistribution onehot(const std::string& category) {
  const auto& p = matching_prompt();
  return trivd::target_distribution(p.span_of(category), p.token_count());
}

inline trivd::Prediction pred(const trivd::Box& box, const std::string& category,
                              trivd::QueryOrigin origin = trivd::QueryOrigin::empty()) {
  return trivd::Prediction{box, onehot(category), 1.0, origin, {}};
}

inline trivd::Prediction track_pred(const trivd::Box& box, const std::string& category,
                                    trivd::TrackId id) {
  return pred(box, category, trivd::QueryOrigin::track(id));
}

using PairList = std::vector<std::pair<std::size_t, std::size_t>>;  // (gt, pred)

inline PairList pair_list(const trivd::AssignmentResult& a) {
  PairList out;
  for (const auto& p : a.pairs) out.emplace_back(p.gt, p.pred);
  std::sort(out.begin(), out.end());
  return out;
}

inline std::string describe(const PairList& pairs) {
  std::ostringstream out;
  out << '{';
  for (const auto& [g, p] : pairs) out << '(' << g << ',' << p << ')';
  out << '}';
  return out.str();
}

inline std::string expect_pairs(const trivd::AssignmentResult& a, PairList expected) {
  std::sort(expected.begin(), expected.end());
  const auto got = pair_list(a);
  if (got == expected) return {};
  return "pairs " + describe(got) + ", expected " + describe(expected);
}

// Every prediction exactly once across pairs and unmatched; injective.
inline std::string coverage(const trivd::AssignmentResult& a, std::size_t n_preds) {
  std::vector<int> seen(n_preds, 0);
  std::map<std::size_t, int> gts;
  for (const auto& p : a.pairs) {
    ++seen.at(p.pred);
    if (++gts[p.gt] > 1) return "gt matched twice";
  }
  for (std::size_t j : a.unmatched_preds) ++seen.at(j);
  for (std::size_t j = 0; j < n_preds; ++j) {
    if (seen[j] != 1) return "prediction " + std::to_string(j) + " covered " +
                             std::to_string(seen[j]) + " times";
  }
  return {};
}

// Cheapest (gt, pred) pairing of `rows` into `cols` (rows.size() <= cols.size())
// by enumerating every injection.
inline PairList brute_force_pairs(const Eigen::MatrixXd& cost,
                                  const std::vector<std::size_t>& rows,
                                  const std::vector<std::size_t>& cols) {
  PairList best;
  double best_cost = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> perm(cols.size());
  std::iota(perm.begin(), perm.end(), 0);
  do {
    double total = 0;
    PairList cur;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      total += cost(static_cast<Eigen::Index>(rows[r]),
                    static_cast<Eigen::Index>(cols[perm[r]]));
      cur.emplace_back(rows[r], cols[perm[r]]);
    }
    if (total < best_cost - 1e-12) {
      best_cost = total;
      std::sort(cur.begin(), cur.end());
      best = cur;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

inline std::vector<Fixture> matching_suite() {
  using trivd::Box;
  using trivd::GroundTruth;
  const trivd::LossWeights w;
  const auto& prompt = matching_prompt();
  std::vector<Fixture> suite;

  suite.push_back({"detection: exact prediction matches at zero cost", [=] {
    const auto a = trivd::match_detection({pred({0, 0, 10, 10}, "person")},
                                          {{{0, 0, 10, 10}, "person", {}}}, prompt, w);
    return first_failure({expect_pairs(a, {{0, 0}}),
                          expect_eq(a.total_cost, 0.0, "total cost"),
                          expect_eq(a.mode == trivd::MatchMode::detection, true, "mode")});
  }});

  suite.push_back({"detection: crossed boxes pair by overlap", [=] {
    const std::vector<GroundTruth> gts{{{0, 0, 10, 10}, "car", {}},
                                       {{50, 50, 60, 60}, "car", {}}};
    const std::vector<trivd::Prediction> preds{pred({49, 51, 59, 61}, "car"),
                                               pred({1, 0, 11, 10}, "car")};
    const auto a = trivd::match_detection(preds, gts, prompt, w);
    const auto cost = trivd::detection_cost_matrix(preds, gts, prompt, w);
    return first_failure(
        {expect_pairs(a, {{0, 1}, {1, 0}}),
         expect_pairs(a, brute_force_pairs(cost, {0, 1}, {0, 1}))});
  }});

  suite.push_back({"detection: no ground truth leaves every prediction on no-object", [=] {
    const std::vector<trivd::Prediction> preds{pred({0, 0, 1, 1}, "car"),
                                               pred({2, 2, 3, 3}, "person"),
                                               pred({4, 4, 5, 5}, "car")};
    const auto a = trivd::match_detection(preds, {}, prompt, w);
    return first_failure({expect_eq(a.pairs.size(), 0u, "pairs"),
                          expect_eq(a.unmatched_preds.size(), 3u, "unmatched"),
                          coverage(a, 3)});
  }});

  suite.push_back({"detection: class cost separates identical boxes", [=] {
    const std::vector<trivd::Prediction> preds{pred({0, 0, 10, 10}, "car"),
                                               pred({0, 0, 10, 10}, "person")};
    const auto a = trivd::match_detection(preds, {{{0, 0, 10, 10}, "person", {}}}, prompt, w);
    return first_failure({expect_pairs(a, {{0, 1}}),
                          expect_eq(a.unmatched_preds, std::vector<std::size_t>{0},
                                    "unmatched")});
  }});

  suite.push_back({"detection: surplus ground truth stays unmatched", [=] {
    const std::vector<GroundTruth> gts{{{0, 0, 10, 10}, "car", {}},
                                       {{20, 0, 30, 10}, "car", {}}};
    const auto a = trivd::match_detection({pred({19, 0, 29, 10}, "car")}, gts, prompt, w);
    return first_failure({expect_pairs(a, {{1, 0}}),
                          expect_eq(a.unmatched_gts, std::vector<std::size_t>{0},
                                    "unmatched gts")});
  }});

  suite.push_back({"tracking: identity pair survives a bad box", [=] {
    // The empty query sits exactly on the object, the track query far away.
    const std::vector<trivd::Prediction> preds{track_pred({200, 200, 210, 210}, "car", 7),
                                               pred({0, 0, 10, 10}, "car")};
    const auto a = trivd::match_tracking(preds, {{{0, 0, 10, 10}, "car", 7}}, {7}, prompt, w);
    return first_failure({expect_pairs(a, {{0, 0}}),
                          expect_eq(a.unmatched_preds, std::vector<std::size_t>{1},
                                    "unmatched"),
                          expect_eq(a.mode == trivd::MatchMode::tracking, true, "mode")});
  }});

  suite.push_back({"tracking: identity pairs are invariant to box perturbation", [=] {
    testing::Rng rng(31);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<trivd::Prediction> preds{
          track_pred(testing::random_box(rng), "person", 1),
          track_pred(testing::random_box(rng), "car", 2),
          pred(testing::random_box(rng), "person"), pred(testing::random_box(rng), "car")};
      const std::vector<GroundTruth> gts{{testing::random_box(rng), "car", 2},
                                         {testing::random_box(rng), "person", 1}};
      const auto a = trivd::match_tracking(preds, gts, {1, 2}, prompt, w);
      if (auto f = expect_pairs(a, {{0, 1}, {1, 0}}); !f.empty()) return f;
      if (auto f = coverage(a, preds.size()); !f.empty()) return f;
    }
    return std::string{};
  }});

  suite.push_back({"tracking: vanished identity goes to no-object", [=] {
    const std::vector<trivd::Prediction> preds{track_pred({0, 0, 10, 10}, "car", 3)};
    const auto a = trivd::match_tracking(preds, {}, {3}, prompt, w);
    return first_failure({expect_eq(a.pairs.size(), 0u, "pairs"),
                          expect_eq(a.unmatched_preds, std::vector<std::size_t>{0},
                                    "unmatched")});
  }});

  suite.push_back({"tracking: vanished track query never takes a new object", [=] {
    // The stale track query has the perfect box for the newcomer; the
    // newcomer must still go to the empty query.
    const std::vector<trivd::Prediction> preds{track_pred({0, 0, 10, 10}, "car", 3),
                                               pred({40, 40, 55, 55}, "car")};
    const auto a = trivd::match_tracking(preds, {{{0, 0, 10, 10}, "car", 9}}, {3}, prompt, w);
    return first_failure({expect_pairs(a, {{0, 1}}),
                          expect_eq(a.unmatched_preds, std::vector<std::size_t>{0},
                                    "unmatched")});
  }});

  suite.push_back({"tracking: newcomer against empty queries reduces to detection", [=] {
    const std::vector<trivd::Prediction> preds{pred({2, 1, 12, 11}, "person")};
    const std::vector<GroundTruth> gts{{{0, 0, 10, 10}, "person", 4}};
    const auto t = trivd::match_tracking(preds, gts, {}, prompt, w);
    const auto d = trivd::match_detection(preds, gts, prompt, w);
    return first_failure({expect_eq(pair_list(t) == pair_list(d), true, "same pairs"),
                          expect_eq(t.total_cost, d.total_cost, "same cost")});
  }});

  suite.push_back({"tracking: mixed frame combines forced, vanished and residual", [=] {
    const std::vector<trivd::Prediction> preds{
        track_pred({0, 0, 10, 10}, "car", 1),        // continues
        track_pred({100, 100, 110, 110}, "car", 2),  // vanished
        pred({30, 30, 41, 40}, "person"), pred({60, 60, 70, 70}, "car"),
        pred({29, 30, 40, 40}, "car")};
    const std::vector<GroundTruth> gts{{{1, 0, 11, 10}, "car", 1},
                                       {{30, 30, 40, 40}, "person", 5},
                                       {{60, 61, 70, 71}, "car", 6}};
    const auto a = trivd::match_tracking(preds, gts, {1, 2}, prompt, w);
    const auto cost = trivd::detection_cost_matrix(preds, gts, prompt, w);
    PairList expected = brute_force_pairs(cost, {1, 2}, {2, 3, 4});
    expected.emplace_back(0, 0);
    return first_failure({expect_pairs(a, expected), coverage(a, preds.size()),
                          expect_eq(std::count(a.unmatched_preds.begin(),
                                               a.unmatched_preds.end(), 1u),
                                    1, "vanished query unmatched")});
  }});

  suite.push_back({"tracking: malformed track queries are rejected", [=] {
    const std::vector<trivd::Prediction> dup{track_pred({0, 0, 1, 1}, "car", 1),
                                             track_pred({2, 2, 3, 3}, "car", 1)};
    const std::vector<trivd::Prediction> unknown{track_pred({0, 0, 1, 1}, "car", 8)};
    bool dup_threw = false, unknown_threw = false, missing_threw = false;
    try {
      trivd::match_tracking(dup, {}, {1}, prompt, w);
    } catch (const trivd::ValidationError&) {
      dup_threw = true;
    }
    try {
      trivd::match_tracking(unknown, {}, {1}, prompt, w);
    } catch (const trivd::ValidationError&) {
      unknown_threw = true;
    }
    try {
      trivd::match_detection({pred({0, 0, 1, 1}, "car")}, {{{0, 0, 1, 1}, "bus", {}}},
                             prompt, w);
    } catch (const trivd::ValidationError&) {
      missing_threw = true;
    }
    return first_failure({expect_eq(dup_threw, true, "duplicate ids rejected"),
                          expect_eq(unknown_threw, true, "unknown id rejected"),
                          expect_eq(missing_threw, true, "unknown category rejected")});
  }});

  return suite;
}

// ---------------------------------------------------------------------------
// Track lifecycle

inline const trivd::TextPrompt& lifecycle_prompt() {
  static const trivd::TextPrompt p = trivd::build_prompt({"person"});
  return p;
}

inline Eigen::VectorXd unit(Eigen::Index dim, Eigen::Index axis) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
  v[axis] = 1;
  return v;
}

inline trivd::Prediction detection(const trivd::Box& box, double score, Eigen::Index identity,
                                   trivd::QueryOrigin origin = trivd::QueryOrigin::empty()) {
  const auto& p = lifecycle_prompt();
  return trivd::Prediction{box, trivd::target_distribution(p.span_of("person"), p.token_count()),
                           score, origin, unit(8, identity)};
}

inline std::vector<trivd::TrackId> output_ids(const trivd::StepResult& r) {
  std::vector<trivd::TrackId> ids;
  for (const auto& t : r.outputs) ids.push_back(t.id);
  return ids;
}

inline const trivd::Track* find(const trivd::TrackState& s, trivd::TrackId id) {
  for (const auto& t : s.tracks) {
    if (t.id == id) return &t;
  }
  return nullptr;
}

// Track 0 born at frame 0, then re-observed through its track query at `score`.
inline trivd::TrackState score_update(double score) {
  trivd::TrackState s;
  const trivd::TrackerConfig cfg;
  trivd::step(s, {detection({0, 0, 10, 10}, 0.9, 0)}, lifecycle_prompt(), cfg);
  trivd::step(s, {detection({1, 0, 11, 10}, score, 0, trivd::QueryOrigin::track(0))},
              lifecycle_prompt(), cfg);
  return s;
}

// Two tracks moved by their track queries into boxes overlapping by `overlap`.
inline trivd::TrackState nms_pair(double overlap) {
  trivd::TrackState s;
  const trivd::TrackerConfig cfg;
  trivd::step(s, {detection({0, 0, 100, 100}, 0.9, 0), detection({300, 0, 400, 100}, 0.8, 1)},
              lifecycle_prompt(), cfg);
  trivd::step(s,
              {detection({0, 0, 100, 100}, 0.9, 0, trivd::QueryOrigin::track(0)),
               detection({0, 0, 100, 100 * overlap}, 0.8, 1, trivd::QueryOrigin::track(1))},
              lifecycle_prompt(), cfg);
  return s;
}

// Object seen at frame 0, absent for `gap` frames, then seen again; returns
// the id it carries on return (or -1 if untracked).
inline trivd::TrackId return_after(int gap, double return_score = 0.9) {
  trivd::TrackState s;
  const trivd::TrackerConfig cfg;
  trivd::step(s, {detection({0, 0, 10, 10}, 0.9, 0)}, lifecycle_prompt(), cfg);
  for (int f = 0; f < gap; ++f) trivd::step(s, {}, lifecycle_prompt(), cfg);
  const auto r =
      trivd::step(s, {detection({5, 0, 15, 10}, return_score, 0)}, lifecycle_prompt(), cfg);
  return r.bindings[0] ? *r.bindings[0] : -1;
}

inline std::vector<Fixture> lifecycle_suite() {
  const trivd::TrackerConfig cfg;
  std::vector<Fixture> suite;

  suite.push_back({"score 0.39 deactivates", [] {
    const auto s = score_update(0.39);
    const auto* t = find(s, 0);
    if (!t) return std::string("track 0 missing");
    return expect_eq(t->status == trivd::TrackStatus::inactive, true, "inactive");
  }});
  suite.push_back({"score 0.40 stays active", [] {
    const auto s = score_update(0.40);
    const auto* t = find(s, 0);
    if (!t) return std::string("track 0 missing");
    return expect_eq(t->status == trivd::TrackStatus::active, true, "active");
  }});
  suite.push_back({"IoU 0.91 suppresses the weaker track", [] {
    const auto s = nms_pair(0.91);
    const auto* strong = find(s, 0);
    const auto* weak = find(s, 1);
    if (!strong || !weak) return std::string("track missing");
    return first_failure(
        {expect_eq(strong->status == trivd::TrackStatus::active, true, "stronger active"),
         expect_eq(weak->status == trivd::TrackStatus::inactive, true, "weaker suppressed")});
  }});
  suite.push_back({"IoU 0.89 keeps both tracks", [] {
    const auto s = nms_pair(0.89);
    const auto* strong = find(s, 0);
    const auto* weak = find(s, 1);
    if (!strong || !weak) return std::string("track missing");
    return first_failure(
        {expect_eq(strong->status == trivd::TrackStatus::active, true, "first active"),
         expect_eq(weak->status == trivd::TrackStatus::active, true, "second active")});
  }});
  suite.push_back({"absence of n_reid frames keeps the identity", [cfg] {
    return expect_eq(return_after(cfg.n_reid), 0, "id on return");
  }});
  suite.push_back({"absence of n_reid + 1 frames issues a new identity", [cfg] {
    return expect_eq(return_after(cfg.n_reid + 1), 1, "id on return");
  }});
  suite.push_back({"removal happens on the (n_reid + 1)-th absent frame", [cfg] {
    trivd::TrackState s;
    trivd::step(s, {detection({0, 0, 10, 10}, 0.9, 0)}, lifecycle_prompt(), cfg);
    for (int f = 0; f < cfg.n_reid; ++f) trivd::step(s, {}, lifecycle_prompt(), cfg);
    if (!find(s, 0)) return std::string("removed too early");
    if (find(s, 0)->frames_inactive != cfg.n_reid) return std::string("counter off");
    trivd::step(s, {}, lifecycle_prompt(), cfg);
    return first_failure({expect_eq(find(s, 0) == nullptr, true, "removed"),
                          expect_eq(s.retired.size(), 1u, "retired")});
  }});
  suite.push_back({"re-identification score 0.39 does not reactivate", [] {
    return expect_eq(return_after(2, 0.39), -1, "binding");
  }});
  suite.push_back({"re-identification score 0.40 reactivates", [] {
    return expect_eq(return_after(2, 0.40), 0, "binding");
  }});
  return suite;
}

// ---------------------------------------------------------------------------
// Metrics

inline trivd::Observation obs(std::int64_t frame, const trivd::Box& box,
                              const std::string& category = "person",
                              double score = 1.0) {
  return trivd::Observation{frame, box, category, score};
}

inline trivd::Box slot(int k) { return trivd::Box::from_xywh(100.0 * k, 0, 50, 50); }
inline trivd::Box far_box() { return trivd::Box::from_xywh(5000, 5000, 50, 50); }

inline std::vector<Fixture> metrics_suite() {
  std::vector<Fixture> suite;
  suite.push_back({"clear_mot: perfect prediction", [] {
    trivd::TrajectorySet gt;
    for (int f = 0; f < 5; ++f) {
      gt.add(0, obs(f, slot(0)));
      gt.add(1, obs(f, slot(1)));
    }
    const auto r = trivd::clear_mot(gt, gt);
    return first_failure({expect_eq(r.fp, 0u, "fp"), expect_eq(r.fn, 0u, "fn"),
                          expect_eq(r.ids, 0u, "ids"), expect_eq(r.n_gt, 10u, "n_gt")});
  }});
  suite.push_back({"clear_mot: split identity counts one switch", [] {
    trivd::TrajectorySet gt, pred;
    for (int f = 0; f < 4; ++f) {
      gt.add(0, obs(f, slot(0)));
      pred.add(f < 2 ? 1 : 2, obs(f, slot(0)));
    }
    const auto r = trivd::clear_mot(gt, pred);
    return first_failure({expect_eq(r.ids, 1u, "ids"), expect_eq(r.fp, 0u, "fp"),
                          expect_eq(r.fn, 0u, "fn")});
  }});
  suite.push_back({"clear_mot: spurious box each frame", [] {
    trivd::TrajectorySet gt, pred;
    for (int f = 0; f < 3; ++f) {
      gt.add(0, obs(f, slot(0)));
      pred.add(0, obs(f, slot(0)));
      pred.add(9, obs(f, slot(3)));
    }
    return expect_eq(trivd::clear_mot(gt, pred).fp, 3u, "fp");
  }});
  suite.push_back({"mota formula", [] {
    return first_failure(
        {expect_eq(trivd::mota(0, 0, 0, 10), 1.0, "perfect"),
         expect_eq(std::abs(trivd::mota(1, 2, 1, 10) - 0.6) < 1e-12, true, "0.6 case"),
         expect_eq(std::abs(trivd::mota(0, 12, 0, 10) + 0.2) < 1e-12, true, "negative case")});
  }});
  suite.push_back({"idf1: perfect prediction", [] {
    trivd::TrajectorySet gt;
    for (int f = 0; f < 5; ++f) gt.add(3, obs(f, slot(0)));
    return expect_eq(trivd::idf1(gt, gt), 1.0, "idf1");
  }});
  suite.push_back({"idf1: 8 true, 2 false, 2 missed", [] {
    trivd::TrajectorySet gt, pred;
    for (int f = 0; f < 10; ++f) {
      gt.add(0, obs(f, slot(0)));
      pred.add(4, obs(f, f < 8 ? slot(0) : far_box()));
    }
    const auto c = trivd::identity_counts(gt, pred);
    return first_failure({expect_eq(c.idtp, 8u, "idtp"), expect_eq(c.idfp, 2u, "idfp"),
                          expect_eq(c.idfn, 2u, "idfn"),
                          expect_eq(std::abs(c.idf1() - 0.8) < 1e-12, true, "idf1 0.8")});
  }});
  suite.push_back({"idf1: even split halves the score", [] {
    trivd::TrajectorySet gt, pred;
    for (int f = 0; f < 10; ++f) {
      gt.add(0, obs(f, slot(0)));
      pred.add(f < 5 ? 1 : 2, obs(f, slot(0)));
    }
    return expect_eq(std::abs(trivd::idf1(gt, pred) - 0.5) < 1e-12, true, "idf1 0.5");
  }});
  suite.push_back({"idf1: empty against empty", [] {
    return first_failure(
        {expect_eq(trivd::idf1({}, {}), 1.0, "empty/empty"),
         expect_eq(trivd::idf1(trivd::TrajectorySet({{0, {obs(0, slot(0))}}}), {}), 0.0,
                   "gt only")});
  }});
  suite.push_back({"mt_ml: coverage boundaries", [] {
    // Three 10-frame trajectories covered on 9, 1 and 8 frames.
    trivd::TrajectorySet gt, pred;
    const int covered[3] = {9, 1, 8};
    for (int k = 0; k < 3; ++k) {
      for (int f = 0; f < 10; ++f) {
        gt.add(k, obs(f, slot(k)));
        if (f < covered[k]) pred.add(k, obs(f, slot(k)));
      }
    }
    const auto r = trivd::clear_mot(gt, pred);
    const auto c = trivd::mt_ml(gt, r.matches);
    return first_failure({expect_eq(c.mt, 1u, "mt"), expect_eq(c.ml, 1u, "ml")});
  }});
  suite.push_back({"average precision hand curves", [] {
    const std::vector<std::pair<std::int64_t, trivd::Box>> one{{0, slot(0)}};
    const double all = trivd::average_precision({{0, slot(0), 1.0}, {1, slot(1), 1.0}},
                                                {{0, slot(0)}, {1, slot(1)}});
    const double tp_first =
        trivd::average_precision({{0, slot(0), 0.9}, {0, slot(2), 0.8}}, one);
    const double fp_first =
        trivd::average_precision({{0, slot(0), 0.8}, {0, slot(2), 0.9}}, one);
    return first_failure({expect_eq(all, 1.0, "all detected"),
                          expect_eq(tp_first, 1.0, "tp first"),
                          expect_eq(std::abs(fp_first - 0.5) < 1e-12, true, "fp first")});
  }});
  return suite;
}

// ---------------------------------------------------------------------------
// IDF1 brute force

/// Largest IDTP over every partial one-to-one pairing of gt ids with pred ids.
inline std::size_t brute_force_idtp(const trivd::TrajectorySet& gt,
                                    const trivd::TrajectorySet& pred, double thr) {
  std::vector<trivd::TrackId> gids, pids;
  for (const auto& [id, o] : gt.trajectories()) gids.push_back(id);
  for (const auto& [id, o] : pred.trajectories()) pids.push_back(id);
  auto hits = [&](trivd::TrackId g, trivd::TrackId p) {
    std::size_t n = 0;
    for (const auto& a : gt.trajectories().at(g)) {
      for (const auto& b : pred.trajectories().at(p)) {
        if (a.frame == b.frame && trivd::iou(a.box, b.box) >= thr) ++n;
      }
    }
    return n;
  };
  std::size_t best = 0;
  // Each gt picks a distinct pred or nothing.
  std::function<void(std::size_t, std::vector<bool>&, std::size_t)> rec =
      [&](std::size_t i, std::vector<bool>& used, std::size_t acc) {
        if (i == gids.size()) {
          best = std::max(best, acc);
          return;
        }
        rec(i + 1, used, acc);
        for (std::size_t p = 0; p < pids.size(); ++p) {
          if (used[p]) continue;
          used[p] = true;
          rec(i + 1, used, acc + hits(gids[i], pids[p]));
          used[p] = false;
        }
      };
  std::vector<bool> used(pids.size(), false);
  rec(0, used, 0);
  return best;
}

/// Random trajectory sets with up to 3 ids over up to 5 frames, boxes drawn
/// from a few slots so that overlaps and identity confusions are common.
inline trivd::TrajectorySet random_trajectories(testing::Rng& rng) {
  const std::size_t ids = testing::pick(rng, 0, 3);
  const std::size_t frames = testing::pick(rng, 1, 5);
  trivd::TrajectorySet out;
  for (std::size_t id = 0; id < ids; ++id) {
    for (std::size_t f = 0; f < frames; ++f) {
      if (testing::uniform(rng, 0, 1) < 0.3) continue;
      const int k = static_cast<int>(testing::pick(rng, 0, 3));
      trivd::Box b = slot(k);
      b.x1 += testing::uniform(rng, -10, 10);
      out.add(static_cast<trivd::TrackId>(id), obs(static_cast<std::int64_t>(f), b));
    }
  }
  return out;
}

}  // namespace fixtures
