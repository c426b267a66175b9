#include <cmath>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "support.hpp"
#include "trivd/assignment.hpp"

using trivd::Box;

namespace {

// GIoU straight from its definition, in long double.
double giou_oracle(const Box& a, const Box& b) {
  using ld = long double;
  const ld iw = std::max<ld>(0, std::min<ld>(a.x1, b.x1) - std::max<ld>(a.x0, b.x0));
  const ld ih = std::max<ld>(0, std::min<ld>(a.y1, b.y1) - std::max<ld>(a.y0, b.y0));
  const ld inter = iw * ih;
  const ld uni = (ld)a.area() + (ld)b.area() - inter;
  const ld hull = (std::max<ld>(a.x1, b.x1) - std::min<ld>(a.x0, b.x0)) *
                  (std::max<ld>(a.y1, b.y1) - std::min<ld>(a.y0, b.y0));
  const ld iou = uni > 0 ? inter / uni : 0;
  return static_cast<double>(hull > 0 ? iou - (hull - uni) / hull : iou);
}

}  // namespace

TEST_CASE("giou hand cases") {
  CHECK(trivd::giou(Box{0, 0, 1, 1}, Box{0, 0, 1, 1}) == 1.0);
  CHECK(std::abs(trivd::giou(Box{0, 0, 1, 1}, Box{1, 0, 2, 1})) < 1e-12);
  CHECK(std::abs(trivd::giou(Box{0, 0, 1, 1}, Box{2, 0, 3, 1}) + 1.0 / 3) < 1e-12);
  CHECK(trivd::iou(Box{0, 0, 1, 1}, Box{0, 0, 1, 2}) == 0.5);
  // Zero-area boxes stay finite.
  CHECK(std::isfinite(trivd::giou(Box{1, 1, 1, 1}, Box{1, 1, 1, 1})));
  CHECK(trivd::iou(Box{1, 1, 1, 1}, Box{0, 0, 2, 2}) == 0.0);
}

TEST_CASE("giou properties over random pairs") {
  testing::Rng rng(41);
  for (int trial = 0; trial < 2000; ++trial) {
    const Box a = testing::random_box(rng);
    const Box b = testing::random_box(rng);
    const double g = trivd::giou(a, b);
    CHECK(g == trivd::giou(b, a));
    CHECK(g >= -1.0);
    CHECK(g <= 1.0);
    CHECK(std::abs(g - giou_oracle(a, b)) < 1e-12);
    CHECK(trivd::giou(a, a) == doctest::Approx(1.0).epsilon(1e-15));
    // Nested boxes: the hull is the outer box, which is also the union.
    const Box inner{a.x0 + 0.25 * a.width(), a.y0 + 0.25 * a.height(),
                    a.x1 - 0.25 * a.width(), a.y1 - 0.25 * a.height()};
    CHECK(trivd::giou(a, inner) == doctest::Approx(trivd::iou(a, inner)).epsilon(1e-12));
  }
}

TEST_CASE("box_loss") {
  const trivd::LossWeights w;
  CHECK(trivd::box_loss(Box{0, 0, 1, 1}, Box{0, 0, 1, 1}, w) == 0.0);
  CHECK(trivd::box_loss(Box{0, 0, 1, 1}, Box{0, 0, 1, 2}, w) == doctest::Approx(6.0));
  CHECK(trivd::box_loss(Box{3, 3, 7, 9}, Box{3, 3, 7, 9}, {1.5, 0.2}) == 0.0);
  CHECK_THROWS_AS(trivd::box_loss(Box{0, 0, 1, 1}, Box{2, 0, 1, 1}, w), trivd::ValidationError);
  CHECK_THROWS_AS(trivd::LossWeights({0, 0}).validate(), trivd::ValidationError);
  CHECK_THROWS_AS(trivd::LossWeights({-1, 2}).validate(), trivd::ValidationError);

  testing::Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const Box a = testing::random_box(rng, 20);
    const Box b = testing::random_box(rng, 20);
    const trivd::LossWeights rw{testing::uniform(rng, 0, 5), testing::uniform(rng, 0.1, 5)};
    CHECK(trivd::box_loss(a, b, rw) >= 0.0);
    const auto g = trivd::box_loss_grad(a, b, rw);
    const auto fn = [&](const trivd::Tensor& x) {
      return trivd::box_loss(a, Box{x[0], x[1], x[2], x[3]}, rw);
    };
    const auto c = b.coords();
    const auto report = trivd::grad_check(
        fn, trivd::Tensor({4}, std::vector<double>(g.begin(), g.end())),
        trivd::Tensor({4}, std::vector<double>(c.begin(), c.end())));
    CHECK(report.max_rel_err < 1e-3);
  }
}

TEST_CASE("hungarian examples") {
  Eigen::MatrixXd diag(2, 2);
  diag << 1, 2, 2, 1;
  auto a = trivd::hungarian(diag);
  CHECK(fixtures::pair_list(a) == fixtures::PairList{{0, 0}, {1, 1}});
  CHECK(a.total_cost == 2);

  Eigen::MatrixXd anti(2, 2);
  anti << 4, 1, 1, 4;
  a = trivd::hungarian(anti);
  CHECK(fixtures::pair_list(a) == fixtures::PairList{{0, 1}, {1, 0}});
  CHECK(a.total_cost == 2);

  Eigen::MatrixXd wide(2, 3);
  wide << 1, 2, 3, 2, 1, 3;
  a = trivd::hungarian(wide);
  CHECK(fixtures::pair_list(a) == fixtures::PairList{{0, 0}, {1, 1}});
  CHECK(a.unmatched_preds == std::vector<std::size_t>{2});

  Eigen::MatrixXd tall(3, 1);
  tall << 5, 2, 7;
  a = trivd::hungarian(tall);
  CHECK(fixtures::pair_list(a) == fixtures::PairList{{1, 0}});
  CHECK(a.unmatched_gts == std::vector<std::size_t>{0, 2});

  CHECK(trivd::hungarian(Eigen::MatrixXd(0, 0)).pairs.empty());
  CHECK(trivd::hungarian(Eigen::MatrixXd(0, 3)).unmatched_preds.size() == 3);

  Eigen::MatrixXd bad(1, 1);
  bad << NAN;
  CHECK_THROWS(trivd::hungarian(bad));
}

TEST_CASE("hungarian ties resolve to the lexicographically smallest pair list") {
  CHECK(fixtures::pair_list(trivd::hungarian(Eigen::MatrixXd::Zero(3, 3))) ==
        fixtures::PairList{{0, 0}, {1, 1}, {2, 2}});
  Eigen::MatrixXd m(2, 3);
  m << 1, 1, 0, 1, 1, 0;
  // Optimal total 1 is reached by (0,0)(1,2), (0,1)(1,2), (0,2)(1,0), (0,2)(1,1).
  CHECK(fixtures::pair_list(trivd::hungarian(m)) == fixtures::PairList{{0, 0}, {1, 2}});
}

TEST_CASE("hungarian matches brute force on random matrices") {
  testing::Rng rng(43);
  for (int trial = 0; trial < 300; ++trial) {
    const auto r = static_cast<Eigen::Index>(testing::pick(rng, 1, 6));
    const auto c = static_cast<Eigen::Index>(testing::pick(rng, 1, 6));
    Eigen::MatrixXd cost = testing::random_matrix(rng, r, c, 0, 20);
    if (trial % 2 == 0) cost = cost.array().floor().matrix();  // frequent ties
    const auto a = trivd::hungarian(cost);
    CHECK(a.pairs.size() == static_cast<std::size_t>(std::min(r, c)));
    CHECK(std::abs(a.total_cost - testing::brute_force_min_cost(cost)) < 1e-9);
    CHECK(fixtures::coverage(a, static_cast<std::size_t>(c)).empty());
  }
}

TEST_CASE("matching scenario suite") {
  for (const auto& f : fixtures::matching_suite()) {
    INFO(f.name);
    CHECK(f.run() == "");
  }
}

TEST_CASE("match_tracking output covers every prediction exactly once") {
  testing::Rng rng(44);
  const auto& prompt = fixtures::matching_prompt();
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<trivd::GroundTruth> gts;
    std::set<trivd::TrackId> prev;
    std::vector<trivd::Prediction> preds;
    const std::size_t n_gt = testing::pick(rng, 0, 4);
    for (std::size_t i = 0; i < n_gt; ++i) {
      gts.push_back({testing::random_box(rng), i % 2 ? "car" : "person",
                     static_cast<trivd::TrackId>(testing::pick(rng, 0, 1) ? i : 10 + i)});
    }
    for (trivd::TrackId id = 0; id < 4; ++id) {
      if (testing::pick(rng, 0, 1)) {
        prev.insert(id);
        preds.push_back(fixtures::track_pred(testing::random_box(rng), "car", id));
      }
    }
    const std::size_t n_empty = testing::pick(rng, 0, 4);
    for (std::size_t k = 0; k < n_empty; ++k) {
      preds.push_back(fixtures::pred(testing::random_box(rng), k % 2 ? "car" : "person"));
    }
    const auto a = trivd::match_tracking(preds, gts, prev, prompt, trivd::LossWeights{});
    CHECK(fixtures::coverage(a, preds.size()).empty());
    for (const auto& p : a.pairs) {
      const auto& origin = preds[p.pred].origin;
      if (origin.is_track_query()) {
        // Track queries only ever pair with their own identity.
        CHECK(gts[p.gt].track_id == origin.track_id());
      }
    }
  }
}

namespace {

struct LossFixture {
  trivd::TextPrompt prompt = trivd::build_prompt({"person", "car"});
  std::vector<trivd::GroundTruth> gts;
  std::vector<trivd::Prediction> preds;
};

LossFixture random_loss_fixture(testing::Rng& rng, bool with_track_queries) {
  LossFixture fx;
  const std::size_t n_gt = testing::pick(rng, 1, 3);
  for (std::size_t i = 0; i < n_gt; ++i) {
    fx.gts.push_back({testing::random_box(rng, 30), i % 2 ? "car" : "person",
                      static_cast<trivd::TrackId>(i)});
  }
  const std::size_t n_pred = n_gt + testing::pick(rng, 0, 2);
  for (std::size_t j = 0; j < n_pred; ++j) {
    Eigen::VectorXd p(3);
    for (Eigen::Index k = 0; k < 3; ++k) p[k] = testing::uniform(rng, 0.05, 1);
    auto origin = trivd::QueryOrigin::empty();
    if (with_track_queries && j < n_gt && testing::pick(rng, 0, 1)) {
      origin = trivd::QueryOrigin::track(static_cast<trivd::TrackId>(j));
    }
    fx.preds.push_back({testing::random_box(rng, 30), trivd::TokenSpanDistribution(p / p.sum()),
                        1.0, origin, {}});
  }
  return fx;
}

trivd::AlignmentBatch random_batch(testing::Rng& rng, std::size_t n, std::size_t l) {
  trivd::AlignmentBatch::Incidence pos(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(l));
  pos.setConstant(false);
  pos(0, 0) = true;
  for (Eigen::Index i = 0; i < pos.rows(); ++i) {
    for (Eigen::Index j = 0; j < pos.cols(); ++j) {
      if (testing::uniform(rng, 0, 1) < 0.3) pos(i, j) = true;
    }
  }
  return trivd::AlignmentBatch(
      testing::random_matrix(rng, static_cast<Eigen::Index>(n), 3, -0.5, 0.5),
      testing::random_matrix(rng, static_cast<Eigen::Index>(l), 3, -0.5, 0.5), pos);
}

std::set<trivd::TrackId> query_ids(const std::vector<trivd::Prediction>& preds) {
  std::set<trivd::TrackId> ids;
  for (const auto& p : preds) {
    if (p.origin.is_track_query()) ids.insert(p.origin.track_id());
  }
  return ids;
}

}  // namespace

TEST_CASE("total_loss decomposes into its four terms") {
  testing::Rng rng(45);
  const trivd::LossWeights w;
  for (int trial = 0; trial < 100; ++trial) {
    const bool tracking = trial % 2 == 1;
    const auto fx = random_loss_fixture(rng, tracking);
    const auto a = tracking ? trivd::match_tracking(fx.preds, fx.gts, query_ids(fx.preds),
                                                    fx.prompt, w)
                            : trivd::match_detection(fx.preds, fx.gts, fx.prompt, w);
    const auto batch = random_batch(rng, fx.preds.size(), fx.prompt.token_count());
    const auto loss = trivd::total_loss(a, fx.preds, fx.gts, fx.prompt, batch, w);

    // Independent recomputation from the module-level losses.
    std::vector<trivd::TokenSpanDistribution> targets;
    double detect = 0, track = 0;
    for (std::size_t j = 0; j < fx.preds.size(); ++j) {
      const auto g = a.gt_of(j);
      targets.push_back(trivd::target_distribution(
          g ? std::optional(fx.prompt.span_of(fx.gts[*g].category)) : std::nullopt,
          fx.prompt.token_count()));
      if (!g) continue;
      const double b = trivd::box_loss(fx.gts[*g].box, fx.preds[j].box, w);
      if (tracking && fx.preds[j].origin.is_track_query()) {
        track += b;
      } else {
        detect += b;
      }
    }
    std::vector<trivd::TokenSpanDistribution> dists;
    for (const auto& p : fx.preds) dists.push_back(p.span_dist);
    const double soft = trivd::soft_token_loss(dists, targets);
    const double contrast = trivd::contrastive_alignment_loss(batch);

    CHECK(loss.soft == doctest::Approx(soft).epsilon(1e-12));
    CHECK(loss.contrast == doctest::Approx(contrast).epsilon(1e-12));
    CHECK(loss.box_detect == doctest::Approx(detect).epsilon(1e-12));
    CHECK(loss.box_track == doctest::Approx(track).epsilon(1e-12));
    CHECK(std::abs(loss.total() - (soft + contrast + detect + track)) < 1e-9);
    CHECK(loss.total() >= 0.0);
    if (!tracking) CHECK(loss.box_track == 0.0);
  }
}

TEST_CASE("total_loss is zero on perfect predictions") {
  const auto prompt = trivd::build_prompt({"person", "car"});
  const std::vector<trivd::GroundTruth> gts{{{0, 0, 10, 10}, "person", 0},
                                            {{20, 0, 30, 10}, "car", 1}};
  std::vector<trivd::Prediction> preds;
  for (const auto& g : gts) {
    preds.push_back({g.box, trivd::target_distribution(prompt.span_of(g.category), 2), 1.0,
                     trivd::QueryOrigin::empty(), {}});
  }
  // A single object aligned with a single token: both softmaxes are trivially 1.
  Eigen::MatrixXd o(1, 2), t(1, 2);
  o << 1, 0;
  t << 1, 0;
  const trivd::AlignmentBatch batch = trivd::AlignmentBatch::from_token_sets(o, t, {{0}});
  const trivd::LossWeights w;
  const auto a = trivd::match_detection(preds, gts, prompt, w);
  const auto loss = trivd::total_loss(a, preds, gts, prompt, batch, w);
  CHECK(loss.total() == 0.0);
}

TEST_CASE("total_loss rejects inconsistent assignments") {
  const auto prompt = trivd::build_prompt({"person"});
  const std::vector<trivd::GroundTruth> gts{{{0, 0, 1, 1}, "person", {}}};
  const std::vector<trivd::Prediction> preds{
      {{0, 0, 1, 1}, trivd::target_distribution(trivd::TokenSpan{0, 1}, 1), 1.0,
       trivd::QueryOrigin::empty(), {}}};
  Eigen::MatrixXd o(1, 2), t(1, 2);
  o << 1, 0;
  t << 1, 0;
  const auto batch = trivd::AlignmentBatch::from_token_sets(o, t, {{0}});
  trivd::AssignmentResult bogus;
  bogus.pairs = {{0, 3, 0.0}};
  CHECK_THROWS_AS(trivd::total_loss(bogus, preds, gts, prompt, batch, {}),
                  trivd::ValidationError);
  trivd::AssignmentResult missing;  // prediction 0 appears nowhere
  CHECK_THROWS_AS(trivd::total_loss(missing, preds, gts, prompt, batch, {}),
                  trivd::ValidationError);
}

TEST_CASE("total_loss gradient agrees with central differences") {
  testing::Rng rng(46);
  const trivd::LossWeights w;
  for (int trial = 0; trial < 40; ++trial) {
    const bool tracking = trial % 2 == 1;
    const auto fx = random_loss_fixture(rng, tracking);
    const auto a = tracking ? trivd::match_tracking(fx.preds, fx.gts, query_ids(fx.preds),
                                                    fx.prompt, w)
                            : trivd::match_detection(fx.preds, fx.gts, fx.prompt, w);
    const auto batch = random_batch(rng, fx.preds.size(), fx.prompt.token_count());
    const auto params = trivd::to_parameters(fx.preds);
    const auto g = trivd::total_loss_grad(a, params, fx.gts, fx.prompt, batch, w);

    std::vector<double> x, analytic;
    auto push = [&](const Eigen::MatrixXd& v, const Eigen::MatrixXd& d) {
      for (Eigen::Index i = 0; i < v.rows(); ++i) {
        for (Eigen::Index k = 0; k < v.cols(); ++k) {
          x.push_back(v(i, k));
          analytic.push_back(d(i, k));
        }
      }
    };
    push(params.boxes, g.pred_boxes);
    push(params.span_probs, g.span_probs);
    push(batch.object_embeds(), g.object_embeds);
    push(batch.token_embeds(), g.token_embeds);

    auto fn = [&](const trivd::Tensor& v) {
      auto p = params;
      Eigen::MatrixXd o = batch.object_embeds();
      Eigen::MatrixXd t = batch.token_embeds();
      std::size_t c = 0;
      for (auto* m : {&p.boxes, &p.span_probs, &o, &t}) {
        for (Eigen::Index i = 0; i < m->rows(); ++i) {
          for (Eigen::Index k = 0; k < m->cols(); ++k) (*m)(i, k) = v[c++];
        }
      }
      return trivd::total_loss(a, p, fx.gts, fx.prompt, batch.with_embeds(o, t), w).total();
    };
    const auto report = trivd::grad_check(fn, trivd::Tensor({analytic.size()}, analytic),
                                          trivd::Tensor({x.size()}, x));
    CHECK(report.max_rel_err < 1e-3);
  }
}
