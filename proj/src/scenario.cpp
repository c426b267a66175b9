#include <algorithm>
#include <cmath>
#include <random>

#include "trivd/harness.hpp"

namespace trivd {

void ScenarioConfig::validate() const {
  if (frames < 1) throw ValidationError("scenario needs at least one frame");
  if (categories.empty()) throw ValidationError("scenario needs categories");
  if (!(image_width > 0 && image_height > 0)) {
    throw ValidationError("image size must be positive");
  }
  if (!(min_box > 0 && min_box <= max_box && max_box <= image_width &&
        max_box <= image_height)) {
    throw ValidationError("box size range must satisfy 0 < min <= max <= image");
  }
  for (double s : {max_speed, box_jitter, score_noise, fp_rate, embed_noise}) {
    if (!(s >= 0) || !std::isfinite(s)) {
      throw ValidationError("speeds, stddevs and rates must be finite and >= 0");
    }
  }
  if (!(drop_prob >= 0 && drop_prob <= 1)) {
    throw ValidationError("drop probability must lie in [0,1]");
  }
  if (embed_dim < 1) throw ValidationError("embed_dim must be >= 1");
  if (clip_len < 1) throw ValidationError("clip_len must be >= 1");
  const std::size_t objects = categories.size() * objects_per_category;
  for (const auto& w : occlusions) {
    if (w.object >= objects || w.first > w.last) {
      throw ValidationError("invalid occlusion window");
    }
  }
}

namespace {

struct MovingObject {
  std::size_t category;
  double cx, cy, w, h, vx, vy;
};

Box clip(const Box& b, double width, double height) {
  return Box{std::clamp(b.x0, 0.0, width), std::clamp(b.y0, 0.0, height),
             std::clamp(b.x1, 0.0, width), std::clamp(b.y1, 0.0, height)};
}

// One unit direction per identity; orthonormal whenever dim allows.
Eigen::MatrixXd identity_directions(std::size_t count, std::size_t dim,
                                    std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd raw(static_cast<Eigen::Index>(dim),
                      static_cast<Eigen::Index>(count));
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    for (Eigen::Index i = 0; i < raw.rows(); ++i) raw(i, j) = normal(rng);
  }
  if (count == 0) return raw;
  if (count <= dim) {
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
    return qr.householderQ() * Eigen::MatrixXd::Identity(raw.rows(), raw.cols());
  }
  return raw.colwise().normalized();
}

Eigen::VectorXd noisy_unit(const Eigen::VectorXd& base, double stddev,
                           std::mt19937_64& rng) {
  Eigen::VectorXd v = base;
  if (stddev > 0) {
    std::normal_distribution<double> normal(0.0, stddev);
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] += normal(rng);
  }
  const double n = v.norm();
  return n > 0 ? Eigen::VectorXd(v / n) : v;
}

bool occluded(const ScenarioConfig& cfg, std::size_t object, std::int64_t frame) {
  return std::any_of(cfg.occlusions.begin(), cfg.occlusions.end(),
                     [&](const OcclusionWindow& w) {
                       return w.object == object && frame >= w.first &&
                              frame <= w.last;
                     });
}

}  // namespace

Scenario generate_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  Scenario s{cfg, build_prompt(cfg.categories), {}, {}, {}};
  const TextPrompt& prompt = s.prompt;

  std::vector<MovingObject> objects;
  for (std::size_t c = 0; c < cfg.categories.size(); ++c) {
    for (std::size_t k = 0; k < cfg.objects_per_category; ++k) {
      MovingObject o{};
      o.category = c;
      o.w = uniform(cfg.min_box, cfg.max_box);
      o.h = uniform(cfg.min_box, cfg.max_box);
      o.cx = uniform(o.w / 2, cfg.image_width - o.w / 2);
      o.cy = uniform(o.h / 2, cfg.image_height - o.h / 2);
      o.vx = uniform(-cfg.max_speed, cfg.max_speed);
      o.vy = uniform(-cfg.max_speed, cfg.max_speed);
      objects.push_back(o);
    }
  }
  const Eigen::MatrixXd directions =
      identity_directions(objects.size(), cfg.embed_dim, rng);

  std::normal_distribution<double> jitter(0.0, cfg.box_jitter > 0 ? cfg.box_jitter : 1.0);
  std::normal_distribution<double> score_noise(
      0.0, cfg.score_noise > 0 ? cfg.score_noise : 1.0);
  std::poisson_distribution<int> false_positives(cfg.fp_rate > 0 ? cfg.fp_rate : 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<bool> detected_before(objects.size(), false);
  for (std::int64_t f = 0; f < static_cast<std::int64_t>(cfg.frames); ++f) {
    std::vector<Prediction> dets;
    std::vector<std::int64_t> sources;
    std::vector<bool> detected_now(objects.size(), false);
    for (std::size_t o = 0; o < objects.size(); ++o) {
      const auto& ob = objects[o];
      const double cx = ob.cx + ob.vx * static_cast<double>(f);
      const double cy = ob.cy + ob.vy * static_cast<double>(f);
      const Box raw{cx - ob.w / 2, cy - ob.h / 2, cx + ob.w / 2, cy + ob.h / 2};
      const Box box = clip(raw, cfg.image_width, cfg.image_height);
      // Mostly outside the image counts as absent.
      if (box.area() < 0.25 * raw.area() || occluded(cfg, o, f)) continue;

      const std::string& category = cfg.categories[ob.category];
      s.gt.add(static_cast<TrackId>(o), Observation{f, box, category, 1.0});

      if (cfg.drop_prob > 0 && unit(rng) < cfg.drop_prob) continue;
      Box noisy = box;
      if (cfg.box_jitter > 0) {
        std::array<double, 4> c = box.coords();
        for (double& v : c) v += jitter(rng);
        noisy = clip(Box{std::min(c[0], c[2]), std::min(c[1], c[3]),
                         std::max(c[0], c[2]), std::max(c[1], c[3])},
                     cfg.image_width, cfg.image_height);
      }
      double score = 1.0;
      if (cfg.score_noise > 0) {
        score = std::clamp(1.0 - std::abs(score_noise(rng)), 0.0, 1.0);
      }
      QueryOrigin origin = QueryOrigin::empty();
      if (cfg.track_queries && detected_before[o] &&
          unit(rng) >= cfg.drop_prob) {
        origin = QueryOrigin::track(static_cast<TrackId>(o));
      }
      dets.push_back(Prediction{
          noisy,
          target_distribution(prompt.spans()[ob.category], prompt.token_count()),
          score, origin,
          noisy_unit(directions.col(static_cast<Eigen::Index>(o)), cfg.embed_noise,
                     rng)});
      sources.push_back(static_cast<std::int64_t>(o));
      detected_now[o] = true;
    }

    const int n_fp = cfg.fp_rate > 0 ? false_positives(rng) : 0;
    for (int k = 0; k < n_fp; ++k) {
      const double w = uniform(cfg.min_box, cfg.max_box);
      const double h = uniform(cfg.min_box, cfg.max_box);
      const double x = uniform(0, cfg.image_width - w);
      const double y = uniform(0, cfg.image_height - h);
      const auto category = static_cast<std::size_t>(
          std::min(unit(rng) * static_cast<double>(cfg.categories.size()),
                   static_cast<double>(cfg.categories.size() - 1)));
      Eigen::VectorXd embed(static_cast<Eigen::Index>(cfg.embed_dim));
      for (Eigen::Index i = 0; i < embed.size(); ++i) embed[i] = normal(rng);
      dets.push_back(Prediction{
          Box::from_xywh(x, y, w, h),
          target_distribution(prompt.spans()[category], prompt.token_count()),
          uniform(0.3, 1.0), QueryOrigin::empty(), embed.normalized()});
      sources.push_back(-1);
    }
    s.detections.push_back(std::move(dets));
    s.sources.push_back(std::move(sources));
    detected_before = std::move(detected_now);
  }
  return s;
}

}  // namespace trivd
