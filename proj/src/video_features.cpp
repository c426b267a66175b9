#include "trivd/video_features.hpp"

#include <string>
#include <utility>

namespace trivd {

FrameBatch fold_temporal(const Tensor& video) {
  if (video.rank() != 5) {
    throw ShapeError("fold_temporal expects [B,T,H,W,C], got " +
                     shape_string(video.shape()));
  }
  if (video.dim(1) == 0) throw ShapeError("fold_temporal: T must be >= 1");
  const auto& s = video.shape();
  return FrameBatch{video.reshaped({s[0] * s[1], s[2], s[3], s[4]}), s[0],
                    s[1]};
}

Tensor unfold_temporal(const FrameBatch& frames) {
  if (frames.data.rank() != 4) {
    throw ShapeError("unfold_temporal expects [B',H,W,C], got " +
                     shape_string(frames.data.shape()));
  }
  const std::size_t rows = frames.data.dim(0);
  if (frames.time == 0 || rows % frames.time != 0) {
    throw ShapeError("unfold_temporal: B'=" + std::to_string(rows) +
                     " is not divisible by t=" + std::to_string(frames.time));
  }
  if (rows / frames.time != frames.batch) {
    throw ShapeError("unfold_temporal: B'=" + std::to_string(rows) +
                     " != b*t=" + std::to_string(frames.batch * frames.time));
  }
  const auto& s = frames.data.shape();
  return frames.data.reshaped({frames.batch, frames.time, s[1], s[2], s[3]});
}

FeatureMap::FeatureMap(std::vector<Tensor> levels) : levels_(std::move(levels)) {
  if (levels_.empty()) throw ShapeError("FeatureMap needs at least one level");
  const auto& first = levels_.front();
  for (std::size_t l = 0; l < levels_.size(); ++l) {
    const auto& lv = levels_[l];
    if (lv.rank() != 5) {
      throw ShapeError("FeatureMap level " + std::to_string(l) +
                       " is not [B,T,H,W,C]");
    }
    if (lv.dim(0) != first.dim(0) || lv.dim(1) != first.dim(1)) {
      throw ShapeError("FeatureMap levels disagree on B or T");
    }
    if (l > 0 && (lv.dim(2) > levels_[l - 1].dim(2) ||
                  lv.dim(3) > levels_[l - 1].dim(3))) {
      throw ShapeError("FeatureMap spatial sizes must be nonincreasing");
    }
  }
}

LinearParams LinearParams::zeros(std::size_t c_in, std::size_t c_out) {
  return {Tensor::zeros({c_in, c_out}), Tensor::zeros({c_out})};
}

namespace {

Shape gate_shape(const Tensor& level) {
  if (level.rank() < 2) throw ShapeError("attention input rank too small");
  Shape shape = level.shape();
  shape.pop_back();
  return shape;
}

// Multiplies every channel vector of `level` by the matching scalar gate.
Tensor scale_locations(const Tensor& level, const Tensor& gate) {
  const std::size_t channels = level.shape().back();
  Tensor::Storage out = level.data();
  for (std::size_t loc = 0; loc < gate.size(); ++loc) {
    out.segment(static_cast<Eigen::Index>(loc * channels),
                static_cast<Eigen::Index>(channels)) *= gate[loc];
  }
  return level.with_data(std::move(out));
}

// Multiplies channel c at every spatial location of frame f by gate[f,c].
Tensor scale_channels(const Tensor& level, std::size_t frames,
                      const Tensor& gate) {
  const std::size_t channels = level.shape().back();
  const std::size_t cells = level.size() / (frames * channels);
  Tensor::Storage out = level.data();
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t s = 0; s < cells; ++s) {
      for (std::size_t c = 0; c < channels; ++c) {
        out[static_cast<Eigen::Index>((f * cells + s) * channels + c)] =
            gate[f * channels + c] *
            out[static_cast<Eigen::Index>((f * cells + s) * channels + c)];
      }
    }
  }
  return level.with_data(std::move(out));
}

}  // namespace

Tensor IdentitySpatialAttention::weights(const Tensor& level) const {
  return Tensor::constant(gate_shape(level), 1.0);
}

LinearSpatialAttention::LinearSpatialAttention(LinearParams params,
                                               HardSigmoid sigmoid)
    : params_(std::move(params)), sigmoid_(sigmoid) {
  if (params_.weight.rank() != 2 || params_.weight.dim(1) != 1 ||
      params_.bias.rank() != 1 || params_.bias.dim(0) != 1) {
    throw ShapeError("LinearSpatialAttention expects W[C,1] and b[1]");
  }
}

Tensor LinearSpatialAttention::weights(const Tensor& level) const {
  const Tensor logits = linear_map(level, params_.weight, params_.bias);
  return Tensor(gate_shape(level),
                logits.data().unaryExpr([this](double x) { return sigmoid_(x); })
                    .eval());
}

Tensor spatial_attention_weights(const Tensor& level,
                                 const SpatialAttention& gate) {
  return gate.weights(level);
}

Tensor temporal_attention_weights(const Tensor& level, const LinearParams& f,
                                  HardSigmoid sigmoid) {
  if (level.rank() != 5) {
    throw ShapeError("temporal_attention_weights expects [B,T,H,W,C]");
  }
  const double time = static_cast<double>(level.dim(1));
  const Tensor mapped = linear_map(spatial_mean(level), f.weight, f.bias);
  return mapped.with_data(
      mapped.data()
          .unaryExpr([&](double x) { return sigmoid(x) / time; })
          .eval());
}

Tensor attend_level(const Tensor& level, const LevelAttentionParams& params,
                    HardSigmoid sigmoid) {
  if (!params.spatial) throw ValidationError("missing spatial attention");
  const Tensor gated =
      scale_locations(level, spatial_attention_weights(level, *params.spatial));
  const Tensor temporal =
      temporal_attention_weights(gated, params.temporal, sigmoid);
  return scale_channels(gated, level.dim(0) * level.dim(1), temporal);
}

FeatureMap sequential_attention(const FeatureMap& features,
                                const AttentionParams& params) {
  if (params.levels.size() != features.scale_count()) {
    throw ShapeError("attention params cover " +
                     std::to_string(params.levels.size()) + " levels, map has " +
                     std::to_string(features.scale_count()));
  }
  std::vector<Tensor> out;
  out.reserve(features.scale_count());
  for (std::size_t l = 0; l < features.scale_count(); ++l) {
    out.push_back(attend_level(features.level(l), params.levels[l],
                               params.sigmoid));
  }
  return FeatureMap(std::move(out));
}

std::vector<Tensor> attend_images(const std::vector<Tensor>& levels,
                                  const AttentionParams& params) {
  if (params.levels.size() != levels.size()) {
    throw ShapeError("attention params do not match level count");
  }
  std::vector<Tensor> out;
  out.reserve(levels.size());
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const Tensor& image = levels[l];
    if (image.rank() != 4) throw ShapeError("attend_images expects [B,H,W,C]");
    const auto& lp = params.levels[l];
    if (!lp.spatial) throw ValidationError("missing spatial attention");
    const Tensor gated =
        scale_locations(image, lp.spatial->weights(image));

    // Per-image channel means, then the gate without any temporal scaling.
    const std::size_t batch = image.dim(0);
    const std::size_t cells = image.dim(1) * image.dim(2);
    const std::size_t channels = image.dim(3);
    if (cells == 0) throw ShapeError("empty spatial extent");
    Tensor::Storage mean = Tensor::Storage::Zero(
        static_cast<Eigen::Index>(batch * channels));
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t s = 0; s < cells; ++s) {
        for (std::size_t c = 0; c < channels; ++c) {
          mean[static_cast<Eigen::Index>(b * channels + c)] +=
              gated[(b * cells + s) * channels + c];
        }
      }
    }
    mean /= static_cast<double>(cells);
    const Tensor mapped = linear_map(Tensor({batch, channels}, std::move(mean)),
                                     lp.temporal.weight, lp.temporal.bias);
    const Tensor gate = mapped.with_data(
        mapped.data().unaryExpr([&](double x) { return params.sigmoid(x); })
            .eval());
    out.push_back(scale_channels(gated, batch, gate));
  }
  return out;
}

}  // namespace trivd
