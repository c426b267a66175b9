#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "trivd/tensor.hpp"

namespace trivd {

/// Video frames folded into the batch axis: data is [B*T,H,W,C].
struct FrameBatch {
  Tensor data;
  std::size_t batch = 1;
  std::size_t time = 1;  // 1 for still images
};

/// Folds [B,T,H,W,C] into a [B*T,H,W,C] frame batch (frame (b,t) -> row b*T+t).
FrameBatch fold_temporal(const Tensor& video);

/// Inverse of fold_temporal.
Tensor unfold_temporal(const FrameBatch& frames);

/// Multi-scale space-time features; level l is [B,T,H_l,W_l,C_l].
class FeatureMap {
 public:
  explicit FeatureMap(std::vector<Tensor> levels);

  const std::vector<Tensor>& levels() const { return levels_; }
  std::size_t scale_count() const { return levels_.size(); }
  const Tensor& level(std::size_t l) const { return levels_.at(l); }

 private:
  std::vector<Tensor> levels_;
};

/// Square channel map W[C,C], b[C] used by the temporal gate.
struct LinearParams {
  Tensor weight;
  Tensor bias;

  static LinearParams zeros(std::size_t c_in, std::size_t c_out);
};

/// Per-location spatial gate producing weights in [0,1] of shape [B,T,H,W].
class SpatialAttention {
 public:
  virtual ~SpatialAttention() = default;
  virtual Tensor weights(const Tensor& level) const = 0;
};

/// All spatial weights equal to one.
class IdentitySpatialAttention final : public SpatialAttention {
 public:
  Tensor weights(const Tensor& level) const override;
};

/// hard_sigmoid(x . w + b) of the channel vector x at each location.
class LinearSpatialAttention final : public SpatialAttention {
 public:
  explicit LinearSpatialAttention(LinearParams params,
                                  HardSigmoid sigmoid = {});
  Tensor weights(const Tensor& level) const override;

 private:
  LinearParams params_;  // W[C,1], b[1]
  HardSigmoid sigmoid_;
};

struct LevelAttentionParams {
  std::shared_ptr<const SpatialAttention> spatial;
  LinearParams temporal;
};

struct AttentionParams {
  std::vector<LevelAttentionParams> levels;
  HardSigmoid sigmoid{};
};

/// Temporal gate (1/T) * hard_sigmoid(f(spatial_mean(F))) of shape [B,T,C].
Tensor temporal_attention_weights(const Tensor& level, const LinearParams& f,
                                  HardSigmoid sigmoid = {});

Tensor spatial_attention_weights(const Tensor& level,
                                 const SpatialAttention& gate);

/// out = temporal_w[b,t,c] * (spatial_w[b,t,h,w] * F[b,t,h,w,c]), where the
/// temporal weights are computed on the spatially gated features.
Tensor attend_level(const Tensor& level, const LevelAttentionParams& params,
                    HardSigmoid sigmoid = {});

FeatureMap sequential_attention(const FeatureMap& features,
                                const AttentionParams& params);

/// Image-only route: levels are [B,H_l,W_l,C_l] and no temporal scaling
/// applies. Agrees bitwise with sequential_attention on T=1 inputs.
std::vector<Tensor> attend_images(const std::vector<Tensor>& levels,
                                  const AttentionParams& params);

}  // namespace trivd
