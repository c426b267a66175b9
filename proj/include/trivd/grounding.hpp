#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "trivd/tensor.hpp"

namespace trivd {

/// Longest prompt, in tokens, the grounding head accepts.
inline constexpr std::size_t kMaxPromptTokens = 256;

/// Guard inside log() for the probability-space cross entropy.
inline constexpr double kLogEpsilon = 1e-12;

/// Default contrastive temperature.
inline constexpr double kDefaultTemperature = 0.07;

/// Half-open token range [start, end).
struct TokenSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start; }
  bool contains(std::size_t token) const {
    return token >= start && token < end;
  }
  friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

/// Category names concatenated into one whitespace-tokenized prompt.
class TextPrompt {
 public:
  TextPrompt(std::vector<std::string> categories, std::vector<TokenSpan> spans,
             std::size_t token_count);

  const std::vector<std::string>& categories() const { return categories_; }
  const std::vector<TokenSpan>& spans() const { return spans_; }
  std::size_t token_count() const { return token_count_; }

  /// Index of `name`, or nullopt.
  std::optional<std::size_t> find(const std::string& name) const;
  const TokenSpan& span_of(const std::string& name) const;

 private:
  std::vector<std::string> categories_;
  std::vector<TokenSpan> spans_;
  std::size_t token_count_;
};

TextPrompt build_prompt(const std::vector<std::string>& categories);

/// Probability vector over token_count positions plus a trailing no-object
/// slot.
class TokenSpanDistribution {
 public:
  explicit TokenSpanDistribution(Eigen::VectorXd probs);

  const Eigen::VectorXd& probs() const { return probs_; }
  std::size_t token_count() const {
    return static_cast<std::size_t>(probs_.size()) - 1;
  }
  double no_object_mass() const { return probs_[probs_.size() - 1]; }
  double span_mass(const TokenSpan& span) const;

 private:
  Eigen::VectorXd probs_;
};

/// Uniform mass over `span`, or all mass on the no-object slot for nullopt.
TokenSpanDistribution target_distribution(const std::optional<TokenSpan>& span,
                                          std::size_t token_count);

/// Mean over objects of -sum_k target_k * log(max(pred_k, eps)).
double soft_token_loss(const std::vector<TokenSpanDistribution>& preds,
                       const std::vector<TokenSpanDistribution>& targets);

/// Gradient of soft_token_loss with respect to the predicted probabilities,
/// one row per object.
Eigen::MatrixXd soft_token_loss_prob_grad(
    const std::vector<TokenSpanDistribution>& preds,
    const std::vector<TokenSpanDistribution>& targets);

struct SoftTokenLogitLoss {
  double value = 0;
  Eigen::MatrixXd grad;  // d value / d logits, same shape as logits
};

/// Logit-space soft token loss: rows of `logits` go through a stable
/// log-softmax; `targets` rows are target distributions.
SoftTokenLogitLoss soft_token_loss_logits(const Eigen::MatrixXd& logits,
                                          const Eigen::MatrixXd& targets);

double entropy(const TokenSpanDistribution& p);

/// Object/token embeddings with their positive incidence for the contrastive
/// alignment loss. positives(i, j) is true iff token j is a positive of object
/// i, so the object-side and token-side positive sets always agree.
class AlignmentBatch {
 public:
  using Incidence = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

  AlignmentBatch(Eigen::MatrixXd object_embeds, Eigen::MatrixXd token_embeds,
                 Incidence positives, double temperature = kDefaultTemperature);

  /// Builds the incidence from per-object positive token lists.
  static AlignmentBatch from_token_sets(
      Eigen::MatrixXd object_embeds, Eigen::MatrixXd token_embeds,
      const std::vector<std::vector<std::size_t>>& positive_tokens,
      double temperature = kDefaultTemperature);

  const Eigen::MatrixXd& object_embeds() const { return objects_; }
  const Eigen::MatrixXd& token_embeds() const { return tokens_; }
  const Incidence& positives() const { return positives_; }
  double temperature() const { return temperature_; }

  std::vector<std::size_t> positive_tokens(std::size_t object) const;
  std::vector<std::size_t> positive_objects(std::size_t token) const;

  AlignmentBatch with_embeds(Eigen::MatrixXd objects,
                             Eigen::MatrixXd tokens) const;

 private:
  Eigen::MatrixXd objects_;  // [N_box, D]
  Eigen::MatrixXd tokens_;   // [L, D]
  Incidence positives_;      // [N_box, L]
  double temperature_;
};

struct ContrastiveTerms {
  double object_term = 0;  // L_obj
  double token_term = 0;   // L_tok
  double total() const { return 0.5 * (object_term + token_term); }
};

ContrastiveTerms contrastive_terms(const AlignmentBatch& batch);

double contrastive_alignment_loss(const AlignmentBatch& batch);

struct ContrastiveGrad {
  Eigen::MatrixXd object_embeds;
  Eigen::MatrixXd token_embeds;
};

ContrastiveGrad contrastive_alignment_grad(const AlignmentBatch& batch);

struct Classification {
  std::optional<std::size_t> category;  // nullopt = no object
  double score = 0;
};

/// Span-mass decision rule: each category scores the summed mass on its span;
/// the best category wins unless the no-object slot holds strictly more mass.
/// Ties go to the category with the lowest span start.
Classification classify_by_alignment(const TokenSpanDistribution& pred,
                                     const TextPrompt& prompt,
                                     bool exclude_no_object = false);

}  // namespace trivd
