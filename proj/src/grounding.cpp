#include "trivd/grounding.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace trivd {

TextPrompt::TextPrompt(std::vector<std::string> categories,
                       std::vector<TokenSpan> spans, std::size_t token_count)
    : categories_(std::move(categories)),
      spans_(std::move(spans)),
      token_count_(token_count) {
  if (categories_.empty()) throw ValidationError("prompt has no categories");
  if (categories_.size() != spans_.size()) {
    throw ValidationError("prompt needs one span per category");
  }
  if (token_count_ > kMaxPromptTokens) {
    throw ValidationError("prompt has " + std::to_string(token_count_) +
                          " tokens; the limit is " +
                          std::to_string(kMaxPromptTokens));
  }
  std::set<std::string> seen;
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < spans_.size(); ++i) {
    const auto& span = spans_[i];
    if (!seen.insert(categories_[i]).second) {
      throw ValidationError("duplicate category '" + categories_[i] + "'");
    }
    if (span.start >= span.end) {
      throw ValidationError("category '" + categories_[i] +
                            "' has an empty span");
    }
    if (span.start < cursor || span.end > token_count_) {
      throw ValidationError("prompt spans must be ordered, disjoint and in range");
    }
    cursor = span.end;
  }
}

std::optional<std::size_t> TextPrompt::find(const std::string& name) const {
  const auto it = std::find(categories_.begin(), categories_.end(), name);
  if (it == categories_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - categories_.begin());
}

const TokenSpan& TextPrompt::span_of(const std::string& name) const {
  const auto idx = find(name);
  if (!idx) throw ValidationError("category '" + name + "' not in prompt");
  return spans_[*idx];
}

TextPrompt build_prompt(const std::vector<std::string>& categories) {
  std::vector<TokenSpan> spans;
  spans.reserve(categories.size());
  std::size_t cursor = 0;
  for (const auto& name : categories) {
    std::istringstream words(name);
    std::string word;
    std::size_t n = 0;
    while (words >> word) ++n;
    if (n == 0) throw ValidationError("category name has no tokens");
    spans.push_back({cursor, cursor + n});
    cursor += n;
  }
  return TextPrompt(categories, std::move(spans), cursor);
}

TokenSpanDistribution::TokenSpanDistribution(Eigen::VectorXd probs)
    : probs_(std::move(probs)) {
  if (probs_.size() < 1) {
    throw ValidationError("distribution needs at least the no-object slot");
  }
  if (!probs_.allFinite() || (probs_.array() < 0).any()) {
    throw ValidationError("distribution entries must be finite and >= 0");
  }
  if (std::abs(probs_.sum() - 1.0) > 1e-6) {
    throw ValidationError("distribution does not sum to 1");
  }
}

double TokenSpanDistribution::span_mass(const TokenSpan& span) const {
  if (span.end > token_count()) throw ValidationError("span out of range");
  return probs_.segment(static_cast<Eigen::Index>(span.start),
                        static_cast<Eigen::Index>(span.length()))
      .sum();
}

TokenSpanDistribution target_distribution(const std::optional<TokenSpan>& span,
                                          std::size_t token_count) {
  Eigen::VectorXd probs =
      Eigen::VectorXd::Zero(static_cast<Eigen::Index>(token_count + 1));
  if (!span) {
    probs[static_cast<Eigen::Index>(token_count)] = 1.0;
  } else {
    if (span->length() == 0 || span->start > span->end) {
      throw ValidationError("target span is empty");
    }
    if (span->end > token_count) throw ValidationError("target span out of range");
    probs.segment(static_cast<Eigen::Index>(span->start),
                  static_cast<Eigen::Index>(span->length()))
        .setConstant(1.0 / static_cast<double>(span->length()));
  }
  return TokenSpanDistribution(std::move(probs));
}

namespace {

void check_pairing(const std::vector<TokenSpanDistribution>& preds,
                   const std::vector<TokenSpanDistribution>& targets) {
  if (preds.size() != targets.size()) {
    throw ValidationError("soft_token_loss: " + std::to_string(preds.size()) +
                          " predictions vs " + std::to_string(targets.size()) +
                          " targets");
  }
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].token_count() != targets[i].token_count()) {
      throw ValidationError("soft_token_loss: token_count mismatch at object " +
                            std::to_string(i));
    }
  }
}

}  // namespace

double soft_token_loss(const std::vector<TokenSpanDistribution>& preds,
                       const std::vector<TokenSpanDistribution>& targets) {
  check_pairing(preds, targets);
  if (preds.empty()) return 0.0;
  double total = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& p = preds[i].probs();
    const auto& t = targets[i].probs();
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      if (t[k] != 0) total -= t[k] * std::log(std::max(p[k], kLogEpsilon));
    }
  }
  return total / static_cast<double>(preds.size());
}

Eigen::MatrixXd soft_token_loss_prob_grad(
    const std::vector<TokenSpanDistribution>& preds,
    const std::vector<TokenSpanDistribution>& targets) {
  check_pairing(preds, targets);
  if (preds.empty()) return {};
  const auto width = preds.front().probs().size();
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(
      static_cast<Eigen::Index>(preds.size()), width);
  const double scale = 1.0 / static_cast<double>(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& p = preds[i].probs();
    const auto& t = targets[i].probs();
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      if (t[k] != 0 && p[k] > kLogEpsilon) {
        grad(static_cast<Eigen::Index>(i), k) = -scale * t[k] / p[k];
      }
    }
  }
  return grad;
}

SoftTokenLogitLoss soft_token_loss_logits(const Eigen::MatrixXd& logits,
                                          const Eigen::MatrixXd& targets) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols()) {
    throw ShapeError("soft_token_loss_logits: logits and targets differ in shape");
  }
  if (!logits.allFinite()) throw NonFiniteError("non-finite logits");
  SoftTokenLogitLoss out;
  out.grad = Eigen::MatrixXd::Zero(logits.rows(), logits.cols());
  if (logits.rows() == 0) return out;
  const double scale = 1.0 / static_cast<double>(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const Eigen::VectorXd z = logits.row(i).transpose();
    const Eigen::VectorXd t = targets.row(i).transpose();
    const Eigen::VectorXd log_p = log_softmax(z);
    out.value -= scale * t.dot(log_p);
    out.grad.row(i) =
        scale * (t.sum() * log_p.array().exp() - t.array()).matrix().transpose();
  }
  return out;
}

double entropy(const TokenSpanDistribution& p) {
  double h = 0;
  for (Eigen::Index k = 0; k < p.probs().size(); ++k) {
    const double v = p.probs()[k];
    if (v > 0) h -= v * std::log(v);
  }
  return h;
}

// ---------------------------------------------------------------------------

AlignmentBatch::AlignmentBatch(Eigen::MatrixXd object_embeds,
                               Eigen::MatrixXd token_embeds,
                               Incidence positives, double temperature)
    : objects_(std::move(object_embeds)),
      tokens_(std::move(token_embeds)),
      positives_(std::move(positives)),
      temperature_(temperature) {
  if (!(temperature_ > 0) || !std::isfinite(temperature_)) {
    throw ValidationError("temperature must be a positive finite number");
  }
  if (objects_.rows() == 0 || tokens_.rows() == 0) {
    throw ValidationError("alignment batch needs objects and tokens");
  }
  if (objects_.cols() != tokens_.cols()) {
    throw ShapeError("object and token embeddings differ in width");
  }
  if (positives_.rows() != objects_.rows() ||
      positives_.cols() != tokens_.rows()) {
    throw ShapeError("positive incidence must be [N_box, L]");
  }
  if (!objects_.allFinite() || !tokens_.allFinite()) {
    throw NonFiniteError("alignment embeddings contain NaN or Inf");
  }
}

AlignmentBatch AlignmentBatch::from_token_sets(
    Eigen::MatrixXd object_embeds, Eigen::MatrixXd token_embeds,
    const std::vector<std::vector<std::size_t>>& positive_tokens,
    double temperature) {
  Incidence inc = Incidence::Constant(object_embeds.rows(), token_embeds.rows(),
                                      false);
  if (positive_tokens.size() != static_cast<std::size_t>(object_embeds.rows())) {
    throw ShapeError("need one positive token set per object");
  }
  for (std::size_t i = 0; i < positive_tokens.size(); ++i) {
    for (std::size_t j : positive_tokens[i]) {
      if (j >= static_cast<std::size_t>(token_embeds.rows())) {
        throw ValidationError("positive token index out of range");
      }
      inc(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = true;
    }
  }
  return AlignmentBatch(std::move(object_embeds), std::move(token_embeds),
                        std::move(inc), temperature);
}

std::vector<std::size_t> AlignmentBatch::positive_tokens(
    std::size_t object) const {
  std::vector<std::size_t> out;
  for (Eigen::Index j = 0; j < positives_.cols(); ++j) {
    if (positives_(static_cast<Eigen::Index>(object), j)) {
      out.push_back(static_cast<std::size_t>(j));
    }
  }
  return out;
}

std::vector<std::size_t> AlignmentBatch::positive_objects(
    std::size_t token) const {
  std::vector<std::size_t> out;
  for (Eigen::Index i = 0; i < positives_.rows(); ++i) {
    if (positives_(i, static_cast<Eigen::Index>(token))) {
      out.push_back(static_cast<std::size_t>(i));
    }
  }
  return out;
}

AlignmentBatch AlignmentBatch::with_embeds(Eigen::MatrixXd objects,
                                           Eigen::MatrixXd tokens) const {
  return AlignmentBatch(std::move(objects), std::move(tokens), positives_,
                        temperature_);
}

namespace {

void require_some_positive(const AlignmentBatch& batch) {
  if (!batch.positives().any()) {
    throw ValidationError("contrastive loss needs at least one positive pair");
  }
}

}  // namespace

ContrastiveTerms contrastive_terms(const AlignmentBatch& batch) {
  require_some_positive(batch);
  const Eigen::MatrixXd logits = batch.object_embeds() *
                                 batch.token_embeds().transpose() /
                                 batch.temperature();
  const auto& pos = batch.positives();
  ContrastiveTerms terms;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const auto count = pos.row(i).count();
    if (count == 0) continue;
    const Eigen::VectorXd log_p = log_softmax(logits.row(i).transpose());
    double sum = 0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      if (pos(i, j)) sum -= log_p[j];
    }
    terms.object_term += sum / static_cast<double>(count);
  }
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const auto count = pos.col(j).count();
    if (count == 0) continue;
    const Eigen::VectorXd log_p = log_softmax(logits.col(j));
    double sum = 0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      if (pos(i, j)) sum -= log_p[i];
    }
    terms.token_term += sum / static_cast<double>(count);
  }
  return terms;
}

double contrastive_alignment_loss(const AlignmentBatch& batch) {
  return contrastive_terms(batch).total();
}

ContrastiveGrad contrastive_alignment_grad(const AlignmentBatch& batch) {
  require_some_positive(batch);
  const double tau = batch.temperature();
  const Eigen::MatrixXd logits =
      batch.object_embeds() * batch.token_embeds().transpose() / tau;
  const auto& pos = batch.positives();
  const Eigen::MatrixXd pos_d = pos.cast<double>();

  // d total / d logits, accumulated from the object and token sides.
  Eigen::MatrixXd d_logits = Eigen::MatrixXd::Zero(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const auto count = pos.row(i).count();
    if (count == 0) continue;
    d_logits.row(i) += softmax(logits.row(i).transpose()).transpose() -
                       pos_d.row(i) / static_cast<double>(count);
  }
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const auto count = pos.col(j).count();
    if (count == 0) continue;
    d_logits.col(j) +=
        softmax(logits.col(j)) - pos_d.col(j) / static_cast<double>(count);
  }
  d_logits *= 0.5 / tau;

  return {d_logits * batch.token_embeds(),
          d_logits.transpose() * batch.object_embeds()};
}

Classification classify_by_alignment(const TokenSpanDistribution& pred,
                                     const TextPrompt& prompt,
                                     bool exclude_no_object) {
  if (pred.token_count() != prompt.token_count()) {
    throw ValidationError("distribution and prompt disagree on token_count");
  }
  Classification best;
  double best_mass = -1;
  // spans() is ordered by start, so a strict comparison keeps the lowest start.
  for (std::size_t c = 0; c < prompt.spans().size(); ++c) {
    const double mass = pred.span_mass(prompt.spans()[c]);
    if (mass > best_mass) {
      best_mass = mass;
      best.category = c;
      best.score = mass;
    }
  }
  if (!exclude_no_object && pred.no_object_mass() > best_mass) {
    best.category.reset();
    best.score = pred.no_object_mass();
  }
  return best;
}

}  // namespace trivd
