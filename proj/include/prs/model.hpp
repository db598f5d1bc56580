#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "prs/types.hpp"

namespace prs {

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-4;
};

namespace detail {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

//! Binary cross-entropy from the logit, computed without overflow.
inline double bce_from_logit(double z, bool positive) {
  const double y = positive ? 1.0 : 0.0;
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

//! One Adam update on a parameter tensor.
inline void adam_update(std::vector<double>& params,
                        const std::vector<double>& grad,
                        std::vector<double>& first_moment,
                        std::vector<double>& second_moment, std::uint64_t step,
                        double lr, const AdamParams& adam) {
  const double bias1 = 1.0 - std::pow(adam.beta1, static_cast<double>(step));
  const double bias2 = 1.0 - std::pow(adam.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    first_moment[i] = adam.beta1 * first_moment[i] + (1.0 - adam.beta1) * grad[i];
    second_moment[i] =
        adam.beta2 * second_moment[i] + (1.0 - adam.beta2) * grad[i] * grad[i];
    const double m_hat = first_moment[i] / bias1;
    const double v_hat = second_moment[i] / bias2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + adam.epsilon);
  }
}

}  // namespace detail

//! Loss and flattened gradient of one batch, as consumed by the optimizer.
struct BatchGradient {
  double loss = 0.0;
  std::vector<double> weights;
  std::vector<double> bias;
};

//! One-vs-rest linear classifier trained online with Adam on mean per-class
//! binary cross-entropy. The class dimension grows on demand when examples
//! with new class ids arrive; new rows start at zero.
class LinearModel {
 public:
  LinearModel(std::size_t num_classes, std::size_t feature_dim,
              AdamParams adam = {})
      : feature_dim_(feature_dim), adam_(adam) {
    ensure_classes(num_classes);
  }

  std::size_t num_classes() const { return bias_.size(); }
  std::size_t feature_dim() const { return feature_dim_; }

  void ensure_classes(std::size_t num_classes) {
    if (num_classes <= bias_.size()) return;
    weights_.resize(num_classes * feature_dim_, 0.0);
    bias_.resize(num_classes, 0.0);
    m_w_.resize(weights_.size(), 0.0);
    v_w_.resize(weights_.size(), 0.0);
    m_b_.resize(bias_.size(), 0.0);
    v_b_.resize(bias_.size(), 0.0);
  }

  double& weight_at(std::size_t c, std::size_t d) {
    return weights_[c * feature_dim_ + d];
  }
  double& bias_at(std::size_t c) { return bias_[c]; }

  //! Per-class sigmoid scores for one feature vector.
  std::vector<double> predict(const std::vector<double>& features) const {
    check_features(features);
    std::vector<double> scores(bias_.size());
    for (std::size_t c = 0; c < bias_.size(); ++c)
      scores[c] = detail::sigmoid(logit(c, features));
    return scores;
  }

  //! Mean per-class BCE over the concatenated batches, without updating.
  double batch_loss(const std::vector<LabeledExample>& input,
                    const std::vector<LabeledExample>& replay) const {
    if (input.empty()) throw ContractError("input batch must be non-empty");
    double loss = 0.0;
    std::size_t count = 0;
    for (const auto* batch : {&input, &replay}) {
      for (const LabeledExample& ex : *batch) {
        check_features(ex.features);
        for (std::size_t c = 0; c < bias_.size(); ++c)
          loss += detail::bce_from_logit(logit(c, ex.features),
                                         ex.label.test(static_cast<ClassId>(c)));
        ++count;
      }
    }
    return loss / (static_cast<double>(count) *
                   static_cast<double>(bias_.size()));
  }

  //! Loss and gradient of the concatenated batches against the current
  //! parameters. Labels wider than the model must be grown in first.
  BatchGradient batch_gradient(const std::vector<LabeledExample>& input,
                               const std::vector<LabeledExample>& replay) const {
    if (input.empty()) throw ContractError("input batch must be non-empty");
    BatchGradient g;
    g.weights.assign(weights_.size(), 0.0);
    g.bias.assign(bias_.size(), 0.0);
    std::size_t count = 0;
    for (const auto* batch : {&input, &replay}) {
      for (const LabeledExample& ex : *batch) {
        check_features(ex.features);
        for (std::size_t c = 0; c < bias_.size(); ++c) {
          const double z = logit(c, ex.features);
          const bool y = ex.label.test(static_cast<ClassId>(c));
          g.loss += detail::bce_from_logit(z, y);
          const double dz = detail::sigmoid(z) - (y ? 1.0 : 0.0);
          g.bias[c] += dz;
          for (std::size_t d = 0; d < feature_dim_; ++d)
            g.weights[c * feature_dim_ + d] += dz * ex.features[d];
        }
        ++count;
      }
    }
    const double scale =
        1.0 / (static_cast<double>(count) * static_cast<double>(bias_.size()));
    g.loss *= scale;
    for (double& x : g.weights) x *= scale;
    for (double& x : g.bias) x *= scale;
    return g;
  }

  //! One Adam step on the concatenation of the input and replay batches.
  //! Returns the pre-update loss; throws DivergenceError if it is not finite.
  double train_step(const std::vector<LabeledExample>& input,
                    const std::vector<LabeledExample>& replay, double lr) {
    std::size_t max_classes = bias_.size();
    for (const auto* batch : {&input, &replay})
      for (const LabeledExample& ex : *batch)
        max_classes = std::max(max_classes, ex.label.size());
    ensure_classes(max_classes);

    const BatchGradient g = batch_gradient(input, replay);
    if (!std::isfinite(g.loss))
      throw DivergenceError("training loss is not finite");
    ++step_;
    detail::adam_update(weights_, g.weights, m_w_, v_w_, step_, lr, adam_);
    detail::adam_update(bias_, g.bias, m_b_, v_b_, step_, lr, adam_);
    return g.loss;
  }

  //! Flattened [weights | bias] gradient of the loss on a single example.
  std::vector<double> example_gradient(const LabeledExample& ex) const {
    check_features(ex.features);
    std::vector<double> grad(weights_.size() + bias_.size(), 0.0);
    const double scale = 1.0 / static_cast<double>(bias_.size());
    for (std::size_t c = 0; c < bias_.size(); ++c) {
      const double dz =
          scale * (detail::sigmoid(logit(c, ex.features)) -
                   (ex.label.test(static_cast<ClassId>(c)) ? 1.0 : 0.0));
      for (std::size_t d = 0; d < feature_dim_; ++d)
        grad[c * feature_dim_ + d] = dz * ex.features[d];
      grad[weights_.size() + c] = dz;
    }
    return grad;
  }

 private:
  double logit(std::size_t c, const std::vector<double>& features) const {
    double z = bias_[c];
    const double* row = &weights_[c * feature_dim_];
    for (std::size_t d = 0; d < feature_dim_; ++d) z += row[d] * features[d];
    return z;
  }

  void check_features(const std::vector<double>& features) const {
    if (features.size() != feature_dim_)
      throw DimensionError("feature dimension " +
                           std::to_string(features.size()) +
                           " does not match model dimension " +
                           std::to_string(feature_dim_));
  }

  std::size_t feature_dim_;
  AdamParams adam_;
  std::vector<double> weights_, bias_;
  std::vector<double> m_w_, v_w_, m_b_, v_b_;
  std::uint64_t step_ = 0;
};

//! One-hidden-layer variant (ReLU) with the same training contract, for
//! streams where a linear decision boundary is too weak.
class TwoLayerModel {
 public:
  TwoLayerModel(std::size_t num_classes, std::size_t feature_dim,
                std::size_t hidden_units, std::uint64_t seed,
                AdamParams adam = {})
      : feature_dim_(feature_dim), hidden_(hidden_units), adam_(adam) {
    if (hidden_ == 0) throw ConfigError("hidden_units: must be >= 1");
    w1_.resize(hidden_ * feature_dim_);
    b1_.assign(hidden_, 0.0);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> init(
        0.0, 1.0 / std::sqrt(static_cast<double>(feature_dim_)));
    for (double& w : w1_) w = init(rng);
    m_w1_.assign(w1_.size(), 0.0);
    v_w1_.assign(w1_.size(), 0.0);
    m_b1_.assign(b1_.size(), 0.0);
    v_b1_.assign(b1_.size(), 0.0);
    ensure_classes(num_classes);
  }

  std::size_t num_classes() const { return b2_.size(); }
  std::size_t feature_dim() const { return feature_dim_; }

  void ensure_classes(std::size_t num_classes) {
    if (num_classes <= b2_.size()) return;
    w2_.resize(num_classes * hidden_, 0.0);
    b2_.resize(num_classes, 0.0);
    m_w2_.resize(w2_.size(), 0.0);
    v_w2_.resize(w2_.size(), 0.0);
    m_b2_.resize(b2_.size(), 0.0);
    v_b2_.resize(b2_.size(), 0.0);
  }

  std::vector<double> predict(const std::vector<double>& features) const {
    const std::vector<double> h = hidden_activations(features);
    std::vector<double> scores(b2_.size());
    for (std::size_t c = 0; c < b2_.size(); ++c)
      scores[c] = detail::sigmoid(logit(c, h));
    return scores;
  }

  double batch_loss(const std::vector<LabeledExample>& input,
                    const std::vector<LabeledExample>& replay) const {
    if (input.empty()) throw ContractError("input batch must be non-empty");
    double loss = 0.0;
    std::size_t count = 0;
    for (const auto* batch : {&input, &replay}) {
      for (const LabeledExample& ex : *batch) {
        const std::vector<double> h = hidden_activations(ex.features);
        for (std::size_t c = 0; c < b2_.size(); ++c)
          loss += detail::bce_from_logit(logit(c, h),
                                         ex.label.test(static_cast<ClassId>(c)));
        ++count;
      }
    }
    return loss /
           (static_cast<double>(count) * static_cast<double>(b2_.size()));
  }

  double train_step(const std::vector<LabeledExample>& input,
                    const std::vector<LabeledExample>& replay, double lr) {
    if (input.empty()) throw ContractError("input batch must be non-empty");
    std::size_t max_classes = b2_.size();
    for (const auto* batch : {&input, &replay})
      for (const LabeledExample& ex : *batch)
        max_classes = std::max(max_classes, ex.label.size());
    ensure_classes(max_classes);

    std::vector<double> g_w1(w1_.size(), 0.0), g_b1(b1_.size(), 0.0);
    std::vector<double> g_w2(w2_.size(), 0.0), g_b2(b2_.size(), 0.0);
    double loss = 0.0;
    std::size_t count = 0;
    for (const auto* batch : {&input, &replay}) {
      for (const LabeledExample& ex : *batch) {
        const std::vector<double> h = hidden_activations(ex.features);
        std::vector<double> dh(hidden_, 0.0);
        for (std::size_t c = 0; c < b2_.size(); ++c) {
          const double z = logit(c, h);
          const bool y = ex.label.test(static_cast<ClassId>(c));
          loss += detail::bce_from_logit(z, y);
          const double dz = detail::sigmoid(z) - (y ? 1.0 : 0.0);
          g_b2[c] += dz;
          for (std::size_t u = 0; u < hidden_; ++u) {
            g_w2[c * hidden_ + u] += dz * h[u];
            dh[u] += dz * w2_[c * hidden_ + u];
          }
        }
        for (std::size_t u = 0; u < hidden_; ++u) {
          if (h[u] <= 0.0) continue;  // ReLU gate
          g_b1[u] += dh[u];
          for (std::size_t d = 0; d < feature_dim_; ++d)
            g_w1[u * feature_dim_ + d] += dh[u] * ex.features[d];
        }
        ++count;
      }
    }
    const double scale =
        1.0 / (static_cast<double>(count) * static_cast<double>(b2_.size()));
    loss *= scale;
    if (!std::isfinite(loss))
      throw DivergenceError("training loss is not finite");
    for (auto* g : {&g_w1, &g_b1, &g_w2, &g_b2})
      for (double& x : *g) x *= scale;

    ++step_;
    detail::adam_update(w1_, g_w1, m_w1_, v_w1_, step_, lr, adam_);
    detail::adam_update(b1_, g_b1, m_b1_, v_b1_, step_, lr, adam_);
    detail::adam_update(w2_, g_w2, m_w2_, v_w2_, step_, lr, adam_);
    detail::adam_update(b2_, g_b2, m_b2_, v_b2_, step_, lr, adam_);
    return loss;
  }

  std::vector<double> example_gradient(const LabeledExample& ex) const {
    const std::vector<double> h = hidden_activations(ex.features);
    std::vector<double> grad(w1_.size() + b1_.size() + w2_.size() + b2_.size(),
                             0.0);
    const double scale = 1.0 / static_cast<double>(b2_.size());
    std::vector<double> dh(hidden_, 0.0);
    double* g_w1 = grad.data();
    double* g_b1 = g_w1 + w1_.size();
    double* g_w2 = g_b1 + b1_.size();
    double* g_b2 = g_w2 + w2_.size();
    for (std::size_t c = 0; c < b2_.size(); ++c) {
      const double dz =
          scale * (detail::sigmoid(logit(c, h)) -
                   (ex.label.test(static_cast<ClassId>(c)) ? 1.0 : 0.0));
      g_b2[c] = dz;
      for (std::size_t u = 0; u < hidden_; ++u) {
        g_w2[c * hidden_ + u] = dz * h[u];
        dh[u] += dz * w2_[c * hidden_ + u];
      }
    }
    for (std::size_t u = 0; u < hidden_; ++u) {
      if (h[u] <= 0.0) continue;
      g_b1[u] = dh[u];
      for (std::size_t d = 0; d < feature_dim_; ++d)
        g_w1[u * feature_dim_ + d] = dh[u] * ex.features[d];
    }
    return grad;
  }

 private:
  std::vector<double> hidden_activations(
      const std::vector<double>& features) const {
    if (features.size() != feature_dim_)
      throw DimensionError("feature dimension mismatch");
    std::vector<double> h(hidden_);
    for (std::size_t u = 0; u < hidden_; ++u) {
      double z = b1_[u];
      const double* row = &w1_[u * feature_dim_];
      for (std::size_t d = 0; d < feature_dim_; ++d)
        z += row[d] * features[d];
      h[u] = z > 0.0 ? z : 0.0;
    }
    return h;
  }

  double logit(std::size_t c, const std::vector<double>& hidden) const {
    double z = b2_[c];
    const double* row = &w2_[c * hidden_];
    for (std::size_t u = 0; u < hidden_; ++u) z += row[u] * hidden[u];
    return z;
  }

  std::size_t feature_dim_;
  std::size_t hidden_;
  AdamParams adam_;
  std::vector<double> w1_, b1_, w2_, b2_;
  std::vector<double> m_w1_, v_w1_, m_b1_, v_b1_;
  std::vector<double> m_w2_, v_w2_, m_b2_, v_b2_;
  std::uint64_t step_ = 0;
};

}  // namespace prs
