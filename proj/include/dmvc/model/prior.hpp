#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "dmvc/error.hpp"
#include "dmvc/numgrad/tensor.hpp"

namespace dmvc::model {

using ng::Tensor;

inline constexpr double kLogVarianceMin = -15.0;
inline constexpr double kLogVarianceMax = 15.0;
/// Lower bound applied to each responsibility before renormalizing.
inline constexpr double kResponsibilityFloor = 1e-10;
/// Bernoulli means are clamped to [kProbabilityClamp, 1 - kProbabilityClamp].
inline constexpr double kProbabilityClamp = 1e-10;

inline double clamp_log_variance(double v) { return std::clamp(v, kLogVarianceMin, kLogVarianceMax); }

inline double log_sum_exp(std::span<const double> x) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : x) mx = std::max(mx, v);
  double s = 0.0;
  for (double v : x) s += std::exp(v - mx);
  return mx + std::log(s);
}

inline std::vector<double> softmax(std::span<const double> logits) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logits) mx = std::max(mx, v);
  std::vector<double> out(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) s += out[i] = std::exp(logits[i] - mx);
  for (auto& v : out) v /= s;
  return out;
}

/// View weights w = softmax(logits); non-negative and summing to one for any logits.
struct FusionWeights {
  std::vector<double> logits;

  static FusionWeights uniform(std::size_t views) { return {std::vector<double>(views, 0.0)}; }
  std::vector<double> weights() const { return softmax(logits); }
  std::size_t views() const { return logits.size(); }
};

/// Gaussian-mixture latent prior, stored in the unconstrained form it is trained in.
struct GmmPrior {
  std::vector<double> pi_logits;  // K
  Tensor means;                   // K x J
  Tensor log_variances;           // K x J

  std::size_t clusters() const { return pi_logits.size(); }
  std::size_t latent_dim() const { return means.cols(); }

  std::vector<double> weights() const { return softmax(pi_logits); }
  double variance(std::size_t c, std::size_t j) const { return std::exp(clamp_log_variance(log_variances(c, j))); }

  void validate() const {
    if (pi_logits.empty()) throw ConfigError("GMM prior needs at least one component");
    if (means.rows() != clusters() || log_variances.rows() != clusters() ||
        log_variances.cols() != means.cols())
      throw ConfigError("GMM prior parameter shapes disagree");
  }
};

/// Diagonal Gaussian posterior for a batch: one row per sample.
struct LatentPosterior {
  Tensor mean;      // B x J
  Tensor variance;  // B x J, strictly positive
};

/// log pi_c + log N(z | mu_c, sigma_c^2 I) for every component.
inline std::vector<double> log_joint_components(std::span<const double> z, const GmmPrior& prior) {
  const auto J = prior.latent_dim();
  if (z.size() != J)
    throw UsageError("latent vector has " + std::to_string(z.size()) + " entries, prior expects " +
                     std::to_string(J));
  const double lse = log_sum_exp(prior.pi_logits);
  std::vector<double> out(prior.clusters());
  for (std::size_t c = 0; c < prior.clusters(); ++c) {
    double acc = prior.pi_logits[c] - lse;
    for (std::size_t j = 0; j < J; ++j) {
      const double lv = clamp_log_variance(prior.log_variances(c, j));
      const double d = z[j] - prior.means(c, j);
      acc -= 0.5 * (std::log(2.0 * std::numbers::pi) + lv + d * d / std::exp(lv));
    }
    out[c] = acc;
  }
  return out;
}

/// Posterior cluster probabilities p(c | z), computed in log space. Each entry
/// is floored at kResponsibilityFloor and the vector renormalized.
inline std::vector<double> responsibilities(std::span<const double> z, const GmmPrior& prior) {
  auto logp = log_joint_components(z, prior);
  const double lse = log_sum_exp(logp);
  double total = 0.0;
  for (auto& v : logp) {
    v = std::max(std::exp(v - lse), kResponsibilityFloor);
    total += v;
  }
  for (auto& v : logp) v /= total;
  return logp;
}

/// Smallest index among the maxima.
inline std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

/// Weighted combination of per-view posteriors: mean = sum_v w_v mean_v and
/// variance = sum_v w_v variance_v, elementwise.
inline LatentPosterior fuse_posteriors(std::span<const LatentPosterior> per_view, const FusionWeights& fusion) {
  if (per_view.size() != fusion.views())
    throw UsageError("fusion expects " + std::to_string(fusion.views()) + " views, got " +
                     std::to_string(per_view.size()));
  const auto w = fusion.weights();
  const auto& first = per_view.front();
  LatentPosterior out{Tensor(first.mean.shape()), Tensor(first.variance.shape())};
  for (std::size_t v = 0; v < per_view.size(); ++v) {
    const auto& p = per_view[v];
    if (p.mean.shape() != first.mean.shape() || p.variance.shape() != first.mean.shape())
      throw UsageError("view " + std::to_string(v) + " posterior has a different shape");
    for (std::size_t k = 0; k < out.mean.size(); ++k) {
      if (!(p.variance[k] > 0.0)) throw UsageError("view " + std::to_string(v) + " has a non-positive variance");
      out.mean[k] += w[v] * p.mean[k];
      out.variance[k] += w[v] * p.variance[k];
    }
  }
  return out;
}

/// Reparameterized draw z = mean + sqrt(variance) * noise.
inline Tensor sample_latent(const LatentPosterior& post, const Tensor& noise) {
  if (noise.size() != post.mean.size()) throw UsageError("noise shape does not match the posterior");
  Tensor z(post.mean.shape());
  for (std::size_t k = 0; k < z.size(); ++k) z[k] = post.mean[k] + std::sqrt(post.variance[k]) * noise[k];
  return z;
}

}  // namespace dmvc::model
