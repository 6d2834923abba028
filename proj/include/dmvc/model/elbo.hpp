#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "dmvc/error.hpp"
#include "dmvc/model/model.hpp"
#include "dmvc/model/networks.hpp"
#include "dmvc/numgrad/graph.hpp"

namespace dmvc::model {

/// Batch means of the four ELBO terms.
struct ElboTerms {
  double reconstruction = 0.0;     // summed over views and features, averaged over MC draws
  double prior_cross = 0.0;        // -1/2 sum_c gamma_c sum_j (log s_c^2 + s~^2/s_c^2 + (m~ - m_c)^2/s_c^2)
  double cluster_term = 0.0;       // sum_c gamma_c log(pi_c / gamma_c)
  double posterior_entropy = 0.0;  // 1/2 sum_j (1 + log s~^2)
  double total = 0.0;

  double non_reconstruction() const { return prior_cross + cluster_term + posterior_entropy; }
};

/// Graph handles for one ELBO evaluation.
struct ElboGraph {
  Var elbo;  // 1x1 batch mean
  Var loss;  // -elbo
  Var fused_mean;
  Var fused_log_variance;
  Var z;      // first MC draw
  Var gamma;  // B x K, from the first draw
  Var reconstruction, prior_cross, cluster_term, posterior_entropy;  // B x 1 each

  ElboTerms terms() const {
    auto m = [](Var v) {
      double s = 0.0;
      for (double x : v.value().data()) s += x;
      return s / static_cast<double>(v.value().size());
    };
    return {m(reconstruction), m(prior_cross), m(cluster_term), m(posterior_entropy), elbo.value().item()};
  }
};

namespace detail {

inline void check_elbo_inputs(const Model& model, std::span<const Tensor> views, std::span<const Tensor> noise) {
  if (views.size() != model.views())
    throw UsageError("ELBO needs all " + std::to_string(model.views()) + " views, got " +
                     std::to_string(views.size()));
  if (noise.empty()) throw UsageError("ELBO needs at least one noise draw (L >= 1)");
  const std::size_t batch = views[0].rows();
  for (const auto& e : noise)
    if (e.rows() != batch || e.cols() != model.latent_dim())
      throw UsageError("noise draws must be batch x latent_dim");
  for (std::size_t v = 0; v < views.size(); ++v) {
    if (views[v].rows() != batch) throw UsageError("views disagree on the batch size");
    if (model.descriptor().likelihoods[v] == Likelihood::bernoulli) {
      for (double x : views[v].data())
        if (!(x >= 0.0 && x <= 1.0))
          throw UsageError("bernoulli view " + std::to_string(v) + " has data outside [0,1]");
    }
  }
}

}  // namespace detail

/// Builds the per-sample-mean ELBO for a batch.
///
/// Per view, the encoder yields (mean_v, log var_v); the fused posterior is
/// mean = sum_v w_v mean_v, var = sum_v w_v var_v. Each of the L noise draws
/// gives z = mean + sqrt(var) * eps, decoded per view for the reconstruction
/// term (averaged over draws). Responsibilities are p(c | z) at the first draw.
inline ElboGraph build_elbo(Graph& g, const Model& model, std::span<const Tensor> views,
                            std::span<const Tensor> noise) {
  detail::check_elbo_inputs(model, views, noise);
  const auto& desc = model.descriptor();
  const std::size_t m = model.views();

  Var w = g.softmax_rows(g.param(kFusionLogits));
  std::vector<Var> inputs;
  Var fused_mean, fused_var;
  for (std::size_t v = 0; v < m; ++v) {
    inputs.push_back(g.input("x" + std::to_string(v), views[v]));
    auto enc = encode_view(g, inputs[v], model.encoder(v));
    Var wv = g.slice_cols(w, v, v + 1);
    Var mean_part = wv * enc.mean;
    Var var_part = wv * exp(enc.log_variance);
    fused_mean = v == 0 ? mean_part : fused_mean + mean_part;
    fused_var = v == 0 ? var_part : fused_var + var_part;
  }
  Var fused_log_var = log(fused_var);
  Var fused_std = exp(0.5 * fused_log_var);

  ElboGraph out;
  out.fused_mean = fused_mean;
  out.fused_log_variance = fused_log_var;

  const double log_two_pi = std::log(2.0 * std::numbers::pi);
  Var recon;
  for (std::size_t l = 0; l < noise.size(); ++l) {
    Var eps = g.input("noise" + std::to_string(l), noise[l]);
    Var z = fused_mean + fused_std * eps;
    if (l == 0) out.z = z;
    for (std::size_t v = 0; v < m; ++v) {
      const auto dec = model.decoder(v);
      Var x = inputs[v];
      Var per_sample;
      if (desc.likelihoods[v] == Likelihood::bernoulli) {
        Var mu = decode_bernoulli(g, z, dec);
        Var one_minus_x = g.constant(Tensor(views[v].shape(), 1.0)) - x;
        per_sample = sum_rows(x * log(mu) + one_minus_x * log(-mu + 1.0));
      } else {
        auto heads = decode_gaussian(g, z, dec);
        Var sq = square(x - heads.mean) / exp(heads.log_variance);
        per_sample = -0.5 * sum_rows(heads.log_variance + sq + log_two_pi);
      }
      recon = (l == 0 && v == 0) ? per_sample : recon + per_sample;
    }
  }
  if (noise.size() > 1) recon = recon * (1.0 / static_cast<double>(noise.size()));

  const auto prior = prior_vars(g);
  Var gamma = responsibilities(g, out.z, prior);
  out.gamma = gamma;

  // -1/2 sum_c gamma_c sum_j (log s_c^2 + s~^2 / s_c^2 + (m~ - m_c)^2 / s_c^2)
  std::vector<Var> per_component;
  for (std::size_t c = 0; c < model.clusters(); ++c) {
    Var mu_c = g.slice_rows(prior.means, c, c + 1);
    Var lv_c = g.slice_rows(prior.log_variances, c, c + 1);
    Var var_c = g.slice_rows(prior.variances, c, c + 1);
    per_component.push_back(sum_rows(lv_c + fused_var / var_c + square(fused_mean - mu_c) / var_c));
  }
  Var prior_cross = -0.5 * sum_rows(gamma * g.concat_cols(per_component));
  Var cluster_term = sum_rows(gamma * (prior.log_pi - log(gamma)));
  Var entropy = 0.5 * sum_rows(fused_log_var + 1.0);

  out.reconstruction = recon;
  out.prior_cross = prior_cross;
  out.cluster_term = cluster_term;
  out.posterior_entropy = entropy;
  out.elbo = mean(recon + prior_cross + cluster_term + entropy);
  out.loss = -out.elbo;
  return out;
}

struct ElboResult {
  double value = 0.0;
  ElboTerms terms;
};

/// Evaluates the ELBO; with `accumulate_gradients`, adds d(-ELBO)/d(param)
/// into the model's gradient accumulators.
inline ElboResult evaluate_elbo(Model& model, std::span<const Tensor> views, std::span<const Tensor> noise,
                                bool accumulate_gradients = false) {
  Graph g(&model.params());
  auto e = build_elbo(g, model, views, noise);
  if (accumulate_gradients) g.backward(e.loss);
  return {e.elbo.value().item(), e.terms()};
}

/// ELBO for models whose every view is bernoulli; data must lie in [0,1].
inline ElboResult elbo_bernoulli(Model& model, std::span<const Tensor> views, std::span<const Tensor> noise,
                                 bool accumulate_gradients = false) {
  for (auto k : model.descriptor().likelihoods)
    if (k != Likelihood::bernoulli) throw UsageError("elbo_bernoulli needs bernoulli decoders on every view");
  return evaluate_elbo(model, views, noise, accumulate_gradients);
}

/// ELBO for models whose every view is gaussian.
inline ElboResult elbo_gaussian(Model& model, std::span<const Tensor> views, std::span<const Tensor> noise,
                                bool accumulate_gradients = false) {
  for (auto k : model.descriptor().likelihoods)
    if (k != Likelihood::gaussian) throw UsageError("elbo_gaussian needs gaussian decoders on every view");
  return evaluate_elbo(model, views, noise, accumulate_gradients);
}

}  // namespace dmvc::model
