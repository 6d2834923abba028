#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dmvc/error.hpp"
#include "dmvc/likelihood.hpp"
#include "dmvc/model/descriptor.hpp"
#include "dmvc/model/prior.hpp"
#include "dmvc/numgrad/graph.hpp"

namespace dmvc::model {

using ng::Graph;
using ng::Var;

/// Parameter names and extents of one fully-connected layer.
struct Layer {
  std::string weight;
  std::string bias;
  std::size_t in = 0;
  std::size_t out = 0;

  Var apply(Graph& g, Var x) const { return g.affine(x, g.param(weight), g.param(bias)); }
};

inline Layer make_layer(const std::string& prefix, std::size_t in, std::size_t out) {
  return {prefix + ".weight", prefix + ".bias", in, out};
}

inline std::string view_prefix(std::size_t v) { return "view" + std::to_string(v); }

/// Inference network of one view: relu hidden stack, then linear mean and
/// log-variance heads of width J each.
struct ViewEncoder {
  std::size_t view = 0;
  std::size_t input_dim = 0;
  std::size_t latent_dim = 0;
  std::vector<Layer> hidden;
  Layer mean_head;
  Layer log_variance_head;

  struct Output {
    Var mean;
    Var log_variance;  // clamped to [kLogVarianceMin, kLogVarianceMax]
  };

  static ViewEncoder make(const ModelDescriptor& d, std::size_t v) {
    ViewEncoder e;
    e.view = v;
    e.input_dim = d.view_dims.at(v);
    e.latent_dim = d.latent_dim;
    const auto prefix = view_prefix(v) + ".enc";
    std::size_t width = e.input_dim;
    for (std::size_t i = 0; i < d.encoder_hidden.size(); ++i) {
      e.hidden.push_back(make_layer(prefix + ".hidden" + std::to_string(i), width, d.encoder_hidden[i]));
      width = d.encoder_hidden[i];
    }
    e.mean_head = make_layer(prefix + ".mean", width, d.latent_dim);
    e.log_variance_head = make_layer(prefix + ".logvar", width, d.latent_dim);
    return e;
  }

  std::vector<Layer> layers() const {
    auto all = hidden;
    all.push_back(mean_head);
    all.push_back(log_variance_head);
    return all;
  }

  Var trunk(Graph& g, Var x) const {
    if (x.cols() != input_dim)
      throw UsageError("encoder of view " + std::to_string(view) + " expects " + std::to_string(input_dim) +
                       " features, got " + std::to_string(x.cols()));
    Var h = x;
    for (const auto& layer : hidden) h = relu(layer.apply(g, h));
    return h;
  }
};

inline ViewEncoder::Output encode_view(Graph& g, Var x, const ViewEncoder& enc) {
  Var h = enc.trunk(g, x);
  return {enc.mean_head.apply(g, h),
          g.clamp(enc.log_variance_head.apply(g, h), kLogVarianceMin, kLogVarianceMax)};
}

/// Generative network of one view: relu hidden stack and a likelihood head
/// (sigmoid mean for bernoulli; linear mean plus log-variance for gaussian).
struct ViewDecoder {
  std::size_t view = 0;
  std::size_t output_dim = 0;
  std::size_t latent_dim = 0;
  Likelihood kind = Likelihood::gaussian;
  std::vector<Layer> hidden;
  Layer mean_head;
  Layer log_variance_head;  // gaussian only

  static ViewDecoder make(const ModelDescriptor& d, std::size_t v) {
    ViewDecoder dec;
    dec.view = v;
    dec.output_dim = d.view_dims.at(v);
    dec.latent_dim = d.latent_dim;
    dec.kind = d.likelihoods.at(v);
    const auto prefix = view_prefix(v) + ".dec";
    std::size_t width = d.latent_dim;
    for (std::size_t i = 0; i < d.decoder_hidden.size(); ++i) {
      dec.hidden.push_back(make_layer(prefix + ".hidden" + std::to_string(i), width, d.decoder_hidden[i]));
      width = d.decoder_hidden[i];
    }
    dec.mean_head = make_layer(prefix + ".mean", width, dec.output_dim);
    if (dec.kind == Likelihood::gaussian)
      dec.log_variance_head = make_layer(prefix + ".logvar", width, dec.output_dim);
    return dec;
  }

  std::vector<Layer> layers() const {
    auto all = hidden;
    all.push_back(mean_head);
    if (kind == Likelihood::gaussian) all.push_back(log_variance_head);
    return all;
  }

  Var trunk(Graph& g, Var z) const {
    if (z.cols() != latent_dim)
      throw UsageError("decoder of view " + std::to_string(view) + " expects latent width " +
                       std::to_string(latent_dim) + ", got " + std::to_string(z.cols()));
    Var h = z;
    for (const auto& layer : hidden) h = relu(layer.apply(g, h));
    return h;
  }
};

/// Bernoulli means in [kProbabilityClamp, 1 - kProbabilityClamp].
inline Var decode_bernoulli(Graph& g, Var z, const ViewDecoder& dec) {
  if (dec.kind != Likelihood::bernoulli)
    throw UsageError("decoder of view " + std::to_string(dec.view) + " is not bernoulli");
  return g.clamp(sigmoid(dec.mean_head.apply(g, dec.trunk(g, z))), kProbabilityClamp, 1.0 - kProbabilityClamp);
}

struct GaussianHeads {
  Var mean;
  Var log_variance;  // clamped to [kLogVarianceMin, kLogVarianceMax]
};

inline GaussianHeads decode_gaussian(Graph& g, Var z, const ViewDecoder& dec) {
  if (dec.kind != Likelihood::gaussian)
    throw UsageError("decoder of view " + std::to_string(dec.view) + " is not gaussian");
  Var h = dec.trunk(g, z);
  return {dec.mean_head.apply(g, h),
          g.clamp(dec.log_variance_head.apply(g, h), kLogVarianceMin, kLogVarianceMax)};
}

/// Decoder mean output regardless of likelihood kind.
inline Var decode_mean(Graph& g, Var z, const ViewDecoder& dec) {
  return dec.kind == Likelihood::bernoulli ? decode_bernoulli(g, z, dec) : decode_gaussian(g, z, dec).mean;
}

inline const std::string kFusionLogits = "fusion.logits";
inline const std::string kPiLogits = "gmm.pi_logits";
inline const std::string kGmmMeans = "gmm.means";
inline const std::string kGmmLogVariances = "gmm.log_variances";

/// Graph handles for the prior's derived quantities.
struct PriorVars {
  Var log_pi;         // 1 x K
  Var means;          // K x J
  Var log_variances;  // K x J, clamped
  Var variances;      // K x J
};

inline PriorVars prior_vars(Graph& g) {
  PriorVars p;
  p.log_pi = g.log_softmax_rows(g.param(kPiLogits));
  p.means = g.param(kGmmMeans);
  p.log_variances = g.clamp(g.param(kGmmLogVariances), kLogVarianceMin, kLogVarianceMax);
  p.variances = exp(p.log_variances);
  return p;
}

/// Per-sample log pi_c + log N(z | mu_c, sigma_c^2 I): B x K.
inline Var log_joint_components(Graph& g, Var z, const PriorVars& prior) {
  const std::size_t K = prior.means.rows();
  const double log_two_pi = std::log(2.0 * std::numbers::pi);
  std::vector<Var> columns;
  columns.reserve(K);
  for (std::size_t c = 0; c < K; ++c) {
    Var mu = g.slice_rows(prior.means, c, c + 1);
    Var lv = g.slice_rows(prior.log_variances, c, c + 1);
    Var var = g.slice_rows(prior.variances, c, c + 1);
    Var quad = sum_rows(square(z - mu) / var + lv) + log_two_pi * static_cast<double>(z.cols());
    columns.push_back(g.slice_cols(prior.log_pi, c, c + 1) - 0.5 * quad);
  }
  return g.concat_cols(columns);
}

/// Floored and renormalized p(c | z) per sample: B x K.
inline Var responsibilities(Graph& g, Var z, const PriorVars& prior) {
  Var gamma = g.softmax_rows(log_joint_components(g, z, prior));
  gamma = g.floor_at(gamma, kResponsibilityFloor);
  return gamma / sum_rows(gamma);
}

}  // namespace dmvc::model
