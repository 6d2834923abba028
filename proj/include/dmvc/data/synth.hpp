#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "dmvc/data/dataset.hpp"
#include "dmvc/error.hpp"
#include "dmvc/random.hpp"

namespace dmvc::data {

struct SynthSpec {
  std::size_t clusters = 3;
  std::size_t n = 1500;
  std::size_t latent_dim = 2;  // J_true
  double separation = 5.0;
  std::vector<std::size_t> view_dims{20, 30};  // one entry per view
  double noise_std = 0.1;
  std::uint64_t seed = 0;
  std::string name = "synth";

  std::size_t views() const { return view_dims.size(); }

  void validate() const {
    if (clusters == 0 || n == 0 || latent_dim == 0 || view_dims.empty())
      throw ConfigError("synth: clusters, n, latent_dim and views must be positive");
    for (auto d : view_dims)
      if (d == 0) throw ConfigError("synth: view dimensions must be positive");
    if (!(separation >= 0.0) || !(noise_std >= 0.0)) throw ConfigError("synth: separation and noise_std must be >= 0");
  }

  nlohmann::json to_json() const {
    return {{"name", name},           {"clusters", clusters},   {"n", n},         {"latent_dim", latent_dim},
            {"separation", separation}, {"view_dims", view_dims}, {"noise_std", noise_std}, {"seed", seed}};
  }

  static SynthSpec from_json(const nlohmann::json& j) {
    SynthSpec s;
    try {
      s.name = j.value("name", s.name);
      s.clusters = j.value("clusters", s.clusters);
      s.n = j.value("n", s.n);
      s.latent_dim = j.value("latent_dim", s.latent_dim);
      s.separation = j.value("separation", s.separation);
      s.view_dims = j.value("view_dims", s.view_dims);
      s.noise_std = j.value("noise_std", s.noise_std);
      s.seed = j.value("seed", s.seed);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("synth spec: " + std::string(e.what()));
    }
    s.validate();
    return s;
  }
};

struct SynthData {
  MultiViewDataset dataset;
  Tensor latent;  // n x J_true
  Tensor means;   // K x J_true
};

/// Labels uniform over K; z ~ N(mean_c, I) with mean_c = c * separation along
/// the first latent axis; view v is x = z A_v + b_v + noise_std * N(0, I).
inline SynthData synth_generate(const SynthSpec& spec) {
  spec.validate();
  const std::size_t K = spec.clusters, J = spec.latent_dim, n = spec.n;
  auto rng = make_rng(spec.seed, RngStream::synth);
  std::normal_distribution<double> normal(0.0, 1.0);

  SynthData out;
  out.means = Tensor::zeros(K, J);
  for (std::size_t c = 0; c < K; ++c) out.means(c, 0) = static_cast<double>(c) * spec.separation;

  std::vector<std::size_t> labels(n);
  out.latent = Tensor::zeros(n, J);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = static_cast<std::size_t>(rng() % K);
    for (std::size_t j = 0; j < J; ++j) out.latent(i, j) = out.means(labels[i], j) + normal(rng);
  }

  auto& d = out.dataset;
  d.name = spec.name;
  d.clusters = K;
  d.likelihood = Likelihood::gaussian;
  for (std::size_t v = 0; v < spec.views(); ++v) {
    const std::size_t dv = spec.view_dims[v];
    Tensor a = Tensor::zeros(J, dv), b = Tensor::zeros(1, dv);
    for (auto& x : a.data()) x = normal(rng) / std::sqrt(static_cast<double>(J));
    for (auto& x : b.data()) x = normal(rng);
    Tensor x = Tensor::zeros(n, dv);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < dv; ++k) {
        double s = b[k];
        for (std::size_t j = 0; j < J; ++j) s += out.latent(i, j) * a(j, k);
        x(i, k) = s + spec.noise_std * normal(rng);
      }
    d.view_names.push_back("view" + std::to_string(v));
    d.views.push_back(std::move(x));
  }
  d.labels = std::move(labels);
  return out;
}

}  // namespace dmvc::data
