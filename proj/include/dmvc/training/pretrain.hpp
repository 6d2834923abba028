#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "dmvc/data/dataset.hpp"
#include "dmvc/error.hpp"
#include "dmvc/model/model.hpp"
#include "dmvc/model/networks.hpp"
#include "dmvc/numgrad/adam.hpp"
#include "dmvc/numgrad/graph.hpp"
#include "dmvc/random.hpp"
#include "dmvc/training/config.hpp"

namespace dmvc::training {

using model::Layer;
using model::Model;
using ng::Graph;
using ng::ParamStore;
using ng::Var;

/// Mean per-epoch squared reconstruction error, per view.
struct PretrainReport {
  std::vector<std::vector<std::vector<double>>> layer_losses;  // [view][layer][epoch]
  std::vector<double> finetune_losses;                         // [epoch], summed over views
};

namespace detail {

/// Copies the named layers' current values out of the model.
inline ParamStore sub_store(const ParamStore& from, const std::vector<Layer>& layers) {
  ParamStore s;
  for (const auto& l : layers) {
    s.add(l.weight, from.value(l.weight));
    s.add(l.bias, from.value(l.bias));
  }
  return s;
}

inline void write_back(ParamStore& to, const ParamStore& from, const std::vector<Layer>& layers) {
  for (const auto& l : layers) {
    to.set_value(l.weight, from.value(l.weight));
    to.set_value(l.bias, from.value(l.bias));
  }
}

inline Tensor glorot(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> u(-limit, limit);
  Tensor t({in, out});
  for (auto& v : t.data()) v = u(rng);
  return t;
}

/// Mean over the batch of the per-sample squared error.
inline Var squared_error(Graph& g, Var x, Var reconstruction) {
  return g.mean(g.sum_rows(ng::square(x - reconstruction)));
}

/// Runs `epochs` of minibatch Adam on `store`; `loss_of(g, batches, rng)` builds
/// the loss from one row-aligned batch per input matrix.
template <typename LossFn>
std::vector<double> fit(ParamStore& store, const std::vector<const Tensor*>& xs, const TrainConfig& cfg,
                        std::uint64_t view, std::uint64_t stage, std::size_t epochs, const std::string& what,
                        LossFn loss_of) {
  std::vector<double> history;
  const ng::AdamOptions opt{.learning_rate = cfg.pretrain_learning_rate};
  const std::size_t n = xs.front()->rows();
  for (std::size_t e = 0; e < epochs; ++e) {
    auto rng = make_rng(cfg.seed, RngStream::pretrain, {view, stage, e});
    double total = 0.0;
    for (const auto& idx : data::shuffled_batches(n, cfg.pretrain_batch_size, rng)) {
      Graph g(&store);
      std::vector<Var> batch;
      for (std::size_t i = 0; i < xs.size(); ++i)
        batch.push_back(g.input("x" + std::to_string(i), ng::gather_rows(*xs[i], idx)));
      Var loss;
      try {
        loss = loss_of(g, batch, rng);
      } catch (const NumericError& err) {
        throw NumericError(what + ", epoch " + std::to_string(e) + ": " + err.what());
      }
      if (!std::isfinite(loss.value().item()))
        throw NumericError(what + ", epoch " + std::to_string(e) + ": non-finite reconstruction loss");
      total += loss.value().item() * static_cast<double>(idx.size());
      store.zero_grads();
      g.backward(loss);
      ng::adam_step(store, opt);
    }
    history.push_back(total / static_cast<double>(n));
  }
  return history;
}

}  // namespace detail

/// Greedy layer-wise pretraining of every view's encoder (hidden layers and
/// mean head), each paired with a temporary linear layer of transposed shape
/// that reconstructs the layer's input. Then all encoder and decoder mean
/// paths are fine-tuned together, every decoder reading the uniformly fused
/// code plus unit gaussian noise (the posterior that zeroed log-variance heads
/// give), so the views share one latent coordinate system. Squared error
/// throughout. Log-variance heads are reset to zero; fusion and GMM
/// parameters are untouched.
inline PretrainReport pretrain_autoencoders(Model& m, const data::MultiViewDataset& d, const TrainConfig& cfg) {
  if (d.num_views() != m.views()) throw UsageError("dataset and model disagree on the number of views");
  PretrainReport report;
  auto& params = m.params();
  const std::size_t views = m.views();
  for (std::size_t v = 0; v < views; ++v) {
    const auto enc = m.encoder(v);
    const std::string where = "pretraining " + m.descriptor().view_name(v);

    auto layers = enc.hidden;
    layers.push_back(enc.mean_head);
    report.layer_losses.emplace_back();
    Tensor h = d.views[v];
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const Layer& layer = layers[l];
      const bool is_head = l + 1 == layers.size();
      ParamStore store = detail::sub_store(params, {layer});
      auto init_rng = make_rng(cfg.seed, RngStream::pretrain, {v, 1000 + l});
      const Layer back{"pretrain.back.weight", "pretrain.back.bias", layer.out, layer.in};
      store.add(back.weight, detail::glorot(layer.out, layer.in, init_rng));
      store.add(back.bias, Tensor::zeros(1, layer.in));

      report.layer_losses.back().push_back(detail::fit(
          store, {&h}, cfg, v, l, cfg.pretrain_layer_epochs, where + " layer " + std::to_string(l),
          [&](Graph& g, const std::vector<Var>& x, std::mt19937_64&) {
            Var code = layer.apply(g, x[0]);
            if (!is_head) code = ng::relu(code);
            return detail::squared_error(g, x[0], back.apply(g, code));
          }));
      detail::write_back(params, store, {layer});

      Graph g(&std::as_const(params));
      Var out = layer.apply(g, g.input("h", h));
      h = is_head ? out.value() : ng::relu(out).value();
    }
  }

  std::vector<Layer> path;
  std::vector<const Tensor*> xs;
  for (std::size_t v = 0; v < views; ++v) {
    const auto enc = m.encoder(v);
    const auto dec = m.decoder(v);
    path.insert(path.end(), enc.hidden.begin(), enc.hidden.end());
    path.push_back(enc.mean_head);
    path.insert(path.end(), dec.hidden.begin(), dec.hidden.end());
    path.push_back(dec.mean_head);
    xs.push_back(&d.views[v]);
  }
  ParamStore store = detail::sub_store(params, path);
  const double w = 1.0 / static_cast<double>(views);
  report.finetune_losses =
      detail::fit(store, xs, cfg, views, 999, cfg.finetune_epochs, "pretraining fine-tuning",
                  [&](Graph& g, const std::vector<Var>& x, std::mt19937_64& rng) {
                    Var z = w * m.encoder(0).mean_head.apply(g, m.encoder(0).trunk(g, x[0]));
                    for (std::size_t v = 1; v < views; ++v)
                      z = z + w * m.encoder(v).mean_head.apply(g, m.encoder(v).trunk(g, x[v]));
                    Tensor eps(z.value().shape());
                    std::normal_distribution<double> normal(0.0, 1.0);
                    for (auto& e : eps.data()) e = normal(rng);
                    z = z + g.input("eps", std::move(eps));
                    Var loss;
                    for (std::size_t v = 0; v < views; ++v) {
                      const auto dec = m.decoder(v);
                      Var out = dec.mean_head.apply(g, dec.trunk(g, z));
                      if (dec.kind == Likelihood::bernoulli)
                        out = g.clamp(ng::sigmoid(out), model::kProbabilityClamp, 1.0 - model::kProbabilityClamp);
                      Var term = detail::squared_error(g, x[v], out);
                      loss = v == 0 ? term : loss + term;
                    }
                    return loss;
                  });
  detail::write_back(params, store, path);

  for (std::size_t v = 0; v < views; ++v) {
    const auto enc = m.encoder(v);
    const auto dec = m.decoder(v);
    params.set_value(enc.log_variance_head.weight, Tensor::zeros(enc.log_variance_head.in, enc.log_variance_head.out));
    params.set_value(enc.log_variance_head.bias, Tensor::zeros(1, enc.log_variance_head.out));
    if (dec.kind == Likelihood::gaussian) {
      params.set_value(dec.log_variance_head.weight, Tensor::zeros(dec.log_variance_head.in, dec.log_variance_head.out));
      params.set_value(dec.log_variance_head.bias, Tensor::zeros(1, dec.log_variance_head.out));
    }
  }
  return report;
}

}  // namespace dmvc::training
