#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dmvc/data/dataset.hpp"
#include "dmvc/error.hpp"
#include "dmvc/model/elbo.hpp"
#include "dmvc/model/model.hpp"
#include "dmvc/numgrad/adam.hpp"
#include "dmvc/random.hpp"
#include "dmvc/training/config.hpp"
#include "dmvc/training/kmeans.hpp"
#include "dmvc/training/pretrain.hpp"

namespace dmvc::training {

inline constexpr double kGmmVarianceFloor = 1e-4;

inline model::ModelDescriptor make_descriptor(const data::MultiViewDataset& d, const TrainConfig& cfg) {
  model::ModelDescriptor desc;
  desc.view_names = d.view_names;
  desc.view_dims = d.dims();
  desc.likelihoods.assign(d.num_views(), cfg.likelihood);
  desc.latent_dim = cfg.latent_dim;
  desc.clusters = cfg.clusters;
  desc.encoder_hidden = cfg.encoder_hidden;
  desc.decoder_hidden = cfg.decoder_hidden;
  return desc;
}

/// Resets fusion and mixture weights to uniform, clusters the fused posterior
/// means with k-means and sets mu_c to the centroids and sigma_c^2 to the
/// per-dimension within-cluster variance (floored; clusters with fewer than
/// two members take the global variance).
inline model::GmmPrior init_gmm(Model& m, const data::MultiViewDataset& d, std::uint64_t seed,
                                const KMeansOptions& opt = {}) {
  m.set_fusion(model::FusionWeights::uniform(m.views()));
  const Tensor z = m.embed(d.views);
  const std::size_t K = m.clusters(), J = m.latent_dim(), n = z.rows();
  const auto km = kmeans(z, K, seed, opt);

  std::vector<double> global_mean(J, 0.0), global_var(J, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < J; ++j) global_mean[j] += z(i, j) / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < J; ++j) global_var[j] += std::pow(z(i, j) - global_mean[j], 2) / static_cast<double>(n);

  std::vector<std::size_t> counts(K, 0);
  Tensor var({K, J});
  for (std::size_t i = 0; i < n; ++i) {
    ++counts[km.labels[i]];
    for (std::size_t j = 0; j < J; ++j) var(km.labels[i], j) += std::pow(z(i, j) - km.centroids(km.labels[i], j), 2);
  }
  model::GmmPrior p;
  p.pi_logits.assign(K, 0.0);
  p.means = km.centroids;
  p.log_variances = Tensor({K, J});
  for (std::size_t c = 0; c < K; ++c)
    for (std::size_t j = 0; j < J; ++j) {
      const double v = counts[c] < 2 ? global_var[j] : var(c, j) / static_cast<double>(counts[c]);
      p.log_variances(c, j) = std::log(std::max(v, kGmmVarianceFloor));
    }
  m.set_prior(p);
  return p;
}

struct EpochRecord {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double elbo = 0.0;  // mean over the epoch's samples, evaluated before each step
  model::ElboTerms terms;
};

/// Joint ELBO ascent with Adam. Owns its model; every random draw is a pure
/// function of (seed, epoch, batch), so resuming a checkpoint continues the
/// exact trajectory of an uninterrupted run.
class Trainer {
 public:
  Trainer(const data::MultiViewDataset& d, TrainConfig cfg)
      : data_(&d), cfg_(std::move(cfg)), model_((cfg_.validate(), make_descriptor(d, cfg_)), cfg_.seed) {}

  Trainer(const data::MultiViewDataset& d, TrainConfig cfg, Model m)
      : data_(&d), cfg_(std::move(cfg)), model_(std::move(m)) {
    cfg_.validate();
    if (model_.descriptor().view_dims != d.dims()) throw UsageError("model view dimensions do not match the dataset");
  }

  Model& model() { return model_; }
  const Model& model() const { return model_; }
  const TrainConfig& config() const { return cfg_; }
  std::size_t epoch() const { return epoch_; }
  const std::vector<double>& history() const { return history_; }

  PretrainReport pretrain() { return pretrain_autoencoders(model_, *data_, cfg_); }

  model::GmmPrior initialize_prior() {
    auto p = init_gmm(model_, *data_, cfg_.seed);
    model_.params().reset_optimizer();
    return p;
  }

  EpochRecord run_epoch() {
    const std::size_t n = data_->size();
    const std::size_t J = model_.latent_dim();
    EpochRecord rec;
    rec.epoch = epoch_;
    rec.learning_rate = cfg_.learning_rate_at(epoch_);
    const ng::AdamOptions opt{.learning_rate = rec.learning_rate};
    const auto batches = data::batch_iter(n, cfg_.batch_size, cfg_.seed, epoch_);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& idx = batches[b];
      const auto views = data_->batch(idx);
      auto rng = make_rng(cfg_.seed, RngStream::noise, {epoch_, b});
      std::normal_distribution<double> normal(0.0, 1.0);
      std::vector<Tensor> noise;
      for (std::size_t l = 0; l < cfg_.mc_samples; ++l) {
        Tensor e({idx.size(), J});
        for (auto& x : e.data()) x = normal(rng);
        noise.push_back(std::move(e));
      }
      model_.params().zero_grads();
      model::ElboResult r;
      try {
        r = model::evaluate_elbo(model_, views, noise, true);
        if (!std::isfinite(r.value)) throw NumericError("ELBO is not finite");
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch_) + ", batch " + std::to_string(b) + ": " + e.what() +
                           "; " + norm_report());
      }
      ng::adam_step(model_.params(), opt);
      const double w = static_cast<double>(idx.size()) / static_cast<double>(n);
      rec.elbo += w * r.value;
      rec.terms.reconstruction += w * r.terms.reconstruction;
      rec.terms.prior_cross += w * r.terms.prior_cross;
      rec.terms.cluster_term += w * r.terms.cluster_term;
      rec.terms.posterior_entropy += w * r.terms.posterior_entropy;
    }
    rec.terms.total = rec.elbo;
    history_.push_back(rec.elbo);
    ++epoch_;
    return rec;
  }

  /// Runs epochs until `config().epochs`; writes a checkpoint every
  /// `checkpoint_every` epochs when a directory is given.
  void run(const std::function<void(const EpochRecord&)>& on_epoch = {},
           const std::filesystem::path& checkpoint_dir = {}) {
    while (epoch_ < cfg_.epochs) {
      const auto rec = run_epoch();
      if (on_epoch) on_epoch(rec);
      if (!checkpoint_dir.empty() && cfg_.checkpoint_every > 0 && epoch_ % cfg_.checkpoint_every == 0)
        save_checkpoint(checkpoint_dir);
    }
  }

  /// model.json + params.bin (with Adam moments and step) + state.json.
  void save_checkpoint(const std::filesystem::path& dir) const {
    model_.save(dir, true);
    nlohmann::json state{{"format", "dmvc-checkpoint"},
                         {"version", 1},
                         {"epoch", epoch_},
                         {"elbo_history", history_},
                         {"config", cfg_.to_json()}};
    std::ofstream os(dir / "state.json");
    if (!os) throw LoadError("cannot write " + (dir / "state.json").string());
    os << state.dump(2) << '\n';
  }

  /// Rebuilds a trainer from a checkpoint; the caller supplies the same dataset.
  static Trainer resume(const std::filesystem::path& dir, const data::MultiViewDataset& d) {
    std::ifstream is(dir / "state.json");
    if (!is) throw LoadError("cannot open " + (dir / "state.json").string());
    nlohmann::json state;
    try {
      is >> state;
    } catch (const nlohmann::json::exception& e) {
      throw LoadError((dir / "state.json").string() + ": " + e.what());
    }
    Trainer t(d, TrainConfig::from_json(state.at("config")), Model::load(dir));
    t.epoch_ = state.at("epoch").get<std::size_t>();
    t.history_ = state.at("elbo_history").get<std::vector<double>>();
    return t;
  }

 private:
  std::string norm_report() const {
    std::ostringstream os;
    os << "parameter norms:";
    for (const auto& [name, norm] : model_.params().value_norms()) os << ' ' << name << '=' << norm;
    return os.str();
  }

  const data::MultiViewDataset* data_;
  TrainConfig cfg_;
  std::size_t epoch_ = 0;
  std::vector<double> history_;
  Model model_;
};

struct TrainResult {
  Model model;
  std::vector<double> elbo_history;
  PretrainReport pretrain;
};

/// Pretraining, GMM initialization, then `cfg.epochs` joint epochs. The
/// dataset must already be normalized for `cfg.likelihood`.
inline TrainResult train(const data::MultiViewDataset& d, const TrainConfig& cfg,
                         const std::function<void(const EpochRecord&)>& on_epoch = {},
                         const std::filesystem::path& checkpoint_dir = {}) {
  Trainer t(d, cfg);
  auto report = t.pretrain();
  t.initialize_prior();
  t.run(on_epoch, checkpoint_dir);
  return {t.model(), t.history(), std::move(report)};
}

}  // namespace dmvc::training
