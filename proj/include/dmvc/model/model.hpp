#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dmvc/error.hpp"
#include "dmvc/model/descriptor.hpp"
#include "dmvc/model/networks.hpp"
#include "dmvc/model/prior.hpp"
#include "dmvc/numgrad/archive.hpp"
#include "dmvc/numgrad/graph.hpp"
#include "dmvc/numgrad/param_store.hpp"
#include "dmvc/random.hpp"

namespace dmvc::model {

/// The multi-view model: per-view encoders and decoders, fusion logits and the
/// GMM prior, all held as named entries of one ParamStore.
///
/// Parameter names:
///   view<v>.enc.hidden<i>.{weight,bias}, view<v>.enc.{mean,logvar}.{weight,bias}
///   view<v>.dec.hidden<i>.{weight,bias}, view<v>.dec.{mean,logvar}.{weight,bias}
///   fusion.logits (1 x m), gmm.pi_logits (1 x K), gmm.means (K x J), gmm.log_variances (K x J)
class Model {
 public:
  /// Fresh model: Glorot-uniform weights, zero biases, zero log-variance heads
  /// (unit variance), uniform fusion and mixture weights.
  explicit Model(ModelDescriptor d, std::uint64_t seed = 0) : desc_(std::move(d)) {
    desc_.validate();
    for (std::size_t v = 0; v < desc_.views(); ++v) {
      for (const auto& l : ViewEncoder::make(desc_, v).layers()) add_layer(l);
      for (const auto& l : ViewDecoder::make(desc_, v).layers()) add_layer(l);
    }
    params_.add(kFusionLogits, Tensor::zeros(1, desc_.views()));
    params_.add(kPiLogits, Tensor::zeros(1, desc_.clusters));
    params_.add(kGmmMeans, Tensor::zeros(desc_.clusters, desc_.latent_dim));
    params_.add(kGmmLogVariances, Tensor::zeros(desc_.clusters, desc_.latent_dim));
    initialize(seed);
  }

  /// Wraps existing parameters; names and shapes must match the descriptor.
  Model(ModelDescriptor d, ng::ParamStore params) : Model(std::move(d)) {
    for (const auto& name : params_.names()) {
      if (!params.contains(name)) throw LoadError("parameter archive lacks '" + name + "'");
      if (params.value(name).shape() != params_.value(name).shape())
        throw LoadError("parameter '" + name + "' has shape " + ng::shape_string(params.value(name).shape()) +
                        ", descriptor implies " + ng::shape_string(params_.value(name).shape()));
    }
    if (params.size() != params_.size()) throw LoadError("parameter archive has entries the descriptor does not know");
    params_ = std::move(params);
  }

  const ModelDescriptor& descriptor() const { return desc_; }
  ng::ParamStore& params() { return params_; }
  const ng::ParamStore& params() const { return params_; }

  std::size_t views() const { return desc_.views(); }
  std::size_t latent_dim() const { return desc_.latent_dim; }
  std::size_t clusters() const { return desc_.clusters; }

  ViewEncoder encoder(std::size_t v) const { return ViewEncoder::make(desc_, check_view(v)); }
  ViewDecoder decoder(std::size_t v) const { return ViewDecoder::make(desc_, check_view(v)); }

  FusionWeights fusion() const { return {params_.value(kFusionLogits).values()}; }
  void set_fusion(const FusionWeights& f) { params_.set_value(kFusionLogits, Tensor::row(f.logits)); }

  GmmPrior prior() const {
    return {params_.value(kPiLogits).values(), params_.value(kGmmMeans), params_.value(kGmmLogVariances)};
  }
  void set_prior(const GmmPrior& p) {
    p.validate();
    params_.set_value(kPiLogits, Tensor::row(p.pi_logits));
    params_.set_value(kGmmMeans, p.means.as_matrix());
    params_.set_value(kGmmLogVariances, p.log_variances.as_matrix());
  }

  /// Per-view posterior statistics (mean, variance) for a batch of samples.
  std::vector<LatentPosterior> encode_views(std::span<const Tensor> views) const {
    check_batch(views);
    std::vector<LatentPosterior> out;
    for (std::size_t v = 0; v < views.size(); ++v) {
      Graph g(&params_);
      auto enc = encode_view(g, g.input("x", views[v]), encoder(v));
      Tensor var = enc.log_variance.value();
      for (auto& x : var.data()) x = std::exp(x);
      out.push_back({enc.mean.value(), std::move(var)});
    }
    return out;
  }

  LatentPosterior posterior(std::span<const Tensor> views) const {
    const auto per_view = encode_views(views);
    return fuse_posteriors(per_view, fusion());
  }

  /// Fused posterior means, one row per sample.
  Tensor embed(std::span<const Tensor> views, std::size_t chunk = 512) const {
    return map_chunks(views, chunk, desc_.latent_dim,
                      [&](std::span<const Tensor> part) { return posterior(part).mean; });
  }

  /// Responsibilities at z = fused mean: n x K.
  Tensor soft_assign(std::span<const Tensor> views, std::size_t chunk = 512) const {
    const auto p = prior();
    return map_chunks(views, chunk, desc_.clusters, [&](std::span<const Tensor> part) {
      const auto mean = posterior(part).mean;
      Tensor gamma({mean.rows(), desc_.clusters});
      for (std::size_t i = 0; i < mean.rows(); ++i) {
        const auto row = mean.row_values(i);
        const auto r = responsibilities(row, p);
        std::copy(r.begin(), r.end(), gamma.data().begin() + static_cast<std::ptrdiff_t>(i * desc_.clusters));
      }
      return gamma;
    });
  }

  /// Hard labels: argmax of the responsibilities at z = fused mean, ties to the lowest index.
  std::vector<std::size_t> assign(std::span<const Tensor> views) const {
    const auto gamma = soft_assign(views);
    std::vector<std::size_t> labels(gamma.rows());
    for (std::size_t i = 0; i < gamma.rows(); ++i) labels[i] = argmax(gamma.row_values(i));
    return labels;
  }

  /// Decoder mean output for latent rows z (count x J).
  Tensor decode(std::size_t v, const Tensor& z) const {
    Graph g(&params_);
    return decode_mean(g, g.input("z", z), decoder(v)).value();
  }

  /// Samples of view v from component c: z = mu_c + sigma_c * noise, then decode.
  /// Bernoulli views return the means, not binarized draws.
  Tensor generate(std::size_t v, std::size_t cluster, const Tensor& noise) const {
    if (cluster >= desc_.clusters)
      throw UsageError("cluster " + std::to_string(cluster) + " out of range (K = " +
                       std::to_string(desc_.clusters) + ")");
    if (noise.cols() != desc_.latent_dim) throw UsageError("noise must have latent_dim columns");
    const auto p = prior();
    Tensor z({noise.rows(), desc_.latent_dim});
    for (std::size_t i = 0; i < z.rows(); ++i)
      for (std::size_t j = 0; j < z.cols(); ++j)
        z(i, j) = p.means(cluster, j) + std::sqrt(p.variance(cluster, j)) * noise(i, j);
    return decode(v, z);
  }

  void save(const std::filesystem::path& dir, bool with_moments = false) const {
    std::filesystem::create_directories(dir);
    std::ofstream os(dir / "model.json");
    if (!os) throw LoadError("cannot write " + (dir / "model.json").string());
    os << desc_.to_json().dump(2) << '\n';
    ng::save_archive(dir / "params.bin", params_, with_moments);
  }

  static Model load(const std::filesystem::path& dir) {
    const auto desc_path = dir / "model.json";
    std::ifstream is(desc_path);
    if (!is) throw LoadError("cannot open model descriptor " + desc_path.string());
    nlohmann::json j;
    try {
      is >> j;
    } catch (const nlohmann::json::exception& e) {
      throw LoadError(desc_path.string() + ": " + e.what());
    }
    return Model(ModelDescriptor::from_json(j), ng::load_archive(dir / "params.bin"));
  }

 private:
  std::size_t check_view(std::size_t v) const {
    if (v >= desc_.views()) throw UsageError("view index " + std::to_string(v) + " out of range");
    return v;
  }

  void check_batch(std::span<const Tensor> views) const {
    if (views.size() != desc_.views())
      throw UsageError("model needs all " + std::to_string(desc_.views()) + " views, got " +
                       std::to_string(views.size()));
    for (std::size_t v = 0; v < views.size(); ++v) {
      if (views[v].cols() != desc_.view_dims[v])
        throw UsageError("view " + std::to_string(v) + " has " + std::to_string(views[v].cols()) +
                         " features, model expects " + std::to_string(desc_.view_dims[v]));
      if (views[v].rows() != views[0].rows()) throw UsageError("views disagree on the sample count");
    }
  }

  template <typename F>
  Tensor map_chunks(std::span<const Tensor> views, std::size_t chunk, std::size_t width, F f) const {
    check_batch(views);
    const std::size_t n = views[0].rows();
    Tensor out({n, width});
    for (std::size_t start = 0; start < n; start += chunk) {
      const std::size_t stop = std::min(n, start + chunk);
      std::vector<std::size_t> idx(stop - start);
      std::iota(idx.begin(), idx.end(), start);
      std::vector<Tensor> part;
      for (const auto& v : views) part.push_back(ng::gather_rows(v, idx));
      const Tensor piece = f(part);
      std::copy(piece.data().begin(), piece.data().end(),
                out.data().begin() + static_cast<std::ptrdiff_t>(start * width));
    }
    return out;
  }

  void add_layer(const Layer& l) {
    params_.add(l.weight, Tensor::zeros(l.in, l.out));
    params_.add(l.bias, Tensor::zeros(1, l.out));
  }

  void initialize(std::uint64_t seed) {
    auto rng = make_rng(seed, RngStream::init);
    for (auto& [name, p] : params_) {
      if (!name.ends_with(".weight") || name.find(".logvar.") != std::string::npos) continue;
      const double limit = std::sqrt(6.0 / static_cast<double>(p.value.rows() + p.value.cols()));
      std::uniform_real_distribution<double> u(-limit, limit);
      for (auto& v : p.value.data()) v = u(rng);
    }
  }

  ModelDescriptor desc_;
  ng::ParamStore params_;
};

}  // namespace dmvc::model
