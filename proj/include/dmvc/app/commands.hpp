#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dmvc/data.hpp"
#include "dmvc/error.hpp"
#include "dmvc/metrics.hpp"
#include "dmvc/model.hpp"
#include "dmvc/random.hpp"
#include "dmvc/training.hpp"

namespace dmvc::app {

namespace fs = std::filesystem;
using ng::Tensor;

/// Published scores for a dataset name, if known.
struct ReferenceScores {
  double acc = 0.0;
  double nmi = 0.0;
  double ari = 0.0;
};

inline std::optional<ReferenceScores> reference_scores(std::string_view dataset) {
  std::string key;
  for (char c : dataset)
    if (std::isalnum(static_cast<unsigned char>(c))) key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (key == "ucidigits" || key == "mfeat" || key == "handwritten") return ReferenceScores{0.9570, 0.9166, 0.9107};
  return std::nullopt;
}

inline std::string format_number(double v) {
  std::string s;
  data::append_number(s, v);
  return s;
}

/// "key: value" lines for the four clustering scores.
inline std::string format_report(const metrics::Report& r) {
  return "acc: " + format_number(r.acc) + "\nnmi: " + format_number(r.nmi) + "\nari: " + format_number(r.ari) +
         "\npurity: " + format_number(r.purity) + "\n";
}

inline nlohmann::json read_json(const fs::path& path, const std::string& what) {
  std::ifstream is(path);
  if (!is) throw LoadError("cannot open " + what + " " + path.string());
  try {
    nlohmann::json j;
    is >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

inline void write_text(const fs::path& path, const std::string& text) {
  auto os = data::detail::open_out(path);
  os << text;
  if (!os) throw LoadError("cannot write " + path.string());
}

/// Config file values, then the manifest's likelihood and cluster count where
/// the config leaves them open (clusters falls back to the distinct label
/// count), then the seed override.
inline training::TrainConfig resolve_config(const data::MultiViewDataset& raw, const std::optional<fs::path>& config,
                                            std::optional<std::uint64_t> seed) {
  nlohmann::json j = nlohmann::json::object();
  if (config) j = read_json(*config, "config");
  auto cfg = training::TrainConfig::from_json(j);
  if (!j.contains("likelihood") && raw.likelihood) cfg.likelihood = *raw.likelihood;
  if (cfg.clusters == 0 && raw.clusters) cfg.clusters = *raw.clusters;
  if (cfg.clusters == 0 && raw.labels) cfg.clusters = std::set<std::size_t>(raw.labels->begin(), raw.labels->end()).size();
  if (cfg.clusters == 0) throw ConfigError("number of clusters is not set by the config, the manifest or labels");
  if (seed) cfg.seed = *seed;
  cfg.validate();
  return cfg;
}

struct TrainRequest {
  fs::path manifest;
  std::optional<fs::path> config;
  fs::path out;
  std::optional<std::uint64_t> seed;
};

struct TrainOutcome {
  training::TrainConfig config;
  double final_elbo = 0.0;
  std::optional<metrics::Report> report;
  std::string metrics_text;  // contents of metrics.txt
};

/// Writes into `out`:
///   model/            model.json, params.bin, normalization.json
///   config.json       resolved configuration, seed included
///   train_log.csv     one row per epoch (scores only when labels exist)
///   metrics.txt       final ELBO and scores as "key: value" lines
///   embedding.csv     fused posterior means, n x J
///   checkpoint/       when checkpoint_every > 0
inline TrainOutcome cmd_train(const TrainRequest& req, std::ostream& progress) {
  const auto raw = data::load_dataset(req.manifest);
  const auto cfg = resolve_config(raw, req.config, req.seed);
  const auto d = data::normalize(raw, cfg.likelihood);
  fs::create_directories(req.out);
  write_text(req.out / "config.json", cfg.to_json().dump(2) + "\n");

  std::string log = "epoch,learning_rate,elbo,reconstruction,prior_cross,cluster_term,posterior_entropy";
  if (d.labels) log += ",acc,nmi,ari,purity";
  log += '\n';

  training::Trainer trainer(d, cfg);
  trainer.pretrain();
  trainer.initialize_prior();
  trainer.run(
      [&](const training::EpochRecord& e) {
        log += std::to_string(e.epoch);
        for (double v : {e.learning_rate, e.elbo, e.terms.reconstruction, e.terms.prior_cross, e.terms.cluster_term,
                         e.terms.posterior_entropy})
          log += ',' + format_number(v);
        if (d.labels) {
          const auto r = metrics::evaluate(trainer.model().assign(d.views), *d.labels);
          for (double v : {r.acc, r.nmi, r.ari, r.purity}) log += ',' + format_number(v);
        }
        log += '\n';
        progress << "epoch " << e.epoch << " elbo " << e.elbo << '\n';
      },
      cfg.checkpoint_every > 0 ? req.out / "checkpoint" : fs::path{});
  write_text(req.out / "train_log.csv", log);

  const auto& model = trainer.model();
  model.save(req.out / "model");
  write_text(req.out / "model" / "normalization.json", data::normalization_to_json(d.normalization).dump(2) + "\n");
  data::write_csv(req.out / "embedding.csv", model.embed(d.views));

  TrainOutcome outcome;
  outcome.config = cfg;
  outcome.final_elbo = trainer.history().empty() ? 0.0 : trainer.history().back();
  outcome.metrics_text = "final_elbo: " + format_number(outcome.final_elbo) + "\n";
  if (d.labels) {
    outcome.report = metrics::evaluate(model.assign(d.views), *d.labels);
    outcome.metrics_text += format_report(*outcome.report);
    if (const auto ref = reference_scores(d.name)) {
      outcome.metrics_text += "reference_acc: " + format_number(ref->acc) + "\nreference_nmi: " + format_number(ref->nmi) +
                              "\nreference_ari: " + format_number(ref->ari) + "\ngap_acc: " +
                              format_number(outcome.report->acc - ref->acc) + "\ngap_nmi: " +
                              format_number(outcome.report->nmi - ref->nmi) + "\ngap_ari: " +
                              format_number(outcome.report->ari - ref->ari) + "\n";
    }
  }
  write_text(req.out / "metrics.txt", outcome.metrics_text);
  return outcome;
}

/// A trained model plus the normalization its inputs need.
struct TrainedModel {
  model::Model model;
  std::vector<data::NormalizationRecord> normalization;

  static TrainedModel load(const fs::path& dir) {
    auto m = model::Model::load(dir);
    auto norm = data::normalization_from_json(read_json(dir / "normalization.json", "normalization record"));
    return {std::move(m), std::move(norm)};
  }

  /// Loads the manifest's data and maps it into the model's input space.
  data::MultiViewDataset prepare(const fs::path& manifest) const {
    const auto raw = data::load_dataset(manifest);
    const auto want = model.descriptor().view_dims;
    if (raw.dims() != want) {
      auto show = [](const std::vector<std::size_t>& dims) {
        std::string s = "[";
        for (std::size_t i = 0; i < dims.size(); ++i) s += (i ? "," : "") + std::to_string(dims[i]);
        return s + "]";
      };
      throw UsageError(manifest.string() + ": view dimensions " + show(raw.dims()) + " do not match the model's " +
                       show(want));
    }
    return data::apply_normalization(raw, normalization);
  }
};

inline std::vector<std::size_t> cmd_assign(const fs::path& model_dir, const fs::path& manifest, const fs::path& out) {
  const auto trained = TrainedModel::load(model_dir);
  const auto labels = trained.model.assign(trained.prepare(manifest).views);
  data::write_labels(out, labels);
  return labels;
}

inline metrics::Report cmd_eval(const fs::path& pred, const fs::path& truth) {
  const auto p = data::read_labels(pred);
  const auto t = data::read_labels(truth);
  if (p.empty()) throw UsageError(pred.string() + ": no labels");
  if (t.empty()) throw UsageError(truth.string() + ": no labels");
  if (p.size() != t.size())
    throw UsageError(pred.string() + " has " + std::to_string(p.size()) + " labels, " + truth.string() + " has " +
                     std::to_string(t.size()));
  return metrics::evaluate(p, t);
}

inline Tensor cmd_embed(const fs::path& model_dir, const fs::path& manifest, const fs::path& out) {
  const auto trained = TrainedModel::load(model_dir);
  auto z = trained.model.embed(trained.prepare(manifest).views);
  data::write_csv(out, z);
  return z;
}

/// N(0, I) draws for generate: count x J.
inline Tensor generation_noise(std::size_t count, std::size_t latent_dim, std::size_t cluster, std::uint64_t seed) {
  auto rng = make_rng(seed, RngStream::generate, {cluster});
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor e({count, latent_dim});
  for (auto& x : e.data()) x = normal(rng);
  return e;
}

/// Writes <out>/<view name>.csv per view, in the model's normalized feature space.
inline std::vector<Tensor> cmd_generate(const fs::path& model_dir, std::size_t cluster, std::size_t count,
                                        std::uint64_t seed, const fs::path& out) {
  if (count == 0) throw UsageError("--count must be >= 1");
  const auto trained = TrainedModel::load(model_dir);
  const auto& m = trained.model;
  if (cluster >= m.clusters())
    throw UsageError("cluster " + std::to_string(cluster) + " out of range (K = " + std::to_string(m.clusters()) + ")");
  const auto noise = generation_noise(count, m.latent_dim(), cluster, seed);
  std::vector<Tensor> samples;
  for (std::size_t v = 0; v < m.views(); ++v) {
    samples.push_back(m.generate(v, cluster, noise));
    data::write_csv(out / (m.descriptor().view_name(v) + ".csv"), samples.back());
  }
  return samples;
}

inline data::SynthData cmd_synth(const fs::path& spec, const fs::path& out) {
  auto synth = data::synth_generate(data::SynthSpec::from_json(read_json(spec, "synth spec")));
  data::save_dataset(synth.dataset, out);
  return synth;
}

}  // namespace dmvc::app
