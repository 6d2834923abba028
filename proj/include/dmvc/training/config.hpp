#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dmvc/error.hpp"
#include "dmvc/likelihood.hpp"

namespace dmvc::training {

struct TrainConfig {
  std::size_t latent_dim = 10;
  std::size_t clusters = 0;  // 0: take from the dataset manifest
  Likelihood likelihood = Likelihood::gaussian;
  double learning_rate = 1e-4;
  double decay = 0.9;
  std::size_t decay_period = 10;
  std::size_t epochs = 100;
  std::size_t batch_size = 256;
  std::size_t pretrain_layer_epochs = 10;
  std::size_t finetune_epochs = 20;
  double pretrain_learning_rate = 1e-3;
  std::size_t pretrain_batch_size = 64;
  std::uint64_t seed = 0;
  std::size_t mc_samples = 1;  // L
  std::size_t checkpoint_every = 0;  // epochs; 0 disables
  std::vector<std::size_t> encoder_hidden{500, 500, 200};
  std::vector<std::size_t> decoder_hidden{2000, 500, 500};

  /// lr0 * decay^floor(epoch / decay_period)
  double learning_rate_at(std::size_t epoch) const {
    return learning_rate * std::pow(decay, static_cast<double>(epoch / decay_period));
  }

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("decay must lie in (0, 1]");
    if (decay_period == 0) throw ConfigError("decay_period must be >= 1");
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (pretrain_batch_size == 0) throw ConfigError("pretrain_batch_size must be >= 1");
    if (!(pretrain_learning_rate > 0.0)) throw ConfigError("pretrain_learning_rate must be > 0");
    if (clusters == 0) throw ConfigError("clusters must be >= 1");
    if (latent_dim == 0) throw ConfigError("latent_dim must be >= 1");
    if (mc_samples == 0) throw ConfigError("mc_samples must be >= 1");
    for (auto w : encoder_hidden)
      if (w == 0) throw ConfigError("encoder_hidden widths must be positive");
    for (auto w : decoder_hidden)
      if (w == 0) throw ConfigError("decoder_hidden widths must be positive");
  }

  nlohmann::json to_json() const {
    return {{"latent_dim", latent_dim},
            {"clusters", clusters},
            {"likelihood", to_string(likelihood)},
            {"learning_rate", learning_rate},
            {"decay", decay},
            {"decay_period", decay_period},
            {"epochs", epochs},
            {"batch_size", batch_size},
            {"pretrain_layer_epochs", pretrain_layer_epochs},
            {"finetune_epochs", finetune_epochs},
            {"pretrain_learning_rate", pretrain_learning_rate},
            {"pretrain_batch_size", pretrain_batch_size},
            {"seed", seed},
            {"mc_samples", mc_samples},
            {"checkpoint_every", checkpoint_every},
            {"encoder_hidden", encoder_hidden},
            {"decoder_hidden", decoder_hidden}};
  }

  /// Missing keys keep their defaults; unknown keys are rejected.
  static TrainConfig from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    TrainConfig c;
    const auto known = c.to_json();
    for (const auto& [key, _] : j.items())
      if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
    try {
      c.latent_dim = j.value("latent_dim", c.latent_dim);
      c.clusters = j.value("clusters", c.clusters);
      if (j.contains("likelihood")) c.likelihood = parse_likelihood(j["likelihood"].get<std::string>());
      c.learning_rate = j.value("learning_rate", c.learning_rate);
      c.decay = j.value("decay", c.decay);
      c.decay_period = j.value("decay_period", c.decay_period);
      c.epochs = j.value("epochs", c.epochs);
      c.batch_size = j.value("batch_size", c.batch_size);
      c.pretrain_layer_epochs = j.value("pretrain_layer_epochs", c.pretrain_layer_epochs);
      c.finetune_epochs = j.value("finetune_epochs", c.finetune_epochs);
      c.pretrain_learning_rate = j.value("pretrain_learning_rate", c.pretrain_learning_rate);
      c.pretrain_batch_size = j.value("pretrain_batch_size", c.pretrain_batch_size);
      c.seed = j.value("seed", c.seed);
      c.mc_samples = j.value("mc_samples", c.mc_samples);
      c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
      c.encoder_hidden = j.value("encoder_hidden", c.encoder_hidden);
      c.decoder_hidden = j.value("decoder_hidden", c.decoder_hidden);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config: " + std::string(e.what()));
    } catch (const UsageError& e) {
      throw ConfigError("config: " + std::string(e.what()));
    }
    return c;
  }
};

inline TrainConfig read_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw LoadError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
  return TrainConfig::from_json(j);
}

}  // namespace dmvc::training
