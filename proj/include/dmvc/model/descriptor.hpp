#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dmvc/error.hpp"
#include "dmvc/likelihood.hpp"

namespace dmvc::model {

/// Everything needed to rebuild a model's parameter layout.
struct ModelDescriptor {
  std::vector<std::string> view_names;
  std::vector<std::size_t> view_dims;
  std::vector<Likelihood> likelihoods;
  std::size_t latent_dim = 10;
  std::size_t clusters = 1;
  std::vector<std::size_t> encoder_hidden{500, 500, 200};
  std::vector<std::size_t> decoder_hidden{2000, 500, 500};

  std::size_t views() const { return view_dims.size(); }

  void validate() const {
    if (view_dims.empty()) throw ConfigError("model needs at least one view");
    if (likelihoods.size() != view_dims.size())
      throw ConfigError("model has " + std::to_string(view_dims.size()) + " views but " +
                        std::to_string(likelihoods.size()) + " likelihood kinds");
    if (!view_names.empty() && view_names.size() != view_dims.size())
      throw ConfigError("view_names must name every view");
    for (auto d : view_dims)
      if (d == 0) throw ConfigError("view dimension must be positive");
    if (latent_dim == 0) throw ConfigError("latent_dim must be positive");
    if (clusters == 0) throw ConfigError("clusters must be at least 1");
    for (auto w : encoder_hidden)
      if (w == 0) throw ConfigError("encoder layer widths must be positive");
    for (auto w : decoder_hidden)
      if (w == 0) throw ConfigError("decoder layer widths must be positive");
  }

  std::string view_name(std::size_t v) const {
    return v < view_names.size() ? view_names[v] : "view" + std::to_string(v);
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["format"] = "dmvc-model";
    j["version"] = 1;
    j["view_names"] = view_names;
    j["view_dims"] = view_dims;
    std::vector<std::string> kinds;
    for (auto k : likelihoods) kinds.push_back(to_string(k));
    j["likelihoods"] = kinds;
    j["latent_dim"] = latent_dim;
    j["clusters"] = clusters;
    j["encoder_hidden"] = encoder_hidden;
    j["decoder_hidden"] = decoder_hidden;
    return j;
  }

  static ModelDescriptor from_json(const nlohmann::json& j) {
    try {
      ModelDescriptor d;
      if (j.contains("view_names")) d.view_names = j.at("view_names").get<std::vector<std::string>>();
      d.view_dims = j.at("view_dims").get<std::vector<std::size_t>>();
      for (const auto& k : j.at("likelihoods")) d.likelihoods.push_back(parse_likelihood(k.get<std::string>()));
      d.latent_dim = j.at("latent_dim").get<std::size_t>();
      d.clusters = j.at("clusters").get<std::size_t>();
      d.encoder_hidden = j.at("encoder_hidden").get<std::vector<std::size_t>>();
      d.decoder_hidden = j.at("decoder_hidden").get<std::vector<std::size_t>>();
      d.validate();
      return d;
    } catch (const nlohmann::json::exception& e) {
      throw LoadError(std::string("malformed model descriptor: ") + e.what());
    }
  }
};

}  // namespace dmvc::model
