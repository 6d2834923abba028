// dmvc: train, apply and evaluate multi-view clustering models.
//
// Exit status: 0 on success, 2 for bad arguments or unreadable inputs,
// 1 for any other failure.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dmvc/app/commands.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"Deep multi-view clustering with a variational autoencoder"};
  app.require_subcommand(1);

  fs::path manifest, config, out, model_dir, pred, truth, spec;
  std::uint64_t seed = 0;
  std::size_t cluster = 0, count = 1;

  auto* train = app.add_subcommand("train", "pretrain, initialize the mixture, train; write run artifacts");
  train->add_option("--manifest", manifest, "dataset manifest (JSON)")->required();
  auto* config_opt = train->add_option("--config", config, "training config (JSON); defaults when omitted");
  train->add_option("--out", out, "output directory")->required();
  auto* seed_opt = train->add_option("--seed", seed, "overrides the config seed");

  auto* assign = app.add_subcommand("assign", "cluster label per sample");
  assign->add_option("--model", model_dir, "model directory")->required();
  assign->add_option("--manifest", manifest, "dataset manifest")->required();
  assign->add_option("--out", out, "labels file")->required();

  auto* eval = app.add_subcommand("eval", "score predicted labels against ground truth");
  eval->add_option("--pred", pred, "predicted labels, one per line")->required();
  eval->add_option("--truth", truth, "true labels, one per line")->required();

  auto* embed = app.add_subcommand("embed", "fused latent means as CSV");
  embed->add_option("--model", model_dir, "model directory")->required();
  embed->add_option("--manifest", manifest, "dataset manifest")->required();
  embed->add_option("--out", out, "CSV file")->required();

  auto* generate = app.add_subcommand("generate", "sample every view from one mixture component");
  generate->add_option("--model", model_dir, "model directory")->required();
  generate->add_option("--cluster", cluster, "component index")->required();
  generate->add_option("--count", count, "number of samples")->required();
  generate->add_option("--seed", seed, "noise seed");
  generate->add_option("--out", out, "output directory, one CSV per view")->required();

  auto* synth = app.add_subcommand("synth", "write a synthetic multi-view dataset");
  synth->add_option("--spec", spec, "generator spec (JSON)")->required();
  synth->add_option("--out", out, "dataset directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    using namespace dmvc::app;
    if (*train) {
      TrainRequest req{manifest, std::nullopt, out, std::nullopt};
      if (*config_opt) req.config = config;
      if (*seed_opt) req.seed = seed;
      std::cout << cmd_train(req, std::cerr).metrics_text;
    } else if (*assign) {
      const auto labels = cmd_assign(model_dir, manifest, out);
      std::cerr << "wrote " << labels.size() << " labels to " << out.string() << '\n';
    } else if (*eval) {
      std::cout << format_report(cmd_eval(pred, truth));
    } else if (*embed) {
      const auto z = cmd_embed(model_dir, manifest, out);
      std::cerr << "wrote " << z.rows() << " x " << z.cols() << " embedding to " << out.string() << '\n';
    } else if (*generate) {
      cmd_generate(model_dir, cluster, count, seed, out);
      std::cerr << "wrote " << count << " samples per view to " << out.string() << '\n';
    } else if (*synth) {
      const auto s = cmd_synth(spec, out);
      std::cerr << "wrote " << s.dataset.size() << " samples to " << (out / "manifest.json").string() << '\n';
    }
  } catch (const dmvc::UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const dmvc::LoadError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const dmvc::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
