// Acceptance checks 1-7. One line per criterion: PASS, FAIL or SKIP plus the
// measured numbers. Exit status is 1 if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "dmvc/data.hpp"
#include "dmvc/metrics.hpp"
#include "dmvc/model.hpp"
#include "dmvc/training.hpp"
#include "metrics_oracles.hpp"
#include "test_support.hpp"

using namespace dmvc;
using model::Model;
using model::ModelDescriptor;
using ng::Tensor;
namespace fs = std::filesystem;

namespace {

enum class Verdict { pass, fail, skip };

struct Outcome {
  Verdict verdict;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

Tensor normal_tensor(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  return testutil::random_tensor(rng, rows, cols, scale);
}

ModelDescriptor tiny(std::vector<Likelihood> kinds, std::vector<std::size_t> dims, std::size_t J, std::size_t K) {
  ModelDescriptor d;
  d.view_dims = std::move(dims);
  d.likelihoods = std::move(kinds);
  d.latent_dim = J;
  d.clusters = K;
  d.encoder_hidden = {5, 4};
  d.decoder_hidden = {4, 6};
  return d;
}

std::vector<Tensor> random_views(std::mt19937_64& rng, const ModelDescriptor& d, std::size_t batch) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Tensor> views;
  for (std::size_t v = 0; v < d.views(); ++v) {
    Tensor x({batch, d.view_dims[v]});
    for (auto& e : x.data()) e = d.likelihoods[v] == Likelihood::bernoulli ? u(rng) : 2.0 * u(rng) - 1.0;
    views.push_back(std::move(x));
  }
  return views;
}

// 1. analytic gradients of -ELBO against central differences
Outcome gradient_oracle() {
  const auto t0 = Clock::now();
  const std::vector<std::vector<Likelihood>> cases{{Likelihood::bernoulli, Likelihood::bernoulli},
                                                   {Likelihood::gaussian, Likelihood::gaussian},
                                                   {Likelihood::bernoulli, Likelihood::gaussian}};
  double worst = 0.0;
  std::size_t checked = 0;
  for (std::size_t k = 0; k < cases.size(); ++k) {
    const auto d = tiny(cases[k], {4, 5}, 2, 3);
    Model m(d, 100 + k);
    testutil::randomize(m, 200 + k, 0.5);
    std::mt19937_64 rng(300 + k);
    const auto views = random_views(rng, d, 7);
    const std::vector<Tensor> noise{normal_tensor(rng, 7, 2)};
    m.params().zero_grads();
    model::evaluate_elbo(m, views, noise, true);
    const auto fd = testutil::finite_difference_gradients(
        m.params(), [&] { return -model::evaluate_elbo(m, views, noise).value; }, 1e-5);
    for (const auto& [name, numeric] : fd) {
      worst = std::max(worst, testutil::max_relative_error(m.params().at(name).grad, numeric));
      checked += numeric.size();
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = worst < 1e-4 && secs < 60.0;
  return {ok ? Verdict::pass : Verdict::fail, "max relative error " + fmt(worst) + " over " + std::to_string(checked) +
                                                  " parameter entries (bernoulli, gaussian, mixed), " + fmt(secs) + " s"};
}

// 2. closed-form non-reconstruction terms against quadrature of E_q[log p(z,c) - log q(z,c)]
Outcome elbo_term_oracle() {
  const auto d = tiny({Likelihood::gaussian, Likelihood::bernoulli}, {3, 4}, 1, 2);
  Model m(d, 7);
  testutil::randomize(m, 70, 0.6);
  std::mt19937_64 rng(71);
  const auto views = random_views(rng, d, 6);
  const std::vector<Tensor> noise{normal_tensor(rng, 6, 1)};
  ng::Graph g(&std::as_const(m.params()));
  const auto e = model::build_elbo(g, m, views, noise);
  const auto prior = m.prior();

  auto log_normal = [](double z, double mean, double var) {
    return -0.5 * (std::log(2.0 * std::numbers::pi * var) + (z - mean) * (z - mean) / var);
  };
  double worst = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    const double mu = e.fused_mean.value()(i, 0);
    const double var = std::exp(e.fused_log_variance.value()(i, 0));
    const double sd = std::sqrt(var);
    const std::vector<double> gamma = e.gamma.value().row_values(i);
    const auto pi = prior.weights();
    auto integrand = [&](double z) {
      double inner = 0.0;
      for (std::size_t c = 0; c < 2; ++c)
        inner += gamma[c] * (log_normal(z, prior.means(c, 0), prior.variance(c, 0)) + std::log(pi[c]) - std::log(gamma[c]));
      const double lq = log_normal(z, mu, var);
      return std::exp(lq) * (inner - lq);
    };
    const std::size_t steps = 400000;
    const double lo = mu - 14.0 * sd, hi = mu + 14.0 * sd, h = (hi - lo) / static_cast<double>(steps);
    double q = 0.5 * (integrand(lo) + integrand(hi));
    for (std::size_t s = 1; s < steps; ++s) q += integrand(lo + h * static_cast<double>(s));
    q *= h;
    const double closed =
        e.prior_cross.value()(i, 0) + e.cluster_term.value()(i, 0) + e.posterior_entropy.value()(i, 0);
    worst = std::max(worst, std::abs(q - closed));
  }
  return {worst < 1e-6 ? Verdict::pass : Verdict::fail,
          "max |closed form - quadrature| " + fmt(worst) + " over 6 samples (J=1, K=2)"};
}

// 3. responsibilities against the direct density ratio
Outcome responsibility_oracle() {
  std::mt19937_64 rng(33);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<std::size_t> dims(1, 5), comps(1, 6);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t J = dims(rng), K = comps(rng);
    model::GmmPrior p;
    p.means = Tensor({K, J});
    p.log_variances = Tensor({K, J});
    for (std::size_t c = 0; c < K; ++c) p.pi_logits.push_back(n01(rng));
    for (auto& v : p.means.data()) v = n01(rng);
    for (auto& v : p.log_variances.data()) v = u(rng);
    std::vector<double> z(J);
    for (auto& v : z) v = n01(rng);

    const auto pi = p.weights();
    std::vector<double> direct(K);
    double total = 0.0;
    for (std::size_t c = 0; c < K; ++c) {
      double dens = pi[c];
      for (std::size_t j = 0; j < J; ++j) {
        const double s2 = std::exp(p.log_variances(c, j));
        dens *= std::exp(-(z[j] - p.means(c, j)) * (z[j] - p.means(c, j)) / (2.0 * s2)) /
                std::sqrt(2.0 * std::numbers::pi * s2);
      }
      total += direct[c] = dens;
    }
    double floored = 0.0;
    for (auto& v : direct) floored += v = std::max(v / total, model::kResponsibilityFloor);
    for (auto& v : direct) v /= floored;

    const auto gamma = model::responsibilities(z, p);
    for (std::size_t c = 0; c < K; ++c) worst = std::max(worst, std::abs(gamma[c] - direct[c]));
  }
  return {worst < 1e-12 ? Verdict::pass : Verdict::fail,
          "max |gamma - density ratio| " + fmt(worst) + " over 1000 instances"};
}

// 4. metrics against enumeration oracles and hand values
Outcome metrics_oracle() {
  using L = std::vector<std::size_t>;
  std::mt19937_64 rng(44);
  std::size_t acc_mismatch = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 50)(rng);
    const std::size_t kp = std::uniform_int_distribution<std::size_t>(1, 6)(rng);
    const std::size_t kt = std::uniform_int_distribution<std::size_t>(1, 6)(rng);
    L pred(n), truth(n);
    for (auto& v : pred) v = std::uniform_int_distribution<std::size_t>(0, kp - 1)(rng);
    for (auto& v : truth) v = std::uniform_int_distribution<std::size_t>(0, kt - 1)(rng);
    acc_mismatch += metrics::accuracy(pred, truth) != oracle::brute_force_accuracy(pred, truth);
  }
  std::size_t hungarian_mismatch = 0;
  std::uniform_real_distribution<double> cost_dist(-10.0, 10.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> cost(25);
    for (auto& c : cost) c = cost_dist(rng);
    hungarian_mismatch += metrics::hungarian(cost, 5).cost != oracle::brute_force_assignment(cost, 5);
  }
  const bool hand = metrics::accuracy(L{0, 0, 1, 1, 2}, L{1, 1, 0, 2, 2}) == 0.8 &&
                    metrics::nmi(L{0, 0, 1, 1}, L{0, 0, 1, 2}) == 0.8 &&
                    metrics::ari(L{0, 0, 1, 1}, L{0, 1, 0, 1}) == -0.5 &&
                    metrics::purity(L{0, 0, 1, 1, 1}, L{0, 1, 1, 1, 2}) == 0.6;
  const bool ok = acc_mismatch == 0 && hungarian_mismatch == 0 && hand;
  return {ok ? Verdict::pass : Verdict::fail,
          "ACC mismatches " + std::to_string(acc_mismatch) + "/200, hungarian mismatches " +
              std::to_string(hungarian_mismatch) + "/1000 (5x5), hand values " + (hand ? "exact" : "differ")};
}

// 5. synthetic end-to-end with default training settings
Outcome synthetic_end_to_end() {
  const auto t0 = Clock::now();
  data::SynthSpec spec;  // K=3, two views, n=1500, separation 5
  spec.seed = 0;
  const auto synth = data::synth_generate(spec);
  training::TrainConfig cfg;
  cfg.clusters = spec.clusters;
  cfg.seed = 0;
  const auto d = data::normalize(synth.dataset, cfg.likelihood);
  const auto result = training::train(d, cfg);
  const auto report = metrics::evaluate(result.model.assign(d.views), *d.labels);
  const auto& h = result.elbo_history;
  double last10 = 0.0;
  for (std::size_t e = h.size() - 10; e < h.size(); ++e) last10 += h[e] / 10.0;
  const double secs = seconds_since(t0);
  const bool ok = report.acc >= 0.95 && report.nmi >= 0.90 && last10 > h.front() && secs < 300.0;
  return {ok ? Verdict::pass : Verdict::fail,
          "ACC " + fmt(report.acc) + ", NMI " + fmt(report.nmi) + ", ELBO first epoch " + fmt(h.front()) +
              " -> last-10 mean " + fmt(last10) + ", " + fmt(secs) + " s"};
}

// 6. UCI multiple-features digits, when the feature files are present
Outcome uci_digits() {
  fs::path manifest = fs::path(DMVC_SOURCE_DIR) / "data" / "uci-digits" / "manifest.json";
  if (const char* env = std::getenv("DMVC_UCI_MANIFEST")) manifest = env;
  if (!fs::exists(manifest))
    return {Verdict::skip, "no dataset at " + manifest.string() + " (set DMVC_UCI_MANIFEST or run tools/prepare_uci_digits.py)"};
  const auto t0 = Clock::now();
  const auto raw = data::load_dataset(manifest);
  training::TrainConfig cfg;
  if (raw.likelihood) cfg.likelihood = *raw.likelihood;
  cfg.clusters = raw.clusters.value_or(10);
  const auto d = data::normalize(raw, cfg.likelihood);
  metrics::Report mean;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    cfg.seed = seed;
    const auto r = metrics::evaluate(training::train(d, cfg).model.assign(d.views), *d.labels);
    mean.acc += r.acc / 3.0;
    mean.nmi += r.nmi / 3.0;
    mean.ari += r.ari / 3.0;
  }
  const double secs = seconds_since(t0);
  const bool ok = mean.acc >= 0.85 && secs < 1800.0;
  return {ok ? Verdict::pass : Verdict::fail,
          "mean over 3 seeds ACC " + fmt(mean.acc) + " (published 0.9570, gap " + fmt(mean.acc - 0.9570) + "), NMI " +
              fmt(mean.nmi) + " (0.9166, gap " + fmt(mean.nmi - 0.9166) + "), ARI " + fmt(mean.ari) + " (0.9107, gap " +
              fmt(mean.ari - 0.9107) + "), " + fmt(secs) + " s"};
}

// 7. invariants
Outcome invariants() {
  std::vector<std::string> failures;
  std::mt19937_64 rng(77);

  {  // simplex of w and pi under 1000 Adam steps with random gradients
    Model m(tiny({Likelihood::gaussian, Likelihood::gaussian, Likelihood::bernoulli}, {3, 2, 2}, 2, 4), 8);
    double worst = 0.0;
    bool negative = false;
    for (int step = 0; step < 1000; ++step) {
      for (auto& [_, p] : m.params())
        for (auto& g : p.grad.data()) g = std::normal_distribution<double>(0.0, 10.0)(rng);
      ng::adam_step(m.params(), {.learning_rate = 0.05});
      for (const auto& w : {m.fusion().weights(), m.prior().weights()}) {
        double s = 0.0;
        for (double x : w) {
          negative |= x < 0.0;
          s += x;
        }
        worst = std::max(worst, std::abs(s - 1.0));
      }
    }
    if (negative || worst > 1e-12) failures.push_back("simplex drift " + fmt(worst));
  }

  {  // responsibilities sum to one
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
      const std::size_t J = 1 + trial % 5, K = 1 + trial % 7;
      model::GmmPrior p;
      p.means = normal_tensor(rng, K, J, 3.0);
      p.log_variances = normal_tensor(rng, K, J, 2.0);
      for (std::size_t c = 0; c < K; ++c) p.pi_logits.push_back(std::normal_distribution<double>(0.0, 2.0)(rng));
      const auto z = normal_tensor(rng, 1, J, 5.0).values();
      double s = 0.0;
      for (double g : model::responsibilities(z, p)) s += g;
      worst = std::max(worst, std::abs(s - 1.0));
    }
    if (worst > 1e-10) failures.push_back("sum of gamma off by " + fmt(worst));
  }

  data::SynthSpec spec;
  spec.n = 300;
  spec.view_dims = {6, 5};
  spec.seed = 4;
  const auto d = data::normalize(data::synth_generate(spec).dataset, Likelihood::gaussian);
  training::TrainConfig cfg;
  cfg.clusters = 3;
  cfg.latent_dim = 2;
  cfg.encoder_hidden = {32, 16};
  cfg.decoder_hidden = {16, 32};
  cfg.epochs = 6;
  cfg.batch_size = 64;
  cfg.pretrain_layer_epochs = 2;
  cfg.finetune_epochs = 3;
  cfg.learning_rate = 1e-3;
  cfg.seed = 12;

  {  // seed determinism
    const auto a = training::train(d, cfg);
    const auto b = training::train(d, cfg);
    if (a.elbo_history != b.elbo_history) failures.push_back("same seed gave different ELBO histories");
  }

  {  // checkpoint round trip
    const fs::path dir = fs::temp_directory_path() / ("dmvc_acceptance_" + std::to_string(::getpid()));
    training::Trainer t(d, cfg);
    t.pretrain();
    t.initialize_prior();
    t.run_epoch();
    t.run_epoch();
    t.save_checkpoint(dir);
    const auto back = training::Trainer::resume(dir, d);
    bool same = back.epoch() == t.epoch() && back.history() == t.history() &&
                back.model().params().step() == t.model().params().step();
    for (const auto& [name, p] : t.model().params()) {
      const auto& q = back.model().params().at(name);
      same = same && p.value == q.value && p.first_moment == q.first_moment && p.second_moment == q.second_moment;
    }
    fs::remove_all(dir);
    if (!same) failures.push_back("checkpoint round trip not bit-identical");
  }

  {  // k-means objective per Lloyd iteration
    std::size_t increases = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Tensor x = normal_tensor(rng, 200, 3);
      const auto r = training::kmeans(x, 5, seed, {.restarts = 1});
      for (std::size_t i = 1; i < r.trace.size(); ++i) increases += r.trace[i] > r.trace[i - 1];
    }
    if (increases) failures.push_back(std::to_string(increases) + " k-means objective increases");
  }

  if (failures.empty())
    return {Verdict::pass,
            "simplex after 1000 Adam steps, sum of gamma within 1e-10, seed determinism, checkpoint bit equality, "
            "k-means monotonicity"};
  std::string msg;
  for (const auto& f : failures) msg += (msg.empty() ? "" : "; ") + f;
  return {Verdict::fail, msg};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient oracle", gradient_oracle},       {"ELBO term oracle", elbo_term_oracle},
      {"responsibility oracle", responsibility_oracle}, {"metrics oracles", metrics_oracle},
      {"synthetic end-to-end", synthetic_end_to_end},   {"UCI digits", uci_digits},
      {"invariants", invariants}};
  bool failed = false;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {Verdict::fail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.verdict == Verdict::pass ? "PASS" : o.verdict == Verdict::fail ? "FAIL" : "SKIP";
    failed |= o.verdict == Verdict::fail;
    std::cout << "criterion " << i + 1 << " [" << tag << "] " << criteria[i].first << ": " << o.detail << std::endl;
  }
  return failed ? 1 : 0;
}
