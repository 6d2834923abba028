#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "dmvc/data/csv.hpp"
#include "dmvc/error.hpp"
#include "dmvc/likelihood.hpp"
#include "dmvc/random.hpp"

namespace dmvc::data {

struct ViewSpec {
  std::string name;
  std::size_t dim = 0;
  std::filesystem::path path;  // relative paths resolve against the manifest directory
};

/// Dataset description file (JSON):
///   {"name": ..., "n": 2000, "likelihood": "gaussian", "clusters": 10,
///    "views": [{"name": "fou", "dim": 76, "path": "fou.csv"}, ...], "labels": "labels.txt"}
/// "clusters", "labels" and "likelihood" are optional.
struct Manifest {
  std::string name;
  std::size_t n = 0;
  std::vector<ViewSpec> views;
  std::optional<std::filesystem::path> labels;
  std::optional<Likelihood> likelihood;
  std::optional<std::size_t> clusters;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::filesystem::path& p) const { return p.is_absolute() ? p : base_dir / p; }

  static Manifest from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
    Manifest m;
    m.base_dir = base_dir;
    try {
      m.name = j.value("name", std::string("dataset"));
      m.n = j.at("n").get<std::size_t>();
      for (const auto& v : j.at("views"))
        m.views.push_back({v.value("name", "view" + std::to_string(m.views.size())), v.at("dim").get<std::size_t>(),
                           v.at("path").get<std::string>()});
      if (j.contains("labels") && !j["labels"].is_null()) m.labels = j["labels"].get<std::string>();
      if (j.contains("likelihood")) m.likelihood = parse_likelihood(j["likelihood"].get<std::string>());
      if (j.contains("clusters")) m.clusters = j["clusters"].get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw LoadError("manifest: " + std::string(e.what()));
    } catch (const UsageError& e) {
      throw LoadError("manifest: " + std::string(e.what()));
    }
    if (m.views.empty()) throw LoadError("manifest lists no views");
    if (m.n == 0) throw LoadError("manifest has n = 0");
    return m;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["name"] = name;
    j["n"] = n;
    j["views"] = nlohmann::json::array();
    for (const auto& v : views) j["views"].push_back({{"name", v.name}, {"dim", v.dim}, {"path", v.path.generic_string()}});
    if (labels) j["labels"] = labels->generic_string();
    if (likelihood) j["likelihood"] = to_string(*likelihood);
    if (clusters) j["clusters"] = *clusters;
    return j;
  }
};

inline Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw LoadError("cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
  try {
    return Manifest::from_json(j, path.parent_path());
  } catch (const LoadError& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

/// Per-feature affine map x' = (x - offset) / scale; features with scale 0 map to 0.
struct NormalizationRecord {
  Likelihood kind = Likelihood::gaussian;
  std::vector<double> offset;
  std::vector<double> scale;

  std::size_t dim() const { return offset.size(); }

  double apply(std::size_t j, double x) const {
    if (scale[j] == 0.0) return 0.0;
    const double y = (x - offset[j]) / scale[j];
    return kind == Likelihood::bernoulli ? std::clamp(y, 0.0, 1.0) : y;
  }

  Tensor apply(const Tensor& m) const {
    if (m.cols() != dim())
      throw UsageError("normalization expects " + std::to_string(dim()) + " features, got " + std::to_string(m.cols()));
    Tensor out({m.rows(), m.cols()});
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = apply(j, m(i, j));
    return out;
  }

  /// Bernoulli: min-max to [0,1]. Gaussian: zero mean, unit (population) variance.
  static NormalizationRecord fit(const Tensor& m, Likelihood kind) {
    NormalizationRecord r{kind, std::vector<double>(m.cols()), std::vector<double>(m.cols())};
    const double n = static_cast<double>(m.rows());
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (kind == Likelihood::bernoulli) {
        double lo = m(0, j), hi = m(0, j);
        for (std::size_t i = 1; i < m.rows(); ++i) {
          lo = std::min(lo, m(i, j));
          hi = std::max(hi, m(i, j));
        }
        r.offset[j] = lo;
        r.scale[j] = hi - lo;
      } else {
        double mean = 0.0;
        for (std::size_t i = 0; i < m.rows(); ++i) mean += m(i, j);
        mean /= n;
        double ss = 0.0;
        for (std::size_t i = 0; i < m.rows(); ++i) ss += (m(i, j) - mean) * (m(i, j) - mean);
        r.offset[j] = mean;
        r.scale[j] = ss > 0.0 ? std::sqrt(ss / n) : 0.0;
      }
    }
    return r;
  }

  nlohmann::json to_json() const { return {{"kind", to_string(kind)}, {"offset", offset}, {"scale", scale}}; }
  static NormalizationRecord from_json(const nlohmann::json& j) {
    try {
      return {parse_likelihood(j.at("kind").get<std::string>()), j.at("offset").get<std::vector<double>>(),
              j.at("scale").get<std::vector<double>>()};
    } catch (const nlohmann::json::exception& e) {
      throw LoadError("normalization record: " + std::string(e.what()));
    }
  }
};

struct MultiViewDataset {
  std::string name = "dataset";
  std::vector<std::string> view_names;
  std::vector<Tensor> views;  // n x d_v each
  std::optional<std::vector<std::size_t>> labels;
  std::optional<std::size_t> clusters;
  std::optional<Likelihood> likelihood;
  std::vector<NormalizationRecord> normalization;  // empty until normalized

  std::size_t size() const { return views.empty() ? 0 : views[0].rows(); }
  std::size_t num_views() const { return views.size(); }
  std::vector<std::size_t> dims() const {
    std::vector<std::size_t> d;
    for (const auto& v : views) d.push_back(v.cols());
    return d;
  }

  /// Rows `indices` of every view.
  std::vector<Tensor> batch(const std::vector<std::size_t>& indices) const {
    std::vector<Tensor> out;
    for (const auto& v : views) out.push_back(ng::gather_rows(v, indices));
    return out;
  }
};

inline MultiViewDataset load_dataset(const Manifest& m) {
  MultiViewDataset d;
  d.name = m.name;
  d.clusters = m.clusters;
  d.likelihood = m.likelihood;
  for (const auto& spec : m.views) {
    const auto path = m.resolve(spec.path);
    Tensor x = read_csv(path);
    if (x.rows() != m.n)
      throw LoadError(path.string() + ": has " + std::to_string(x.rows()) + " rows, manifest says " + std::to_string(m.n));
    if (x.cols() != spec.dim)
      throw LoadError(path.string() + ": has " + std::to_string(x.cols()) + " columns, manifest says " +
                      std::to_string(spec.dim));
    d.view_names.push_back(spec.name);
    d.views.push_back(std::move(x));
  }
  if (m.labels) {
    const auto path = m.resolve(*m.labels);
    auto labels = read_labels(path);
    if (labels.size() != m.n)
      throw LoadError(path.string() + ": has " + std::to_string(labels.size()) + " labels, manifest says " +
                      std::to_string(m.n));
    if (m.clusters)
      for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] >= *m.clusters)
          throw LoadError(detail::where(path, i + 1, 1) + ": label " + std::to_string(labels[i]) + " is not in [0, " +
                          std::to_string(*m.clusters) + ")");
    d.labels = std::move(labels);
  }
  return d;
}

inline MultiViewDataset load_dataset(const std::filesystem::path& manifest_path) {
  return load_dataset(read_manifest(manifest_path));
}

/// Writes <dir>/manifest.json, one CSV per view and labels.txt when labels exist.
inline Manifest save_dataset(const MultiViewDataset& d, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  Manifest m;
  m.name = d.name;
  m.n = d.size();
  m.clusters = d.clusters;
  m.likelihood = d.likelihood;
  m.base_dir = dir;
  for (std::size_t v = 0; v < d.num_views(); ++v) {
    const std::string name = v < d.view_names.size() ? d.view_names[v] : "view" + std::to_string(v);
    m.views.push_back({name, d.views[v].cols(), name + ".csv"});
    write_csv(dir / (name + ".csv"), d.views[v]);
  }
  if (d.labels) {
    m.labels = "labels.txt";
    write_labels(dir / "labels.txt", *d.labels);
  }
  std::ofstream os(dir / "manifest.json");
  if (!os) throw LoadError("cannot write " + (dir / "manifest.json").string());
  os << m.to_json().dump(2) << '\n';
  return m;
}

/// Fits a record per view and returns the transformed copy.
inline MultiViewDataset normalize(const MultiViewDataset& d, Likelihood kind) {
  MultiViewDataset out = d;
  out.likelihood = kind;
  out.normalization.clear();
  for (std::size_t v = 0; v < d.num_views(); ++v) {
    out.normalization.push_back(NormalizationRecord::fit(d.views[v], kind));
    out.views[v] = out.normalization.back().apply(d.views[v]);
  }
  return out;
}

/// Applies stored records (one per view) to raw data.
inline MultiViewDataset apply_normalization(const MultiViewDataset& d, const std::vector<NormalizationRecord>& records) {
  if (records.size() != d.num_views())
    throw UsageError("normalization has " + std::to_string(records.size()) + " views, dataset has " +
                     std::to_string(d.num_views()));
  MultiViewDataset out = d;
  out.normalization = records;
  for (std::size_t v = 0; v < d.num_views(); ++v) out.views[v] = records[v].apply(d.views[v]);
  return out;
}

inline nlohmann::json normalization_to_json(const std::vector<NormalizationRecord>& records) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : records) j.push_back(r.to_json());
  return j;
}

inline std::vector<NormalizationRecord> normalization_from_json(const nlohmann::json& j) {
  std::vector<NormalizationRecord> out;
  for (const auto& r : j) out.push_back(NormalizationRecord::from_json(r));
  return out;
}

/// Random permutation of 0..n-1 cut into batches; the last may be short.
inline std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t n, std::size_t batch_size,
                                                              std::mt19937_64& rng) {
  if (batch_size == 0) throw UsageError("batch size must be at least 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  // explicit Fisher-Yates so the order does not depend on the standard library
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch_size)));
  return out;
}

/// Batches for one epoch; a pure function of (seed, epoch).
inline std::vector<std::vector<std::size_t>> batch_iter(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                        std::uint64_t epoch) {
  auto rng = make_rng(seed, RngStream::shuffle, {epoch});
  return shuffled_batches(n, batch_size, rng);
}

}  // namespace dmvc::data
