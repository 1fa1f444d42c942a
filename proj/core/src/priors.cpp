#include "ownerrel/priors.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "ownerrel/error.hpp"
#include "ownerrel/nn.hpp"

namespace ownerrel {

void GaussianMixture::validate() const {
  const std::size_t k = weights.size();
  if (k == 0 || means.size() != k || variances.size() != k) {
    fail(ErrorCode::kInvalidParameter, "GaussianMixture: inconsistent component counts");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (!(weights[i] >= 0.0)) fail(ErrorCode::kInvalidParameter, "GaussianMixture: negative weight");
    if (!(variances[i] > 0.0)) fail(ErrorCode::kInvalidParameter, "GaussianMixture: non-positive variance");
    if (!std::isfinite(means[i])) fail(ErrorCode::kInvalidParameter, "GaussianMixture: non-finite mean");
    total += weights[i];
  }
  if (std::abs(total - 1.0) > 1e-9) fail(ErrorCode::kInvalidParameter, "GaussianMixture: weights do not sum to 1");
}

PairSamples collect_pair_stats(std::span<const Scene> scenes) {
  PairSamples out;
  for (const Scene& scene : scenes) {
    for (const auto& [wheel_id, vehicle_id] : scene.gt_wheel_vehicle) {
      const BoundingBox& wheel = scene.box(wheel_id);
      const BoundingBox& vehicle = scene.box(vehicle_id);
      if (auto lr = pair_log_ratio(vehicle, wheel, scene.width, scene.height)) out.wv.push_back(*lr);
    }
    for (const auto& [a_id, b_id] : scene.gt_wheel_wheel) {
      auto [rear, front] = rear_front(scene.box(a_id), scene.box(b_id));
      if (auto lr = pair_log_ratio(*rear, *front, scene.width, scene.height)) out.ww.push_back(*lr);
    }
  }
  return out;
}

namespace {

double log_normal_density(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + d * d / variance);
}

double log_sum_exp(std::span<const double> v) {
  const double peak = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(peak)) return peak;
  double s = 0.0;
  for (double x : v) s += std::exp(x - peak);
  return peak + std::log(s);
}

}  // namespace

double mean_log_likelihood(const GaussianMixture& m, std::span<const double> samples) {
  std::vector<double> terms(m.components());
  double total = 0.0;
  for (double x : samples) {
    for (std::size_t k = 0; k < m.components(); ++k) {
      terms[k] = std::log(m.weights[k]) + log_normal_density(x, m.means[k], m.variances[k]);
    }
    total += log_sum_exp(terms);
  }
  return total / static_cast<double>(samples.size());
}

double pdf(const GaussianMixture& m, double x) {
  double p = 0.0;
  for (std::size_t k = 0; k < m.components(); ++k) {
    if (m.weights[k] <= 0.0) continue;
    p += m.weights[k] * std::exp(log_normal_density(x, m.means[k], m.variances[k]));
  }
  return p;
}

EmResult fit_gmm_em(std::span<const double> samples, const EmOptions& options) {
  const std::size_t k = options.components;
  if (k == 0) fail(ErrorCode::kInvalidParameter, "fit_gmm: component count must be positive");
  if (!(options.tol > 0.0)) fail(ErrorCode::kInvalidParameter, "fit_gmm: tolerance must be positive");
  if (options.max_iter == 0) fail(ErrorCode::kInvalidParameter, "fit_gmm: max_iter must be positive");
  if (samples.size() < 2 * k) {
    fail(ErrorCode::kInsufficientData, "fit_gmm: " + std::to_string(samples.size()) + " samples for " +
                                           std::to_string(k) + " components");
  }
  const std::size_t n = samples.size();

  // Quantile-chunk initialization.
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  GaussianMixture m;
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t lo = c * n / k;
    const std::size_t hi = (c + 1) * n / k;
    const double count = static_cast<double>(hi - lo);
    const double mean = std::accumulate(sorted.begin() + lo, sorted.begin() + hi, 0.0) / count;
    double var = 0.0;
    for (std::size_t i = lo; i < hi; ++i) var += (sorted[i] - mean) * (sorted[i] - mean);
    m.weights.push_back(1.0 / static_cast<double>(k));
    m.means.push_back(mean);
    m.variances.push_back(std::max(var / count, kVarianceFloor));
  }

  EmResult result;
  std::vector<double> resp(n * k);
  std::vector<double> terms(k);
  double prev = mean_log_likelihood(m, samples);
  result.log_likelihood.push_back(prev);
  for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
    // E-step.
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < k; ++c) {
        terms[c] = m.weights[c] > 0.0
                       ? std::log(m.weights[c]) + log_normal_density(samples[i], m.means[c], m.variances[c])
                       : -INFINITY;
      }
      const double norm = log_sum_exp(terms);
      for (std::size_t c = 0; c < k; ++c) resp[i * k + c] = std::exp(terms[c] - norm);
    }
    // M-step.
    for (std::size_t c = 0; c < k; ++c) {
      double nk = 0.0;
      double sx = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        nk += resp[i * k + c];
        sx += resp[i * k + c] * samples[i];
      }
      if (nk <= 0.0) {
        m.weights[c] = 0.0;
        continue;
      }
      const double mean = sx / nk;
      double sv = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = samples[i] - mean;
        sv += resp[i * k + c] * d * d;
      }
      m.weights[c] = nk / static_cast<double>(n);
      m.means[c] = mean;
      m.variances[c] = std::max(sv / nk, kVarianceFloor);
    }
    const double wsum = std::accumulate(m.weights.begin(), m.weights.end(), 0.0);
    for (double& w : m.weights) w /= wsum;

    const double ll = mean_log_likelihood(m, samples);
    result.log_likelihood.push_back(ll);
    result.iterations = iter + 1;
    if (std::abs(ll - prev) < options.tol) {
      result.converged = true;
      break;
    }
    prev = ll;
  }
  result.mixture = std::move(m);
  return result;
}

GaussianMixture fit_gmm(std::span<const double> samples, std::size_t k, double tol,
                        std::size_t max_iter, std::uint64_t seed) {
  return fit_gmm_em(samples, EmOptions{k, tol, max_iter, seed}).mixture;
}

PriorModel fit_priors(std::span<const Scene> scenes, const EmOptions& options) {
  const PairSamples samples = collect_pair_stats(scenes);
  return PriorModel{fit_gmm_em(samples.wv, options).mixture, fit_gmm_em(samples.ww, options).mixture};
}

double pair_prior_density(const BoundingBox& a, const BoundingBox& b, const Scene& scene,
                          const PriorModel& priors) {
  if (a.is_vehicle() && b.is_vehicle()) return 0.0;
  std::optional<double> lr;
  const GaussianMixture* mix = nullptr;
  if (a.is_wheel() && b.is_wheel()) {
    auto [rear, front] = rear_front(a, b);
    lr = pair_log_ratio(*rear, *front, scene.width, scene.height);
    mix = &priors.ww;
  } else {
    const BoundingBox& vehicle = a.is_vehicle() ? a : b;
    const BoundingBox& wheel = a.is_vehicle() ? b : a;
    lr = pair_log_ratio(vehicle, wheel, scene.width, scene.height);
    mix = &priors.wv;
  }
  if (!lr) return 0.0;
  return pdf(*mix, *lr);
}

Matrix init_adjacency(const Scene& scene, const PriorModel& priors) {
  const std::size_t n = scene.boxes.size();
  Matrix adj(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = pair_prior_density(scene.boxes[i], scene.boxes[j], scene, priors);
      adj(i, j) = p;
      adj(j, i) = p;
    }
  }
  std::vector<double> row_max(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) row_max[i] = std::max(row_max[i], adj(i, j));
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) {
        adj(i, j) = 1.0;
      } else if (adj(i, j) > 0.0) {
        adj(i, j) = std::min(1.0, adj(i, j) / (std::sqrt(row_max[i]) * std::sqrt(row_max[j])));
      }
    }
  }
  return adj;
}

namespace {

constexpr const char* kPriorMagic = "ownerrel-priors";
constexpr int kPriorVersion = 1;

void write_mixture(std::ostream& out, const char* tag, const GaussianMixture& m) {
  for (std::size_t c = 0; c < m.components(); ++c) {
    out << tag << ' ' << format_double(m.weights[c]) << ' ' << format_double(m.means[c]) << ' '
        << format_double(m.variances[c]) << '\n';
  }
}

}  // namespace

void write_priors(std::ostream& out, const PriorModel& priors) {
  if (priors.wv.components() != priors.ww.components()) {
    fail(ErrorCode::kInvalidParameter, "write_priors: both mixtures must share K");
  }
  out << kPriorMagic << ' ' << kPriorVersion << ' ' << priors.wv.components() << '\n';
  write_mixture(out, "wv", priors.wv);
  write_mixture(out, "ww", priors.ww);
}

PriorModel read_priors(std::istream& in) {
  std::string magic;
  int version = 0;
  std::size_t k = 0;
  if (!(in >> magic >> version >> k) || magic != kPriorMagic) fail(ErrorCode::kFormat, "priors: missing header");
  if (version != kPriorVersion) fail(ErrorCode::kFormat, "priors: unsupported version " + std::to_string(version));
  if (k == 0) fail(ErrorCode::kFormat, "priors: K must be positive");
  PriorModel priors;
  for (std::size_t line = 0; line < 2 * k; ++line) {
    std::string tag, w, mu, var;
    if (!(in >> tag >> w >> mu >> var)) fail(ErrorCode::kFormat, "priors: truncated component list");
    GaussianMixture* m = tag == "wv" ? &priors.wv : tag == "ww" ? &priors.ww : nullptr;
    if (!m) fail(ErrorCode::kFormat, "priors: unknown mixture tag '" + tag + "'");
    m->weights.push_back(parse_double(w));
    m->means.push_back(parse_double(mu));
    m->variances.push_back(parse_double(var));
  }
  if (priors.wv.components() != k || priors.ww.components() != k) {
    fail(ErrorCode::kFormat, "priors: expected " + std::to_string(k) + " components per mixture");
  }
  priors.wv.validate();
  priors.ww.validate();
  return priors;
}

}  // namespace ownerrel
