#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "ownerrel/geometry.hpp"
#include "ownerrel/matrix.hpp"

namespace ownerrel {

// One-dimensional K-component Gaussian mixture.
struct GaussianMixture {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> variances;

  std::size_t components() const { return weights.size(); }
  // Throws kInvalidParameter unless weights sum to 1 and variances are positive.
  void validate() const;

  friend bool operator==(const GaussianMixture&, const GaussianMixture&) = default;
};

// Mixtures over log distance ratios of wheel-vehicle and wheel-wheel pairs.
struct PriorModel {
  GaussianMixture wv;
  GaussianMixture ww;

  friend bool operator==(const PriorModel&, const PriorModel&) = default;
};

struct PairSamples {
  std::vector<double> wv;
  std::vector<double> ww;
};

// Log ratios of every ground-truth pair. Wheel-vehicle pairs use A = vehicle,
// B = wheel; couples use A = rear wheel, B = front wheel. Coincident centers
// are skipped.
PairSamples collect_pair_stats(std::span<const Scene> scenes);

struct EmOptions {
  std::size_t components = 2;
  double tol = 1e-6;
  std::size_t max_iter = 200;
  std::uint64_t seed = 0;
};

constexpr double kVarianceFloor = 1e-6;

struct EmResult {
  GaussianMixture mixture;
  // Mean log-likelihood at initialization, then after each EM iteration.
  std::vector<double> log_likelihood;
  std::size_t iterations = 0;
  bool converged = false;
};

// EM initialized by splitting the sorted samples into K equal quantile
// chunks; deterministic.
EmResult fit_gmm_em(std::span<const double> samples, const EmOptions& options);
GaussianMixture fit_gmm(std::span<const double> samples, std::size_t k, double tol,
                        std::size_t max_iter, std::uint64_t seed);

double pdf(const GaussianMixture& m, double x);
double mean_log_likelihood(const GaussianMixture& m, std::span<const double> samples);

PriorModel fit_priors(std::span<const Scene> scenes, const EmOptions& options);

// N×N prior adjacency: unit diagonal, mixture densities on wheel-vehicle and
// wheel-wheel entries, zero on vehicle-vehicle entries. Off-diagonal entries
// are scaled by 1/sqrt(m_i·m_j), m_i being row i's largest off-diagonal raw
// density, which keeps the matrix symmetric and in [0, 1].
Matrix init_adjacency(const Scene& scene, const PriorModel& priors);

// Raw mixture density for one box pair (before normalization), 0 when the
// pair is vehicle-vehicle or has coincident centers.
double pair_prior_density(const BoundingBox& a, const BoundingBox& b, const Scene& scene,
                          const PriorModel& priors);

void write_priors(std::ostream& out, const PriorModel& priors);
PriorModel read_priors(std::istream& in);

}  // namespace ownerrel
