#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "epicpt/mcmc.hpp"

namespace epicpt {

/// Chains from identical configs with distinct seeds. Throws
/// std::invalid_argument when lengths or grids differ.
class ChainSet {
 public:
  explicit ChainSet(std::vector<PosteriorSamples> chains);

  std::size_t size() const { return chains_.size(); }
  std::size_t draws() const { return chains_.front().draws(); }
  std::size_t intervals() const { return chains_.front().grid.intervals(); }
  const PosteriorSamples& operator[](std::size_t c) const { return chains_[c]; }
  const std::vector<PosteriorSamples>& chains() const { return chains_; }

  /// Per-interval beta of all chains stacked (draws * chains x K).
  Eigen::MatrixXd pooled_beta() const;
  Eigen::VectorXd pooled(const Eigen::VectorXd PosteriorSamples::*column) const;

 private:
  std::vector<PosteriorSamples> chains_;
};

/// Pooled frequency of Delta_t = 1 per interior observation time.
std::vector<double> changepoint_marginals(const ChainSet& chains);

struct EssResult {
  double value = 0.0;
  bool degenerate = false;  // constant series
};

/// Effective sample size by Geyer's initial monotone sequence, capped at the
/// series length. Throws std::invalid_argument for fewer than 10 values.
EssResult ess(const Eigen::Ref<const Eigen::VectorXd>& series);

/// Univariate potential scale reduction, sqrt(((n-1)/n W + B/n) / W).
/// One series per chain, equal lengths.
double psrf(std::span<const Eigen::VectorXd> chains);

struct Mpsrf {
  double value = 0.0;
  std::vector<double> univariate;
  /// Within-chain covariance was singular in directions where the chains
  /// disagree, so `value` is the largest univariate factor.
  bool fallback = false;
};

/// Brooks-Gelman multivariate factor (n-1)/n + (m+1)/m lambda_max(W^-1 B/n).
/// Directions with no within-chain spread are dropped first; this covers
/// per-interval beta columns that always share a segment.
Mpsrf mpsrf(std::span<const Eigen::MatrixXd> chains);

/// Multivariate factor over the per-interval beta columns, plus gamma when it
/// varies. Needs at least two chains.
Mpsrf gelman_rubin(const ChainSet& chains);

/// Linear interpolation between order statistics (R type 7).
double quantile(std::vector<double> values, double p);

struct CredibleInterval {
  double lower = 0.0;
  double upper = 0.0;
};

CredibleInterval credible_interval(const Eigen::Ref<const Eigen::VectorXd>& series, double level);

struct PredictiveBand {
  double level = 0.95;
  std::vector<double> lower;
  std::vector<double> mean;
  std::vector<double> upper;
};

/// Simulated incidence (draws x K): each row picks a retained draw at random,
/// simulates the epidemic under its piecewise rate and gamma, and aggregates.
Eigen::MatrixXd predictive_incidence(const ChainSet& chains, const InitialCounts& initial, std::size_t draws,
                                     Rng& rng);

PredictiveBand predictive_band(const Eigen::MatrixXd& incidence, double level);

/// Band of new cases per interval; draws must be at least 100.
PredictiveBand posterior_predictive(const ChainSet& chains, const InitialCounts& initial, std::size_t draws,
                                    double level, Rng& rng);

/// R(t_k) = beta(t_k) S(t_k) / gamma per draw at t_0..t_{K-1}, with S taken
/// from the observed counts (pooled draws x K).
Eigen::MatrixXd effective_r_draws(const ChainSet& chains, const IncidenceSeries& obs, long s0);

}  // namespace epicpt
