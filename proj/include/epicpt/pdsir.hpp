#pragma once

#include <span>
#include <vector>

#include "epicpt/random.hpp"
#include "epicpt/sir_core.hpp"

namespace epicpt {

/// Piecewise-decoupled SIR proposal for latent event times given incidence.
///
/// Within each observation interval (t_{k-1}, t_k] the infectious count is
/// frozen at I(t_{k-1}), so every susceptible is infected at the constant rate
/// mu_k = beta_k I(t_{k-1}). Given the observed count, the infection times are
/// i.i.d. exponential with rate mu_k truncated to the interval. Every infective
/// gets an Exp(gamma) infectious period from its infection time (t_0 for the
/// initial infectives). Removal times past t_K are kept.
///
/// The kernel can redraw any subset of individuals while the others stay put;
/// individuals keep the interval they were infected in. Redrawing every
/// individual is the plain PD-SIR proposal.
class PdsirKernel {
 public:
  PdsirKernel(ObservationGrid grid, IncidenceSeries obs, InitialCounts initial);

  const ObservationGrid& grid() const { return grid_; }
  const IncidenceSeries& observed() const { return obs_; }
  const InitialCounts& initial() const { return initial_; }
  std::size_t individuals() const { return static_cast<std::size_t>(initial_.i0) + total_; }

  /// Removal counts per bucket: bucket k in 1..K holds (t_{k-1}, t_k], bucket
  /// K+1 everything after t_K.
  using Histogram = std::vector<long>;
  Histogram removal_histogram(std::span<const double> removal_times) const;

  struct Outcome {
    bool feasible = true;
    double log_q = 0.0;
  };

  /// Redraws the individuals in `selected` (ids as in LatentTrajectory,
  /// ascending) in place and updates `histogram` to the new state. Returns the
  /// log density of the new values of the selected individuals given the rest.
  /// Infeasible when an interval with positive count has no infective left at
  /// its left endpoint; the arrays are then partially overwritten.
  Outcome redraw(std::span<const double> beta_per_interval, double gamma, std::span<const std::size_t> selected,
                 std::span<double> infection_times, std::span<double> removal_times, Histogram& histogram,
                 Rng& rng) const;

  /// Log density of the selected individuals' current values given the rest,
  /// the quantity `redraw` returns for the same state. -infinity when the
  /// values are outside the proposal support.
  double log_density(std::span<const double> beta_per_interval, double gamma, std::span<const std::size_t> selected,
                     std::span<const double> infection_times, std::span<const double> removal_times,
                     const Histogram& histogram) const;

  /// Infectious count frozen for interval k (1-based).
  long decoupled_infectious(std::size_t k, const Histogram& histogram) const;

 private:
  std::size_t bucket_of(double t) const;
  double infection_log_density(double tau, std::size_t k, double mu) const;

  ObservationGrid grid_;
  IncidenceSeries obs_;
  InitialCounts initial_;
  std::size_t total_;
  std::vector<long> cumulative_;  // infections up to t_k, k = 0..K
};

struct ProposalDraw {
  LatentTrajectory trajectory;
  double log_q;
};

/// One full PD-SIR draw matching `obs` exactly. Throws ProposalInfeasible.
ProposalDraw propose_latent(const ModelParams& params, const ChangePointVector& delta, const ObservationGrid& grid,
                            const IncidenceSeries& obs, const InitialCounts& initial, Rng& rng);

/// Density `propose_latent` would record for X; -infinity when X does not
/// match `obs` or lies outside the proposal support.
double log_proposal_density(const LatentTrajectory& x, const ModelParams& params, const ChangePointVector& delta,
                            const ObservationGrid& grid, const IncidenceSeries& obs);

}  // namespace epicpt
