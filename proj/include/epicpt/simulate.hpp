#pragma once

#include <variant>
#include <vector>

#include <Eigen/Core>

#include "epicpt/random.hpp"
#include "epicpt/sir_core.hpp"

namespace epicpt {

/// Smooth positive beta(t): a clamped cubic B-spline.
class SmoothRate {
 public:
  /// `interior_knots` are the cut-points; the spline is clamped at t_start and
  /// t_end and needs interior_knots.size() + 4 coefficients, all positive.
  SmoothRate(double t_start, double t_end, std::vector<double> interior_knots, Eigen::VectorXd coefficients);

  double operator()(double t) const;
  /// Upper bound of beta on the window (largest coefficient; B-splines form a
  /// partition of unity).
  double envelope() const { return envelope_; }
  double start() const { return t_start_; }
  double end() const { return t_end_; }
  std::span<const double> interior_knots() const { return interior_; }
  const Eigen::VectorXd& coefficients() const { return coefficients_; }

 private:
  double t_start_;
  double t_end_;
  std::vector<double> interior_;
  Eigen::VectorXd knots_;
  Eigen::VectorXd coefficients_;
  double envelope_;
};

using RateFunction = std::variant<TransmissionRate, SmoothRate>;

struct SimConfig {
  InitialCounts initial;
  RateFunction rate;
  double gamma = 1.0;
  double t_start = 0.0;
  double t_end = 1.0;
};

struct SimResult {
  LatentTrajectory trajectory;
  /// I reached zero before t_end.
  bool extinct = false;
  double extinction_time = 0.0;
};

/// Exact event-driven simulation of the time-inhomogeneous SIR. Piecewise
/// rates redraw the clocks at each change point; smooth rates use thinning
/// against `SmoothRate::envelope()`.
SimResult simulate_sir(const SimConfig& config, Rng& rng);

IncidenceSeries aggregate_incidence(const LatentTrajectory& x, const ObservationGrid& grid);

/// Weekly Setting-1 truth: beta = (1.75, 1.25, 0.75) x 1e-4 with changes at
/// weeks 3 and 10, gamma = 1, S0 = 10000, I0 = 10, twelve weekly intervals.
struct Scenario {
  InitialCounts initial;
  ObservationGrid grid;
  RateFunction rate;
  double gamma;
};

Scenario setting_one();

/// Smooth counterpart with cut-points 2, 2.5, 3, 3.5, 4, 9, 9.5, 10, 10.5, 11.
Scenario setting_two();

}  // namespace epicpt
