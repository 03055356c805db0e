#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "epicpt/errors.hpp"

namespace epicpt {

/// Observation times t_0 < t_1 < ... < t_K. Interval k (1-based) is (t_{k-1}, t_k].
class ObservationGrid {
 public:
  explicit ObservationGrid(std::vector<double> times);

  static ObservationGrid uniform(double t0, double step, std::size_t intervals);

  std::size_t intervals() const { return times_.size() - 1; }
  double start() const { return times_.front(); }
  double end() const { return times_.back(); }
  double operator[](std::size_t k) const { return times_[k]; }
  std::span<const double> times() const { return times_; }
  double length(std::size_t k) const { return times_[k] - times_[k - 1]; }

  /// 1-based index of the interval (t_{k-1}, t_k] holding t. Requires t in (t_0, t_K].
  std::size_t interval_of(double t) const;

  bool operator==(const ObservationGrid&) const = default;

 private:
  std::vector<double> times_;
};

/// New infections per grid interval.
struct IncidenceSeries {
  std::vector<long> counts;

  long total() const;
  std::size_t size() const { return counts.size(); }
};

/// Throws ValidationError when obs does not fit the grid or exceeds s0.
void validate_incidence(const IncidenceSeries& obs, const ObservationGrid& grid, long s0);

/// Binary indicators over the interior grid times t_1..t_{K-1}; entry p-1
/// set means a change point at t_p.
class ChangePointVector {
 public:
  ChangePointVector() = default;
  explicit ChangePointVector(std::vector<std::uint8_t> bits);

  static ChangePointVector zeros(std::size_t n) { return ChangePointVector(std::vector<std::uint8_t>(n, 0)); }
  /// Parses "0010..." (characters '0' / '1' only).
  static ChangePointVector parse(std::string_view bits);

  std::size_t size() const { return bits_.size(); }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  void set(std::size_t i, bool value) { bits_[i] = value ? 1 : 0; }
  std::size_t popcount() const;
  std::size_t segments() const { return popcount() + 1; }
  std::string to_string() const;
  std::span<const std::uint8_t> bits() const { return bits_; }

  /// Segment index (0-based) of grid interval k (1-based).
  std::vector<std::size_t> segment_of_interval() const;

  bool operator==(const ChangePointVector&) const = default;

 private:
  std::vector<std::uint8_t> bits_;
};

/// Piecewise-constant beta(t) on [t_start, t_end]; right-continuous at change points.
class TransmissionRate {
 public:
  TransmissionRate(double t_start, double t_end, std::vector<double> change_points, std::vector<double> values);

  static TransmissionRate constant(double t_start, double t_end, double value) { return {t_start, t_end, {}, {value}}; }

  std::span<const double> change_points() const { return change_points_; }
  std::span<const double> values() const { return values_; }
  double start() const { return t_start_; }
  double end() const { return t_end_; }

 private:
  double t_start_;
  double t_end_;
  std::vector<double> change_points_;
  std::vector<double> values_;
};

double rate_at(const TransmissionRate& rate, double t);

TransmissionRate segments_from_indicators(const ChangePointVector& delta, const ObservationGrid& grid,
                                          std::span<const double> values);

/// Per-interval beta (length K) from indicators and per-segment values.
std::vector<double> expand_to_intervals(const ChangePointVector& delta, std::span<const double> values);

/// Per-interval beta of a rate whose change points sit on grid times.
std::vector<double> rate_per_interval(const TransmissionRate& rate, const ObservationGrid& grid);

enum class EventKind : std::uint8_t { infection, removal };

struct Event {
  double time;
  EventKind kind;
};

struct InitialCounts {
  long s0 = 0;
  long i0 = 0;
  long r0 = 0;

  long population() const { return s0 + i0 + r0; }
};

struct Compartments {
  long s;
  long i;
  long r;

  bool operator==(const Compartments&) const = default;
};

/// Complete epidemic data, kept at the individual level: every infective has a
/// removal time, infinite when not removed. Removal i < i0 belongs to an initial
/// infective, removal i0 + j to the j-th new infection.
class LatentTrajectory {
 public:
  /// Validates; throws InvariantError.
  LatentTrajectory(InitialCounts initial, double t0, std::vector<double> infection_times,
                   std::vector<double> removal_times);

  /// Pairs removals with infectives first-in first-out. Exact time ties are
  /// split by one ulp with a warning.
  static LatentTrajectory from_events(InitialCounts initial, double t0, std::vector<Event> events);

  /// Builds without validation (proposals may be invalid SIR paths).
  static LatentTrajectory unchecked(InitialCounts initial, double t0, std::vector<double> infection_times,
                                    std::vector<double> removal_times);

  const InitialCounts& initial() const { return initial_; }
  double start() const { return t0_; }
  std::span<const double> infection_times() const { return infection_times_; }
  std::span<const double> removal_times() const { return removal_times_; }
  std::size_t infections() const { return infection_times_.size(); }
  std::size_t individuals() const { return removal_times_.size(); }

  /// Time-ordered events with finite times.
  std::vector<Event> events() const;

  /// Reason the trajectory is not a valid SIR path, if any.
  std::optional<std::string> check() const;

 private:
  LatentTrajectory() = default;

  InitialCounts initial_;
  double t0_ = 0.0;
  std::vector<double> infection_times_;
  std::vector<double> removal_times_;
};

/// Counts after replaying every event with time <= t.
Compartments compartments_at(const LatentTrajectory& x, double t);

/// Exact per-interval sufficient statistics. Multiplicities use left limits.
struct IntervalStats {
  std::vector<long> infections;
  std::vector<long> removals;
  std::vector<double> int_si;
  std::vector<double> int_i;
  std::vector<double> sum_log_i;
  bool feasible = true;

  explicit IntervalStats(std::size_t k = 0)
      : infections(k, 0), removals(k, 0), int_si(k, 0.0), int_i(k, 0.0), sum_log_i(k, 0.0) {}

  long total_removals() const;
  double total_int_i() const;
};

/// Sweep over time-sorted events; events after t_K are ignored. Sets
/// feasible = false instead of throwing on an invalid path.
IntervalStats sweep_interval_stats(std::span<const Event> sorted_events, const InitialCounts& initial,
                                   const ObservationGrid& grid);

/// Throws InvariantError on an invalid trajectory.
IntervalStats interval_stats(const LatentTrajectory& x, const ObservationGrid& grid);

struct SegmentStats {
  std::vector<long> infections;
  std::vector<double> int_si;
  std::vector<double> int_i;
  std::vector<double> sum_log_i;
  long removals = 0;

  std::size_t segments() const { return infections.size(); }
};

SegmentStats aggregate_segments(const IntervalStats& stats, const ChangePointVector& delta);

SegmentStats sufficient_stats(const LatentTrajectory& x, const ObservationGrid& grid, const ChangePointVector& delta);

struct ModelParams {
  TransmissionRate rate;
  double gamma;
};

/// n_R log(gamma) + sum_k [ n_k log(beta_k) + sum log I(tau-) - beta_k int SI - gamma int I ].
/// Throws NumericError when the result is not finite.
double log_complete_likelihood(const ModelParams& params, const SegmentStats& stats);

/// Same quantity evaluated per grid interval with per-interval beta; returns
/// -infinity for infeasible stats instead of throwing.
double log_likelihood_intervals(std::span<const double> beta_per_interval, double gamma, const IntervalStats& stats);

/// R(t_k) = beta(t_k) S(t_k) / gamma for k = 0..K.
std::vector<double> effective_R(const ModelParams& params, const LatentTrajectory& x, const ObservationGrid& grid);

}  // namespace epicpt
