#include "epicpt/sir_core.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>

namespace epicpt {

void warn(const std::string& message) { std::cerr << "warning: " << message << '\n'; }

// ---------------------------------------------------------------------------
// ObservationGrid

ObservationGrid::ObservationGrid(std::vector<double> times) : times_(std::move(times)) {
  if (times_.size() < 2) throw std::invalid_argument("observation grid needs at least two times");
  for (std::size_t k = 0; k < times_.size(); ++k) {
    if (!std::isfinite(times_[k])) throw std::invalid_argument("observation grid times must be finite");
    if (k > 0 && !(times_[k] > times_[k - 1]))
      throw std::invalid_argument("observation grid times must be strictly increasing");
  }
}

ObservationGrid ObservationGrid::uniform(double t0, double step, std::size_t intervals) {
  if (!(step > 0.0)) throw std::invalid_argument("grid step must be positive");
  std::vector<double> times(intervals + 1);
  for (std::size_t k = 0; k <= intervals; ++k) times[k] = t0 + step * static_cast<double>(k);
  return ObservationGrid(std::move(times));
}

std::size_t ObservationGrid::interval_of(double t) const {
  if (!(t > start()) || t > end()) throw std::domain_error("time outside (t_0, t_K]");
  // first t_k >= t
  auto it = std::lower_bound(times_.begin(), times_.end(), t);
  return static_cast<std::size_t>(it - times_.begin());
}

long IncidenceSeries::total() const { return std::accumulate(counts.begin(), counts.end(), 0L); }

void validate_incidence(const IncidenceSeries& obs, const ObservationGrid& grid, long s0) {
  if (obs.size() != grid.intervals()) {
    std::ostringstream msg;
    msg << "incidence has " << obs.size() << " counts but the grid has " << grid.intervals() << " intervals";
    throw ValidationError(msg.str());
  }
  for (long c : obs.counts)
    if (c < 0) throw ValidationError("incidence counts must be non-negative");
  if (obs.total() > s0) {
    std::ostringstream msg;
    msg << "total incidence " << obs.total() << " exceeds the initial susceptible count " << s0;
    throw ValidationError(msg.str());
  }
}

// ---------------------------------------------------------------------------
// ChangePointVector

ChangePointVector::ChangePointVector(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
  for (auto b : bits_)
    if (b > 1) throw std::invalid_argument("change-point indicators must be 0 or 1");
}

ChangePointVector ChangePointVector::parse(std::string_view bits) {
  std::vector<std::uint8_t> out;
  out.reserve(bits.size());
  for (char c : bits) {
    if (c != '0' && c != '1') throw std::invalid_argument("change-point bitstring may only contain '0' and '1'");
    out.push_back(c == '1' ? 1 : 0);
  }
  return ChangePointVector(std::move(out));
}

std::size_t ChangePointVector::popcount() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::string ChangePointVector::to_string() const {
  std::string s;
  s.reserve(bits_.size());
  for (auto b : bits_) s.push_back(b ? '1' : '0');
  return s;
}

std::vector<std::size_t> ChangePointVector::segment_of_interval() const {
  std::vector<std::size_t> seg(bits_.size() + 2, 0);
  // interval 1 is in segment 0; interval k+1 starts a new segment when bit k-1 is set
  for (std::size_t k = 2; k < seg.size(); ++k) seg[k] = seg[k - 1] + bits_[k - 2];
  return seg;
}

// ---------------------------------------------------------------------------
// TransmissionRate

TransmissionRate::TransmissionRate(double t_start, double t_end, std::vector<double> change_points,
                                   std::vector<double> values)
    : t_start_(t_start), t_end_(t_end), change_points_(std::move(change_points)), values_(std::move(values)) {
  if (!(t_end_ > t_start_)) throw std::invalid_argument("rate window must have positive length");
  if (values_.size() != change_points_.size() + 1)
    throw std::invalid_argument("a rate with J change points needs J+1 values");
  for (double v : values_)
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("transmission rate values must be positive");
  for (std::size_t j = 0; j < change_points_.size(); ++j) {
    double c = change_points_[j];
    if (!(c > t_start_) || !(c < t_end_)) throw std::invalid_argument("change points must lie inside the window");
    if (j > 0 && !(c > change_points_[j - 1]))
      throw std::invalid_argument("change points must be strictly increasing");
  }
}

double rate_at(const TransmissionRate& rate, double t) {
  if (!(t >= rate.start()) || !(t <= rate.end())) throw std::domain_error("time outside the observation window");
  auto cps = rate.change_points();
  // number of change points <= t (right-continuous)
  auto segment = static_cast<std::size_t>(std::upper_bound(cps.begin(), cps.end(), t) - cps.begin());
  return rate.values()[segment];
}

TransmissionRate segments_from_indicators(const ChangePointVector& delta, const ObservationGrid& grid,
                                          std::span<const double> values) {
  if (delta.size() + 1 != grid.intervals())
    throw std::invalid_argument("indicator vector must have K-1 entries");
  if (values.size() != delta.popcount() + 1)
    throw std::invalid_argument("number of segment values must equal popcount(delta) + 1");
  std::vector<double> cps;
  for (std::size_t p = 0; p < delta.size(); ++p)
    if (delta[p]) cps.push_back(grid[p + 1]);
  return TransmissionRate(grid.start(), grid.end(), std::move(cps), {values.begin(), values.end()});
}

std::vector<double> expand_to_intervals(const ChangePointVector& delta, std::span<const double> values) {
  if (values.size() != delta.popcount() + 1)
    throw std::invalid_argument("number of segment values must equal popcount(delta) + 1");
  std::vector<double> out(delta.size() + 1);
  std::size_t seg = 0;
  out[0] = values[0];
  for (std::size_t p = 0; p < delta.size(); ++p) {
    seg += delta[p] ? 1 : 0;
    out[p + 1] = values[seg];
  }
  return out;
}

std::vector<double> rate_per_interval(const TransmissionRate& rate, const ObservationGrid& grid) {
  std::vector<double> out(grid.intervals());
  // beta is constant on [t_{k-1}, t_k) when change points are grid times
  for (std::size_t k = 1; k <= grid.intervals(); ++k) out[k - 1] = rate_at(rate, grid[k - 1]);
  return out;
}

// ---------------------------------------------------------------------------
// LatentTrajectory

namespace {

std::vector<Event> collect_events(std::span<const double> infections, std::span<const double> removals) {
  std::vector<Event> events;
  events.reserve(infections.size() + removals.size());
  for (double t : infections) events.push_back({t, EventKind::infection});
  for (double t : removals)
    if (std::isfinite(t)) events.push_back({t, EventKind::removal});
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.time < b.time; });
  return events;
}

}  // namespace

LatentTrajectory LatentTrajectory::unchecked(InitialCounts initial, double t0, std::vector<double> infection_times,
                                             std::vector<double> removal_times) {
  LatentTrajectory x;
  x.initial_ = initial;
  x.t0_ = t0;
  x.infection_times_ = std::move(infection_times);
  x.removal_times_ = std::move(removal_times);
  return x;
}

LatentTrajectory::LatentTrajectory(InitialCounts initial, double t0, std::vector<double> infection_times,
                                   std::vector<double> removal_times)
    : initial_(initial), t0_(t0), infection_times_(std::move(infection_times)), removal_times_(std::move(removal_times)) {
  if (auto problem = check()) throw InvariantError(*problem);
}

LatentTrajectory LatentTrajectory::from_events(InitialCounts initial, double t0, std::vector<Event> events) {
  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.time < b.time; });
  bool tied = false;
  for (std::size_t e = 1; e < events.size(); ++e) {
    if (events[e].time <= events[e - 1].time) {
      events[e].time = std::nextafter(events[e - 1].time, std::numeric_limits<double>::infinity());
      tied = true;
    }
  }
  if (tied) warn("exact event-time ties were split by the smallest representable increment");

  std::vector<double> infections;
  std::vector<double> removals(static_cast<std::size_t>(std::max(initial.i0, 0L)),
                               std::numeric_limits<double>::infinity());
  std::deque<std::size_t> infectious;
  for (std::size_t i = 0; i < removals.size(); ++i) infectious.push_back(i);
  for (const Event& ev : events) {
    if (ev.kind == EventKind::infection) {
      infections.push_back(ev.time);
      removals.push_back(std::numeric_limits<double>::infinity());
      infectious.push_back(removals.size() - 1);
    } else {
      if (infectious.empty()) throw InvariantError("removal event with no infectious individual");
      removals[infectious.front()] = ev.time;
      infectious.pop_front();
    }
  }
  return LatentTrajectory(initial, t0, std::move(infections), std::move(removals));
}

std::vector<Event> LatentTrajectory::events() const { return collect_events(infection_times_, removal_times_); }

std::optional<std::string> LatentTrajectory::check() const {
  if (initial_.s0 < 0 || initial_.i0 < 0 || initial_.r0 < 0) return "initial counts must be non-negative";
  const auto n_inf = infection_times_.size();
  if (static_cast<long>(n_inf) > initial_.s0) return "more infections than initial susceptibles";
  if (removal_times_.size() != static_cast<std::size_t>(initial_.i0) + n_inf)
    return "removal times must cover every initial and new infective";
  const auto i0 = static_cast<std::size_t>(initial_.i0);
  for (std::size_t j = 0; j < n_inf; ++j) {
    double t = infection_times_[j];
    if (!std::isfinite(t) || !(t > t0_)) return "infection times must be finite and after t_0";
    if (!(removal_times_[i0 + j] > t)) return "an individual is removed before being infected";
  }
  for (std::size_t i = 0; i < i0; ++i)
    if (!(removal_times_[i] > t0_)) return "initial infective removed before t_0";

  auto events = collect_events(infection_times_, removal_times_);
  long s = initial_.s0;
  long inf = initial_.i0;
  for (std::size_t e = 0; e < events.size(); ++e) {
    if (e > 0 && events[e].time == events[e - 1].time) return "exact event-time ties are not allowed";
    if (events[e].kind == EventKind::infection) {
      if (s < 1 || inf < 1) return "infection event without a susceptible and an infective";
      --s;
      ++inf;
    } else {
      if (inf < 1) return "removal event with no infective";
      --inf;
    }
  }
  return std::nullopt;
}

Compartments compartments_at(const LatentTrajectory& x, double t) {
  if (auto problem = x.check()) throw InvariantError(*problem);
  long n_inf = std::count_if(x.infection_times().begin(), x.infection_times().end(), [t](double v) { return v <= t; });
  long n_rem = std::count_if(x.removal_times().begin(), x.removal_times().end(), [t](double v) { return v <= t; });
  const auto& init = x.initial();
  return {init.s0 - n_inf, init.i0 + n_inf - n_rem, init.r0 + n_rem};
}

// ---------------------------------------------------------------------------
// Sufficient statistics

long IntervalStats::total_removals() const { return std::accumulate(removals.begin(), removals.end(), 0L); }

double IntervalStats::total_int_i() const { return std::accumulate(int_i.begin(), int_i.end(), 0.0); }

IntervalStats sweep_interval_stats(std::span<const Event> sorted_events, const InitialCounts& initial,
                                   const ObservationGrid& grid) {
  const std::size_t K = grid.intervals();
  IntervalStats st(K);
  auto s = static_cast<double>(initial.s0);
  auto inf = static_cast<double>(initial.i0);
  double last = grid.start();
  std::size_t k = 1;

  auto advance_to = [&](double t) {
    while (k <= K && t > grid[k]) {
      double dt = grid[k] - last;
      st.int_si[k - 1] += s * inf * dt;
      st.int_i[k - 1] += inf * dt;
      last = grid[k];
      ++k;
    }
    if (k <= K) {
      double dt = t - last;
      st.int_si[k - 1] += s * inf * dt;
      st.int_i[k - 1] += inf * dt;
      last = t;
    }
  };

  for (const Event& ev : sorted_events) {
    if (ev.time > grid.end()) break;
    if (!(ev.time > grid.start())) {
      st.feasible = false;
      return st;
    }
    advance_to(ev.time);
    if (ev.kind == EventKind::infection) {
      if (s < 1.0 || inf < 1.0) {
        st.feasible = false;
        return st;
      }
      st.sum_log_i[k - 1] += std::log(inf);
      st.infections[k - 1] += 1;
      s -= 1.0;
      inf += 1.0;
    } else {
      if (inf < 1.0) {
        st.feasible = false;
        return st;
      }
      st.removals[k - 1] += 1;
      inf -= 1.0;
    }
  }
  advance_to(std::numeric_limits<double>::infinity());
  return st;
}

IntervalStats interval_stats(const LatentTrajectory& x, const ObservationGrid& grid) {
  if (auto problem = x.check()) throw InvariantError(*problem);
  auto events = x.events();
  return sweep_interval_stats(events, x.initial(), grid);
}

SegmentStats aggregate_segments(const IntervalStats& stats, const ChangePointVector& delta) {
  const std::size_t K = stats.infections.size();
  if (delta.size() + 1 != K) throw std::invalid_argument("indicator vector must have K-1 entries");
  if (!stats.feasible) throw InvariantError("statistics of an invalid trajectory");
  const std::size_t J = delta.segments();
  SegmentStats out;
  out.infections.assign(J, 0);
  out.int_si.assign(J, 0.0);
  out.int_i.assign(J, 0.0);
  out.sum_log_i.assign(J, 0.0);
  std::size_t seg = 0;
  for (std::size_t k = 0; k < K; ++k) {
    if (k > 0 && delta[k - 1]) ++seg;
    out.infections[seg] += stats.infections[k];
    out.int_si[seg] += stats.int_si[k];
    out.int_i[seg] += stats.int_i[k];
    out.sum_log_i[seg] += stats.sum_log_i[k];
    out.removals += stats.removals[k];
  }
  return out;
}

SegmentStats sufficient_stats(const LatentTrajectory& x, const ObservationGrid& grid, const ChangePointVector& delta) {
  return aggregate_segments(interval_stats(x, grid), delta);
}

double log_complete_likelihood(const ModelParams& params, const SegmentStats& stats) {
  auto beta = params.rate.values();
  if (beta.size() != stats.segments())
    throw std::invalid_argument("rate and statistics use different segmentations");
  if (!(params.gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
  double ll = static_cast<double>(stats.removals) * std::log(params.gamma);
  for (std::size_t k = 0; k < beta.size(); ++k) {
    ll += static_cast<double>(stats.infections[k]) * std::log(beta[k]) + stats.sum_log_i[k] -
          beta[k] * stats.int_si[k] - params.gamma * stats.int_i[k];
  }
  if (!std::isfinite(ll)) throw NumericError("complete-data log-likelihood is not finite; inconsistent trajectory");
  return ll;
}

double log_likelihood_intervals(std::span<const double> beta_per_interval, double gamma, const IntervalStats& stats) {
  if (!stats.feasible) return -std::numeric_limits<double>::infinity();
  double ll = 0.0;
  long n_r = 0;
  for (std::size_t k = 0; k < beta_per_interval.size(); ++k) {
    double b = beta_per_interval[k];
    ll += (stats.infections[k] > 0 ? static_cast<double>(stats.infections[k]) * std::log(b) : 0.0) +
          stats.sum_log_i[k] - b * stats.int_si[k] - gamma * stats.int_i[k];
    n_r += stats.removals[k];
  }
  if (n_r > 0) ll += static_cast<double>(n_r) * std::log(gamma);
  return ll;
}

std::vector<double> effective_R(const ModelParams& params, const LatentTrajectory& x, const ObservationGrid& grid) {
  std::vector<double> out(grid.intervals() + 1);
  for (std::size_t k = 0; k <= grid.intervals(); ++k) {
    auto c = compartments_at(x, grid[k]);
    out[k] = rate_at(params.rate, grid[k]) * static_cast<double>(c.s) / params.gamma;
  }
  return out;
}

}  // namespace epicpt
