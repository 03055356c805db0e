#include "epicpt/simulate.hpp"

#include <algorithm>
#include <limits>

#include <unsupported/Eigen/Splines>

namespace epicpt {

namespace {

constexpr int kSplineDegree = 3;
using CubicSpline = Eigen::Spline<double, 1, kSplineDegree>;

// Active infectives as a bag with O(1) uniform removal.
class InfectiveBag {
 public:
  void add(std::size_t id) { ids_.push_back(id); }
  std::size_t size() const { return ids_.size(); }
  std::size_t take_uniform(Rng& rng) {
    auto pos = static_cast<std::size_t>(uniform_open(rng) * static_cast<double>(ids_.size()));
    pos = std::min(pos, ids_.size() - 1);
    std::size_t id = ids_[pos];
    ids_[pos] = ids_.back();
    ids_.pop_back();
    return id;
  }

 private:
  std::vector<std::size_t> ids_;
};

struct Bookkeeping {
  long s;
  std::vector<double> infections;
  std::vector<double> removals;
  InfectiveBag active;

  explicit Bookkeeping(const InitialCounts& init) : s(init.s0) {
    removals.assign(static_cast<std::size_t>(init.i0), std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < removals.size(); ++i) active.add(i);
  }

  long infectious() const { return static_cast<long>(active.size()); }

  void infect(double t) {
    --s;
    infections.push_back(t);
    removals.push_back(std::numeric_limits<double>::infinity());
    active.add(removals.size() - 1);
  }

  void remove(double t, Rng& rng) { removals[active.take_uniform(rng)] = t; }
};

SimResult finish(const SimConfig& config, Bookkeeping&& book, bool extinct, double t) {
  SimResult out{LatentTrajectory(config.initial, config.t_start, std::move(book.infections), std::move(book.removals)),
                extinct, extinct ? t : 0.0};
  return out;
}

SimResult simulate_piecewise(const SimConfig& config, const TransmissionRate& rate, Rng& rng) {
  Bookkeeping book(config.initial);
  double t = config.t_start;
  auto cps = rate.change_points();
  while (true) {
    if (book.infectious() == 0) return finish(config, std::move(book), true, t);
    // next clock reset: first change point strictly after t, or the horizon
    auto it = std::upper_bound(cps.begin(), cps.end(), t);
    double next_break = (it == cps.end()) ? config.t_end : std::min(*it, config.t_end);
    double beta = rate.values()[static_cast<std::size_t>(it - cps.begin())];
    auto si = static_cast<double>(book.s) * static_cast<double>(book.infectious());
    double infection_rate = beta * si;
    double total = infection_rate + config.gamma * static_cast<double>(book.infectious());
    double dt = draw_exponential(rng, total);
    if (t + dt > next_break) {
      t = next_break;
      if (t >= config.t_end) break;
      continue;
    }
    t += dt;
    if (uniform_open(rng) * total < infection_rate)
      book.infect(t);
    else
      book.remove(t, rng);
  }
  return finish(config, std::move(book), false, t);
}

SimResult simulate_thinned(const SimConfig& config, const SmoothRate& rate, Rng& rng) {
  Bookkeeping book(config.initial);
  double t = config.t_start;
  const double envelope = rate.envelope();
  while (true) {
    if (book.infectious() == 0) return finish(config, std::move(book), true, t);
    auto si = static_cast<double>(book.s) * static_cast<double>(book.infectious());
    double removal_rate = config.gamma * static_cast<double>(book.infectious());
    double bound = envelope * si + removal_rate;
    t += draw_exponential(rng, bound);
    if (t > config.t_end) break;
    double u = uniform_open(rng) * bound;
    double infection_rate = rate(t) * si;
    if (u < infection_rate)
      book.infect(t);
    else if (u < infection_rate + removal_rate)
      book.remove(t, rng);
  }
  return finish(config, std::move(book), false, t);
}

}  // namespace

SmoothRate::SmoothRate(double t_start, double t_end, std::vector<double> interior_knots, Eigen::VectorXd coefficients)
    : t_start_(t_start), t_end_(t_end), interior_(std::move(interior_knots)), coefficients_(std::move(coefficients)) {
  if (!(t_end_ > t_start_)) throw std::invalid_argument("spline window must have positive length");
  for (std::size_t j = 0; j < interior_.size(); ++j) {
    if (!(interior_[j] > t_start_) || !(interior_[j] < t_end_))
      throw std::invalid_argument("spline cut-points must lie inside the window");
    if (j > 0 && !(interior_[j] > interior_[j - 1]))
      throw std::invalid_argument("spline cut-points must be strictly increasing");
  }
  const auto n_coef = static_cast<Eigen::Index>(interior_.size()) + kSplineDegree + 1;
  if (coefficients_.size() != n_coef) throw std::invalid_argument("cubic spline needs cut-points + 4 coefficients");
  if ((coefficients_.array() <= 0.0).any()) throw std::invalid_argument("spline coefficients must be positive");

  knots_.resize(n_coef + kSplineDegree + 1);
  Eigen::Index pos = 0;
  for (int r = 0; r <= kSplineDegree; ++r) knots_[pos++] = t_start_;
  for (double c : interior_) knots_[pos++] = c;
  for (int r = 0; r <= kSplineDegree; ++r) knots_[pos++] = t_end_;
  envelope_ = coefficients_.maxCoeff();
}

double SmoothRate::operator()(double t) const {
  if (!(t >= t_start_) || !(t <= t_end_)) throw std::domain_error("time outside the spline window");
  CubicSpline spline(knots_, coefficients_.transpose());
  return spline(t)(0);
}

SimResult simulate_sir(const SimConfig& config, Rng& rng) {
  if (config.initial.s0 < 0 || config.initial.i0 < 1) throw std::invalid_argument("need s0 >= 0 and i0 >= 1");
  if (!(config.t_end > config.t_start)) throw std::invalid_argument("t_end must be after t_start");
  if (!(config.gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
  if (const auto* pw = std::get_if<TransmissionRate>(&config.rate)) return simulate_piecewise(config, *pw, rng);
  return simulate_thinned(config, std::get<SmoothRate>(config.rate), rng);
}

IncidenceSeries aggregate_incidence(const LatentTrajectory& x, const ObservationGrid& grid) {
  IncidenceSeries out{std::vector<long>(grid.intervals(), 0)};
  for (double t : x.infection_times())
    if (t > grid.start() && t <= grid.end()) ++out.counts[grid.interval_of(t) - 1];
  return out;
}

Scenario setting_one() {
  auto grid = ObservationGrid::uniform(0.0, 1.0, 12);
  TransmissionRate rate(0.0, 12.0, {3.0, 10.0}, {1.75e-4, 1.25e-4, 0.75e-4});
  return {{10000, 10, 0}, std::move(grid), std::move(rate), 1.0};
}

Scenario setting_two() {
  auto grid = ObservationGrid::uniform(0.0, 1.0, 12);
  Eigen::VectorXd coef(14);
  coef << 1.75, 1.75, 1.75, 1.65, 1.5, 1.35, 1.25, 1.25, 1.2, 1.05, 0.9, 0.8, 0.75, 0.75;
  SmoothRate rate(0.0, 12.0, {2.0, 2.5, 3.0, 3.5, 4.0, 9.0, 9.5, 10.0, 10.5, 11.0}, coef * 1e-4);
  return {{10000, 10, 0}, std::move(grid), std::move(rate), 1.0};
}

}  // namespace epicpt
