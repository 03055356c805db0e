#include "epicpt/pdsir.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "epicpt/simulate.hpp"

namespace epicpt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Inverse CDF of Exp(mu) truncated to (0, 1] in units of the interval length;
// a = mu * length.
double truncated_exponential_fraction(double a, double u) {
  if (a < 1e-12) return u;
  return -std::log1p(u * std::expm1(-a)) / a;
}

}  // namespace

PdsirKernel::PdsirKernel(ObservationGrid grid, IncidenceSeries obs, InitialCounts initial)
    : grid_(std::move(grid)), obs_(std::move(obs)), initial_(initial), total_(0) {
  validate_incidence(obs_, grid_, initial_.s0);
  cumulative_.assign(grid_.intervals() + 1, 0);
  for (std::size_t k = 1; k <= grid_.intervals(); ++k) cumulative_[k] = cumulative_[k - 1] + obs_.counts[k - 1];
  total_ = static_cast<std::size_t>(cumulative_.back());
}

std::size_t PdsirKernel::bucket_of(double t) const {
  if (t > grid_.end()) return grid_.intervals() + 1;
  if (!(t > grid_.start())) return 0;
  return grid_.interval_of(t);
}

PdsirKernel::Histogram PdsirKernel::removal_histogram(std::span<const double> removal_times) const {
  Histogram hist(grid_.intervals() + 2, 0);
  for (double r : removal_times) ++hist[bucket_of(r)];
  return hist;
}

long PdsirKernel::decoupled_infectious(std::size_t k, const Histogram& histogram) const {
  long removed = std::accumulate(histogram.begin(), histogram.begin() + static_cast<std::ptrdiff_t>(k), 0L);
  return initial_.i0 + cumulative_[k - 1] - removed;
}

double PdsirKernel::infection_log_density(double tau, std::size_t k, double mu) const {
  const double length = grid_.length(k);
  return std::log(mu) - mu * (tau - grid_[k - 1]) - log1mexp(mu * length);
}

PdsirKernel::Outcome PdsirKernel::redraw(std::span<const double> beta_per_interval, double gamma,
                                         std::span<const std::size_t> selected, std::span<double> infection_times,
                                         std::span<double> removal_times, Histogram& histogram, Rng& rng) const {
  const auto i0 = static_cast<std::size_t>(initial_.i0);
  const double log_gamma = std::log(gamma);
  Outcome out;

  for (std::size_t id : selected) --histogram[bucket_of(removal_times[id])];

  // (interval, id) of selected new infectives, processed in interval order
  std::vector<std::pair<std::size_t, std::size_t>> pending;
  pending.reserve(selected.size());
  for (std::size_t id : selected) {
    if (id < i0) {
      double r = grid_.start() + draw_exponential(rng, gamma);
      removal_times[id] = r;
      ++histogram[bucket_of(r)];
      out.log_q += log_gamma - gamma * (r - grid_.start());
    } else {
      pending.emplace_back(grid_.interval_of(infection_times[id - i0]), id);
    }
  }
  std::stable_sort(pending.begin(), pending.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  std::size_t summed_to = 0;  // buckets 1..summed_to are in `removed`
  long removed = histogram[0];
  for (const auto& [k, id] : pending) {
    while (summed_to + 1 < k) removed += histogram[++summed_to];
    long infectious = initial_.i0 + cumulative_[k - 1] - removed;
    if (infectious < 1) {
      out.feasible = false;
      return out;
    }
    const double lo = grid_[k - 1];
    const double hi = grid_[k];
    const double mu = beta_per_interval[k - 1] * static_cast<double>(infectious);
    double tau = lo + grid_.length(k) * truncated_exponential_fraction(mu * grid_.length(k), uniform_open(rng));
    if (!(tau > lo)) tau = std::nextafter(lo, hi);
    tau = std::min(tau, hi);
    infection_times[id - i0] = tau;
    out.log_q += infection_log_density(tau, k, mu);

    double r = tau + draw_exponential(rng, gamma);
    removal_times[id] = r;
    ++histogram[bucket_of(r)];
    out.log_q += log_gamma - gamma * (r - tau);
  }

  removed = histogram[0];
  for (std::size_t k = 1; k <= grid_.intervals(); ++k) {
    if (obs_.counts[k - 1] > 0 && initial_.i0 + cumulative_[k - 1] - removed < 1) {
      out.feasible = false;
      return out;
    }
    removed += histogram[k];
  }
  return out;
}

double PdsirKernel::log_density(std::span<const double> beta_per_interval, double gamma,
                                std::span<const std::size_t> selected, std::span<const double> infection_times,
                                std::span<const double> removal_times, const Histogram& histogram) const {
  const auto i0 = static_cast<std::size_t>(initial_.i0);
  const double log_gamma = std::log(gamma);
  // infectious count frozen per interval, computed once
  std::vector<long> frozen(grid_.intervals() + 1, 0);
  long removed = histogram[0];
  for (std::size_t k = 1; k <= grid_.intervals(); ++k) {
    frozen[k] = initial_.i0 + cumulative_[k - 1] - removed;
    removed += histogram[k];
  }

  double lq = 0.0;
  for (std::size_t id : selected) {
    double start = grid_.start();
    if (id >= i0) {
      double tau = infection_times[id - i0];
      if (!(tau > grid_.start()) || !(tau <= grid_.end())) return kNegInf;
      std::size_t k = grid_.interval_of(tau);
      if (frozen[k] < 1) return kNegInf;
      lq += infection_log_density(tau, k, beta_per_interval[k - 1] * static_cast<double>(frozen[k]));
      start = tau;
    }
    double r = removal_times[id];
    if (!std::isfinite(r) || !(r > start)) return kNegInf;
    lq += log_gamma - gamma * (r - start);
  }
  return lq;
}

namespace {

std::vector<double> checked_rate(const ModelParams& params, const ChangePointVector& delta,
                                 const ObservationGrid& grid) {
  auto expected = segments_from_indicators(delta, grid, params.rate.values());
  auto a = expected.change_points();
  auto b = params.rate.change_points();
  if (!std::equal(a.begin(), a.end(), b.begin(), b.end()))
    throw std::invalid_argument("rate change points do not match the indicator vector");
  if (!(params.gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
  return rate_per_interval(params.rate, grid);
}

std::vector<std::size_t> all_ids(std::size_t n) {
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  return ids;
}

}  // namespace

ProposalDraw propose_latent(const ModelParams& params, const ChangePointVector& delta, const ObservationGrid& grid,
                            const IncidenceSeries& obs, const InitialCounts& initial, Rng& rng) {
  auto beta = checked_rate(params, delta, grid);
  PdsirKernel kernel(grid, obs, initial);
  const auto i0 = static_cast<std::size_t>(initial.i0);

  // placeholders that only fix each new infective's interval
  std::vector<double> infections;
  infections.reserve(kernel.individuals() - i0);
  for (std::size_t k = 1; k <= grid.intervals(); ++k)
    infections.insert(infections.end(), static_cast<std::size_t>(obs.counts[k - 1]), 0.5 * (grid[k - 1] + grid[k]));
  std::vector<double> removals(kernel.individuals(), grid.end() + 1.0);
  auto hist = kernel.removal_histogram(removals);

  auto ids = all_ids(kernel.individuals());
  auto outcome = kernel.redraw(beta, params.gamma, ids, infections, removals, hist, rng);
  if (!outcome.feasible)
    throw ProposalInfeasible("observed counts need an infection while the decoupled infectious count is zero");
  return {LatentTrajectory::unchecked(initial, grid.start(), std::move(infections), std::move(removals)),
          outcome.log_q};
}

double log_proposal_density(const LatentTrajectory& x, const ModelParams& params, const ChangePointVector& delta,
                            const ObservationGrid& grid, const IncidenceSeries& obs) {
  auto beta = checked_rate(params, delta, grid);
  PdsirKernel kernel(grid, obs, x.initial());
  if (x.individuals() != kernel.individuals() || x.infections() != static_cast<std::size_t>(obs.total()))
    return kNegInf;
  for (double t : x.infection_times())
    if (!(t > grid.start()) || !(t <= grid.end())) return kNegInf;
  if (aggregate_incidence(x, grid).counts != obs.counts) return kNegInf;
  auto hist = kernel.removal_histogram(x.removal_times());
  auto ids = all_ids(x.individuals());
  return kernel.log_density(beta, params.gamma, ids, x.infection_times(), x.removal_times(), hist);
}

}  // namespace epicpt
