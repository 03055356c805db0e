#include "epicpt/mcmc.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "epicpt/simulate.hpp"

namespace epicpt {

namespace {

constexpr std::size_t kMaxDeltaBlock = 16;
constexpr long kMaxInfeasibleStreak = 10000;
constexpr int kInitialDrawAttempts = 1000;

bool by_time(const Event& a, const Event& b) { return a.time < b.time; }

double clamp_probability(double p) {
  constexpr double tiny = 1e-300;
  if (p <= 0.0) return tiny;
  if (p >= 1.0) return std::nextafter(1.0, 0.0);
  return p;
}

double log_sum_exp(std::span<const double> v) {
  double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

double segment_prior(std::span<const double> beta, const GammaPrior& prior) {
  double lp = 0.0;
  for (double b : beta) lp += gamma_log_pdf(b, prior.shape, prior.rate);
  return lp;
}

double conditional_density(std::span<const double> beta, const SegmentStats& seg, const GammaPrior& prior) {
  double lq = 0.0;
  for (std::size_t s = 0; s < beta.size(); ++s)
    lq += gamma_log_pdf(beta[s], prior.shape + static_cast<double>(seg.infections[s]), prior.rate + seg.int_si[s]);
  return lq;
}

// Removal times past t_K carry log(gamma) - gamma (r - t_K) in the extended
// target; the windowed likelihood accounts for the rest.
double beyond_window_term(double removal, double t_end, double gamma, double log_gamma) {
  return removal > t_end ? log_gamma - gamma * (removal - t_end) : 0.0;
}

std::vector<std::size_t> choose_subset(std::size_t n, std::size_t m, Rng& rng) {
  std::vector<std::size_t> out;
  if (m >= n) {
    out.resize(n);
    std::iota(out.begin(), out.end(), std::size_t{0});
    return out;
  }
  out.reserve(m);
  if (4 * m > n) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    for (std::size_t i = 0; i < m; ++i) {
      auto j = i + std::min(n - i - 1, static_cast<std::size_t>(uniform_open(rng) * static_cast<double>(n - i)));
      std::swap(all[i], all[j]);
      out.push_back(all[i]);
    }
  } else {
    while (out.size() < m) {
      auto id = std::min(n - 1, static_cast<std::size_t>(uniform_open(rng) * static_cast<double>(n)));
      if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(id);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

void append_individual_events(std::vector<Event>& out, std::size_t id, std::size_t i0,
                              std::span<const double> infections, std::span<const double> removals, double t_end) {
  if (id >= i0) out.push_back({infections[id - i0], EventKind::infection});
  if (removals[id] <= t_end) out.push_back({removals[id], EventKind::removal});
}

// current minus `drop` plus `add`; all three time-sorted.
std::vector<Event> splice_events(std::span<const Event> current, std::span<const Event> drop,
                                 std::span<const Event> add) {
  std::vector<Event> out;
  out.reserve(current.size() - drop.size() + add.size());
  std::size_t d = 0;
  std::size_t a = 0;
  for (const Event& e : current) {
    if (d < drop.size() && e.time == drop[d].time && e.kind == drop[d].kind) {
      ++d;
      continue;
    }
    while (a < add.size() && add[a].time < e.time) out.push_back(add[a++]);
    out.push_back(e);
  }
  while (a < add.size()) out.push_back(add[a++]);
  if (d != drop.size()) throw InvariantError("latent event list is out of sync with the individual arrays");
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Priors and configuration

double TransitionMatrix::operator()(int from, int to) const {
  double p1 = from == 0 ? pi01 : pi11;
  return to == 1 ? p1 : 1.0 - p1;
}

Hyperparams Hyperparams::preset(std::string_view name) {
  Hyperparams h;
  if (name == "jeffreys") return h;
  h.pi11 = {1.0, 10.0};
  if (name == "be-0.5-0.5") {
    h.pi01 = {0.5, 0.5};
  } else if (name == "be-1-5") {
    h.pi01 = {1.0, 5.0};
  } else if (name == "be-5-50") {
    h.pi01 = {5.0, 50.0};
  } else {
    throw ValidationError("unknown prior preset '" + std::string(name) + "'");
  }
  return h;
}

void Hyperparams::validate() const {
  for (double v : {beta.shape, beta.rate, pi01.a, pi01.b, pi11.a, pi11.b, gamma.shape, gamma.rate})
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("hyperparameters must be positive and finite");
}

SamplerMode parse_mode(std::string_view name) {
  if (name == "learn") return SamplerMode::learn;
  if (name == "homogeneous") return SamplerMode::homogeneous;
  if (name == "fixed") return SamplerMode::fixed;
  throw ValidationError("unknown sampler mode '" + std::string(name) + "'");
}

std::string_view to_string(SamplerMode mode) {
  switch (mode) {
    case SamplerMode::learn: return "learn";
    case SamplerMode::homogeneous: return "homogeneous";
    case SamplerMode::fixed: return "fixed";
  }
  return "learn";
}

void SamplerConfig::validate(std::size_t intervals) const {
  const long burn = resolved_burn_in();
  if (!(iterations > burn)) throw ValidationError("iterations must exceed burn-in");
  if (thin < 1) throw ValidationError("thin must be at least 1");
  if (delta_block_size < 1 || delta_block_size > kMaxDeltaBlock)
    throw ValidationError("delta_block_size must be between 1 and 16");
  if (delta_sweeps < 1) throw ValidationError("delta_sweeps must be at least 1");
  if (!(gamma > 0.0)) throw ValidationError("gamma must be positive");
  if (latent_steps < 1) throw ValidationError("latent_steps must be at least 1");
  if (mode == SamplerMode::fixed && fixed_delta.size() + 1 != intervals)
    throw ValidationError("fixed change-point vector must have one entry per interior observation time");
  if (initial_delta && initial_delta->size() + 1 != intervals)
    throw ValidationError("initial change-point vector must have one entry per interior observation time");
  if (initial_beta) {
    std::size_t segments = 1;
    if (mode == SamplerMode::fixed)
      segments = fixed_delta.segments();
    else if (mode == SamplerMode::learn && initial_delta)
      segments = initial_delta->segments();
    if (initial_beta->size() != segments)
      throw ValidationError("initial beta must have one value per initial segment");
    for (double b : *initial_beta)
      if (!(b > 0.0)) throw ValidationError("initial beta values must be positive");
  }
  if (initial_pi && !(initial_pi->pi01 > 0.0 && initial_pi->pi01 < 1.0 && initial_pi->pi11 > 0.0 &&
                      initial_pi->pi11 < 1.0))
    throw ValidationError("initial transition probabilities must lie in (0, 1)");
}

// ---------------------------------------------------------------------------
// Pi block

TransitionCounts transition_counts(const ChangePointVector& delta) {
  TransitionCounts c;
  for (std::size_t i = 1; i < delta.size(); ++i) {
    int from = delta[i - 1] ? 1 : 0;
    int to = delta[i] ? 1 : 0;
    if (from == 0)
      (to == 0 ? c.n00 : c.n01) += 1;
    else
      (to == 0 ? c.n10 : c.n11) += 1;
  }
  return c;
}

TransitionMatrix update_pi(const ChangePointVector& delta, const Hyperparams& hyper, Rng& rng) {
  auto c = transition_counts(delta);
  if (delta.size() > 0) (delta[0] ? c.n01 : c.n00) += 1;
  TransitionMatrix pi;
  pi.pi01 = clamp_probability(draw_beta(rng, hyper.pi01.a + static_cast<double>(c.n01),
                                        hyper.pi01.b + static_cast<double>(c.n00)));
  pi.pi11 = clamp_probability(draw_beta(rng, hyper.pi11.a + static_cast<double>(c.n11),
                                        hyper.pi11.b + static_cast<double>(c.n10)));
  return pi;
}

double delta_log_prior(const ChangePointVector& delta, const TransitionMatrix& pi) {
  if (delta.size() == 0) return 0.0;
  double lp = std::log(pi(0, delta[0] ? 1 : 0));
  for (std::size_t i = 1; i < delta.size(); ++i) lp += std::log(pi(delta[i - 1] ? 1 : 0, delta[i] ? 1 : 0));
  return lp;
}

// ---------------------------------------------------------------------------
// (Delta, beta) block

std::vector<std::size_t> indicator_block(std::size_t start, std::size_t block_size, std::size_t length) {
  std::vector<std::size_t> out;
  if (length == 0) return out;
  const std::size_t b = std::min(block_size, length);
  out.reserve(b);
  for (std::size_t i = 0; i < b; ++i) out.push_back((start + i) % length);
  return out;
}

DeltaBetaProposal propose_delta_beta(const SamplerState& state, std::span<const std::size_t> positions,
                                     const Hyperparams& hyper, Rng& rng) {
  if (positions.size() > kMaxDeltaBlock) throw std::invalid_argument("indicator block too large");
  DeltaBetaProposal prop;
  prop.delta = state.delta;

  if (!positions.empty()) {
    const std::size_t n_configs = std::size_t{1} << positions.size();
    std::vector<double> lp(n_configs);
    ChangePointVector candidate = state.delta;
    std::size_t current_mask = 0;
    for (std::size_t j = 0; j < positions.size(); ++j)
      if (state.delta[positions[j]]) current_mask |= std::size_t{1} << j;
    for (std::size_t mask = 0; mask < n_configs; ++mask) {
      for (std::size_t j = 0; j < positions.size(); ++j) candidate.set(positions[j], (mask >> j) & 1U);
      lp[mask] = delta_log_prior(candidate, state.pi);
    }
    const double log_z = log_sum_exp(lp);
    double u = uniform_open(rng);
    std::size_t chosen = n_configs - 1;
    double cumulative = 0.0;
    for (std::size_t mask = 0; mask < n_configs; ++mask) {
      cumulative += std::exp(lp[mask] - log_z);
      if (u < cumulative) {
        chosen = mask;
        break;
      }
    }
    for (std::size_t j = 0; j < positions.size(); ++j) prop.delta.set(positions[j], (chosen >> j) & 1U);
    prop.log_q_forward += lp[chosen] - log_z;
    prop.log_q_reverse += lp[current_mask] - log_z;
  }

  const auto seg_new = aggregate_segments(state.latent.stats, prop.delta);
  prop.beta.resize(seg_new.segments());
  for (std::size_t s = 0; s < prop.beta.size(); ++s) {
    prop.beta[s] = draw_gamma(rng, hyper.beta.shape + static_cast<double>(seg_new.infections[s]),
                              hyper.beta.rate + seg_new.int_si[s]);
  }
  prop.log_q_forward += conditional_density(prop.beta, seg_new, hyper.beta);
  const auto seg_old = aggregate_segments(state.latent.stats, state.delta);
  prop.log_q_reverse += conditional_density(state.beta, seg_old, hyper.beta);
  return prop;
}

double delta_beta_log_ratio(const SamplerState& state, const DeltaBetaProposal& proposal, const Hyperparams& hyper,
                            bool delta_prior) {
  const auto beta_new = expand_to_intervals(proposal.delta, proposal.beta);
  const double ll_new = log_likelihood_intervals(beta_new, state.gamma, state.latent.stats);
  double target_new = ll_new + segment_prior(proposal.beta, hyper.beta);
  double target_old = state.log_likelihood + segment_prior(state.beta, hyper.beta);
  if (delta_prior) {
    target_new += delta_log_prior(proposal.delta, state.pi);
    target_old += delta_log_prior(state.delta, state.pi);
  }
  return target_new - target_old + proposal.log_q_reverse - proposal.log_q_forward;
}

bool accept_delta_beta(SamplerState& state, DeltaBetaProposal proposal, const Hyperparams& hyper, Rng& rng,
                       bool delta_prior) {
  const double log_ratio = delta_beta_log_ratio(state, proposal, hyper, delta_prior);
  if (std::isnan(log_ratio)) {
    warn("non-finite (Delta, beta) acceptance ratio; proposal rejected");
    return false;
  }
  if (!(std::log(uniform_open(rng)) < log_ratio)) return false;
  state.delta = std::move(proposal.delta);
  state.beta = std::move(proposal.beta);
  state.log_likelihood = log_likelihood_intervals(state.beta_per_interval(), state.gamma, state.latent.stats);
  return true;
}

// ---------------------------------------------------------------------------
// Latent block

LatentTrajectory LatentState::trajectory(const InitialCounts& initial, double t0) const {
  return LatentTrajectory::unchecked(initial, t0, infection_times, removal_times);
}

void refresh_latent(LatentState& latent, const InitialCounts& initial, const ObservationGrid& grid,
                    const PdsirKernel& kernel) {
  latent.events.clear();
  latent.events.reserve(latent.infection_times.size() + latent.removal_times.size());
  for (double t : latent.infection_times) latent.events.push_back({t, EventKind::infection});
  for (double t : latent.removal_times)
    if (t <= grid.end()) latent.events.push_back({t, EventKind::removal});
  std::sort(latent.events.begin(), latent.events.end(), by_time);
  latent.histogram = kernel.removal_histogram(latent.removal_times);
  latent.stats = sweep_interval_stats(latent.events, initial, grid);
}

LatentStepResult update_latent(SamplerState& state, const PdsirKernel& kernel, std::size_t block, Rng& rng) {
  LatentStepResult result;
  const std::size_t n = kernel.individuals();
  if (n == 0) {
    result.accepted = true;
    return result;
  }
  const auto& grid = kernel.grid();
  const double t_end = grid.end();
  const auto i0 = static_cast<std::size_t>(kernel.initial().i0);
  const double gamma = state.gamma;
  const double log_gamma = std::log(gamma);
  auto& lat = state.latent;

  const auto selected = choose_subset(n, block == 0 ? n : block, rng);
  const auto beta = state.beta_per_interval();

  const double log_q_reverse =
      kernel.log_density(beta, gamma, selected, lat.infection_times, lat.removal_times, lat.histogram);

  std::vector<double> saved_inf;
  std::vector<double> saved_rem;
  saved_inf.reserve(selected.size());
  saved_rem.reserve(selected.size());
  std::vector<Event> dropped;
  dropped.reserve(2 * selected.size());
  double beyond_old = 0.0;
  for (std::size_t id : selected) {
    saved_inf.push_back(id >= i0 ? lat.infection_times[id - i0] : 0.0);
    saved_rem.push_back(lat.removal_times[id]);
    append_individual_events(dropped, id, i0, lat.infection_times, lat.removal_times, t_end);
    beyond_old += beyond_window_term(lat.removal_times[id], t_end, gamma, log_gamma);
  }
  const auto saved_hist = lat.histogram;
  auto restore = [&] {
    for (std::size_t s = 0; s < selected.size(); ++s) {
      if (selected[s] >= i0) lat.infection_times[selected[s] - i0] = saved_inf[s];
      lat.removal_times[selected[s]] = saved_rem[s];
    }
    lat.histogram = saved_hist;
  };

  const auto outcome =
      kernel.redraw(beta, gamma, selected, lat.infection_times, lat.removal_times, lat.histogram, rng);
  if (!outcome.feasible) {
    restore();
    result.infeasible = true;
    return result;
  }

  std::vector<Event> added;
  added.reserve(2 * selected.size());
  double beyond_new = 0.0;
  for (std::size_t id : selected) {
    append_individual_events(added, id, i0, lat.infection_times, lat.removal_times, t_end);
    beyond_new += beyond_window_term(lat.removal_times[id], t_end, gamma, log_gamma);
  }
  std::sort(dropped.begin(), dropped.end(), by_time);
  std::sort(added.begin(), added.end(), by_time);
  auto events = splice_events(lat.events, dropped, added);
  auto stats = sweep_interval_stats(events, kernel.initial(), grid);
  const double ll_new = log_likelihood_intervals(beta, gamma, stats);
  if (!std::isfinite(ll_new)) {
    restore();
    return result;
  }

  result.log_ratio = (ll_new + beyond_new) - (state.log_likelihood + beyond_old) + log_q_reverse - outcome.log_q;
  if (std::isnan(result.log_ratio) || !(std::log(uniform_open(rng)) < result.log_ratio)) {
    restore();
    return result;
  }
  lat.events = std::move(events);
  lat.stats = std::move(stats);
  state.log_likelihood = ll_new;
  result.accepted = true;
  return result;
}

double update_gamma(SamplerState& state, const PdsirKernel& kernel, const Hyperparams& hyper, Rng& rng) {
  const auto& stats = state.latent.stats;
  state.gamma = draw_gamma(rng, hyper.gamma.shape + static_cast<double>(stats.total_removals()),
                           hyper.gamma.rate + stats.total_int_i());
  const double t_end = kernel.grid().end();
  for (double& r : state.latent.removal_times)
    if (r > t_end) r = t_end + draw_exponential(rng, state.gamma);
  state.log_likelihood = log_likelihood_intervals(state.beta_per_interval(), state.gamma, stats);
  return state.gamma;
}

// ---------------------------------------------------------------------------
// Chain driver

SamplerState initial_state(const FitData& data, const Hyperparams& hyper, const SamplerConfig& config,
                           const PdsirKernel& kernel, Rng& rng) {
  const std::size_t K = data.grid.intervals();
  SamplerState state;
  state.pi = config.initial_pi.value_or(TransitionMatrix{hyper.pi01.mean(), hyper.pi11.mean()});
  switch (config.mode) {
    case SamplerMode::learn: state.delta = config.initial_delta.value_or(ChangePointVector::zeros(K - 1)); break;
    case SamplerMode::homogeneous: state.delta = ChangePointVector::zeros(K - 1); break;
    case SamplerMode::fixed: state.delta = config.fixed_delta; break;
  }
  state.beta = config.initial_beta.value_or(std::vector<double>(state.delta.segments(), hyper.beta.mean()));
  state.gamma = config.gamma;

  const auto i0 = static_cast<std::size_t>(data.initial.i0);
  const auto beta = state.beta_per_interval();
  std::vector<std::size_t> all(kernel.individuals());
  std::iota(all.begin(), all.end(), std::size_t{0});
  auto& lat = state.latent;
  for (int attempt = 0; attempt < kInitialDrawAttempts; ++attempt) {
    lat.infection_times.clear();
    for (std::size_t k = 1; k <= K; ++k)
      lat.infection_times.insert(lat.infection_times.end(), static_cast<std::size_t>(data.obs.counts[k - 1]),
                                 0.5 * (data.grid[k - 1] + data.grid[k]));
    lat.removal_times.assign(i0 + lat.infection_times.size(), data.grid.end() + 1.0);
    lat.histogram = kernel.removal_histogram(lat.removal_times);
    auto outcome =
        kernel.redraw(beta, state.gamma, all, lat.infection_times, lat.removal_times, lat.histogram, rng);
    if (!outcome.feasible) continue;
    refresh_latent(lat, data.initial, data.grid, kernel);
    state.log_likelihood = log_likelihood_intervals(beta, state.gamma, lat.stats);
    if (std::isfinite(state.log_likelihood)) return state;
  }
  throw SamplerError(
      "could not draw a starting latent trajectory with finite likelihood; check the initial counts, the "
      "initial beta and gamma, and the data");
}

void verify_state(const SamplerState& state, const FitData& data) {
  PdsirKernel kernel(data.grid, data.obs, data.initial);
  LatentState fresh = state.latent;
  refresh_latent(fresh, data.initial, data.grid, kernel);
  const auto& a = fresh.stats;
  const auto& b = state.latent.stats;
  auto close = [](double x, double y) { return std::abs(x - y) <= 1e-9 * std::max({1.0, std::abs(x), std::abs(y)}); };
  bool ok = a.feasible == b.feasible && a.infections == b.infections && a.removals == b.removals &&
            fresh.histogram == state.latent.histogram;
  for (std::size_t k = 0; ok && k < a.int_si.size(); ++k)
    ok = close(a.int_si[k], b.int_si[k]) && close(a.int_i[k], b.int_i[k]) && close(a.sum_log_i[k], b.sum_log_i[k]);
  if (!ok) throw InvariantError("cached sufficient statistics disagree with the latent trajectory");
  double ll = log_likelihood_intervals(state.beta_per_interval(), state.gamma, a);
  if (!close(ll, state.log_likelihood)) throw InvariantError("cached log-likelihood is stale");
  if (aggregate_incidence(state.latent.trajectory(data.initial, data.grid.start()), data.grid).counts !=
      data.obs.counts)
    throw InvariantError("latent trajectory no longer matches the observed counts");
}

std::vector<double> PosteriorSamples::beta_segments(std::size_t r) const {
  std::vector<double> out{beta_interval(static_cast<Eigen::Index>(r), 0)};
  const auto& d = delta[r];
  for (std::size_t p = 0; p < d.size(); ++p)
    if (d[p]) out.push_back(beta_interval(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(p + 1)));
  return out;
}

PosteriorSamples run_chain(const FitData& data, const Hyperparams& hyper, const SamplerConfig& config, Rng& rng,
                           int chain) {
  const std::size_t K = data.grid.intervals();
  hyper.validate();
  config.validate(K);
  validate_incidence(data.obs, data.grid, data.initial.s0);
  if (data.initial.i0 < 1 && data.obs.total() > 0)
    throw ValidationError("observed infections need at least one initial infective");

  const auto start = std::chrono::steady_clock::now();
  PdsirKernel kernel(data.grid, data.obs, data.initial);
  SamplerState state = initial_state(data, hyper, config, kernel, rng);

  const long burn = config.resolved_burn_in();
  const auto rows = static_cast<Eigen::Index>(std::max(0L, config.retained()));
  PosteriorSamples out(data.grid);
  out.chain = chain;
  out.seed = config.seed;
  out.iteration.reserve(static_cast<std::size_t>(rows));
  out.delta.reserve(static_cast<std::size_t>(rows));
  out.beta_interval.resize(rows, static_cast<Eigen::Index>(K));
  out.pi01.resize(rows);
  out.pi11.resize(rows);
  out.gamma.resize(rows);
  out.log_likelihood.resize(rows);
  out.infections.resize(rows);
  out.delta_beta.applicable = config.mode == SamplerMode::learn && K > 1;

  const std::size_t blocks_per_sweep = K > 1 ? (K - 2) / config.delta_block_size + 1 : 1;
  long infeasible_streak = 0;
  for (long it = 1; it <= config.iterations; ++it) {
    const bool counted = it > burn;
    state.pi = update_pi(state.delta, hyper, rng);

    const std::size_t moves = out.delta_beta.applicable ? config.delta_sweeps * blocks_per_sweep : 1;
    for (std::size_t m = 0; m < moves; ++m) {
      std::vector<std::size_t> positions;
      if (out.delta_beta.applicable) {
        positions = indicator_block(state.sweep_position, config.delta_block_size, K - 1);
        state.sweep_position = (state.sweep_position + positions.size()) % (K - 1);
      }
      auto proposal = propose_delta_beta(state, positions, hyper, rng);
      bool accepted = accept_delta_beta(state, std::move(proposal), hyper, rng, config.delta_prior_in_ratio);
      if (counted && out.delta_beta.applicable) {
        ++out.delta_beta.proposed;
        out.delta_beta.accepted += accepted ? 1 : 0;
      }
    }

    for (std::size_t step = 0; step < config.latent_steps; ++step) {
      auto res = update_latent(state, kernel, config.latent_block, rng);
      if (res.infeasible) {
        if (++infeasible_streak > kMaxInfeasibleStreak)
          throw SamplerError(
              "latent proposal was infeasible more than 10000 times in a row; review the priors and the "
              "initial values");
      } else {
        infeasible_streak = 0;
      }
      if (counted) {
        ++out.latent.proposed;
        out.latent.accepted += res.accepted ? 1 : 0;
        out.latent_infeasible += res.infeasible ? 1 : 0;
      }
    }

    if (config.estimate_gamma) update_gamma(state, kernel, hyper, rng);
    if (config.verify_cache) verify_state(state, data);

    if (counted && (it - burn) % config.thin == 0) {
      const auto r = static_cast<Eigen::Index>(out.iteration.size());
      if (r >= rows) continue;
      const auto beta = state.beta_per_interval();
      out.iteration.push_back(it);
      for (std::size_t k = 0; k < K; ++k) out.beta_interval(r, static_cast<Eigen::Index>(k)) = beta[k];
      out.delta.push_back(state.delta);
      out.pi01[r] = state.pi.pi01;
      out.pi11[r] = state.pi.pi11;
      out.gamma[r] = state.gamma;
      out.log_likelihood[r] = state.log_likelihood;
      out.infections[r] = static_cast<double>(
          std::accumulate(state.latent.stats.infections.begin(), state.latent.stats.infections.end(), 0L));
    }
  }
  out.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::vector<PosteriorSamples> run_chains(const FitData& data, const Hyperparams& hyper,
                                         std::span<const SamplerConfig> configs, unsigned threads) {
  const std::size_t n = configs.size();
  std::vector<std::optional<PosteriorSamples>> results(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c = next++; c < n; c = next++) {
      try {
        Rng rng = make_stream(configs[c].seed, c);
        results[c].emplace(run_chain(data, hyper, configs[c], rng, static_cast<int>(c)));
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  const unsigned n_threads = std::max(1U, std::min<unsigned>(threads == 0 ? static_cast<unsigned>(n) : threads,
                                                             static_cast<unsigned>(n)));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<PosteriorSamples> out;
  out.reserve(n);
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

}  // namespace epicpt
