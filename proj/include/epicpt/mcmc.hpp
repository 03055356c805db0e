#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "epicpt/pdsir.hpp"
#include "epicpt/random.hpp"
#include "epicpt/sir_core.hpp"

namespace epicpt {

/// Two-state Markov prior on the change-point indicators; pi_ij is the
/// probability of moving from state i to state j.
struct TransitionMatrix {
  double pi01 = 0.5;
  double pi11 = 0.5;

  double pi00() const { return 1.0 - pi01; }
  double pi10() const { return 1.0 - pi11; }
  double operator()(int from, int to) const;
};

struct BetaPrior {
  double a = 0.5;
  double b = 0.5;
  double mean() const { return a / (a + b); }
};

struct GammaPrior {
  double shape = 1.0;
  double rate = 1.0;
  double mean() const { return shape / rate; }
};

struct Hyperparams {
  GammaPrior beta{1.0, 1.0};
  BetaPrior pi01{0.5, 0.5};
  BetaPrior pi11{0.5, 0.5};
  GammaPrior gamma{1.0, 1.0};  // used only when gamma is estimated

  /// "jeffreys" (default), or the sensitivity grid "be-0.5-0.5", "be-1-5",
  /// "be-5-50" (prior on pi01; pi11 ~ Be(1, 10)).
  static Hyperparams preset(std::string_view name);
  void validate() const;
};

enum class SamplerMode { learn, homogeneous, fixed };

SamplerMode parse_mode(std::string_view name);
std::string_view to_string(SamplerMode mode);

struct SamplerConfig {
  long iterations = 50000;
  /// Negative: 20% of iterations.
  long burn_in = -1;
  long thin = 1;
  std::size_t delta_block_size = 1;
  /// Full sweeps of (Delta, beta) block proposals over the indicators per iteration.
  std::size_t delta_sweeps = 4;
  SamplerMode mode = SamplerMode::learn;
  ChangePointVector fixed_delta;
  bool estimate_gamma = false;
  /// Fixed removal rate, or the starting value when estimated.
  double gamma = 1.0;
  /// Individuals redrawn per latent Metropolis-Hastings step; 0 redraws all.
  std::size_t latent_block = 8;
  /// Latent Metropolis-Hastings steps per iteration.
  std::size_t latent_steps = 60;
  /// Starting point; defaults are Delta = 0, beta = prior mean, Pi = prior means.
  std::optional<ChangePointVector> initial_delta;
  std::optional<std::vector<double>> initial_beta;
  std::optional<TransitionMatrix> initial_pi;
  std::uint64_t seed = 1;
  /// Include the Markov prior P(Delta | Pi) in the (Delta, beta) ratio. Off by
  /// default: the ratio then has only the proposal terms q(Delta | Pi), and the
  /// indicator prior enters through Pi alone.
  bool delta_prior_in_ratio = false;
  /// Recompute the cached statistics after every accepted move and throw on mismatch.
  bool verify_cache = false;

  long resolved_burn_in() const { return burn_in < 0 ? iterations / 5 : burn_in; }
  long retained() const { return (iterations - resolved_burn_in()) / thin; }
  void validate(std::size_t intervals) const;
};

/// Observed data the sampler conditions on.
struct FitData {
  ObservationGrid grid;
  IncidenceSeries obs;
  InitialCounts initial;
};

/// Latent trajectory in the sampler's working form.
struct LatentState {
  std::vector<double> infection_times;
  std::vector<double> removal_times;
  /// Events at or before t_K, time-sorted.
  std::vector<Event> events;
  PdsirKernel::Histogram histogram;
  IntervalStats stats;

  LatentTrajectory trajectory(const InitialCounts& initial, double t0) const;
};

struct SamplerState {
  TransitionMatrix pi;
  ChangePointVector delta;
  std::vector<double> beta;  // per segment
  double gamma = 1.0;
  LatentState latent;
  double log_likelihood = 0.0;
  std::size_t sweep_position = 0;

  std::vector<double> beta_per_interval() const { return expand_to_intervals(delta, beta); }
};

struct TransitionCounts {
  long n00 = 0, n01 = 0, n10 = 0, n11 = 0;
};

/// Transitions between consecutive indicators.
TransitionCounts transition_counts(const ChangePointVector& delta);

/// Gibbs draw of (pi01, pi11). The initial indicator is treated as a move out
/// of a virtual 0 state, matching nu(1) = pi01 in `delta_log_prior`.
TransitionMatrix update_pi(const ChangePointVector& delta, const Hyperparams& hyper, Rng& rng);

/// log nu(Delta_1) + sum log pi_{Delta_{i-1} Delta_i} with nu(1) = pi01.
double delta_log_prior(const ChangePointVector& delta, const TransitionMatrix& pi);

/// Cyclic block of indicator positions starting at `start`.
std::vector<std::size_t> indicator_block(std::size_t start, std::size_t block_size, std::size_t length);

struct DeltaBetaProposal {
  ChangePointVector delta;
  std::vector<double> beta;  // per segment of `delta`
  double log_q_forward = 0.0;
  double log_q_reverse = 0.0;
};

/// Redraws the indicators at `positions` jointly from their conditional under
/// Pi given the others, then every segment value from its Gamma full
/// conditional under the new segmentation.
DeltaBetaProposal propose_delta_beta(const SamplerState& state, std::span<const std::size_t> positions,
                                     const Hyperparams& hyper, Rng& rng);

/// Log Metropolis-Hastings ratio of a (Delta, beta) proposal.
double delta_beta_log_ratio(const SamplerState& state, const DeltaBetaProposal& proposal, const Hyperparams& hyper,
                            bool delta_prior = false);

/// Accepts or rejects; on acceptance the state takes the proposal.
bool accept_delta_beta(SamplerState& state, DeltaBetaProposal proposal, const Hyperparams& hyper, Rng& rng,
                       bool delta_prior = false);

struct LatentStepResult {
  bool accepted = false;
  bool infeasible = false;
  double log_ratio = 0.0;
};

/// One Metropolis-Hastings step on the latent data: redraws a random subset
/// of `block` individuals (all of them when block is 0 or too large) with the
/// PD-SIR kernel under the current parameters.
LatentStepResult update_latent(SamplerState& state, const PdsirKernel& kernel, std::size_t block, Rng& rng);

/// Gibbs draw gamma ~ Gamma(shape + n_R, rate + int I dt) over the window; the
/// unobserved removal times after t_K are then redrawn under the new gamma.
double update_gamma(SamplerState& state, const PdsirKernel& kernel, const Hyperparams& hyper, Rng& rng);

/// Builds the starting state (latent data from the PD-SIR kernel).
SamplerState initial_state(const FitData& data, const Hyperparams& hyper, const SamplerConfig& config,
                           const PdsirKernel& kernel, Rng& rng);

/// Rebuilds events and statistics from the individual arrays.
void refresh_latent(LatentState& latent, const InitialCounts& initial, const ObservationGrid& grid,
                    const PdsirKernel& kernel);

/// Throws InvariantError when cached statistics or log-likelihood disagree
/// with a fresh computation.
void verify_state(const SamplerState& state, const FitData& data);

struct BlockCounter {
  long proposed = 0;
  long accepted = 0;
  bool applicable = true;

  double rate() const { return proposed > 0 ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0; }
};

struct PosteriorSamples {
  ObservationGrid grid;
  int chain = 0;
  std::uint64_t seed = 0;
  std::vector<long> iteration;
  Eigen::MatrixXd beta_interval;  // draws x K
  std::vector<ChangePointVector> delta;
  Eigen::VectorXd pi01;
  Eigen::VectorXd pi11;
  Eigen::VectorXd gamma;
  Eigen::VectorXd log_likelihood;
  Eigen::VectorXd infections;  // latent infections in the window per draw
  BlockCounter delta_beta;     // measured after burn-in
  BlockCounter latent;
  long latent_infeasible = 0;
  double wall_clock_seconds = 0.0;

  explicit PosteriorSamples(ObservationGrid g) : grid(std::move(g)) {}
  std::size_t draws() const { return iteration.size(); }
  /// Segment values of draw r.
  std::vector<double> beta_segments(std::size_t r) const;
};

/// Algorithm loop: Pi (Gibbs), (Delta, beta) (MH), latent data (MH), then gamma
/// when estimated.
PosteriorSamples run_chain(const FitData& data, const Hyperparams& hyper, const SamplerConfig& config, Rng& rng,
                           int chain = 0);

/// Independent chains; chain c uses stream c of its config's seed. At most
/// `threads` run at once (0: one per chain).
std::vector<PosteriorSamples> run_chains(const FitData& data, const Hyperparams& hyper,
                                         std::span<const SamplerConfig> configs, unsigned threads = 0);

}  // namespace epicpt
