#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "epicpt/mcmc.hpp"
#include "epicpt/simulate.hpp"

namespace epicpt {

inline constexpr int kSchemaVersion = 1;

/// Everything a run needs, loaded from a JSON file (comments allowed).
///
///   population  s0, i0, r0
///   grid        times, or t_start + step + intervals
///   truth       kind ("piecewise" | "spline"), gamma, and either
///               change_points + beta or knots + coefficients
///   sampler     iterations, burn_in, thin, delta_block_size, delta_sweeps, mode,
///               fixed_delta, estimate_gamma, gamma, latent_block,
///               latent_steps, delta_prior_in_ratio, initial_delta,
///               initial_beta, initial_pi01, initial_pi11, verify_cache
///   priors      preset, then beta {shape, rate}, pi01 {a, b},
///               pi11 {a, b}, gamma {shape, rate} override it
///   run         seed, chains, output_dir, level, predictive_draws,
///               chain_initial_beta (one beta vector per chain)
///
/// Every key is optional; unknown keys are rejected.
struct RunConfig {
  InitialCounts initial{10000, 10, 0};
  ObservationGrid grid = ObservationGrid::uniform(0.0, 1.0, 12);
  RateFunction truth = TransmissionRate(0.0, 12.0, {3.0, 10.0}, {1.75e-4, 1.25e-4, 0.75e-4});
  double true_gamma = 1.0;
  SamplerConfig sampler;
  Hyperparams priors;
  int chains = 1;
  std::filesystem::path output_dir = ".";
  double level = 0.95;
  std::size_t predictive_draws = 1000;
  std::vector<std::vector<double>> chain_initial_beta;

  /// Per-chain sampler configs (seed shared; chains use separate streams).
  std::vector<SamplerConfig> chain_configs() const;
};

/// Throws ValidationError on bad values or unknown keys.
RunConfig parse_config(const nlohmann::json& doc);
/// Throws IoError when the file cannot be read or parsed.
RunConfig load_config(const std::filesystem::path& path);

/// Leading "# key=value" lines of a CSV file.
using CsvHeader = std::vector<std::pair<std::string, std::string>>;

struct IncidenceTable {
  ObservationGrid grid;
  IncidenceSeries counts;
  CsvHeader header;
};

void write_incidence_csv(const std::filesystem::path& path, const ObservationGrid& grid, const IncidenceSeries& obs,
                         const CsvHeader& header);
/// Errors name the file and line. Intervals must be contiguous.
IncidenceTable read_incidence_csv(const std::filesystem::path& path);

void write_samples_csv(const std::filesystem::path& path, const std::vector<PosteriorSamples>& chains,
                       const CsvHeader& header);
/// One PosteriorSamples per chain id found in the file.
std::vector<PosteriorSamples> read_samples_csv(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

nlohmann::json rate_to_json(const RateFunction& rate);

}  // namespace epicpt
