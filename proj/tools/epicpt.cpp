// epicpt: simulate incidence, fit the change-point sampler, diagnose chains,
// and run posterior predictive checks.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "epicpt/diagnostics.hpp"
#include "epicpt/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace epicpt;

namespace {

enum ExitCode { kOk = 0, kValidation = 2, kRuntime = 3, kIo = 4 };

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> chains;
  std::optional<std::string> mode;
  std::optional<std::string> fixed_delta;
  std::optional<long> iterations;
  std::optional<long> burn_in;
  std::optional<long> thin;
  std::optional<double> level;
  std::optional<std::string> out;
};

RunConfig load(const std::string& path, const Overrides& o) {
  RunConfig cfg = path.empty() ? parse_config(json::object()) : load_config(path);
  if (o.seed) cfg.sampler.seed = *o.seed;
  if (o.chains) cfg.chains = *o.chains;
  if (o.mode) cfg.sampler.mode = parse_mode(*o.mode);
  if (o.fixed_delta) {
    try {
      cfg.sampler.fixed_delta = ChangePointVector::parse(*o.fixed_delta);
    } catch (const std::invalid_argument& e) {
      throw ValidationError(std::string("--fixed-delta: ") + e.what());
    }
  }
  if (o.iterations) cfg.sampler.iterations = *o.iterations;
  if (o.burn_in) cfg.sampler.burn_in = *o.burn_in;
  if (o.thin) cfg.sampler.thin = *o.thin;
  if (o.level) cfg.level = *o.level;
  if (o.out) cfg.output_dir = *o.out;
  if (cfg.chains < 1) throw ValidationError("--chains must be at least 1");
  if (!(cfg.level > 0.0 && cfg.level < 1.0)) throw ValidationError("--level must lie in (0, 1)");
  return cfg;
}

unsigned thread_cap(int chains) {
  unsigned cap = static_cast<unsigned>(chains);
  if (const char* env = std::getenv("EPICPT_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw ValidationError("EPICPT_THREADS must be a positive integer");
    cap = std::min(cap, static_cast<unsigned>(v));
  }
  return cap;
}

CsvHeader seed_header(std::uint64_t seed, const std::string& command) {
  return {{"seed", std::to_string(seed)}, {"command", command}, {"schema_version", std::to_string(kSchemaVersion)}};
}

json interval_json(const CredibleInterval& ci) { return json::array({ci.lower, ci.upper}); }

int cmd_simulate(const std::string& config, const Overrides& o) {
  RunConfig cfg = load(config, o);
  Rng rng = make_stream(cfg.sampler.seed, 0);
  SimConfig sim{cfg.initial, cfg.truth, cfg.true_gamma, cfg.grid.start(), cfg.grid.end()};
  auto result = simulate_sir(sim, rng);
  auto obs = aggregate_incidence(result.trajectory, cfg.grid);
  write_incidence_csv(cfg.output_dir / "incidence.csv", cfg.grid, obs, seed_header(cfg.sampler.seed, "simulate"));

  json truth = {{"schema_version", kSchemaVersion},
                {"seed", cfg.sampler.seed},
                {"population", {{"s0", cfg.initial.s0}, {"i0", cfg.initial.i0}, {"r0", cfg.initial.r0}}},
                {"grid", std::vector<double>(cfg.grid.times().begin(), cfg.grid.times().end())},
                {"rate", rate_to_json(cfg.truth)},
                {"gamma", cfg.true_gamma},
                {"total_infections", obs.total()},
                {"extinct", result.extinct}};
  if (result.extinct) truth["extinction_time"] = result.extinction_time;
  if (const auto* pw = std::get_if<TransmissionRate>(&cfg.truth)) {
    std::vector<std::uint8_t> bits(cfg.grid.intervals() - 1, 0);
    for (double c : pw->change_points())
      for (std::size_t p = 1; p < cfg.grid.intervals(); ++p)
        if (cfg.grid[p] == c) bits[p - 1] = 1;
    truth["delta"] = ChangePointVector(bits).to_string();
    truth["beta_interval"] = rate_per_interval(*pw, cfg.grid);
  }
  write_json(cfg.output_dir / "truth.json", truth);
  std::cout << "wrote " << (cfg.output_dir / "incidence.csv").string() << " (" << obs.total() << " infections)\n";
  return kOk;
}

json ess_json(const ChainSet& set, double seconds) {
  json out = json::object();
  const auto K = static_cast<Eigen::Index>(set.intervals());
  for (Eigen::Index k = 0; k < K; ++k) {
    double total = 0.0;
    for (const auto& c : set.chains())
      if (c.draws() >= 10) total += ess(c.beta_interval.col(k)).value;
    json entry = {{"ess", total}};
    entry["ess_per_second"] = seconds > 0.0 ? json(total / seconds) : json(nullptr);
    out["beta_interval_" + std::to_string(k + 1)] = entry;
  }
  return out;
}

json psrf_json(const ChainSet& set) {
  if (set.size() < 2) return {{"value", nullptr}, {"note", "scale reduction needs at least two chains"}};
  auto r = gelman_rubin(set);
  return {{"multivariate", r.value}, {"univariate", r.univariate}, {"fallback", r.fallback}};
}

int cmd_fit(const std::string& data_path, const std::string& config, const Overrides& o) {
  RunConfig cfg = load(config, o);
  auto table = read_incidence_csv(data_path);
  FitData data{table.grid, table.counts, cfg.initial};
  validate_incidence(data.obs, data.grid, data.initial.s0);
  auto configs = cfg.chain_configs();
  for (auto& c : configs) c.validate(data.grid.intervals());
  cfg.priors.validate();

  auto chains = run_chains(data, cfg.priors, configs, thread_cap(cfg.chains));
  double seconds = 0.0;
  for (const auto& c : chains) seconds += c.wall_clock_seconds;
  auto header = seed_header(cfg.sampler.seed, "fit");
  for (const auto& c : chains)
    header.emplace_back("wall_clock_chain_" + std::to_string(c.chain), std::to_string(c.wall_clock_seconds));
  write_samples_csv(cfg.output_dir / "samples.csv", chains, header);

  ChainSet set(std::move(chains));
  const auto K = data.grid.intervals();
  Eigen::MatrixXd beta = set.pooled_beta();
  json beta_summary = json::array();
  for (std::size_t k = 0; k < K; ++k) {
    auto col = beta.col(static_cast<Eigen::Index>(k));
    beta_summary.push_back({{"t_start", data.grid[k]},
                            {"t_end", data.grid[k + 1]},
                            {"mean", col.mean()},
                            {"interval", interval_json(credible_interval(col, cfg.level))}});
  }
  json marginals = json::array();
  auto probs = changepoint_marginals(set);
  for (std::size_t p = 0; p < probs.size(); ++p) marginals.push_back({{"time", data.grid[p + 1]}, {"probability", probs[p]}});

  Eigen::MatrixXd r = effective_r_draws(set, data.obs, data.initial.s0);
  json r_summary = json::array();
  for (std::size_t k = 0; k < K; ++k) {
    auto col = r.col(static_cast<Eigen::Index>(k));
    r_summary.push_back({{"time", data.grid[k]}, {"mean", col.mean()}, {"interval", interval_json(credible_interval(col, cfg.level))}});
  }

  json acceptance = json::array();
  for (const auto& c : set.chains()) {
    acceptance.push_back({{"chain", c.chain},
                          {"delta_beta", c.delta_beta.applicable ? json(c.delta_beta.rate()) : json("not applicable")},
                          {"latent", c.latent.rate()},
                          {"latent_infeasible", c.latent_infeasible}});
  }
  Eigen::VectorXd gamma = set.pooled(&PosteriorSamples::gamma);
  json summary = {{"schema_version", kSchemaVersion},
                  {"seed", cfg.sampler.seed},
                  {"chains", cfg.chains},
                  {"iterations", cfg.sampler.iterations},
                  {"burn_in", cfg.sampler.resolved_burn_in()},
                  {"thin", cfg.sampler.thin},
                  {"draws_per_chain", set.draws()},
                  {"mode", std::string(to_string(cfg.sampler.mode))},
                  {"level", cfg.level},
                  {"beta_interval", beta_summary},
                  {"changepoint_probability", marginals},
                  {"effective_r", r_summary},
                  {"gamma", {{"mean", gamma.mean()}, {"interval", interval_json(credible_interval(gamma, cfg.level))}}},
                  {"acceptance", acceptance},
                  {"ess", ess_json(set, seconds)},
                  {"psrf", psrf_json(set)},
                  {"wall_clock_seconds", seconds}};
  write_json(cfg.output_dir / "summary.json", summary);
  std::cout << "wrote " << (cfg.output_dir / "samples.csv").string() << " and summary.json\n";
  return kOk;
}

double header_seconds(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  double total = 0.0;
  while (std::getline(in, line) && !line.empty() && line[0] == '#') {
    auto pos = line.find("wall_clock_chain_");
    if (pos == std::string::npos) continue;
    auto eq = line.find('=', pos);
    if (eq != std::string::npos) total += std::atof(line.c_str() + eq + 1);
  }
  return total;
}

std::string header_seed(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line) && !line.empty() && line[0] == '#')
    if (line.rfind("# seed=", 0) == 0) return line.substr(7);
  return "";
}

json seed_json(const std::string& seed) {
  try {
    std::size_t used = 0;
    auto v = std::stoull(seed, &used);
    if (used == seed.size()) return v;
  } catch (const std::exception&) {
  }
  return seed.empty() ? json(nullptr) : json(seed);
}

void write_histograms(const fs::path& path, const ChainSet& set, int bins, const std::string& seed) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "# seed=" << seed << "\nparameter,bin_lower,bin_upper,count\n";
  Eigen::MatrixXd beta = set.pooled_beta();
  auto emit = [&](const std::string& name, const Eigen::VectorXd& x) {
    double lo = x.minCoeff(), hi = x.maxCoeff();
    if (!(hi > lo)) hi = lo + 1e-12 * std::max(1.0, std::abs(lo));
    std::vector<long> counts(static_cast<std::size_t>(bins), 0);
    for (double v : x) {
      auto b = static_cast<long>((v - lo) / (hi - lo) * bins);
      ++counts[static_cast<std::size_t>(std::clamp(b, 0L, static_cast<long>(bins) - 1))];
    }
    for (int b = 0; b < bins; ++b)
      out << name << ',' << lo + (hi - lo) * b / bins << ',' << lo + (hi - lo) * (b + 1) / bins << ','
          << counts[static_cast<std::size_t>(b)] << '\n';
  };
  for (Eigen::Index k = 0; k < beta.cols(); ++k) emit("beta_interval_" + std::to_string(k + 1), beta.col(k));
  Eigen::VectorXd gamma = set.pooled(&PosteriorSamples::gamma);
  if (gamma.maxCoeff() > gamma.minCoeff()) emit("gamma", gamma);
}

void write_trace(const fs::path& path, const ChainSet& set, const std::string& seed) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "# seed=" << seed << "\niteration,chain,parameter,value\n";
  out << std::setprecision(10);
  for (const auto& c : set.chains()) {
    for (std::size_t r = 0; r < c.draws(); ++r) {
      const auto i = static_cast<Eigen::Index>(r);
      for (Eigen::Index k = 0; k < c.beta_interval.cols(); ++k)
        out << c.iteration[r] << ',' << c.chain << ",beta_interval_" << k + 1 << ',' << c.beta_interval(i, k) << '\n';
      out << c.iteration[r] << ',' << c.chain << ",change_points," << c.delta[r].popcount() << '\n';
      out << c.iteration[r] << ',' << c.chain << ",log_likelihood," << c.log_likelihood[i] << '\n';
    }
  }
}

int cmd_diagnose(const std::vector<std::string>& paths, const Overrides& o, int bins) {
  std::vector<PosteriorSamples> all;
  double seconds = 0.0;
  std::string seed;
  for (const auto& p : paths) {
    auto chains = read_samples_csv(p);
    seconds += header_seconds(p);
    if (seed.empty()) seed = header_seed(p);
    for (auto& c : chains) {
      if (!all.empty() && !(c.grid == all.front().grid)) throw ValidationError("samples files use different grids");
      c.chain = static_cast<int>(all.size());
      all.push_back(std::move(c));
    }
  }
  std::size_t shortest = all.front().draws();
  for (const auto& c : all) shortest = std::min(shortest, c.draws());
  for (auto& c : all)
    if (c.draws() != shortest) throw ValidationError("chains have different numbers of draws");
  ChainSet set(std::move(all));
  fs::path dir = o.out.value_or(".");
  json doc = {{"schema_version", kSchemaVersion},
              {"seed", seed_json(seed)},
              {"chains", set.size()},
              {"draws_per_chain", set.draws()},
              {"changepoint_probability", changepoint_marginals(set)},
              {"ess", ess_json(set, seconds)},
              {"psrf", psrf_json(set)},
              {"wall_clock_seconds", seconds}};
  write_json(dir / "diagnostics.json", doc);
  write_trace(dir / "trace.csv", set, seed);
  write_histograms(dir / "histograms.csv", set, bins, seed);
  std::cout << "wrote " << (dir / "diagnostics.json").string() << ", trace.csv, histograms.csv\n";
  return kOk;
}

int cmd_ppc(const std::string& samples, const std::string& data_path, const std::string& config, const Overrides& o) {
  RunConfig cfg = load(config, o);
  auto table = read_incidence_csv(data_path);
  ChainSet set(read_samples_csv(samples));
  if (!(set[0].grid == table.grid)) throw ValidationError("samples and data use different observation grids");
  Rng rng = make_stream(cfg.sampler.seed, 1000);
  auto band = posterior_predictive(set, cfg.initial, cfg.predictive_draws, cfg.level, rng);
  fs::path path = cfg.output_dir / "ppc.csv";
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "# seed=" << cfg.sampler.seed << "\n# level=" << cfg.level << "\nt_start,t_end,lower,mean,upper,observed\n";
  int inside = 0;
  for (std::size_t k = 0; k < band.mean.size(); ++k) {
    long y = table.counts.counts[k];
    inside += (y >= band.lower[k] && y <= band.upper[k]) ? 1 : 0;
    out << table.grid[k] << ',' << table.grid[k + 1] << ',' << band.lower[k] << ',' << band.mean[k] << ','
        << band.upper[k] << ',' << y << '\n';
  }
  std::cout << "wrote " << path.string() << " (" << inside << "/" << band.mean.size() << " observed counts inside)\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Change-point inference for stochastic SIR incidence data"};
  app.require_subcommand(1);
  Overrides o;
  std::string config, data, samples;
  std::vector<std::string> sample_files;
  int bins = 40;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "JSON run configuration");
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--out", o.out, "output directory");
  };
  auto* sim = app.add_subcommand("simulate", "simulate an epidemic and write incidence.csv and truth.json");
  add_common(sim);

  auto* fit = app.add_subcommand("fit", "fit the sampler to incidence data");
  add_common(fit);
  fit->add_option("data", data, "incidence CSV")->required();
  fit->add_option("--chains", o.chains, "number of chains");
  fit->add_option("--mode", o.mode, "learn, homogeneous or fixed")->check(CLI::IsMember({"learn", "homogeneous", "fixed"}));
  fit->add_option("--fixed-delta", o.fixed_delta, "change-point bits for --mode fixed");
  fit->add_option("--iterations", o.iterations, "iterations per chain");
  fit->add_option("--burn-in", o.burn_in, "discarded iterations");
  fit->add_option("--thin", o.thin, "keep every n-th draw");
  fit->add_option("--level", o.level, "credible level");

  auto* diag = app.add_subcommand("diagnose", "convergence diagnostics and plot tables from samples files");
  diag->add_option("samples", sample_files, "samples CSV files")->required();
  diag->add_option("--out", o.out, "output directory");
  diag->add_option("--bins", bins, "histogram bins")->check(CLI::PositiveNumber);

  auto* ppc = app.add_subcommand("ppc", "posterior predictive band of new cases");
  add_common(ppc);
  ppc->add_option("samples", samples, "samples CSV")->required();
  ppc->add_option("data", data, "incidence CSV")->required();
  ppc->add_option("--level", o.level, "band level");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidation;
  }

  try {
    if (*sim) return cmd_simulate(config, o);
    if (*fit) return cmd_fit(data, config, o);
    if (*diag) return cmd_diagnose(sample_files, o, bins);
    if (*ppc) return cmd_ppc(samples, data, config, o);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kRuntime;
}
