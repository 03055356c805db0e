#include "epicpt/io.hpp"

#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace epicpt {

using nlohmann::json;

namespace {

// Object whose keys must all be consumed.
class Section {
 public:
  Section(const json& doc, std::string name) : doc_(doc), name_(std::move(name)) {
    if (!doc_.is_object()) throw ValidationError("'" + name_ + "' must be an object");
  }

  const json* find(const std::string& key) {
    auto it = doc_.find(key);
    if (it == doc_.end()) return nullptr;
    used_.insert(key);
    return &*it;
  }

  template <class T>
  void read(const std::string& key, T& out) {
    if (const json* v = find(key)) {
      try {
        out = v->get<T>();
      } catch (const json::exception&) {
        throw ValidationError("'" + name_ + "." + key + "' has the wrong type");
      }
    }
  }

  template <class T>
  void read_optional(const std::string& key, std::optional<T>& out) {
    if (const json* v = find(key)) {
      T value{};
      read(key, value);
      out = value;
    }
  }

  Section sub(const std::string& key) { return Section(*find(key), name_ + "." + key); }
  bool has(const std::string& key) const { return doc_.contains(key); }

  void finish() const {
    for (auto it = doc_.begin(); it != doc_.end(); ++it)
      if (!used_.count(it.key())) throw ValidationError("unknown configuration key '" + name_ + "." + it.key() + "'");
  }

 private:
  const json& doc_;
  std::string name_;
  std::set<std::string> used_;
};

void read_gamma_prior(Section s, GammaPrior& p) {
  s.read("shape", p.shape);
  s.read("rate", p.rate);
  s.finish();
}

void read_beta_prior(Section s, BetaPrior& p) {
  s.read("a", p.a);
  s.read("b", p.b);
  s.finish();
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

void write_header(std::ostream& out, const CsvHeader& header) {
  for (const auto& [k, v] : header) out << "# " << k << '=' << v << '\n';
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  auto issp = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && issp(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && issp(static_cast<unsigned char>(s[i]))) ++i;
  return s.substr(i);
}

// Line reader that collects "# key=value" headers and numbers the lines.
class CsvReader {
 public:
  explicit CsvReader(const std::filesystem::path& path) : path_(path), in_(path) {
    if (!in_) throw IoError("cannot read '" + path.string() + "'");
  }

  bool next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (trim(line).empty()) continue;
      if (line[0] == '#') {
        auto body = trim(line.substr(1));
        auto eq = body.find('=');
        if (eq != std::string::npos) header_.emplace_back(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
        continue;
      }
      fields = split(line, ',');
      for (auto& f : fields) f = trim(f);
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw IoError(path_.string() + ":" + std::to_string(line_no_) + ": " + what);
  }

  double number(const std::string& field) const {
    try {
      std::size_t used = 0;
      double v = std::stod(field, &used);
      if (used != field.size()) fail("'" + field + "' is not a number");
      return v;
    } catch (const std::logic_error&) {
      fail("'" + field + "' is not a number");
    }
  }

  long integer(const std::string& field) const {
    try {
      std::size_t used = 0;
      long v = std::stol(field, &used);
      if (used != field.size()) fail("'" + field + "' is not an integer");
      return v;
    } catch (const std::logic_error&) {
      fail("'" + field + "' is not an integer");
    }
  }

  const CsvHeader& header() const { return header_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  long line_no_ = 0;
  CsvHeader header_;
};

std::string header_value(const CsvHeader& header, const std::string& key) {
  for (const auto& [k, v] : header)
    if (k == key) return v;
  return {};
}

}  // namespace

std::vector<SamplerConfig> RunConfig::chain_configs() const {
  std::vector<SamplerConfig> out(static_cast<std::size_t>(chains), sampler);
  for (std::size_t c = 0; c < out.size() && c < chain_initial_beta.size(); ++c)
    out[c].initial_beta = chain_initial_beta[c];
  return out;
}

RunConfig parse_config(const json& doc) {
  RunConfig cfg;
  Section root(doc, "config");

  if (root.has("population")) {
    auto s = root.sub("population");
    s.read("s0", cfg.initial.s0);
    s.read("i0", cfg.initial.i0);
    s.read("r0", cfg.initial.r0);
    s.finish();
  }
  if (cfg.initial.s0 < 0 || cfg.initial.i0 < 0 || cfg.initial.r0 < 0)
    throw ValidationError("population counts must be non-negative");

  if (root.has("grid")) {
    auto s = root.sub("grid");
    std::vector<double> times;
    double t_start = 0.0, step = 1.0;
    std::size_t intervals = 12;
    s.read("times", times);
    s.read("t_start", t_start);
    s.read("step", step);
    s.read("intervals", intervals);
    s.finish();
    try {
      cfg.grid = times.empty() ? ObservationGrid::uniform(t_start, step, intervals) : ObservationGrid(times);
    } catch (const std::invalid_argument& e) {
      throw ValidationError(std::string("grid: ") + e.what());
    }
  }

  if (root.has("truth")) {
    auto s = root.sub("truth");
    std::string kind = "piecewise";
    std::vector<double> points, values;
    s.read("kind", kind);
    s.read("gamma", cfg.true_gamma);
    try {
      if (kind == "piecewise") {
        s.read("change_points", points);
        s.read("beta", values);
        cfg.truth = TransmissionRate(cfg.grid.start(), cfg.grid.end(), points, values);
      } else if (kind == "spline") {
        s.read("knots", points);
        s.read("coefficients", values);
        cfg.truth = SmoothRate(cfg.grid.start(), cfg.grid.end(), points,
                               Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
      } else {
        throw ValidationError("truth.kind must be 'piecewise' or 'spline'");
      }
    } catch (const std::invalid_argument& e) {
      throw ValidationError(std::string("truth: ") + e.what());
    }
    s.finish();
  } else {
    // default truth lives on the default grid; rebuild it for custom grids
    if (!(cfg.grid == ObservationGrid::uniform(0.0, 1.0, 12)))
      cfg.truth = TransmissionRate::constant(cfg.grid.start(), cfg.grid.end(), 1.25e-4);
  }
  if (!(cfg.true_gamma > 0.0)) throw ValidationError("truth.gamma must be positive");

  if (root.has("priors")) {
    auto s = root.sub("priors");
    std::string preset = "jeffreys";
    s.read("preset", preset);
    cfg.priors = Hyperparams::preset(preset);
    if (s.has("beta")) read_gamma_prior(s.sub("beta"), cfg.priors.beta);
    if (s.has("pi01")) read_beta_prior(s.sub("pi01"), cfg.priors.pi01);
    if (s.has("pi11")) read_beta_prior(s.sub("pi11"), cfg.priors.pi11);
    if (s.has("gamma")) read_gamma_prior(s.sub("gamma"), cfg.priors.gamma);
    s.finish();
  }
  cfg.priors.validate();

  cfg.sampler.gamma = cfg.true_gamma;
  if (root.has("sampler")) {
    auto s = root.sub("sampler");
    auto& sc = cfg.sampler;
    std::string mode = "learn";
    std::string fixed, initial_delta;
    std::optional<double> pi01, pi11;
    s.read("iterations", sc.iterations);
    s.read("burn_in", sc.burn_in);
    s.read("thin", sc.thin);
    s.read("delta_block_size", sc.delta_block_size);
    s.read("delta_sweeps", sc.delta_sweeps);
    s.read("mode", mode);
    s.read("fixed_delta", fixed);
    s.read("estimate_gamma", sc.estimate_gamma);
    s.read("gamma", sc.gamma);
    s.read("latent_block", sc.latent_block);
    s.read("latent_steps", sc.latent_steps);
    s.read("delta_prior_in_ratio", sc.delta_prior_in_ratio);
    s.read("initial_delta", initial_delta);
    s.read_optional("initial_beta", sc.initial_beta);
    s.read_optional("initial_pi01", pi01);
    s.read_optional("initial_pi11", pi11);
    s.read("verify_cache", sc.verify_cache);
    s.finish();
    sc.mode = parse_mode(mode);
    try {
      if (!fixed.empty()) sc.fixed_delta = ChangePointVector::parse(fixed);
      if (!initial_delta.empty()) sc.initial_delta = ChangePointVector::parse(initial_delta);
    } catch (const std::invalid_argument& e) {
      throw ValidationError(std::string("sampler: ") + e.what());
    }
    if (pi01 || pi11) {
      TransitionMatrix pi{pi01.value_or(cfg.priors.pi01.mean()), pi11.value_or(cfg.priors.pi11.mean())};
      sc.initial_pi = pi;
    }
  }

  if (root.has("run")) {
    auto s = root.sub("run");
    std::string dir = ".";
    s.read("seed", cfg.sampler.seed);
    s.read("chains", cfg.chains);
    s.read("output_dir", dir);
    s.read("level", cfg.level);
    s.read("predictive_draws", cfg.predictive_draws);
    s.read("chain_initial_beta", cfg.chain_initial_beta);
    s.finish();
    cfg.output_dir = dir;
  }
  root.finish();

  if (cfg.chains < 1) throw ValidationError("run.chains must be at least 1");
  if (!(cfg.level > 0.0 && cfg.level < 1.0)) throw ValidationError("run.level must lie in (0, 1)");
  if (cfg.predictive_draws < 100) throw ValidationError("run.predictive_draws must be at least 100");
  if (cfg.sampler.mode == SamplerMode::fixed && cfg.sampler.fixed_delta.size() == 0 && cfg.grid.intervals() > 1)
    throw ValidationError("mode 'fixed' needs sampler.fixed_delta");
  if (cfg.sampler.mode != SamplerMode::fixed || cfg.sampler.fixed_delta.size() > 0) cfg.sampler.validate(cfg.grid.intervals());
  for (const auto& b : cfg.chain_initial_beta) {
    SamplerConfig probe = cfg.sampler;
    probe.initial_beta = b;
    probe.validate(cfg.grid.intervals());
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw IoError("cannot parse config '" + path.string() + "': " + e.what());
  }
  return parse_config(doc);
}

void write_incidence_csv(const std::filesystem::path& path, const ObservationGrid& grid, const IncidenceSeries& obs,
                         const CsvHeader& header) {
  auto out = open_output(path);
  write_header(out, header);
  out << "t_start,t_end,count\n";
  for (std::size_t k = 1; k <= grid.intervals(); ++k)
    out << format_double(grid[k - 1]) << ',' << format_double(grid[k]) << ',' << obs.counts[k - 1] << '\n';
  if (!out) throw IoError("error writing '" + path.string() + "'");
}

IncidenceTable read_incidence_csv(const std::filesystem::path& path) {
  CsvReader reader(path);
  std::vector<std::string> f;
  if (!reader.next(f)) reader.fail("empty incidence file");
  if (f != std::vector<std::string>{"t_start", "t_end", "count"}) reader.fail("header must be 't_start,t_end,count'");
  std::vector<double> times;
  std::vector<long> counts;
  while (reader.next(f)) {
    if (f.size() != 3) reader.fail("expected 3 fields");
    double a = reader.number(f[0]);
    double b = reader.number(f[1]);
    long c = reader.integer(f[2]);
    if (c < 0) reader.fail("negative count");
    if (!(b > a)) reader.fail("t_end must exceed t_start");
    if (times.empty())
      times.push_back(a);
    else if (a != times.back())
      reader.fail("intervals must be contiguous");
    times.push_back(b);
    counts.push_back(c);
  }
  if (counts.empty()) reader.fail("no data rows");
  return {ObservationGrid(std::move(times)), IncidenceSeries{std::move(counts)}, reader.header()};
}

void write_samples_csv(const std::filesystem::path& path, const std::vector<PosteriorSamples>& chains,
                       const CsvHeader& header) {
  if (chains.empty()) throw std::invalid_argument("no chains to write");
  const auto& grid = chains.front().grid;
  const std::size_t K = grid.intervals();
  auto out = open_output(path);
  write_header(out, header);
  std::ostringstream times;
  for (std::size_t k = 0; k <= K; ++k) times << (k ? ";" : "") << format_double(grid[k]);
  out << "# grid=" << times.str() << '\n';
  out << "iteration,chain";
  for (std::size_t k = 1; k <= K; ++k) out << ",beta_interval_" << k;
  for (std::size_t p = 1; p < K; ++p) out << ",delta_" << p;
  out << ",pi01,pi11,gamma,log_likelihood\n";
  for (const auto& c : chains) {
    for (std::size_t r = 0; r < c.draws(); ++r) {
      const auto i = static_cast<Eigen::Index>(r);
      out << c.iteration[r] << ',' << c.chain;
      for (std::size_t k = 0; k < K; ++k) out << ',' << format_double(c.beta_interval(i, static_cast<Eigen::Index>(k)));
      for (std::size_t p = 0; p + 1 < K; ++p) out << ',' << (c.delta[r][p] ? 1 : 0);
      out << ',' << format_double(c.pi01[i]) << ',' << format_double(c.pi11[i]) << ',' << format_double(c.gamma[i])
          << ',' << format_double(c.log_likelihood[i]) << '\n';
    }
  }
  if (!out) throw IoError("error writing '" + path.string() + "'");
}

std::vector<PosteriorSamples> read_samples_csv(const std::filesystem::path& path) {
  CsvReader reader(path);
  std::vector<std::string> f;
  if (!reader.next(f)) reader.fail("empty samples file");
  std::string grid_text = header_value(reader.header(), "grid");
  if (grid_text.empty()) reader.fail("missing '# grid=' header line");
  std::vector<double> times;
  for (const auto& t : split(grid_text, ';')) times.push_back(reader.number(trim(t)));
  ObservationGrid grid(times);
  const std::size_t K = grid.intervals();

  std::vector<std::string> expected{"iteration", "chain"};
  for (std::size_t k = 1; k <= K; ++k) expected.push_back("beta_interval_" + std::to_string(k));
  for (std::size_t p = 1; p < K; ++p) expected.push_back("delta_" + std::to_string(p));
  for (const char* name : {"pi01", "pi11", "gamma", "log_likelihood"}) expected.emplace_back(name);
  if (f != expected) reader.fail("unexpected column layout");

  struct Rows {
    std::vector<long> iteration;
    std::vector<std::vector<double>> beta;
    std::vector<ChangePointVector> delta;
    std::vector<double> pi01, pi11, gamma, ll;
  };
  std::map<int, Rows> by_chain;
  while (reader.next(f)) {
    if (f.size() != expected.size()) reader.fail("expected " + std::to_string(expected.size()) + " fields");
    auto& rows = by_chain[static_cast<int>(reader.integer(f[1]))];
    rows.iteration.push_back(reader.integer(f[0]));
    std::vector<double> beta(K);
    for (std::size_t k = 0; k < K; ++k) beta[k] = reader.number(f[2 + k]);
    rows.beta.push_back(std::move(beta));
    std::vector<std::uint8_t> bits(K - 1);
    for (std::size_t p = 0; p + 1 < K; ++p) {
      long b = reader.integer(f[2 + K + p]);
      if (b != 0 && b != 1) reader.fail("change-point indicators must be 0 or 1");
      bits[p] = static_cast<std::uint8_t>(b);
    }
    rows.delta.emplace_back(std::move(bits));
    const std::size_t base = 2 * K + 1;
    rows.pi01.push_back(reader.number(f[base]));
    rows.pi11.push_back(reader.number(f[base + 1]));
    rows.gamma.push_back(reader.number(f[base + 2]));
    rows.ll.push_back(reader.number(f[base + 3]));
  }
  if (by_chain.empty()) reader.fail("no sample rows");

  std::string seed = header_value(reader.header(), "seed");
  std::vector<PosteriorSamples> out;
  for (auto& [chain, rows] : by_chain) {
    PosteriorSamples s(grid);
    s.chain = chain;
    if (!seed.empty()) s.seed = std::stoull(seed);
    const auto n = static_cast<Eigen::Index>(rows.iteration.size());
    s.iteration = std::move(rows.iteration);
    s.delta = std::move(rows.delta);
    s.beta_interval.resize(n, static_cast<Eigen::Index>(K));
    for (Eigen::Index r = 0; r < n; ++r)
      for (std::size_t k = 0; k < K; ++k) s.beta_interval(r, static_cast<Eigen::Index>(k)) = rows.beta[static_cast<std::size_t>(r)][k];
    s.pi01 = Eigen::Map<Eigen::VectorXd>(rows.pi01.data(), n);
    s.pi11 = Eigen::Map<Eigen::VectorXd>(rows.pi11.data(), n);
    s.gamma = Eigen::Map<Eigen::VectorXd>(rows.gamma.data(), n);
    s.log_likelihood = Eigen::Map<Eigen::VectorXd>(rows.ll.data(), n);
    s.infections = Eigen::VectorXd::Zero(n);
    out.push_back(std::move(s));
  }
  return out;
}

void write_json(const std::filesystem::path& path, const json& doc) {
  auto out = open_output(path);
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("error writing '" + path.string() + "'");
}

json rate_to_json(const RateFunction& rate) {
  if (const auto* pw = std::get_if<TransmissionRate>(&rate)) {
    return {{"kind", "piecewise"},
            {"change_points", std::vector<double>(pw->change_points().begin(), pw->change_points().end())},
            {"beta", std::vector<double>(pw->values().begin(), pw->values().end())}};
  }
  const auto& sp = std::get<SmoothRate>(rate);
  const auto& c = sp.coefficients();
  return {{"kind", "spline"}, {"knots", std::vector<double>(sp.interior_knots().begin(), sp.interior_knots().end())}, {"coefficients", std::vector<double>(c.data(), c.data() + c.size())}};
}

}  // namespace epicpt
