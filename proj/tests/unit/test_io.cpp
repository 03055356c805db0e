#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "epicpt/errors.hpp"
#include "epicpt/io.hpp"

using namespace epicpt;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("epicpt_test_io_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) { std::ofstream(path) << text; }

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run(const std::string& args) {
  std::string cmd = std::string(EPICPT_BIN) + " " + args + " > /dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kSmallConfig = R"({
  "population": {"s0": 400, "i0": 4},
  "grid": {"t_start": 0, "step": 1, "intervals": 6},
  "truth": {"kind": "piecewise", "change_points": [3], "beta": [0.003, 0.001], "gamma": 1.0},
  "sampler": {"iterations": 300, "latent_steps": 2},
  "run": {"predictive_draws": 100}
})";

}  // namespace

TEST_CASE("config parsing") {
  auto cfg = parse_config(json::parse(kSmallConfig));
  CHECK(cfg.initial.s0 == 400);
  CHECK(cfg.grid.intervals() == 6);
  CHECK(cfg.sampler.iterations == 300);
  CHECK(cfg.sampler.gamma == 1.0);
  CHECK(cfg.priors.pi01.a == 0.5);

  auto doc = json::parse(kSmallConfig);
  doc["sampler"]["iteration"] = 5;
  CHECK_THROWS_AS(parse_config(doc), ValidationError);
  doc = json::parse(kSmallConfig);
  doc["extra"] = json::object();
  CHECK_THROWS_AS(parse_config(doc), ValidationError);
  doc = json::parse(kSmallConfig);
  doc["sampler"]["iterations"] = "many";
  CHECK_THROWS_AS(parse_config(doc), ValidationError);
  doc = json::parse(kSmallConfig);
  doc["sampler"]["mode"] = "fixed";
  doc["sampler"]["fixed_delta"] = "0101";
  CHECK_THROWS_AS(parse_config(doc), ValidationError);
  doc["sampler"]["fixed_delta"] = "00100";
  CHECK(parse_config(doc).sampler.fixed_delta == ChangePointVector::parse("00100"));
  doc = json::parse(kSmallConfig);
  doc["sampler"]["delta_sweeps"] = 2;
  doc["sampler"]["delta_block_size"] = 3;
  auto sc = parse_config(doc).sampler;
  CHECK(sc.delta_sweeps == 2);
  CHECK(sc.delta_block_size == 3);
  doc["sampler"]["delta_sweeps"] = 0;
  CHECK_THROWS_AS(parse_config(doc).sampler.validate(6), ValidationError);
  doc = json::parse(kSmallConfig);
  doc["priors"] = {{"preset", "be-5-50"}, {"beta", {{"shape", 2}, {"rate", 3}}}};
  auto p = parse_config(doc).priors;
  CHECK(p.pi01.a == 5.0);
  CHECK(p.pi11.b == 10.0);
  CHECK(p.beta.rate == 3.0);

  for (const char* name : {"setting1.json", "setting2.json"}) {
    auto c = load_config(fs::path(EPICPT_CONFIG_DIR) / name);
    CHECK(c.grid.intervals() == 12);
  }
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), IoError);
  auto dir = scratch("cfg");
  write_text(dir / "broken.json", "{\"population\": ");
  CHECK_THROWS_AS(load_config(dir / "broken.json"), IoError);
}

TEST_CASE("incidence csv round trip and errors") {
  auto dir = scratch("inc");
  auto grid = ObservationGrid({0.0, 0.5, 1.5, 3.0});
  IncidenceSeries obs{{4, 0, 7}};
  write_incidence_csv(dir / "a.csv", grid, obs, {{"seed", "9"}});
  auto t = read_incidence_csv(dir / "a.csv");
  CHECK(t.grid == grid);
  CHECK(t.counts.counts == obs.counts);
  CHECK(t.header.at(0).second == "9");
  CHECK(read_text(dir / "a.csv").find("t_start,t_end,count") != std::string::npos);

  write_text(dir / "gap.csv", "t_start,t_end,count\n0,1,3\n2,3,1\n");
  try {
    read_incidence_csv(dir / "gap.csv");
    FAIL("expected an error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("gap.csv:3") != std::string::npos);
  }
  write_text(dir / "neg.csv", "t_start,t_end,count\n0,1,-3\n");
  CHECK_THROWS_AS(read_incidence_csv(dir / "neg.csv"), IoError);
  write_text(dir / "empty.csv", "");
  CHECK_THROWS_AS(read_incidence_csv(dir / "empty.csv"), IoError);
  write_text(dir / "header.csv", "t_start,t_end,count\n");
  CHECK_THROWS_AS(read_incidence_csv(dir / "header.csv"), IoError);
  CHECK_THROWS_AS(read_incidence_csv(dir / "missing.csv"), IoError);
}

TEST_CASE("samples csv round trip") {
  auto dir = scratch("samples");
  auto cfg = parse_config(json::parse(kSmallConfig));
  Rng rng = make_stream(3, 0);
  auto sim = simulate_sir({cfg.initial, std::get<TransmissionRate>(cfg.truth), 1.0, 0.0, 6.0}, rng);
  FitData data{cfg.grid, aggregate_incidence(sim.trajectory, cfg.grid), cfg.initial};
  cfg.sampler.iterations = 100;
  auto configs = std::vector<SamplerConfig>(2, cfg.sampler);
  auto chains = run_chains(data, cfg.priors, configs, 1);
  write_samples_csv(dir / "s.csv", chains, {{"seed", "1"}});
  auto back = read_samples_csv(dir / "s.csv");
  REQUIRE(back.size() == 2);
  for (std::size_t c = 0; c < 2; ++c) {
    CHECK(back[c].grid == cfg.grid);
    CHECK(back[c].delta == chains[c].delta);
    CHECK(back[c].iteration == chains[c].iteration);
    CHECK((back[c].beta_interval - chains[c].beta_interval).cwiseAbs().maxCoeff() <=
          1e-15 * chains[c].beta_interval.cwiseAbs().maxCoeff() + 1e-300);
  }
  auto header = read_text(dir / "s.csv");
  CHECK(header.find("beta_interval_6") != std::string::npos);
  CHECK(header.find("delta_5") != std::string::npos);
}

TEST_CASE("command line") {
  auto dir = scratch("cli");
  write_text(dir / "small.json", kSmallConfig);
  const std::string cfg = "--config " + (dir / "small.json").string();
  const std::string a = (dir / "a").string(), b = (dir / "b").string();

  REQUIRE(run("simulate " + cfg + " --seed 5 --out " + a) == 0);
  REQUIRE(run("simulate " + cfg + " --seed 5 --out " + b) == 0);
  CHECK(read_text(dir / "a/incidence.csv") == read_text(dir / "b/incidence.csv"));
  auto truth = json::parse(read_text(dir / "a/truth.json"));
  CHECK(truth["schema_version"] == kSchemaVersion);
  CHECK(truth["seed"] == 5);
  CHECK(read_text(dir / "a/incidence.csv").find("seed=5") != std::string::npos);

  const std::string data = (dir / "a/incidence.csv").string();
  REQUIRE(run("fit " + cfg + " --seed 7 --chains 2 --out " + a + " " + data) == 0);
  REQUIRE(run("fit " + cfg + " --seed 7 --chains 2 --out " + b + " " + data) == 0);
  auto strip_clock = [](std::string s) {
    std::string out;
    std::istringstream in(s);
    for (std::string line; std::getline(in, line);)
      if (line.find("wall_clock") == std::string::npos) out += line + "\n";
    return out;
  };
  CHECK(strip_clock(read_text(dir / "a/samples.csv")) == strip_clock(read_text(dir / "b/samples.csv")));
  auto summary = json::parse(read_text(dir / "a/summary.json"));
  CHECK(summary["schema_version"] == kSchemaVersion);
  CHECK(summary["seed"] == 7);
  CHECK(summary.contains("changepoint_probability"));

  REQUIRE(run("diagnose --out " + a + " " + (dir / "a/samples.csv").string()) == 0);
  auto diag = json::parse(read_text(dir / "a/diagnostics.json"));
  CHECK(diag["schema_version"] == kSchemaVersion);
  CHECK(diag["seed"] == 7);
  REQUIRE(run("ppc " + cfg + " --out " + a + " " + (dir / "a/samples.csv").string() + " " + data) == 0);
  CHECK(fs::exists(dir / "a/ppc.csv"));

  // homogeneous mode writes all-zero indicator columns
  REQUIRE(run("fit " + cfg + " --seed 7 --mode homogeneous --out " + b + " " + data) == 0);
  auto homo = read_samples_csv(dir / "b/samples.csv");
  for (const auto& d : homo.at(0).delta) CHECK(d.popcount() == 0);

  // exit codes
  CHECK(run("fit " + cfg + " --iterations 0 --out " + b + " " + data) == 2);
  CHECK(run("fit " + cfg + " --mode fixed --fixed-delta 01 --out " + b + " " + data) == 2);
  CHECK(run("fit " + cfg + " --mode sometimes " + data) == 2);
  CHECK(run("frobnicate") == 2);
  write_text(dir / "bad.json", R"({"sampler": {"iterationz": 5}})");
  CHECK(run("simulate --config " + (dir / "bad.json").string() + " --out " + b) == 2);
  CHECK(run("fit " + cfg + " --out " + b + " " + (dir / "missing.csv").string()) == 4);
  CHECK(run("simulate --config " + (dir / "nothing.json").string()) == 4);
  write_text(dir / "ragged.csv", "t_start,t_end,count\n0,1,3\n1,2\n");
  CHECK(run("fit " + cfg + " --out " + b + " " + (dir / "ragged.csv").string()) == 4);
  write_text(dir / "impossible.csv", "t_start,t_end,count\n0,1,0\n1,2,0\n2,3,0\n3,4,0\n4,5,0\n5,6,900\n");
  CHECK(run("fit " + cfg + " --out " + b + " " + (dir / "impossible.csv").string()) == 2);
  fs::remove_all(dir.parent_path());
}
