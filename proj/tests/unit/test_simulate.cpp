#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracle/bspline_oracle.hpp"
#include "oracle/ctmc_oracle.hpp"
#include "epicpt/simulate.hpp"

using namespace epicpt;

namespace {

// Probability that S(t) = s under the exact chain, for s = 0..s0.
std::vector<double> susceptible_law(long s0, long i0, double beta, double gamma, double t) {
  oracle::SirChain chain(s0, i0);
  Eigen::RowVectorXd p = Eigen::RowVectorXd::Zero(chain.size());
  p(chain.id(s0, i0)) = 1.0;
  p = p * chain.transition(beta, gamma, t);
  std::vector<double> law(static_cast<std::size_t>(s0 + 1), 0.0);
  for (int j = 0; j < chain.size(); ++j) law[static_cast<std::size_t>(chain.s_of(j))] += p(j);
  return law;
}

double chi_square(const std::vector<long>& counts, const std::vector<double>& law, long n) {
  double stat = 0.0;
  for (std::size_t j = 0; j < law.size(); ++j) {
    double e = law[j] * static_cast<double>(n);
    if (e < 1e-9) continue;
    stat += (static_cast<double>(counts[j]) - e) * (static_cast<double>(counts[j]) - e) / e;
  }
  return stat;
}

}  // namespace

TEST_CASE("same seed gives the same trajectory") {
  auto sc = setting_one();
  SimConfig cfg{sc.initial, sc.rate, sc.gamma, 0, 12};
  Rng a = make_stream(5, 0), b = make_stream(5, 0);
  auto x = simulate_sir(cfg, a);
  auto y = simulate_sir(cfg, b);
  CHECK(aggregate_incidence(x.trajectory, sc.grid).counts == aggregate_incidence(y.trajectory, sc.grid).counts);
  CHECK(std::equal(x.trajectory.removal_times().begin(), x.trajectory.removal_times().end(),
                   y.trajectory.removal_times().begin()));
}

TEST_CASE("simulated paths are valid and respect the window") {
  auto sc = setting_one();
  Rng rng = make_stream(8, 0);
  for (int rep = 0; rep < 5; ++rep) {
    auto r = simulate_sir({sc.initial, sc.rate, sc.gamma, 0, 12}, rng);
    CHECK_FALSE(r.trajectory.check().has_value());
    for (double t : r.trajectory.infection_times()) CHECK(t <= 12.0);
    auto inc = aggregate_incidence(r.trajectory, sc.grid);
    CHECK(inc.size() == 12);
    CHECK(static_cast<std::size_t>(inc.total()) == r.trajectory.infections());
  }
}

TEST_CASE("extinction is recorded") {
  Rng rng = make_stream(1, 0);
  SimConfig cfg{{50, 1, 0}, TransmissionRate::constant(0, 100, 1e-9), 5.0, 0, 100};
  auto r = simulate_sir(cfg, rng);
  CHECK(r.extinct);
  CHECK(r.extinction_time > 0.0);
  CHECK(r.extinction_time < 100.0);
}

TEST_CASE("tiny horizon gives all-zero counts") {
  Rng rng = make_stream(2, 0);
  auto g = ObservationGrid::uniform(0, 1e-9, 3);
  SimConfig cfg{{100, 1, 0}, TransmissionRate::constant(0, 3e-9, 1e-4), 1.0, 0, 3e-9};
  auto r = simulate_sir(cfg, rng);
  CHECK(aggregate_incidence(r.trajectory, g).total() == 0);
}

TEST_CASE("susceptible count matches the exact chain law") {
  const long s0 = 6, i0 = 1, n = 20000;
  const double beta = 0.3, gamma = 1.0, t = 1.5;
  auto law = susceptible_law(s0, i0, beta, gamma, t);
  Rng rng = make_stream(21, 0);
  std::vector<long> counts(static_cast<std::size_t>(s0 + 1), 0);
  for (long r = 0; r < n; ++r) {
    auto x = simulate_sir({{s0, i0, 0}, TransmissionRate::constant(0, t, beta), gamma, 0, t}, rng);
    ++counts[static_cast<std::size_t>(compartments_at(x.trajectory, t).s)];
  }
  // 6 degrees of freedom; 99.9% point is 22.46
  CHECK(chi_square(counts, law, n) < 22.46);
}

TEST_CASE("thinning with a flat spline matches the exact chain law") {
  const long s0 = 6, i0 = 1, n = 20000;
  const double beta = 0.3, gamma = 1.0, t = 1.5;
  auto law = susceptible_law(s0, i0, beta, gamma, t);
  Eigen::VectorXd coef = Eigen::VectorXd::Constant(5, beta);
  SmoothRate flat(0, t, {0.7}, coef);
  Rng rng = make_stream(22, 0);
  std::vector<long> counts(static_cast<std::size_t>(s0 + 1), 0);
  for (long r = 0; r < n; ++r) {
    auto x = simulate_sir({{s0, i0, 0}, flat, gamma, 0, t}, rng);
    ++counts[static_cast<std::size_t>(compartments_at(x.trajectory, t).s)];
  }
  CHECK(chi_square(counts, law, n) < 22.46);
}

TEST_CASE("piecewise rate switches at the change point") {
  // beta jumps from 0.05 to 0.6 at t = 1; compare with the chain run in two legs
  const long s0 = 5, i0 = 1, n = 20000;
  oracle::SirChain chain(s0, i0);
  Eigen::RowVectorXd p = Eigen::RowVectorXd::Zero(chain.size());
  p(chain.id(s0, i0)) = 1.0;
  p = p * chain.transition(0.05, 1.0, 1.0) * chain.transition(0.6, 1.0, 1.0);
  std::vector<double> law(static_cast<std::size_t>(s0 + 1), 0.0);
  for (int j = 0; j < chain.size(); ++j) law[static_cast<std::size_t>(chain.s_of(j))] += p(j);
  Rng rng = make_stream(23, 0);
  std::vector<long> counts(static_cast<std::size_t>(s0 + 1), 0);
  for (long r = 0; r < n; ++r) {
    auto x = simulate_sir({{s0, i0, 0}, TransmissionRate(0, 2, {1.0}, {0.05, 0.6}), 1.0, 0, 2}, rng);
    ++counts[static_cast<std::size_t>(compartments_at(x.trajectory, 2.0).s)];
  }
  CHECK(chi_square(counts, law, n) < 20.52);  // 5 dof
}

TEST_CASE("spline evaluation agrees with Cox-de Boor") {
  auto sc = setting_two();
  const auto& sp = std::get<SmoothRate>(sc.rate);
  std::vector<double> interior(sp.interior_knots().begin(), sp.interior_knots().end());
  std::vector<double> coef(sp.coefficients().data(), sp.coefficients().data() + sp.coefficients().size());
  for (double t = 0.0; t <= 12.0; t += 0.173) {
    CHECK(sp(t) == doctest::Approx(oracle::clamped_cubic(0, 12, interior, coef, t)).epsilon(1e-10));
    CHECK(sp(t) <= sp.envelope() * (1 + 1e-12));
  }
  CHECK(sp(0.0) == doctest::Approx(1.75e-4));
  CHECK(sp(12.0) == doctest::Approx(0.75e-4));
  CHECK_THROWS(sp(12.5));
}

TEST_CASE("spline construction checks") {
  Eigen::VectorXd four = Eigen::VectorXd::Ones(4);
  CHECK_NOTHROW(SmoothRate(0, 1, {}, four));
  CHECK_THROWS(SmoothRate(0, 1, {0.5}, four));
  CHECK_THROWS(SmoothRate(0, 1, {1.5}, Eigen::VectorXd::Ones(5)));
  CHECK_THROWS(SmoothRate(0, 1, {}, -four));
}
