#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "epicpt/diagnostics.hpp"

using namespace epicpt;

namespace {

Eigen::VectorXd normal_series(std::size_t n, std::uint64_t seed, double mean = 0.0) {
  Rng rng = make_stream(seed, 0);
  std::normal_distribution<double> z;
  Eigen::VectorXd x(static_cast<Eigen::Index>(n));
  for (auto& v : x) v = mean + z(rng);
  return x;
}

Eigen::VectorXd ar1(std::size_t n, double rho, std::uint64_t seed) {
  Rng rng = make_stream(seed, 0);
  std::normal_distribution<double> z;
  Eigen::VectorXd x(static_cast<Eigen::Index>(n));
  x[0] = z(rng) / std::sqrt(1 - rho * rho);
  for (Eigen::Index i = 1; i < x.size(); ++i) x[i] = rho * x[i - 1] + z(rng);
  return x;
}

PosteriorSamples fake_chain(const std::vector<std::string>& deltas, int chain = 0) {
  const std::size_t K = deltas.front().size() + 1;
  PosteriorSamples s(ObservationGrid::uniform(0, 1, K));
  s.chain = chain;
  const auto n = static_cast<Eigen::Index>(deltas.size());
  s.beta_interval = Eigen::MatrixXd::Constant(n, static_cast<Eigen::Index>(K), 0.5);
  s.pi01 = s.pi11 = s.log_likelihood = s.infections = Eigen::VectorXd::Zero(n);
  s.gamma = Eigen::VectorXd::Ones(n);
  for (std::size_t r = 0; r < deltas.size(); ++r) {
    s.iteration.push_back(static_cast<long>(r + 1));
    s.delta.push_back(ChangePointVector::parse(deltas[r]));
  }
  return s;
}

}  // namespace

TEST_CASE("effective sample size") {
  const std::size_t n = 20000;
  auto iid = ess(normal_series(n, 1));
  CHECK_FALSE(iid.degenerate);
  CHECK(std::abs(iid.value - n) < 0.15 * n);
  CHECK(iid.value <= static_cast<double>(n));

  const double rho = 0.9;
  const double want = n * (1 - rho) / (1 + rho);
  CHECK(std::abs(ess(ar1(n, rho, 2)).value - want) < 0.25 * want);

  auto flat = ess(Eigen::VectorXd::Constant(50, 3.0));
  CHECK(flat.degenerate);
  CHECK(flat.value == 0.0);
  CHECK_THROWS_AS(ess(Eigen::VectorXd::Zero(9)), std::invalid_argument);
  // antithetic series would exceed n without the cap
  Eigen::VectorXd alt(100);
  for (Eigen::Index i = 0; i < 100; ++i) alt[i] = (i % 2) ? 1.0 : -1.0;
  CHECK(ess(alt).value <= 100.0);
}

TEST_CASE("scale reduction") {
  const std::size_t n = 10000;
  Eigen::VectorXd a = normal_series(n, 3);
  std::vector<Eigen::VectorXd> same{a, a};
  CHECK(psrf(same) == doctest::Approx(1.0).epsilon(1.0 / n));

  std::vector<Eigen::VectorXd> iid{normal_series(n, 4), normal_series(n, 5), normal_series(n, 6)};
  CHECK(psrf(iid) < 1.1);
  std::vector<Eigen::VectorXd> apart{normal_series(n, 7, 0.0), normal_series(n, 8, 5.0)};
  CHECK(psrf(apart) > 2.0);

  // affine invariance
  std::vector<Eigen::VectorXd> moved;
  for (const auto& v : iid) moved.push_back((3.0 * v.array() + 7.0).matrix());
  CHECK(psrf(moved) == doctest::Approx(psrf(iid)).epsilon(1e-10));
}

TEST_CASE("multivariate scale reduction") {
  const Eigen::Index n = 5000;
  auto block = [&](std::uint64_t seed, double shift) {
    Eigen::MatrixXd x(n, 3);
    x.col(0) = normal_series(n, seed, shift);
    x.col(1) = normal_series(n, seed + 100);
    x.col(2) = 0.5 * x.col(0) + normal_series(n, seed + 200);
    return x;
  };
  std::vector<Eigen::MatrixXd> iid{block(1, 0), block(2, 0), block(3, 0)};
  auto r = mpsrf(iid);
  CHECK_FALSE(r.fallback);
  CHECK(r.value < 1.1);
  CHECK(r.value >= *std::max_element(r.univariate.begin(), r.univariate.end()) - 0.05);

  std::vector<Eigen::MatrixXd> same{iid[0], iid[0]};
  CHECK(mpsrf(same).value == doctest::Approx(1.0).epsilon(1.0 / n));

  std::vector<Eigen::MatrixXd> apart{block(1, 0), block(2, 4)};
  CHECK(mpsrf(apart).value > 2.0);

  // duplicated column: W singular, dropped without a fallback
  std::vector<Eigen::MatrixXd> dup;
  for (const auto& x : iid) {
    Eigen::MatrixXd y(n, 4);
    y << x, x.col(0);
    dup.push_back(y);
  }
  auto rd = mpsrf(dup);
  CHECK_FALSE(rd.fallback);
  CHECK(rd.value == doctest::Approx(r.value).epsilon(1e-8));

  // a column constant within chains but different across chains
  std::vector<Eigen::MatrixXd> stuck = iid;
  for (std::size_t c = 0; c < stuck.size(); ++c) stuck[c].col(1).setConstant(static_cast<double>(c));
  auto rs = mpsrf(stuck);
  CHECK(rs.fallback);
}

TEST_CASE("change-point marginals are pooled frequencies") {
  ChainSet one({fake_chain({"010", "010", "010"})});
  CHECK(changepoint_marginals(one) == std::vector<double>{0, 1, 0});
  ChainSet two({fake_chain({"00001", "00000"}, 0), fake_chain({"00001", "00000"}, 1)});
  auto p = changepoint_marginals(two);
  CHECK(p[4] == doctest::Approx(0.5));
  for (double v : p) CHECK((v >= 0.0 && v <= 1.0));
  CHECK_THROWS(ChainSet({fake_chain({"0", "0"}), fake_chain({"0"})}));
}

TEST_CASE("credible intervals use linear interpolation between order statistics") {
  Eigen::VectorXd x(100);
  for (Eigen::Index i = 0; i < 100; ++i) x[i] = static_cast<double>(100 - i);  // unsorted input
  auto ci = credible_interval(x, 0.95);
  // h = p (n - 1): 2.475 -> 3.475, 96.525 -> 97.525
  CHECK(ci.lower == doctest::Approx(3.475));
  CHECK(ci.upper == doctest::Approx(97.525));
  auto c = credible_interval(Eigen::VectorXd::Constant(10, 2.5), 0.9);
  CHECK(c.lower == 2.5);
  CHECK(c.upper == 2.5);
  auto half = credible_interval(normal_series(10001, 9), 0.5);
  CHECK(half.lower < 0.0);
  CHECK(half.upper > 0.0);
  CHECK_THROWS(credible_interval(x, 1.0));
  CHECK(quantile({1.0, 2.0}, 0.5) == 1.5);
}

TEST_CASE("posterior predictive bands") {
  // single repeated draw: spread comes from simulation only
  std::vector<std::string> d(5, "0");
  auto s = fake_chain(d);
  s.beta_interval.setConstant(0.01);
  ChainSet set({s});
  Rng rng = make_stream(3, 0);
  auto inc = predictive_incidence(set, {100, 2, 0}, 400, rng);
  auto wide = predictive_band(inc, 0.95);
  auto narrow = predictive_band(inc, 0.5);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(wide.lower[k] <= narrow.lower[k]);
    CHECK(narrow.upper[k] <= wide.upper[k]);
    CHECK(wide.lower[k] <= wide.mean[k]);
    CHECK(wide.mean[k] <= wide.upper[k]);
  }
  CHECK(wide.upper[0] > wide.lower[0]);
  CHECK_THROWS(posterior_predictive(set, {100, 2, 0}, 50, 0.95, rng));
}

TEST_CASE("effective reproduction draws") {
  std::vector<std::string> d(3, "0");
  auto s = fake_chain(d);
  s.beta_interval.setConstant(1e-4);
  s.gamma.setConstant(0.5);
  ChainSet set({s});
  auto r = effective_r_draws(set, IncidenceSeries{{100, 50}}, 1000);
  CHECK(r(0, 0) == doctest::Approx(1e-4 * 1000 / 0.5));
  CHECK(r(2, 1) == doctest::Approx(1e-4 * 900 / 0.5));
}
