#include "epicpt/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/FFT>

#include "epicpt/errors.hpp"
#include "epicpt/simulate.hpp"

namespace epicpt {

ChainSet::ChainSet(std::vector<PosteriorSamples> chains) : chains_(std::move(chains)) {
  if (chains_.empty()) throw std::invalid_argument("chain set is empty");
  for (const auto& c : chains_) {
    if (c.draws() != chains_.front().draws()) throw std::invalid_argument("chains have different lengths");
    if (!(c.grid == chains_.front().grid)) throw std::invalid_argument("chains use different observation grids");
  }
}

Eigen::MatrixXd ChainSet::pooled_beta() const {
  const auto n = static_cast<Eigen::Index>(draws());
  Eigen::MatrixXd out(n * static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(intervals()));
  for (std::size_t c = 0; c < size(); ++c) out.middleRows(static_cast<Eigen::Index>(c) * n, n) = chains_[c].beta_interval;
  return out;
}

Eigen::VectorXd ChainSet::pooled(const Eigen::VectorXd PosteriorSamples::*column) const {
  const auto n = static_cast<Eigen::Index>(draws());
  Eigen::VectorXd out(n * static_cast<Eigen::Index>(size()));
  for (std::size_t c = 0; c < size(); ++c) out.segment(static_cast<Eigen::Index>(c) * n, n) = chains_[c].*column;
  return out;
}

std::vector<double> changepoint_marginals(const ChainSet& chains) {
  std::vector<double> p(chains.intervals() - 1, 0.0);
  std::size_t total = 0;
  for (const auto& c : chains.chains()) {
    for (const auto& d : c.delta)
      for (std::size_t i = 0; i < d.size(); ++i) p[i] += d[i] ? 1.0 : 0.0;
    total += c.draws();
  }
  if (total > 0)
    for (double& v : p) v /= static_cast<double>(total);
  return p;
}

namespace {

// Autocovariance at lags 0..n-1 (divisor n) by zero-padded FFT.
Eigen::VectorXd autocovariance(const Eigen::VectorXd& centered) {
  const auto n = centered.size();
  Eigen::Index padded = 1;
  while (padded < 2 * n) padded <<= 1;
  std::vector<double> buf(static_cast<std::size_t>(padded), 0.0);
  std::copy(centered.data(), centered.data() + n, buf.begin());
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> freq;
  fft.fwd(freq, buf);
  for (auto& z : freq) z = std::norm(z);
  std::vector<double> back;
  fft.inv(back, freq);
  Eigen::VectorXd acov(n);
  for (Eigen::Index k = 0; k < n; ++k) acov[k] = back[static_cast<std::size_t>(k)] / static_cast<double>(n);
  return acov;
}

}  // namespace

EssResult ess(const Eigen::Ref<const Eigen::VectorXd>& series) {
  const auto n = series.size();
  if (n < 10) throw std::invalid_argument("effective sample size needs at least 10 values");
  Eigen::VectorXd centered = series.array() - series.mean();
  const double scale = std::max(1.0, series.cwiseAbs().maxCoeff());
  if (centered.cwiseAbs().maxCoeff() <= 1e-14 * scale) return {0.0, true};

  const Eigen::VectorXd acov = autocovariance(centered);
  const Eigen::VectorXd rho = acov / acov[0];
  double sum = 0.0;
  double previous = std::numeric_limits<double>::infinity();
  for (Eigen::Index m = 0; 2 * m + 1 < n; ++m) {
    double pair = rho[2 * m] + rho[2 * m + 1];
    if (!(pair > 0.0)) break;
    pair = std::min(pair, previous);
    previous = pair;
    sum += pair;
  }
  const double tau = std::max(-1.0 + 2.0 * sum, 1.0 / static_cast<double>(n));
  return {std::min(static_cast<double>(n), static_cast<double>(n) / tau), false};
}

double psrf(std::span<const Eigen::VectorXd> chains) {
  if (chains.size() < 2) throw std::invalid_argument("scale reduction needs at least two chains");
  const auto n = chains.front().size();
  if (n < 2) throw std::invalid_argument("scale reduction needs at least two draws per chain");
  const double m = static_cast<double>(chains.size());
  Eigen::VectorXd means(static_cast<Eigen::Index>(chains.size()));
  double w = 0.0;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    if (chains[c].size() != n) throw std::invalid_argument("chains have different lengths");
    means[static_cast<Eigen::Index>(c)] = chains[c].mean();
    w += (chains[c].array() - chains[c].mean()).square().sum() / static_cast<double>(n - 1);
  }
  w /= m;
  const double b_over_n = (means.array() - means.mean()).square().sum() / (m - 1.0);
  const double nn = static_cast<double>(n);
  if (!(w > 0.0)) return b_over_n > 0.0 ? std::numeric_limits<double>::infinity() : std::numeric_limits<double>::quiet_NaN();
  return std::sqrt(((nn - 1.0) / nn * w + b_over_n) / w);
}

Mpsrf mpsrf(std::span<const Eigen::MatrixXd> chains) {
  if (chains.size() < 2) throw std::invalid_argument("scale reduction needs at least two chains");
  const auto n = chains.front().rows();
  const auto p = chains.front().cols();
  if (n < 2 || p < 1) throw std::invalid_argument("scale reduction needs at least two draws and one column");
  const double m = static_cast<double>(chains.size());
  const double nn = static_cast<double>(n);

  Mpsrf out;
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd means(static_cast<Eigen::Index>(chains.size()), p);
  for (std::size_t c = 0; c < chains.size(); ++c) {
    const auto& x = chains[c];
    if (x.rows() != n || x.cols() != p) throw std::invalid_argument("chains have different shapes");
    Eigen::RowVectorXd mu = x.colwise().mean();
    means.row(static_cast<Eigen::Index>(c)) = mu;
    Eigen::MatrixXd centered = x.rowwise() - mu;
    w += centered.transpose() * centered / (nn - 1.0);
  }
  w /= m;
  Eigen::MatrixXd centered_means = means.rowwise() - means.colwise().mean();
  Eigen::MatrixXd b_over_n = centered_means.transpose() * centered_means / (m - 1.0);

  std::vector<Eigen::VectorXd> column(chains.size());
  for (Eigen::Index j = 0; j < p; ++j) {
    for (std::size_t c = 0; c < chains.size(); ++c) column[c] = chains[c].col(j);
    out.univariate.push_back(psrf(column));
  }

  // whiten W on its range; B restricted to the null space must vanish
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> wsolve(w);
  const Eigen::VectorXd lambda = wsolve.eigenvalues();
  const double top = lambda.maxCoeff();
  std::vector<Eigen::Index> kept;
  for (Eigen::Index j = 0; j < p; ++j)
    if (lambda[j] > 1e-10 * top && top > 0.0) kept.push_back(j);
  double null_b = 0.0;
  Eigen::MatrixXd proj(p, static_cast<Eigen::Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j)
    proj.col(static_cast<Eigen::Index>(j)) = wsolve.eigenvectors().col(kept[j]) / std::sqrt(lambda[kept[j]]);
  for (Eigen::Index j = 0; j < p; ++j) {
    if (std::find(kept.begin(), kept.end(), j) != kept.end()) continue;
    const Eigen::VectorXd v = wsolve.eigenvectors().col(j);
    null_b = std::max(null_b, v.dot(b_over_n * v));
  }
  const double b_scale = std::max(b_over_n.diagonal().maxCoeff(), std::numeric_limits<double>::min());
  if (kept.empty() || null_b > 1e-10 * b_scale) {
    warn("within-chain covariance is singular; reporting the largest univariate scale reduction");
    out.fallback = true;
    out.value = -std::numeric_limits<double>::infinity();
    for (double r : out.univariate)
      if (!std::isnan(r)) out.value = std::max(out.value, r);
    if (!std::isfinite(out.value) && out.value < 0.0) out.value = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  Eigen::MatrixXd reduced = proj.transpose() * b_over_n * proj;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> rsolve(reduced, Eigen::EigenvaluesOnly);
  const double lambda_max = std::max(0.0, rsolve.eigenvalues().maxCoeff());
  out.value = (nn - 1.0) / nn + (m + 1.0) / m * lambda_max;
  return out;
}

Mpsrf gelman_rubin(const ChainSet& chains) {
  if (chains.size() < 2) throw std::invalid_argument("scale reduction needs at least two chains");
  bool with_gamma = false;
  for (const auto& c : chains.chains())
    if (c.gamma.size() > 0 && c.gamma.maxCoeff() > c.gamma.minCoeff()) with_gamma = true;
  const auto k = static_cast<Eigen::Index>(chains.intervals());
  std::vector<Eigen::MatrixXd> blocks;
  for (const auto& c : chains.chains()) {
    Eigen::MatrixXd x(c.beta_interval.rows(), k + (with_gamma ? 1 : 0));
    x.leftCols(k) = c.beta_interval;
    if (with_gamma) x.col(k) = c.gamma;
    blocks.push_back(std::move(x));
  }
  return mpsrf(blocks);
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

CredibleInterval credible_interval(const Eigen::Ref<const Eigen::VectorXd>& series, double level) {
  if (series.size() == 0) throw std::invalid_argument("credible interval of an empty sample");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("level must lie in (0, 1)");
  std::vector<double> v(series.data(), series.data() + series.size());
  const double tail = (1.0 - level) / 2.0;
  return {quantile(v, tail), quantile(v, 1.0 - tail)};
}

Eigen::MatrixXd predictive_incidence(const ChainSet& chains, const InitialCounts& initial, std::size_t draws,
                                     Rng& rng) {
  const auto& grid = chains[0].grid;
  const std::size_t per_chain = chains.draws();
  const std::size_t total = per_chain * chains.size();
  if (total == 0) throw std::invalid_argument("no retained draws to simulate from");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(draws), static_cast<Eigen::Index>(grid.intervals()));
  for (std::size_t d = 0; d < draws; ++d) {
    auto pick = std::min(total - 1, static_cast<std::size_t>(uniform_open(rng) * static_cast<double>(total)));
    const auto& chain = chains[pick / per_chain];
    const std::size_t r = pick % per_chain;
    auto rate = segments_from_indicators(chain.delta[r], grid, chain.beta_segments(r));
    SimConfig sim{initial, std::move(rate), chain.gamma[static_cast<Eigen::Index>(r)], grid.start(), grid.end()};
    auto inc = aggregate_incidence(simulate_sir(sim, rng).trajectory, grid);
    for (std::size_t k = 0; k < inc.counts.size(); ++k)
      out(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k)) = static_cast<double>(inc.counts[k]);
  }
  return out;
}

PredictiveBand predictive_band(const Eigen::MatrixXd& incidence, double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("level must lie in (0, 1)");
  PredictiveBand band;
  band.level = level;
  for (Eigen::Index k = 0; k < incidence.cols(); ++k) {
    auto ci = credible_interval(incidence.col(k), level);
    band.lower.push_back(ci.lower);
    band.mean.push_back(incidence.col(k).mean());
    band.upper.push_back(ci.upper);
  }
  return band;
}

PredictiveBand posterior_predictive(const ChainSet& chains, const InitialCounts& initial, std::size_t draws,
                                    double level, Rng& rng) {
  if (draws < 100) throw std::invalid_argument("posterior predictive needs at least 100 draws");
  return predictive_band(predictive_incidence(chains, initial, draws, rng), level);
}

Eigen::MatrixXd effective_r_draws(const ChainSet& chains, const IncidenceSeries& obs, long s0) {
  Eigen::MatrixXd beta = chains.pooled_beta();
  Eigen::VectorXd gamma = chains.pooled(&PosteriorSamples::gamma);
  if (static_cast<std::size_t>(beta.cols()) != obs.size())
    throw std::invalid_argument("incidence series does not match the sample grid");
  Eigen::RowVectorXd s(beta.cols());
  long susceptible = s0;
  for (Eigen::Index k = 0; k < beta.cols(); ++k) {
    s[k] = static_cast<double>(susceptible);
    susceptible -= obs.counts[static_cast<std::size_t>(k)];
  }
  return (beta.array().rowwise() * s.array()).colwise() / gamma.array();
}

}  // namespace epicpt
