#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace epicpt {

using Rng = std::mt19937_64;

/// Independent stream `stream` of a 64-bit master seed. Chains and replicates
/// each take their own stream id.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x9e3779b9u};
  return Rng(seq);
}

/// Uniform on (0, 1).
inline double uniform_open(Rng& rng) {
  constexpr double scale = 0x1.0p-53;
  double u;
  do {
    u = static_cast<double>(rng() >> 11) * scale;
  } while (u == 0.0);
  return u;
}

inline double draw_exponential(Rng& rng, double rate) { return -std::log(uniform_open(rng)) / rate; }

/// Gamma with shape/rate parameterisation (mean shape / rate).
inline double draw_gamma(Rng& rng, double shape, double rate) {
  std::gamma_distribution<double> dist(shape, 1.0 / rate);
  return dist(rng);
}

inline double draw_beta(Rng& rng, double a, double b) {
  double x = draw_gamma(rng, a, 1.0);
  double y = draw_gamma(rng, b, 1.0);
  return x / (x + y);
}

inline double gamma_log_pdf(double x, double shape, double rate) {
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

inline double beta_log_pdf(double x, double a, double b) {
  return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x);
}

/// log(1 - exp(-x)) for x > 0.
inline double log1mexp(double x) { return x < 0.693147180559945 ? std::log(-std::expm1(-x)) : std::log1p(-std::exp(-x)); }

}  // namespace epicpt
