#pragma once

// Brute-force complete-data log-likelihood: compartments are recounted from
// scratch at every evaluation point and integrals use the midpoint of each
// piece between consecutive breakpoints (exact for step functions).
// Test-only; O(n^2).

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace oracle {

struct Replay {
  long s0, i0;
  std::vector<double> infections;  // new infectives
  std::vector<double> removals;    // every infective, +inf when never removed

  long infected_before(double t, bool inclusive) const {
    long n = 0;
    for (double x : infections) n += inclusive ? (x <= t) : (x < t);
    return n;
  }
  long removed_before(double t, bool inclusive) const {
    long n = 0;
    for (double x : removals) n += inclusive ? (x <= t) : (x < t);
    return n;
  }
  long susceptible(double t) const { return s0 - infected_before(t, true); }
  long infectious(double t) const { return i0 + infected_before(t, true) - removed_before(t, true); }
  long infectious_left(double t) const { return i0 + infected_before(t, false) - removed_before(t, false); }
};

struct Integrals {
  double si = 0.0;
  double i = 0.0;
};

inline Integrals integrate(const Replay& x, double a, double b) {
  std::vector<double> cuts{a, b};
  for (double t : x.infections)
    if (t > a && t < b) cuts.push_back(t);
  for (double t : x.removals)
    if (t > a && t < b) cuts.push_back(t);
  std::sort(cuts.begin(), cuts.end());
  Integrals out;
  for (std::size_t j = 1; j < cuts.size(); ++j) {
    double w = cuts[j] - cuts[j - 1];
    if (w <= 0.0) continue;
    double mid = 0.5 * (cuts[j] + cuts[j - 1]);
    double s = static_cast<double>(x.susceptible(mid));
    double i = static_cast<double>(x.infectious(mid));
    out.si += w * s * i;
    out.i += w * i;
  }
  return out;
}

// grid t_0..t_K, one beta per interval.
inline double log_likelihood(const Replay& x, const std::vector<double>& grid, const std::vector<double>& beta,
                             double gamma) {
  double ll = 0.0;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double a = grid[k - 1], b = grid[k];
    auto in = integrate(x, a, b);
    ll -= beta[k - 1] * in.si + gamma * in.i;
    for (double t : x.infections) {
      if (t > a && t <= b) {
        long i = x.infectious_left(t);
        if (i <= 0) return -std::numeric_limits<double>::infinity();
        ll += std::log(beta[k - 1]) + std::log(static_cast<double>(i));
      }
    }
    for (double t : x.removals)
      if (t > a && t <= b) ll += std::log(gamma);
  }
  return ll;
}

}  // namespace oracle
