#pragma once

// Cox-de Boor recursion for a clamped cubic B-spline. Test-only.

#include <vector>

namespace oracle {

inline double basis(const std::vector<double>& knots, std::size_t i, int p, double t) {
  if (p == 0) {
    bool last = knots[i + 1] == knots.back() && t == knots.back() && knots[i] < knots[i + 1];
    return (knots[i] <= t && t < knots[i + 1]) || last ? 1.0 : 0.0;
  }
  double left = 0.0, right = 0.0;
  double d1 = knots[i + p] - knots[i];
  double d2 = knots[i + p + 1] - knots[i + 1];
  if (d1 > 0.0) left = (t - knots[i]) / d1 * basis(knots, i, p - 1, t);
  if (d2 > 0.0) right = (knots[i + p + 1] - t) / d2 * basis(knots, i + 1, p - 1, t);
  return left + right;
}

inline double clamped_cubic(double a, double b, const std::vector<double>& interior, const std::vector<double>& coef,
                            double t) {
  std::vector<double> knots(4, a);
  knots.insert(knots.end(), interior.begin(), interior.end());
  knots.insert(knots.end(), 4, b);
  double v = 0.0;
  for (std::size_t i = 0; i < coef.size(); ++i) v += coef[i] * basis(knots, i, 3, t);
  return v;
}

}  // namespace oracle
