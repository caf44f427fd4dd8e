#pragma once

#include <functional>
#include <vector>

namespace fraccal::quad {

/// Gauss-Legendre rule on [0, 1].
struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Cached n-point Gauss-Legendre rule mapped to [0, 1].
const Rule& gauss_legendre(int n);

/// Globally adaptive 10/21-point Gauss-Kronrod on [a, b] with at most
/// max_segments pieces. Stops once the error estimate is below
/// max(abs_tol, rel_tol |I|); throws std::runtime_error when it ends far
/// from that.
double adaptive(const std::function<double(double)>& f, double a, double b, double rel_tol,
                double abs_tol = 0.0, unsigned max_segments = 4000);

/// Adaptive tensor Gauss-Legendre on a rectangle, for integrands smooth on the
/// closed rectangle. Bisects into quadrants until the parent and child
/// estimates agree to rel_tol.
double adaptive_rect(const std::function<double(double, double)>& f, double x0, double x1, double y0,
                     double y1, double rel_tol, int max_depth = 12);

}  // namespace fraccal::quad
