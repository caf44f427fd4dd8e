#include "fraccal/quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <queue>
#include <numbers>
#include <stdexcept>
#include <string>

namespace fraccal::quad {

namespace {

Rule make_rule(int n) {
  // Newton iteration on P_n from the Chebyshev initial guesses.
  Rule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  for (int k = 0; k < n; ++k) {
    double x = std::cos(std::numbers::pi * (k + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = x;
      for (int j = 2; j <= n; ++j) {
        const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // recompute derivative at the converged root
    double p0 = 1.0;
    double p1 = x;
    for (int j = 2; j <= n; ++j) {
      const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    r.nodes[n - 1 - k] = 0.5 * (x + 1.0);
    r.weights[n - 1 - k] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
  return r;
}

double rect_rule(const std::function<double(double, double)>& f, double x0, double x1, double y0,
                 double y1, const Rule& r) {
  const double hx = x1 - x0;
  const double hy = y1 - y0;
  double sum = 0.0;
  for (std::size_t b = 0; b < r.nodes.size(); ++b) {
    const double y = y0 + hy * r.nodes[b];
    double row = 0.0;
    for (std::size_t a = 0; a < r.nodes.size(); ++a) row += r.weights[a] * f(x0 + hx * r.nodes[a], y);
    sum += r.weights[b] * row;
  }
  return sum * hx * hy;
}

double rect_recurse(const std::function<double(double, double)>& f, double x0, double x1, double y0,
                    double y1, double whole, double rel_tol, int depth, const Rule& r) {
  const double xm = 0.5 * (x0 + x1);
  const double ym = 0.5 * (y0 + y1);
  const double q00 = rect_rule(f, x0, xm, y0, ym, r);
  const double q10 = rect_rule(f, xm, x1, y0, ym, r);
  const double q01 = rect_rule(f, x0, xm, ym, y1, r);
  const double q11 = rect_rule(f, xm, x1, ym, y1, r);
  const double split = q00 + q10 + q01 + q11;
  if (std::abs(split - whole) <= rel_tol * std::abs(split) || depth <= 0) {
    if (depth <= 0 && std::abs(split - whole) > rel_tol * std::abs(split) * 1e3)
      throw std::runtime_error("rectangle quadrature did not converge");
    return split;
  }
  return rect_recurse(f, x0, xm, y0, ym, q00, rel_tol, depth - 1, r) +
         rect_recurse(f, xm, x1, y0, ym, q10, rel_tol, depth - 1, r) +
         rect_recurse(f, x0, xm, ym, y1, q01, rel_tol, depth - 1, r) +
         rect_recurse(f, xm, x1, ym, y1, q11, rel_tol, depth - 1, r);
}

}  // namespace

const Rule& gauss_legendre(int n) {
  static std::mutex mu;
  static std::map<int, Rule> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, make_rule(n)).first;
  return it->second;
}

double adaptive(const std::function<double(double)>& f, double a, double b, double rel_tol,
                double abs_tol, unsigned max_segments) {
  if (a == b) return 0.0;
  using rule = boost::math::quadrature::gauss_kronrod<double, 21>;
  struct Segment {
    double a, b, value, error;
    bool operator<(const Segment& o) const { return error < o.error; }
  };
  // Kronrod abscissae: odd positions carry the embedded Gauss nodes.
  static const auto& xk = rule::abscissa();
  static const auto& wk = rule::weights();
  static const auto& wg = boost::math::quadrature::gauss<double, 10>::weights();
  auto eval = [&](double lo, double hi) {
    const double c = 0.5 * (lo + hi);
    const double r = 0.5 * (hi - lo);
    double kron = 0.0;
    double gauss = 0.0;
    for (std::size_t k = 0; k < xk.size(); ++k) {
      const double v = xk[k] == 0.0 ? f(c) : f(c - r * xk[k]) + f(c + r * xk[k]);
      kron += wk[k] * v;
      if (k % 2 == 1) gauss += wg[k / 2] * v;
    }
    return Segment{lo, hi, r * kron, std::abs(r * (kron - gauss))};
  };
  // Global subdivision: always split the segment with the largest error.
  std::priority_queue<Segment> heap;
  heap.push(eval(a, b));
  double total = heap.top().value;
  double error = heap.top().error;
  auto target = [&] { return std::max(abs_tol, rel_tol * std::abs(total)); };
  while (error > target() && heap.size() < max_segments) {
    const Segment s = heap.top();
    heap.pop();
    const double mid = 0.5 * (s.a + s.b);
    if (!(mid > s.a && mid < s.b)) {
      heap.push(s);
      break;
    }
    const Segment l = eval(s.a, mid);
    const Segment r = eval(mid, s.b);
    total += l.value + r.value - s.value;
    error += l.error + r.error - s.error;
    heap.push(l);
    heap.push(r);
  }
  // Re-sum to shed the accumulated rounding of the running totals.
  total = 0.0;
  error = 0.0;
  while (!heap.empty()) {
    total += heap.top().value;
    error += heap.top().error;
    heap.pop();
  }
  if (!std::isfinite(total)) throw std::runtime_error("adaptive quadrature produced a non-finite value");
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * std::abs(total);
  if (error > std::max({abs_tol, rel_tol * std::abs(total), floor}) * 1e3)
    throw std::runtime_error("adaptive quadrature did not reach tolerance on [" + std::to_string(a) + ", " +
                             std::to_string(b) + "]");
  return total;
}

double adaptive_rect(const std::function<double(double, double)>& f, double x0, double x1, double y0,
                     double y1, double rel_tol, int max_depth) {
  const Rule& r = gauss_legendre(10);
  const double whole = rect_rule(f, x0, x1, y0, y1, r);
  return rect_recurse(f, x0, x1, y0, y1, whole, rel_tol, max_depth, r);
}

}  // namespace fraccal::quad
