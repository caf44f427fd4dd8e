#include "fraccal/toeplitz.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fraccal/lattice_convolution.hpp"

namespace fraccal {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// y += a x
void axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t k = 0; k < y.size(); ++k) y[k] += a * x[k];
}

// Number of eigenvalues of the symmetric tridiagonal (d, e) below t.
int sturm_count(const std::vector<double>& d, const std::vector<double>& e, double t) {
  int count = 0;
  double p = 1.0;
  for (std::size_t k = 0; k < d.size(); ++k) {
    const double off = k == 0 ? 0.0 : e[k - 1] * e[k - 1];
    p = d[k] - t - (k == 0 ? 0.0 : off / p);
    if (p == 0.0) p = -1e-300;
    if (p < 0.0) ++count;
  }
  return count;
}

}  // namespace

std::string to_string(KrylovMethod m) {
  switch (m) {
    case KrylovMethod::Auto: return "auto";
    case KrylovMethod::CG: return "cg";
    case KrylovMethod::BiCGStab: return "bicgstab";
  }
  return "unknown";
}

FastOperator::FastOperator(std::shared_ptr<const StencilSymbol> symbol, const Grid& grid, std::vector<double> q)
    : symbol_(std::move(symbol)), grid_(grid), q_(std::move(q)) {
  if (!symbol_) throw std::invalid_argument("fast operator: null symbol");
  const auto& sym = *symbol_;
  if (sym.dim != grid.dim() || sym.N != grid.N() || sym.L != grid.L())
    throw std::invalid_argument("fast operator: symbol and grid disagree");
  if (q_.size() != grid.interior_count()) throw std::invalid_argument("fast operator: q has the wrong size");
  const int dim = grid.dim();
  Box box;
  box.lo = {1, dim == 2 ? 1 : 0};
  box.len = {grid.N() - 1, dim == 2 ? grid.N() - 1 : 1};
  const double c = sym.cns;
  auto kernel = [&sym, c](int di, int dj) { return -c * sym.weight(di, dj); };
  conv_ = std::make_unique<LatticeConvolution>(dim, box, box, kernel);
}

FastOperator::~FastOperator() = default;
FastOperator::FastOperator(FastOperator&&) noexcept = default;
FastOperator& FastOperator::operator=(FastOperator&&) noexcept = default;

void FastOperator::apply(std::span<const double> x, std::span<double> y) const {
  if (x.size() != size() || y.size() != size()) throw std::invalid_argument("fast operator: size mismatch");
  conv_->apply(x, y);
  for (std::size_t k = 0; k < y.size(); ++k) y[k] += q_[k] * x[k];
}

std::vector<double> FastOperator::apply(std::span<const double> x) const {
  std::vector<double> y(size());
  apply(x, y);
  return y;
}

FastOperator build_fast_operator(std::shared_ptr<const StencilSymbol> symbol, const Grid& grid,
                                 std::span<const double> q) {
  return FastOperator(std::move(symbol), grid, std::vector<double>(q.begin(), q.end()));
}

double lanczos_min_ritz(const FastOperator& op, std::span<const double> start, int steps) {
  const std::size_t n = op.size();
  std::vector<double> v(start.begin(), start.end());
  double nv = norm2(v);
  if (nv == 0.0) {
    v.assign(n, 1.0);
    nv = norm2(v);
  }
  for (auto& t : v) t /= nv;
  std::vector<double> v_prev(n, 0.0);
  std::vector<double> w(n);
  std::vector<double> d;
  std::vector<double> e;
  double beta = 0.0;
  steps = std::min<int>(steps, static_cast<int>(n));
  for (int k = 0; k < steps; ++k) {
    op.apply(v, w);
    const double alpha = dot(w, v);
    d.push_back(alpha);
    for (std::size_t t = 0; t < n; ++t) w[t] -= alpha * v[t] + beta * v_prev[t];
    beta = norm2(w);
    if (beta <= 1e-14 * std::abs(alpha) || k + 1 == steps) break;
    e.push_back(beta);
    v_prev = v;
    for (std::size_t t = 0; t < n; ++t) v[t] = w[t] / beta;
  }
  // Gershgorin bounds, then bisection for the smallest eigenvalue.
  double lo = d[0];
  double hi = d[0];
  for (std::size_t k = 0; k < d.size(); ++k) {
    const double r = (k > 0 ? std::abs(e[k - 1]) : 0.0) + (k < e.size() ? std::abs(e[k]) : 0.0);
    lo = std::min(lo, d[k] - r);
    hi = std::max(hi, d[k] + r);
  }
  for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(lo) + std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (sturm_count(d, e, mid) >= 1)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

namespace {

bool run_cg(const FastOperator& op, std::span<const double> b, std::span<double> x, double target, int max_iter,
            KrylovReport& rep) {
  const std::size_t n = op.size();
  std::vector<double> r(n);
  op.apply(x, r);
  for (std::size_t k = 0; k < n; ++k) r[k] = b[k] - r[k];
  // energy 1/2 x^T A x - b^T x = -1/2 x^T (b + r)
  double phi = 0.0;
  for (std::size_t k = 0; k < n; ++k) phi -= 0.5 * x[k] * (b[k] + r[k]);
  double rr = dot(r, r);
  rep.final_residual = std::sqrt(rr);
  if (rep.final_residual <= target) return true;
  std::vector<double> p = r;
  std::vector<double> ap(n);
  while (rep.iterations < max_iter) {
    op.apply(p, ap);
    const double pap = dot(p, ap);
    if (!(pap > 0.0)) return false;
    const double a = rr / pap;
    axpy(a, p, x);
    axpy(-a, ap, r);
    phi -= 0.5 * a * rr;
    const double rr_new = dot(r, r);
    ++rep.iterations;
    rep.energy.push_back(phi);
    rep.residuals.push_back(std::sqrt(rr_new));
    rep.final_residual = std::sqrt(rr_new);
    if (!std::isfinite(rr_new)) return false;
    if (rep.final_residual <= target) return true;
    const double g = rr_new / rr;
    rr = rr_new;
    for (std::size_t k = 0; k < n; ++k) p[k] = r[k] + g * p[k];
  }
  return false;
}

bool run_bicgstab(const FastOperator& op, std::span<const double> b, std::span<double> x, double target,
                  int max_iter, KrylovReport& rep) {
  const std::size_t n = op.size();
  std::vector<double> r(n);
  op.apply(x, r);
  for (std::size_t k = 0; k < n; ++k) r[k] = b[k] - r[k];
  rep.final_residual = norm2(r);
  if (rep.final_residual <= target) return true;
  const std::vector<double> r0 = r;
  std::vector<double> p(n, 0.0);
  std::vector<double> v(n, 0.0);
  std::vector<double> sv(n);
  std::vector<double> t(n);
  double rho = 1.0;
  double alpha = 1.0;
  double omega = 1.0;
  while (rep.iterations < max_iter) {
    const double rho_new = dot(r0, r);
    if (rho_new == 0.0 || omega == 0.0) return false;
    const double beta = (rho_new / rho) * (alpha / omega);
    rho = rho_new;
    for (std::size_t k = 0; k < n; ++k) p[k] = r[k] + beta * (p[k] - omega * v[k]);
    op.apply(p, v);
    const double r0v = dot(r0, v);
    if (r0v == 0.0) return false;
    alpha = rho / r0v;
    for (std::size_t k = 0; k < n; ++k) sv[k] = r[k] - alpha * v[k];
    ++rep.iterations;
    if (norm2(sv) <= target) {
      axpy(alpha, p, x);
      rep.final_residual = norm2(sv);
      rep.residuals.push_back(rep.final_residual);
      return true;
    }
    op.apply(sv, t);
    const double tt = dot(t, t);
    if (tt == 0.0) return false;
    omega = dot(t, sv) / tt;
    for (std::size_t k = 0; k < n; ++k) {
      x[k] += alpha * p[k] + omega * sv[k];
      r[k] = sv[k] - omega * t[k];
    }
    rep.final_residual = norm2(r);
    rep.residuals.push_back(rep.final_residual);
    if (!std::isfinite(rep.final_residual)) return false;
    if (rep.final_residual <= target) return true;
  }
  return false;
}

}  // namespace

KrylovReport krylov_solve(const FastOperator& op, std::span<const double> rhs, std::span<double> x,
                          const KrylovOptions& opts) {
  if (rhs.size() != op.size() || x.size() != op.size()) throw std::invalid_argument("krylov: size mismatch");
  if (!(opts.rtol > 0.0 && opts.rtol < 1.0)) throw std::invalid_argument("krylov: rtol must lie in (0,1)");
  for (double v : rhs)
    if (!std::isfinite(v)) throw std::invalid_argument("krylov: right-hand side is not finite");
  KrylovReport rep;
  rep.rhs_norm = norm2(rhs);
  const int max_iter = opts.max_iter > 0 ? opts.max_iter : 10 * op.grid().N();
  if (rep.rhs_norm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    rep.converged = true;
    return rep;
  }
  const double target = opts.rtol * rep.rhs_norm;
  KrylovMethod method = opts.method;
  if (method == KrylovMethod::Auto) {
    const auto q = op.q();
    const bool nonneg = std::all_of(q.begin(), q.end(), [](double v) { return v >= 0.0; });
    if (nonneg) {
      method = KrylovMethod::CG;
    } else {
      rep.ritz_min = lanczos_min_ritz(op, rhs);
      method = rep.ritz_min > 0.0 ? KrylovMethod::CG : KrylovMethod::BiCGStab;
    }
  }
  rep.method = method;
  // Restarts from the current iterate when the recurrence residual has
  // drifted from the true one.
  auto true_residual = [&] {
    auto ax = op.apply(x);
    double rr = 0.0;
    for (std::size_t k = 0; k < ax.size(); ++k) rr += (rhs[k] - ax[k]) * (rhs[k] - ax[k]);
    return std::sqrt(rr);
  };
  bool ok = false;
  for (int attempt = 0; attempt < 5 && rep.iterations < max_iter; ++attempt) {
    if (rep.method == KrylovMethod::CG) {
      ok = run_cg(op, rhs, x, target, max_iter, rep);
      if (!ok && opts.method == KrylovMethod::Auto && rep.iterations < max_iter) {
        rep.method = KrylovMethod::BiCGStab;
        ok = run_bicgstab(op, rhs, x, target, max_iter, rep);
      }
    } else {
      ok = run_bicgstab(op, rhs, x, target, max_iter, rep);
    }
    rep.final_residual = true_residual();
    if (!ok || !std::isfinite(rep.final_residual)) break;
    if (rep.final_residual <= target) break;
    ok = false;
  }
  rep.converged = ok && rep.final_residual <= target;
  return rep;
}

void require_converged(const KrylovReport& r, const std::string& context) {
  if (!r.converged)
    throw SolverError(context + ": " + to_string(r.method) + " did not converge after " +
                          std::to_string(r.iterations) + " iterations (residual " +
                          std::to_string(r.final_residual) + ", rhs " + std::to_string(r.rhs_norm) + ")",
                      r);
}

}  // namespace fraccal
