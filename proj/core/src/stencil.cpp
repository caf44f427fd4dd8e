#include "fraccal/stencil.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>

#include "fraccal/lattice_convolution.hpp"
#include "fraccal/quadrature.hpp"

namespace fraccal {

double c_ns(int n, double s) {
  if (!(s > 0.0 && s < 1.0)) throw std::invalid_argument("c_ns: s must lie in (0,1)");
  if (n < 1) throw std::invalid_argument("c_ns: dimension must be positive");
  return std::pow(2.0, 2.0 * s) * s * std::tgamma(0.5 * n + s) /
         (std::pow(std::numbers::pi, 0.5 * n) * std::tgamma(1.0 - s));
}

int sigma(int m, int n) { return (m == 0 ? 1 : 0) + (n == 0 ? 1 : 0); }

int cbar(int m, int n) {
  if ((m == 0 && n == 1) || (m == 1 && n == 0)) return 1;
  if (m == 1 && n == 1) return -1;
  return 0;
}

StencilParams StencilParams::from(const ProblemSpec& spec, double quad_tol) {
  return {spec.grid.dim(), spec.s, spec.gamma, spec.grid.L(), spec.grid.R(), spec.grid.N(), quad_tol};
}

double StencilSymbol::weight(int m, int n) const {
  m = std::abs(m);
  n = std::abs(n);
  if (m > N || n > N) return 0.0;
  if (dim == 1) return n == 0 ? a[m] : 0.0;
  return a[static_cast<std::size_t>(n) * (N + 1) + m];
}

double StencilSymbol::row_sum() const {
  if (dim == 1) {
    double sum = a[0];
    for (int m = 1; m <= N; ++m) sum += 2.0 * a[m];
    return sum;
  }
  double axis = 0.0;
  double off = 0.0;
  for (int m = 1; m <= N; ++m) axis += weight(m, 0) + weight(0, m);
  for (int n = 1; n <= N; ++n)
    for (int m = 1; m <= N; ++m) off += weight(m, n);
  return a[0] + 2.0 * axis + 4.0 * off;
}

namespace {

void check_params(const StencilParams& p) {
  if (!(p.s > 0.0 && p.s < 1.0)) throw std::invalid_argument("stencil: s must lie in (0,1)");
  if (!(p.gamma > 2.0 * p.s && p.gamma <= 2.0))
    throw std::invalid_argument("stencil: gamma must lie in (2s, 2]");
  if (p.N < 4 || p.N % 2 != 0) throw std::invalid_argument("stencil: N must be even and at least 4");
  if (!(p.L > 0.0 && p.R > p.L)) throw std::invalid_argument("stencil: need 0 < L < R");
}

int floor_half(double gamma) { return static_cast<int>(std::floor(gamma / 2.0)); }

// Integral of (xi^2 + eta^2)^{e/2} over the unit cell [c, c+1] x [d, d+1].
double unit_cell(int c, int d, double e, double tol) {
  if (c == 0 && d == 0) {
    // Polar form over the two symmetric triangles; the radial part is exact.
    const double p = e + 2.0;
    auto integrand = [p](double th) { return std::pow(1.0 / std::cos(th), p) / p; };
    return 2.0 * quad::adaptive(integrand, 0.0, std::numbers::pi / 4.0, tol);
  }
  auto f = [e](double x, double y) { return std::pow(x * x + y * y, 0.5 * e); };
  return quad::adaptive_rect(f, c, c + 1.0, d, d + 1.0, tol);
}

// Cell integrals for 0 <= c, d <= N - 1 (symmetric, filled for both halves).
std::vector<double> unit_cells(int N, double e, double tol) {
  std::vector<double> cells(static_cast<std::size_t>(N) * N);
  for (int d = 0; d < N; ++d)
    for (int c = 0; c <= d; ++c) {
      const double v = unit_cell(c, d, e, tol);
      cells[static_cast<std::size_t>(d) * N + c] = v;
      cells[static_cast<std::size_t>(c) * N + d] = v;
    }
  return cells;
}

double weight_from_cells(int m, int n, const StencilParams& p, const std::vector<double>& cells) {
  const int N = p.N;
  double sum = 0.0;
  for (int d = n - 1; d <= n; ++d) {
    if (d < 0 || d > N - 1) continue;
    for (int c = m - 1; c <= m; ++c) {
      if (c < 0 || c > N - 1) continue;
      sum += cells[static_cast<std::size_t>(d) * N + c];
    }
  }
  sum += cbar(m, n) * floor_half(p.gamma) * cells[0];
  const double r2 = static_cast<double>(m) * m + static_cast<double>(n) * n;
  return std::pow(2.0, sigma(m, n)) / (4.0 * std::pow(r2, 0.5 * p.gamma)) * std::pow(p.h(), -2.0 * p.s) * sum;
}

}  // namespace

double tail_integral_1d(double L, double s) { return std::pow(2.0 * L, -2.0 * s) / (2.0 * s); }

double tail_integral_2d(double L, double s, double tol) {
  if (!(L > 0.0)) throw std::invalid_argument("tail integral: L must be positive");
  // Polar coordinates: for angle th in (0, pi/4) the ray leaves the unit box at
  // r = sec(th) and the radial integral of r^{-1-2s} is analytic.
  auto integrand = [s](double th) { return std::pow(std::cos(th), 2.0 * s) / (2.0 * s); };
  const double unit = 2.0 * quad::adaptive(integrand, 0.0, std::numbers::pi / 4.0, tol);
  return std::pow(2.0 * L, -2.0 * s) * unit;
}

double weight_2d(int m, int n, const StencilParams& p) {
  check_params(p);
  if (m < 0 || n < 0 || m > p.N || n > p.N) throw std::invalid_argument("weight_2d: offset out of range");
  if (m + n == 0) throw std::invalid_argument("weight_2d: the diagonal weight comes from a00_2d");
  const double e = p.gamma - 2.0 - 2.0 * p.s;
  const double tol = std::min(p.quad_tol, 1e-10) * 1e-3;
  const int N = p.N;
  double sum = 0.0;
  for (int d = n - 1; d <= n; ++d) {
    if (d < 0 || d > N - 1) continue;
    for (int c = m - 1; c <= m; ++c) {
      if (c < 0 || c > N - 1) continue;
      sum += unit_cell(c, d, e, tol);
    }
  }
  if (cbar(m, n) != 0 && floor_half(p.gamma) == 1) sum += cbar(m, n) * unit_cell(0, 0, e, tol);
  const double r2 = static_cast<double>(m) * m + static_cast<double>(n) * n;
  return std::pow(2.0, sigma(m, n)) / (4.0 * std::pow(r2, 0.5 * p.gamma)) * std::pow(p.h(), -2.0 * p.s) * sum;
}

double a00_2d(const StencilParams& p, std::span<const double> offdiag) {
  const int N = p.N;
  if (offdiag.size() != static_cast<std::size_t>(N + 1) * (N + 1))
    throw std::invalid_argument("a00_2d: weight array has the wrong size");
  auto w = [&](int m, int n) { return offdiag[static_cast<std::size_t>(n) * (N + 1) + m]; };
  double axis = 0.0;
  double off = 0.0;
  for (int m = 1; m <= N; ++m) axis += w(m, 0) + w(0, m);
  for (int n = 1; n <= N; ++n)
    for (int m = 1; m <= N; ++m) off += w(m, n);
  return -2.0 * axis - 4.0 * off - 4.0 * tail_integral_2d(p.L, p.s, std::min(p.quad_tol, 1e-12));
}

StencilSymbol weights_1d(const StencilParams& p) {
  check_params(p);
  if (p.dim != 1) throw std::invalid_argument("weights_1d: dim must be 1");
  StencilSymbol sym{1, p.s, p.gamma, p.h(), p.L, p.R, p.N, p.quad_tol, c_ns(1, p.s), tail_integral_1d(p.L, p.s), {}};
  const double pw = p.gamma - 2.0 * p.s;
  const double scale = std::pow(p.h(), -2.0 * p.s);
  sym.a.assign(p.N + 1, 0.0);
  double sum = 0.0;
  for (int m = 1; m <= p.N; ++m) {
    const double lo = m - 1.0;
    const double hi = std::min(m + 1.0, static_cast<double>(p.N));
    double integral = (std::pow(hi, pw) - std::pow(lo, pw)) / pw;
    if (m == 1) integral += floor_half(p.gamma) / pw;
    sym.a[m] = scale * integral / (2.0 * std::pow(static_cast<double>(m), p.gamma));
    sum += sym.a[m];
  }
  sym.a[0] = -2.0 * sum - 2.0 * sym.tail;
  return sym;
}

StencilSymbol weights_2d(const StencilParams& p) {
  check_params(p);
  if (p.dim != 2) throw std::invalid_argument("weights_2d: dim must be 2");
  const double e = p.gamma - 2.0 - 2.0 * p.s;
  const double tol = std::min(p.quad_tol, 1e-10) * 1e-3;
  const auto cells = unit_cells(p.N, e, tol);
  StencilSymbol sym{2, p.s, p.gamma, p.h(), p.L, p.R, p.N, p.quad_tol, c_ns(2, p.s),
                    tail_integral_2d(p.L, p.s, std::min(p.quad_tol, 1e-12)), {}};
  const int N = p.N;
  sym.a.assign(static_cast<std::size_t>(N + 1) * (N + 1), 0.0);
  for (int n = 0; n <= N; ++n)
    for (int m = 0; m <= n; ++m) {
      if (m + n == 0) continue;
      const double w = weight_from_cells(m, n, p, cells);
      sym.a[static_cast<std::size_t>(n) * (N + 1) + m] = w;
      sym.a[static_cast<std::size_t>(m) * (N + 1) + n] = w;
    }
  sym.a[0] = a00_2d(p, sym.a);
  return sym;
}

std::shared_ptr<const StencilSymbol> stencil_symbol(const StencilParams& p) {
  using Key = std::tuple<int, double, double, double, double, int, double>;
  static std::mutex mu;
  static std::map<Key, std::shared_ptr<const StencilSymbol>> cache;
  const Key key{p.dim, p.s, p.gamma, p.L, p.R, p.N, p.quad_tol};
  {
    std::lock_guard lock(mu);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  auto sym = std::make_shared<const StencilSymbol>(p.dim == 1 ? weights_1d(p) : weights_2d(p));
  std::lock_guard lock(mu);
  return cache.emplace(key, std::move(sym)).first->second;
}

void write_symbol(std::ostream& os, const StencilSymbol& sym) {
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  os << "fraccal-stencil dim=" << sym.dim << " s=" << num(sym.s) << " gamma=" << num(sym.gamma)
     << " h=" << num(sym.h) << " L=" << num(sym.L) << " R=" << num(sym.R) << " N=" << sym.N
     << " quad_tol=" << num(sym.quad_tol) << " cns=" << num(sym.cns) << " tail=" << num(sym.tail)
     << " count=" << sym.a.size() << "\n";
  const std::size_t row = sym.dim == 1 ? sym.a.size() : static_cast<std::size_t>(sym.N + 1);
  for (std::size_t k = 0; k < sym.a.size(); ++k) {
    os << num(sym.a[k]);
    os << (((k + 1) % row == 0) ? '\n' : ' ');
  }
}

StencilSymbol read_symbol(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw std::runtime_error("stencil dump: missing header");
  std::istringstream hs(header);
  std::string tag;
  hs >> tag;
  if (tag != "fraccal-stencil") throw std::runtime_error("stencil dump: bad magic '" + tag + "'");
  std::map<std::string, std::string> kv;
  std::string tok;
  while (hs >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw std::runtime_error("stencil dump: malformed header token " + tok);
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  auto get = [&](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw std::runtime_error(std::string("stencil dump: header lacks ") + key);
    return it->second;
  };
  StencilSymbol sym;
  sym.dim = std::stoi(get("dim"));
  sym.s = std::strtod(get("s").c_str(), nullptr);
  sym.gamma = std::strtod(get("gamma").c_str(), nullptr);
  sym.h = std::strtod(get("h").c_str(), nullptr);
  sym.L = std::strtod(get("L").c_str(), nullptr);
  sym.R = std::strtod(get("R").c_str(), nullptr);
  sym.N = std::stoi(get("N"));
  sym.quad_tol = std::strtod(get("quad_tol").c_str(), nullptr);
  sym.cns = std::strtod(get("cns").c_str(), nullptr);
  sym.tail = std::strtod(get("tail").c_str(), nullptr);
  const auto count = static_cast<std::size_t>(std::stoull(get("count")));
  const std::size_t expect =
      sym.dim == 1 ? static_cast<std::size_t>(sym.N + 1) : static_cast<std::size_t>(sym.N + 1) * (sym.N + 1);
  if (count != expect) throw std::runtime_error("stencil dump: weight count does not match N");
  sym.a.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::string v;
    if (!(is >> v)) throw std::runtime_error("stencil dump: truncated payload");
    sym.a[k] = std::strtod(v.c_str(), nullptr);
  }
  return sym;
}

namespace {

// Per-dimension description of the sub-cell lattice used by the forcing rule.
struct CellLattice {
  int sub;
  double hs;
  int c_lo;
  int c_hi;
};

CellLattice cell_lattice(const Grid& g, int sub) {
  const double hs = g.h() / sub;
  const double L = g.L();
  const double R = g.R();
  const int c_lo = static_cast<int>(std::floor((-R + L) / hs));
  const int c_hi = static_cast<int>(std::ceil((R + L) / hs)) - 1;
  return {sub, hs, c_lo, c_hi};
}

std::vector<double> forcing_with_rule(const ProblemSpec& spec, const SpatialFunction& f, int order, int sub) {
  const Grid& g = spec.grid;
  const int dim = g.dim();
  const int N = g.N();
  const double L = g.L();
  const double R = g.R();
  const double exponent = -0.5 * (dim + 2.0 * spec.s);
  const CellLattice cl = cell_lattice(g, sub);
  const quad::Rule& rule = quad::gauss_legendre(order);

  Box in;
  in.lo = {cl.c_lo, dim == 2 ? cl.c_lo : 0};
  in.len = {cl.c_hi - cl.c_lo + 1, dim == 2 ? cl.c_hi - cl.c_lo + 1 : 1};
  Box out;
  out.lo = {sub, dim == 2 ? sub : 0};
  out.len = {(N - 2) * sub + 1, dim == 2 ? (N - 2) * sub + 1 : 1};

  const int near_lo = 1 - N * sub;
  const int near_hi = N * sub;
  auto in_box = [&](int d) { return d >= near_lo && d <= near_hi; };

  std::vector<double> total(out.count(dim), 0.0);
  std::vector<double> in_vals(in.count(dim));
  std::vector<double> out_vals(out.count(dim));
  const int nb = dim == 2 ? order : 1;
  for (int b = 0; b < nb; ++b) {
    for (int a = 0; a < order; ++a) {
      const double ta = rule.nodes[a];
      const double tb = dim == 2 ? rule.nodes[b] : 0.0;
      const double w = rule.weights[a] * (dim == 2 ? rule.weights[b] : 1.0) * std::pow(cl.hs, dim);
      bool any = false;
      for (int d = 0; d < in.len[1]; ++d) {
        const double y = dim == 2 ? -L + (in.lo[1] + d + tb) * cl.hs : 0.0;
        for (int c = 0; c < in.len[0]; ++c) {
          const double x = -L + (in.lo[0] + c + ta) * cl.hs;
          double v = 0.0;
          if (std::abs(x) < R && std::abs(y) < R) v = w * f(x, y);
          in_vals[static_cast<std::size_t>(d) * in.len[0] + c] = v;
          any = any || v != 0.0;
        }
      }
      if (!any) continue;
      auto kernel = [&](int di, int dj) {
        if (in_box(di) && (dim == 1 || in_box(dj))) return 0.0;
        const double dx = (di - ta) * cl.hs;
        const double dy = dim == 2 ? (dj - tb) * cl.hs : 0.0;
        return std::pow(dx * dx + dy * dy, exponent);
      };
      LatticeConvolution conv(dim, in, out, kernel);
      conv.apply(in_vals, out_vals);
      for (std::size_t k = 0; k < total.size(); ++k) total[k] += out_vals[k];
    }
  }

  std::vector<double> values(g.interior_count());
  for (int j = (dim == 2 ? 1 : 0); j < (dim == 2 ? N : 1); ++j)
    for (int i = 1; i < N; ++i) {
      const std::size_t oi = static_cast<std::size_t>(i - 1) * sub;
      const std::size_t oj = dim == 2 ? static_cast<std::size_t>(j - 1) * sub : 0;
      values[g.interior_index(i, j)] = total[oj * out.len[0] + oi];
    }
  return values;
}

}  // namespace

BoundaryForcing boundary_forcing(const ProblemSpec& spec, const SpatialFunction& f, int order, int subdivisions) {
  if (order < 4) throw std::invalid_argument("boundary_forcing: order must be at least 4");
  if (subdivisions < 1) throw std::invalid_argument("boundary_forcing: subdivisions must be positive");
  BoundaryForcing out;
  if (!f) {
    out.values.assign(spec.grid.interior_count(), 0.0);
    return out;
  }
  out.values = forcing_with_rule(spec, f, order, subdivisions);
  const auto coarse = forcing_with_rule(spec, f, order - 2, subdivisions);
  for (std::size_t k = 0; k < coarse.size(); ++k) {
    if (!std::isfinite(out.values[k])) throw std::runtime_error("boundary_forcing: non-finite value");
    out.eps_R = std::max(out.eps_R, std::abs(out.values[k] - coarse[k]));
  }
  return out;
}

namespace {

double datum_laplacian_1d(double s, double R, const SpatialFunction& f, double x, double tol) {
  const double fx = f(x, 0.0);
  constexpr double t_min = 1e-5;
  constexpr double eta = 1e-3;
  auto second = [&](double step) { return (f(x + step, 0.0) - 2.0 * fx + f(x - step, 0.0)) / (step * step); };
  const double fxx = (4.0 * second(0.5 * eta) - second(eta)) / 3.0;
  const double T = R + std::abs(x);
  auto integrand = [&](double t) {
    return (2.0 * fx - f(x + t, 0.0) - f(x - t, 0.0)) * std::pow(t, -1.0 - 2.0 * s);
  };
  double mid = 0.0;
  double a = t_min;
  for (double b = 1e-4; a < T; b = (b < 1.0 ? b * 10.0 : b + 0.5)) {
    const double hi = std::min(b, T);
    mid += quad::adaptive(integrand, a, hi, tol, tol * 1e-2);
    a = hi;
  }
  const double small = -fxx * std::pow(t_min, 2.0 - 2.0 * s) / (2.0 - 2.0 * s);
  const double tail = fx * std::pow(T, -2.0 * s) / s;
  return c_ns(1, s) * (mid + small + tail);
}

double datum_laplacian_2d(double s, double R, const SpatialFunction& f, double x, double y, double tol) {
  const double fx = f(x, y);
  constexpr double r_min = 1e-5;
  constexpr double eta = 1e-3;
  auto lap = [&](double st) {
    return (f(x + st, y) + f(x - st, y) + f(x, y + st) + f(x, y - st) - 4.0 * fx) / (st * st);
  };
  const double flap = (4.0 * lap(0.5 * eta) - lap(eta)) / 3.0;
  const double T = std::sqrt(2.0) * R + std::hypot(x, y);
  auto angular = [&](double r) {
    auto g = [&](double th) {
      const double c = r * std::cos(th);
      const double sn = r * std::sin(th);
      return 2.0 * fx - f(x + c, y + sn) - f(x - c, y - sn);
    };
    double sum = 0.0;
    for (int k = 0; k < 4; ++k)
      sum += quad::adaptive(g, k * std::numbers::pi / 4.0, (k + 1) * std::numbers::pi / 4.0, tol, tol * 1e-2);
    return sum * std::pow(r, -1.0 - 2.0 * s);
  };
  double mid = 0.0;
  double a = r_min;
  for (double b = 1e-4; a < T; b = (b < 1.0 ? b * 10.0 : b + 0.5)) {
    const double hi = std::min(b, T);
    mid += quad::adaptive(angular, a, hi, tol, tol * 1e-2);
    a = hi;
  }
  const double small = -0.5 * std::numbers::pi * flap * std::pow(r_min, 2.0 - 2.0 * s) / (2.0 - 2.0 * s);
  const double tail = std::numbers::pi * fx * std::pow(T, -2.0 * s) / s;
  return c_ns(2, s) * (mid + small + tail);
}

}  // namespace

double datum_fractional_laplacian(int dim, double s, double R, const SpatialFunction& f, double x, double y,
                                  double tol) {
  if (!f) return 0.0;
  return dim == 1 ? datum_laplacian_1d(s, R, f, x, tol) : datum_laplacian_2d(s, R, f, x, y, tol);
}

ObservationOperator::ObservationOperator(const Grid& grid, double s, NodeSet points)
    : grid_(grid), s_(s), points_(std::move(points)) {
  const int dim = grid.dim();
  for (const auto& p : points_) {
    const bool inside_closure = p.i >= 0 && p.i <= grid.N() && (dim == 1 || (p.j >= 0 && p.j <= grid.N()));
    if (inside_closure) throw std::invalid_argument("observation point lies in the closed domain");
    if (p.i < grid.lo() || p.i > grid.hi() || (dim == 2 && (p.j < grid.lo() || p.j > grid.hi())))
      throw std::invalid_argument("observation point lies outside the lattice");
  }
  Box in;
  in.lo = {1, dim == 2 ? 1 : 0};
  in.len = {grid.N() - 1, dim == 2 ? grid.N() - 1 : 1};
  Box out;
  out.lo = {grid.lo(), dim == 2 ? grid.lo() : 0};
  out.len = {grid.extent(), dim == 2 ? grid.extent() : 1};
  const double h = grid.h();
  const double scale = -c_ns(dim, s) * std::pow(h, dim);
  const double exponent = -0.5 * (dim + 2.0 * s);
  auto kernel = [=](int di, int dj) {
    if (di == 0 && dj == 0) return 0.0;
    const double r2 = (static_cast<double>(di) * di + static_cast<double>(dj) * dj) * h * h;
    return scale * std::pow(r2, exponent);
  };
  conv_ = std::make_unique<LatticeConvolution>(dim, in, out, kernel);
}

ObservationOperator::~ObservationOperator() = default;
ObservationOperator::ObservationOperator(ObservationOperator&&) noexcept = default;
ObservationOperator& ObservationOperator::operator=(ObservationOperator&&) noexcept = default;

std::vector<double> ObservationOperator::apply(std::span<const double> u_interior) const {
  std::vector<double> full(conv_->out_box().count(grid_.dim()));
  conv_->apply(u_interior, full);
  std::vector<double> out;
  out.reserve(points_.size());
  for (const auto& p : points_) out.push_back(full[grid_.lattice_index(p.i, p.j)]);
  return out;
}

std::vector<double> ObservationOperator::apply_transpose(std::span<const double> at_points) const {
  if (at_points.size() != points_.size()) throw std::invalid_argument("observation transpose size mismatch");
  std::vector<double> full(conv_->out_box().count(grid_.dim()), 0.0);
  for (std::size_t k = 0; k < points_.size(); ++k) full[grid_.lattice_index(points_[k].i, points_[k].j)] += at_points[k];
  std::vector<double> out(grid_.interior_count());
  conv_->apply_transpose(full, out);
  return out;
}

namespace {

bool is_multiple(double a, double h) {
  const double r = a / h;
  return std::abs(r - std::round(r)) < 1e-9 * std::max(1.0, std::abs(r));
}

}  // namespace

std::vector<double> datum_on_lattice(int dim, double s, double gamma, double R, double h, const SpatialFunction& f,
                                     std::span<const std::array<double, 2>> points) {
  if (!is_multiple(R, h)) throw std::invalid_argument("datum lattice: R must be a multiple of h");
  const int half = static_cast<int>(std::lround(R / h));
  StencilParams p{dim, s, gamma, R, 2.0 * R, 2 * half, 1e-10};
  const auto sym = stencil_symbol(p);
  Box box;
  box.lo = {-half, dim == 2 ? -half : 0};
  box.len = {2 * half + 1, dim == 2 ? 2 * half + 1 : 1};
  std::vector<double> vals(box.count(dim), 0.0);
  for (int j = 0; j < box.len[1]; ++j)
    for (int i = 0; i < box.len[0]; ++i) {
      const double x = (box.lo[0] + i) * h;
      const double y = dim == 2 ? (box.lo[1] + j) * h : 0.0;
      if (std::abs(x) < R && std::abs(y) < R) vals[static_cast<std::size_t>(j) * box.len[0] + i] = f(x, y);
    }
  const double c = sym->cns;
  auto kernel = [&](int di, int dj) { return -c * (di == 0 && dj == 0 ? sym->a00() : sym->weight(di, dj)); };
  LatticeConvolution conv(dim, box, box, kernel);
  std::vector<double> out(box.count(dim));
  conv.apply(vals, out);
  std::vector<double> result;
  result.reserve(points.size());
  for (const auto& pt : points) {
    if (!is_multiple(pt[0], h) || (dim == 2 && !is_multiple(pt[1], h)))
      throw std::invalid_argument("datum lattice: point is not a lattice node");
    const int i = static_cast<int>(std::lround(pt[0] / h)) - box.lo[0];
    const int j = dim == 2 ? static_cast<int>(std::lround(pt[1] / h)) - box.lo[1] : 0;
    if (i < 0 || i >= box.len[0] || j < 0 || j >= box.len[1])
      throw std::invalid_argument("datum lattice: point lies outside (-R, R)");
    result.push_back(out[static_cast<std::size_t>(j) * box.len[0] + i]);
  }
  return result;
}

std::vector<double> datum_term(const ProblemSpec& spec, const NodeSet& points) {
  if (spec.datum_w2 && points == spec.W2 && spec.datum_w2->size() == points.size()) return *spec.datum_w2;
  const Grid& g = spec.grid;
  if (!spec.f) return std::vector<double>(points.size(), 0.0);
  if (g.dim() == 2) {
    const double hd = 0.5 * g.h();
    if (is_multiple(g.R(), hd) && is_multiple(g.L(), hd)) {
      std::vector<std::array<double, 2>> xy;
      xy.reserve(points.size());
      for (const auto& p : points) xy.push_back({g.coord(p.i), g.coord(p.j)});
      return datum_on_lattice(2, spec.s, spec.gamma, g.R(), hd, spec.f, xy);
    }
  }
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points)
    out.push_back(datum_fractional_laplacian(g.dim(), spec.s, g.R(), spec.f, g.coord(p.i),
                                             g.dim() == 2 ? g.coord(p.j) : 0.0));
  return out;
}

std::vector<double> observe_exterior(const ProblemSpec& spec, std::span<const double> u_interior,
                                     const SpatialFunction& f, const NodeSet& points) {
  ObservationOperator op(spec.grid, spec.s, points);
  auto out = op.apply(u_interior);
  if (f) {
    const Grid& g = spec.grid;
    for (std::size_t k = 0; k < points.size(); ++k)
      out[k] += datum_fractional_laplacian(g.dim(), spec.s, g.R(), f, g.coord(points[k].i),
                                           g.dim() == 2 ? g.coord(points[k].j) : 0.0);
  }
  return out;
}

std::vector<double> observe_exterior(const ProblemSpec& spec, std::span<const double> u_interior,
                                     const NodeSet& points) {
  ObservationOperator op(spec.grid, spec.s, points);
  auto out = op.apply(u_interior);
  const auto datum = datum_term(spec, points);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += datum[k];
  return out;
}

}  // namespace fraccal
