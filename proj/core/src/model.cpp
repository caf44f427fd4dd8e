#include "fraccal/model.hpp"

#include <algorithm>
#include <cmath>

namespace fraccal {

Grid Grid::make(int dim, double L, double R, int N) {
  if (dim != 1 && dim != 2) throw std::invalid_argument("grid dimension must be 1 or 2");
  if (!(L > 0.0)) throw std::invalid_argument("half-width L must be positive");
  if (!(R > L)) throw std::invalid_argument("truncation radius R must exceed L");
  if (N < 4 || N % 2 != 0) throw std::invalid_argument("N must be even and at least 4");
  const double h = 2.0 * L / N;
  const int M = static_cast<int>(std::floor((R - L) / h)) + 1;
  return Grid(dim, L, R, N, M);
}

std::size_t Grid::node_count() const {
  const auto e = static_cast<std::size_t>(extent());
  return dim_ == 1 ? e : e * e;
}

std::size_t Grid::interior_count() const {
  const auto n = static_cast<std::size_t>(interior_extent());
  return dim_ == 1 ? n : n * n;
}

std::size_t Grid::lattice_index(int i, int j) const {
  const auto di = static_cast<std::size_t>(i - lo());
  if (dim_ == 1) return di;
  return static_cast<std::size_t>(j - lo()) * static_cast<std::size_t>(extent()) + di;
}

std::size_t Grid::interior_index(int i, int j) const {
  const auto di = static_cast<std::size_t>(i - 1);
  if (dim_ == 1) return di;
  return static_cast<std::size_t>(j - 1) * static_cast<std::size_t>(interior_extent()) + di;
}

std::vector<double> Field::interior() const {
  std::vector<double> out(grid_.interior_count());
  const int n = grid_.N();
  if (grid_.dim() == 1) {
    for (int i = 1; i < n; ++i) out[grid_.interior_index(i)] = at(i);
  } else {
    for (int j = 1; j < n; ++j)
      for (int i = 1; i < n; ++i) out[grid_.interior_index(i, j)] = at(i, j);
  }
  return out;
}

void Field::set_interior(std::span<const double> v) {
  if (v.size() != grid_.interior_count()) throw std::invalid_argument("interior vector size mismatch");
  const int n = grid_.N();
  if (grid_.dim() == 1) {
    for (int i = 1; i < n; ++i) at(i) = v[grid_.interior_index(i)];
  } else {
    for (int j = 1; j < n; ++j)
      for (int i = 1; i < n; ++i) at(i, j) = v[grid_.interior_index(i, j)];
  }
}

bool Field::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void ProblemSpec::validate() const {
  if (!(s > 0.0 && s < 1.0)) throw std::invalid_argument("fractional order s must lie in (0,1)");
  if (!(gamma > 2.0 * s && gamma <= 2.0))
    throw std::invalid_argument("splitting parameter gamma must lie in (2s, 2]");
  if (q.size() != grid.interior_count()) throw std::invalid_argument("potential size does not match grid");
  const double L = grid.L();
  const double limit = L + gap();
  auto outside = [&](const Node& n) {
    const double x = std::abs(grid.coord(n.i));
    const double y = grid.dim() == 2 ? std::abs(grid.coord(n.j)) : 0.0;
    return std::max(x, y) > limit;
  };
  for (const auto* set : {&W1, &W2})
    for (const auto& n : *set)
      if (!outside(n)) throw std::invalid_argument("exterior node set intersects the gap around the domain");
}

double discrete_norm(std::span<const double> values, NormKind kind, double h, int dim) {
  if (values.empty()) throw std::invalid_argument("norm of an empty set");
  if (kind == NormKind::Linf) {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
  }
  double sum = 0.0;
  for (double v : values) sum += v * v;
  return std::sqrt(std::pow(h, dim) * sum);
}

double discrete_dot(std::span<const double> a, std::span<const double> b, double h, int dim) {
  if (a.size() != b.size()) throw std::invalid_argument("inner product size mismatch");
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) sum += a[k] * b[k];
  return std::pow(h, dim) * sum;
}

NodeSet rasterize(const Grid& grid, const std::function<bool(double, double)>& inside, double gap) {
  NodeSet out;
  const double limit = grid.L() + gap;
  const double R = grid.R();
  const int jlo = grid.dim() == 2 ? grid.lo() : 0;
  const int jhi = grid.dim() == 2 ? grid.hi() : 0;
  for (int j = jlo; j <= jhi; ++j) {
    const double y = grid.dim() == 2 ? grid.coord(j) : 0.0;
    for (int i = grid.lo(); i <= grid.hi(); ++i) {
      const double x = grid.coord(i);
      if (std::max(std::abs(x), std::abs(y)) >= R) continue;
      if (std::max(std::abs(x), std::abs(y)) <= limit) continue;
      if (inside(x, y)) out.push_back({i, j});
    }
  }
  return out;
}

}  // namespace fraccal
