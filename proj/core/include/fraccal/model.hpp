#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fraccal {

/// Uniform lattice over the computational box [-R, R]^dim.
///
/// Interior nodes are x_i = -L + i h for 1 <= i <= N-1. The exterior ring
/// is stored for every lattice node inside [-R, R]; nodes beyond R are
/// implicit zeros. Lattice indices run from lo() = -(M-1) to hi() = N+M-1.
class Grid {
 public:
  static Grid make(int dim, double L, double R, int N);

  int dim() const { return dim_; }
  double L() const { return L_; }
  double R() const { return R_; }
  int N() const { return N_; }
  int M() const { return M_; }
  double h() const { return 2.0 * L_ / N_; }

  int lo() const { return -(M_ - 1); }
  int hi() const { return N_ + M_ - 1; }
  /// Lattice nodes per dimension, ring included.
  int extent() const { return hi() - lo() + 1; }
  /// Unknowns per dimension (strict interior).
  int interior_extent() const { return N_ - 1; }
  std::size_t node_count() const;
  std::size_t interior_count() const;

  /// Exact at i = 0, N/2 and N.
  double coord(int i) const { return L_ * ((2.0 * i - N_) / N_); }

  bool is_interior(int i) const { return i >= 1 && i <= N_ - 1; }
  bool is_interior(int i, int j) const {
    return is_interior(i) && (dim_ == 1 || is_interior(j));
  }

  /// Flat offset of lattice node (i, j) in a Field; j ignored in 1D.
  std::size_t lattice_index(int i, int j = 0) const;
  /// Flat offset of interior node (i, j) in an interior vector.
  std::size_t interior_index(int i, int j = 0) const;

  bool same_as(const Grid& o) const {
    return dim_ == o.dim_ && L_ == o.L_ && R_ == o.R_ && N_ == o.N_;
  }

 private:
  Grid(int dim, double L, double R, int N, int M) : dim_(dim), L_(L), R_(R), N_(N), M_(M) {}

  int dim_;
  double L_;
  double R_;
  int N_;
  int M_;
};

/// Lattice multi-index. In 1D, j is 0.
struct Node {
  int i = 0;
  int j = 0;
  bool operator==(const Node&) const = default;
};

using NodeSet = std::vector<Node>;

/// Values over every lattice node of a grid (interior plus exterior ring).
class Field {
 public:
  explicit Field(const Grid& grid) : grid_(grid), values_(grid.node_count(), 0.0) {}

  const Grid& grid() const { return grid_; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  double& at(int i, int j = 0) { return values_[grid_.lattice_index(i, j)]; }
  double at(int i, int j = 0) const { return values_[grid_.lattice_index(i, j)]; }

  /// Interior values in interior_index order.
  std::vector<double> interior() const;
  void set_interior(std::span<const double> v);

  bool all_finite() const;

 private:
  Grid grid_;
  std::vector<double> values_;
};

/// Scalar function of position; 1D callers pass y = 0.
using SpatialFunction = std::function<double(double x, double y)>;

/// Everything needed to pose forward, sensitivity and adjoint solves.
struct ProblemSpec {
  double s = 0.4;
  double gamma = 2.0;
  Grid grid = Grid::make(1, 1.0, 3.0, 16);
  /// Potential on interior nodes (interior_index order).
  std::vector<double> q;
  SpatialFunction f;  ///< exterior datum, supported in W1
  SpatialFunction g;  ///< interior source; empty means zero
  NodeSet W1;
  NodeSet W2;
  double eps_gap = 0.0;  ///< 0 selects one grid cell
  int collar = 1;        ///< q vanishes on this many cells next to the boundary
  /// Optional precomputed (-Delta)^s f at the W2 nodes, aligned with W2.
  std::shared_ptr<const std::vector<double>> datum_w2;

  double gap() const { return eps_gap > 0.0 ? eps_gap : grid.h(); }
  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;
};

/// Values of (-Delta)^s u at W2 nodes, possibly perturbed.
struct Observation {
  NodeSet points;
  std::vector<double> values;
  double delta = 0.0;
  std::uint64_t seed = 0;
};

enum class NormKind { L2, Linf };

/// Midpoint-weighted discrete norm: L2 = sqrt(h^dim sum v^2), Linf = max |v|.
double discrete_norm(std::span<const double> values, NormKind kind, double h, int dim);

/// h^dim-weighted inner product.
double discrete_dot(std::span<const double> a, std::span<const double> b, double h, int dim);

/// Lattice nodes strictly inside the open set `inside` and outside
/// [-L-gap, L+gap]^dim.
NodeSet rasterize(const Grid& grid, const std::function<bool(double, double)>& inside, double gap);

}  // namespace fraccal
