#pragma once

#include <array>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "fraccal/model.hpp"

namespace fraccal {

/// Normalization constant of the integral fractional Laplacian in R^n.
double c_ns(int n, double s);

/// Number of zero arguments among (m, n).
int sigma(int m, int n);

/// Corner-extrapolation coefficient used by the gamma = 2 weights.
int cbar(int m, int n);

struct StencilParams {
  int dim = 1;
  double s = 0.4;
  double gamma = 2.0;
  double L = 1.0;
  double R = 3.0;
  int N = 16;
  double quad_tol = 1e-10;

  static StencilParams from(const ProblemSpec& spec, double quad_tol = 1e-10);
  double h() const { return 2.0 * L / N; }
  bool operator==(const StencilParams&) const = default;
};

/// Generating weights of the discrete fractional Laplacian.
///
/// The discrete operator at an interior node reads
///   -c_ns * [ a00 u_i + sum_{offsets != 0, |m|,|n| <= N} a_{|m||n|} u_{i+offset} ]
/// which is Toeplitz in 1D and block-Toeplitz with Toeplitz blocks in 2D.
struct StencilSymbol {
  int dim = 1;
  double s = 0.0;
  double gamma = 0.0;
  double h = 0.0;
  double L = 0.0;
  double R = 0.0;
  int N = 0;
  double quad_tol = 0.0;
  double cns = 0.0;
  /// Integral of the kernel over the first quadrant outside the stencil box
  /// (1D: over (2L, inf)).
  double tail = 0.0;
  /// 1D: a[m], 0 <= m <= N. 2D: a[n * (N + 1) + m]. a[0] is the diagonal a00.
  std::vector<double> a;

  double a00() const { return a[0]; }
  /// Weight for an offset; zero when |m| or |n| exceeds N.
  double weight(int m, int n = 0) const;
  /// a00 plus every off-diagonal weight, i.e. the row sum.
  double row_sum() const;
};

/// Weight a_{mn}, m + n != 0, computed on demand.
double weight_2d(int m, int n, const StencilParams& p);

/// Diagonal weight closing the row sum against the exterior tail.
double a00_2d(const StencilParams& p, std::span<const double> offdiag);

/// Kernel integral over the first quadrant outside (0, 2L)^2.
double tail_integral_2d(double L, double s, double tol = 1e-12);

/// Kernel integral over (2L, inf), closed form.
double tail_integral_1d(double L, double s);

StencilSymbol weights_1d(const StencilParams& p);
StencilSymbol weights_2d(const StencilParams& p);

/// Memoized construction keyed by the full parameter set.
std::shared_ptr<const StencilSymbol> stencil_symbol(const StencilParams& p);

/// Text dump: one header line, then weights row-major; exact round trip.
void write_symbol(std::ostream& os, const StencilSymbol& sym);
StencilSymbol read_symbol(std::istream& is);

/// Far-field exterior forcing F_R on interior nodes together with a
/// quadrature error estimate.
struct BoundaryForcing {
  std::vector<double> values;  ///< interior_index order
  double eps_R = 0.0;
};

/// Composite per-cell Gauss quadrature (order `order`, each lattice cell split
/// into `subdivisions`^dim pieces) of the kernel-weighted exterior datum over
/// the part of (-R, R)^dim outside the stencil box of each node. The error
/// estimate compares against the rule of order `order - 2`.
BoundaryForcing boundary_forcing(const ProblemSpec& spec, const SpatialFunction& f, int order = 8,
                                 int subdivisions = 1);

/// (-Delta)^s of the exterior datum (extended by zero on the domain) at a
/// point outside the closed domain; f must vanish outside (-R, R)^dim.
double datum_fractional_laplacian(int dim, double s, double R, const SpatialFunction& f, double x,
                                  double y = 0.0, double tol = 1e-11);

class LatticeConvolution;

/// Maps interior values to (-Delta)^s u at exterior sample points:
///   value_p = -c_ns h^dim sum_i |x_p - x_i|^{-dim-2s} u_i + (-Delta)^s f(x_p).
class ObservationOperator {
 public:
  ObservationOperator(const Grid& grid, double s, NodeSet points);
  ~ObservationOperator();
  ObservationOperator(ObservationOperator&&) noexcept;
  ObservationOperator& operator=(ObservationOperator&&) noexcept;

  const NodeSet& points() const { return points_; }
  const Grid& grid() const { return grid_; }

  /// Interior contribution only (linear part).
  std::vector<double> apply(std::span<const double> u_interior) const;
  /// Transpose of apply(); returns an interior vector.
  std::vector<double> apply_transpose(std::span<const double> at_points) const;

 private:
  Grid grid_;
  double s_;
  NodeSet points_;
  std::unique_ptr<LatticeConvolution> conv_;
};

/// (-Delta)^s f at lattice points of spacing h (coordinates multiples of h),
/// by the discrete scheme on the whole box (-R, R)^dim: the stencil reach 2R
/// covers the support of f from every point, so no truncation enters.
std::vector<double> datum_on_lattice(int dim, double s, double gamma, double R, double h, const SpatialFunction& f,
                                     std::span<const std::array<double, 2>> points);

/// Datum term (-Delta)^s f at the given points. Reuses spec.datum_w2 when the
/// points are exactly spec.W2. 1D uses adaptive quadrature; 2D uses
/// datum_on_lattice at half the grid spacing when R and L fit that lattice.
std::vector<double> datum_term(const ProblemSpec& spec, const NodeSet& points);

/// Full exterior observation of a solution: linear part plus the datum term
/// of `f` (an empty f contributes nothing).
std::vector<double> observe_exterior(const ProblemSpec& spec, std::span<const double> u_interior,
                                     const SpatialFunction& f, const NodeSet& points);

/// Same, with the datum term of spec.f (cached through spec.datum_w2).
std::vector<double> observe_exterior(const ProblemSpec& spec, std::span<const double> u_interior,
                                     const NodeSet& points);

}  // namespace fraccal
