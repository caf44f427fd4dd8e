#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fraccal/model.hpp"
#include "fraccal/stencil.hpp"

namespace fraccal {

class LatticeConvolution;

/// Matrix-free A = -c_ns * [stencil] + diag(q) on interior vectors.
///
/// The stencil part is applied by circulant embedding; the embedding has at
/// least 2(N-1) points per dimension, rounded to a power of two.
class FastOperator {
 public:
  FastOperator(std::shared_ptr<const StencilSymbol> symbol, const Grid& grid, std::vector<double> q);
  ~FastOperator();
  FastOperator(FastOperator&&) noexcept;
  FastOperator& operator=(FastOperator&&) noexcept;

  const StencilSymbol& symbol() const { return *symbol_; }
  const Grid& grid() const { return grid_; }
  std::span<const double> q() const { return q_; }
  std::size_t size() const { return grid_.interior_count(); }
  /// Main diagonal, -c_ns a00 + q.
  double diagonal(std::size_t k) const { return -symbol_->cns * symbol_->a00() + q_[k]; }

  std::vector<double> apply(std::span<const double> x) const;
  void apply(std::span<const double> x, std::span<double> y) const;

 private:
  std::shared_ptr<const StencilSymbol> symbol_;
  Grid grid_;
  std::vector<double> q_;
  std::unique_ptr<LatticeConvolution> conv_;
};

/// Builds the operator for a spec; throws std::invalid_argument on a grid
/// mismatch between symbol and q.
FastOperator build_fast_operator(std::shared_ptr<const StencilSymbol> symbol, const Grid& grid,
                                 std::span<const double> q);

enum class KrylovMethod { Auto, CG, BiCGStab };

std::string to_string(KrylovMethod m);

struct KrylovOptions {
  double rtol = 1e-10;
  int max_iter = 0;  ///< 0 selects 10 * N
  KrylovMethod method = KrylovMethod::Auto;
};

struct KrylovReport {
  int iterations = 0;
  /// Final ||b - A x||_2, absolute.
  double final_residual = 0.0;
  double rhs_norm = 0.0;
  bool converged = false;
  KrylovMethod method = KrylovMethod::CG;
  /// CG only: -1/2 sum_j alpha_j ||r_j||^2 after each step, equal to
  /// 1/2 x^T A x - b^T x for the current iterate. Non-increasing.
  std::vector<double> energy;
  /// ||r_k||_2 after each iteration.
  std::vector<double> residuals;
  /// Smallest Ritz value of the Lanczos probe, when it ran.
  double ritz_min = 0.0;
};

/// Thrown by callers that require convergence.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, KrylovReport report)
      : std::runtime_error(what), report_(std::move(report)) {}
  const KrylovReport& report() const { return report_; }

 private:
  KrylovReport report_;
};

/// Smallest eigenvalue of the Lanczos tridiagonal after `steps` steps from
/// `start` (Sturm bisection).
double lanczos_min_ritz(const FastOperator& op, std::span<const double> start, int steps = 20);

/// Solves A x = rhs. x holds the initial guess on entry. Does not throw on
/// non-convergence; the report carries the flag.
KrylovReport krylov_solve(const FastOperator& op, std::span<const double> rhs, std::span<double> x,
                          const KrylovOptions& opts = {});

/// Throws SolverError when the report is not converged.
void require_converged(const KrylovReport& r, const std::string& context);

}  // namespace fraccal
