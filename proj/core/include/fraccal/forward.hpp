#pragma once

#include <memory>
#include <span>
#include <vector>

#include "fraccal/model.hpp"
#include "fraccal/stencil.hpp"
#include "fraccal/toeplitz.hpp"

namespace fraccal {

struct ForwardSolution {
  Field u;                       ///< interior solution plus f on the exterior ring
  std::vector<double> rhs_used;  ///< interior right-hand side
  KrylovReport report;
  double eps_R = 0.0;  ///< quadrature error estimate of the far-field forcing
};

/// Interior right-hand side pieces that do not depend on q.
struct ForwardRhs {
  std::vector<double> values;
  double eps_R = 0.0;
};

/// g + c_ns * (lattice ring terms of f) + c_ns * F_R.
ForwardRhs forward_rhs(const ProblemSpec& spec, const SpatialFunction& f);

/// Everything about a spec that stays fixed while q changes: the stencil,
/// the q-independent right-hand side, the W2 observation operator and the
/// datum term at W2.
class ForwardModel {
 public:
  explicit ForwardModel(ProblemSpec spec, KrylovOptions opts = {});

  const ProblemSpec& spec() const { return spec_; }
  const KrylovOptions& options() const { return opts_; }
  const std::shared_ptr<const StencilSymbol>& symbol() const { return symbol_; }
  const std::vector<double>& rhs() const { return rhs_.values; }
  double eps_R() const { return rhs_.eps_R; }
  const ObservationOperator& observer() const { return observer_; }
  const std::vector<double>& datum() const { return *datum_; }
  std::shared_ptr<const std::vector<double>> datum_ptr() const { return datum_; }

  FastOperator op(std::span<const double> q) const;

  /// Forward solve at potential q; `guess` (optional) seeds the Krylov solver.
  ForwardSolution solve(std::span<const double> q, std::span<const double> guess = {}) const;
  ForwardSolution solve(const FastOperator& op, std::span<const double> guess = {}) const;

  /// (-Delta)^s u at W2: linear part plus datum.
  std::vector<double> observe(std::span<const double> u_interior) const;
  /// Linear part only, for sensitivities.
  std::vector<double> observe_linear(std::span<const double> u_interior) const;

  /// A phi = -dq * u, homogeneous exterior.
  std::vector<double> sensitivity(const FastOperator& op, std::span<const double> u_interior,
                                  std::span<const double> dq, KrylovReport* report = nullptr) const;
  /// A v = -B^T r, where B is the W2 observation quadrature.
  std::vector<double> adjoint(const FastOperator& op, std::span<const double> residual,
                              KrylovReport* report = nullptr) const;

  /// Interior vector embedded in a Field with f on the ring.
  Field with_exterior(std::span<const double> u_interior) const;

 private:
  ProblemSpec spec_;
  KrylovOptions opts_;
  std::shared_ptr<const StencilSymbol> symbol_;
  ForwardRhs rhs_;
  ObservationOperator observer_;
  std::shared_ptr<const std::vector<double>> datum_;
};

ForwardSolution solve_forward(const ProblemSpec& spec, const KrylovOptions& opts = {});

/// q -> (-Delta)^s u_q at the W2 nodes.
std::vector<double> forward_operator(const ProblemSpec& spec, const KrylovOptions& opts = {});

/// Sensitivity field for a perturbation delta_q, given the forward state u_q.
Field solve_sensitivity(const ProblemSpec& spec, const Field& delta_q, const Field& u_q,
                        const KrylovOptions& opts = {});

/// Adjoint field; its exterior values equal the residual on W2 and vanish
/// elsewhere.
Field solve_adjoint(const ProblemSpec& spec, std::span<const double> residual_on_W2,
                    const KrylovOptions& opts = {});

}  // namespace fraccal
