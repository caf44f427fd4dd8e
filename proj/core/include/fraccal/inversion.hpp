#pragma once

#include <span>
#include <string>
#include <vector>

#include "fraccal/forward.hpp"
#include "fraccal/model.hpp"

namespace fraccal {

enum class AlphaRule { Explicit, DeltaSquared };

struct InversionConfig {
  AlphaRule alpha_rule = AlphaRule::DeltaSquared;
  double alpha = 0.0;    ///< used when alpha_rule is Explicit
  double alpha_c = 1.0;  ///< c in alpha = c * delta^2
  double delta = 0.0;
  double stop_factor = 2.0;
  int max_outer_iter = 200;
  double inner_rtol = 1e-10;
  int restart_every = 20;
  /// Halvings of a step that increased E before giving up.
  int max_halvings = 12;

  /// Alpha in force; throws for the delta rule at delta <= 0.
  double effective_alpha() const;
  /// stop_factor * delta^2, or (10 * inner_rtol)^2 when delta is 0.
  double stop_threshold() const;
  void validate() const;
};

/// c * delta^2; throws std::invalid_argument unless delta > 0 and c > 0.
double choose_alpha(double delta, double c);

struct IterationRecord {
  int k = 0;
  double E = 0.0;
  double J = 0.0;
  double grad_norm = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double seconds = 0.0;
  int inner_iterations = 0;
  bool restarted = false;
};

struct InversionState {
  int k = 0;
  std::vector<double> q;
  std::vector<double> grad;
  std::vector<double> dir;
  double beta = 0.0;
  double gamma = 0.0;
  double E = 0.0;
  std::vector<IterationRecord> trace;
};

enum class StopReason { Discrepancy, MaxIterations, DegenerateStep, Stagnation };

std::string to_string(StopReason r);

struct InversionResult {
  std::vector<double> q;
  InversionState state;
  StopReason reason = StopReason::MaxIterations;
  double E_final = 0.0;
  int iterations = 0;
};

/// Penalty difference operator P. 1D: forward differences on the N edges with
/// q zero-extended to the boundary nodes. 2D: five-point Laplacian on interior
/// nodes with q zero-extended.
std::vector<double> penalty_apply(const Grid& g, std::span<const double> q);
/// ||P q||^2 with the h^dim weight.
double penalty_value(const Grid& g, std::span<const double> q);
/// L2 gradient density of 1/2 ||P q||^2: -D2 q in 1D, L(L q) in 2D.
std::vector<double> penalty_gradient(const Grid& g, std::span<const double> q);

/// Mask of the nodes allowed to move (outside the zero collar).
std::vector<char> free_nodes(const Grid& g, int collar);

/// E = ||obs - data||^2 over W2 with the h^dim weight.
double residual_energy(const Grid& g, std::span<const double> residual);

/// J(q) = 1/2 E + alpha/2 ||P q||^2. Runs one forward solve.
double tikhonov_value(const ForwardModel& model, std::span<const double> q, const Observation& data, double alpha);

/// L2 gradient density u v + alpha P^T P q on free nodes, zero on the collar.
/// The partial derivative of J in q_i is h^dim times entry i.
std::vector<double> gradient(const ForwardModel& model, std::span<const double> q, std::span<const double> u,
                             std::span<const double> v, double alpha);

struct StepSize {
  double beta = 0.0;
  bool degenerate = false;
};

/// Minimizer of the linearized functional along d:
///   beta = -(<r, B phi> + alpha <P q, P d>) / (||B phi||^2 + alpha ||P d||^2).
StepSize step_size(const Grid& g, std::span<const double> q, std::span<const double> d,
                   std::span<const double> residual, std::span<const double> b_phi, double alpha);

/// Conjugate-gradient reconstruction from q0 (zero when empty).
InversionResult cg_reconstruct(const ForwardModel& model, const Observation& data, const InversionConfig& config,
                               std::span<const double> q0 = {});

}  // namespace fraccal
