#include "fraccal/forward.hpp"

#include <cmath>
#include <stdexcept>

#include "fraccal/lattice_convolution.hpp"

namespace fraccal {

namespace {

Box interior_box(const Grid& g) {
  Box b;
  b.lo = {1, g.dim() == 2 ? 1 : 0};
  b.len = {g.N() - 1, g.dim() == 2 ? g.N() - 1 : 1};
  return b;
}

Box lattice_box(const Grid& g) {
  Box b;
  b.lo = {g.lo(), g.dim() == 2 ? g.lo() : 0};
  b.len = {g.extent(), g.dim() == 2 ? g.extent() : 1};
  return b;
}

bool inside_truncation(const Grid& g, int i, int j) {
  return std::abs(g.coord(i)) < g.R() && (g.dim() == 1 || std::abs(g.coord(j)) < g.R());
}

// Exterior datum sampled on every non-interior lattice node inside (-R, R).
std::vector<double> ring_values(const Grid& g, const SpatialFunction& f) {
  std::vector<double> vals(g.node_count(), 0.0);
  if (!f) return vals;
  const int jlo = g.dim() == 2 ? g.lo() : 0;
  const int jhi = g.dim() == 2 ? g.hi() : 0;
  for (int j = jlo; j <= jhi; ++j)
    for (int i = g.lo(); i <= g.hi(); ++i) {
      if (g.is_interior(i, j) || !inside_truncation(g, i, j)) continue;
      vals[g.lattice_index(i, j)] = f(g.coord(i), g.dim() == 2 ? g.coord(j) : 0.0);
    }
  return vals;
}

}  // namespace

ForwardRhs forward_rhs(const ProblemSpec& spec, const SpatialFunction& f) {
  const Grid& g = spec.grid;
  ForwardRhs out;
  out.values.assign(g.interior_count(), 0.0);
  if (spec.g) {
    const int jlo = g.dim() == 2 ? 1 : 0;
    const int jhi = g.dim() == 2 ? g.N() - 1 : 0;
    for (int j = jlo; j <= jhi; ++j)
      for (int i = 1; i < g.N(); ++i)
        out.values[g.interior_index(i, j)] = spec.g(g.coord(i), g.dim() == 2 ? g.coord(j) : 0.0);
  }
  if (!f) return out;
  const auto sym = stencil_symbol(StencilParams::from(spec));
  const double c = sym->cns;
  auto kernel = [&](int di, int dj) { return di == 0 && dj == 0 ? 0.0 : c * sym->weight(di, dj); };
  LatticeConvolution ring(g.dim(), lattice_box(g), interior_box(g), kernel);
  const auto vals = ring_values(g, f);
  std::vector<double> near(g.interior_count());
  ring.apply(vals, near);
  const auto far = boundary_forcing(spec, f);
  for (std::size_t k = 0; k < near.size(); ++k) out.values[k] += near[k] + c * far.values[k];
  out.eps_R = c * far.eps_R;
  return out;
}

ForwardModel::ForwardModel(ProblemSpec spec, KrylovOptions opts)
    : spec_((spec.validate(), std::move(spec))),
      opts_(opts),
      symbol_(stencil_symbol(StencilParams::from(spec_))),
      rhs_(forward_rhs(spec_, spec_.f)),
      observer_(spec_.grid, spec_.s, spec_.W2) {
  if (spec_.datum_w2 && spec_.datum_w2->size() == spec_.W2.size()) {
    datum_ = spec_.datum_w2;
  } else {
    datum_ = std::make_shared<const std::vector<double>>(datum_term(spec_, spec_.W2));
    spec_.datum_w2 = datum_;
  }
}

FastOperator ForwardModel::op(std::span<const double> q) const {
  return build_fast_operator(symbol_, spec_.grid, q);
}

ForwardSolution ForwardModel::solve(std::span<const double> q, std::span<const double> guess) const {
  return solve(op(q), guess);
}

ForwardSolution ForwardModel::solve(const FastOperator& A, std::span<const double> guess) const {
  std::vector<double> x(A.size(), 0.0);
  if (!guess.empty()) {
    if (guess.size() != x.size()) throw std::invalid_argument("forward solve: guess has the wrong size");
    x.assign(guess.begin(), guess.end());
  }
  auto report = krylov_solve(A, rhs_.values, x, opts_);
  require_converged(report, "forward solve");
  return ForwardSolution{with_exterior(x), rhs_.values, std::move(report), rhs_.eps_R};
}

std::vector<double> ForwardModel::observe(std::span<const double> u_interior) const {
  auto out = observer_.apply(u_interior);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += (*datum_)[k];
  return out;
}

std::vector<double> ForwardModel::observe_linear(std::span<const double> u_interior) const {
  return observer_.apply(u_interior);
}

std::vector<double> ForwardModel::sensitivity(const FastOperator& A, std::span<const double> u_interior,
                                              std::span<const double> dq, KrylovReport* report) const {
  if (u_interior.size() != A.size() || dq.size() != A.size())
    throw std::invalid_argument("sensitivity: size mismatch");
  std::vector<double> rhs(A.size());
  for (std::size_t k = 0; k < rhs.size(); ++k) rhs[k] = -dq[k] * u_interior[k];
  std::vector<double> phi(A.size(), 0.0);
  auto rep = krylov_solve(A, rhs, phi, opts_);
  require_converged(rep, "sensitivity solve");
  if (report) *report = std::move(rep);
  return phi;
}

std::vector<double> ForwardModel::adjoint(const FastOperator& A, std::span<const double> residual,
                                          KrylovReport* report) const {
  auto rhs = observer_.apply_transpose(residual);
  for (auto& v : rhs) v = -v;
  std::vector<double> v(A.size(), 0.0);
  auto rep = krylov_solve(A, rhs, v, opts_);
  require_converged(rep, "adjoint solve");
  if (report) *report = std::move(rep);
  return v;
}

Field ForwardModel::with_exterior(std::span<const double> u_interior) const {
  Field u(spec_.grid);
  const auto ring = ring_values(spec_.grid, spec_.f);
  std::copy(ring.begin(), ring.end(), u.values().begin());
  u.set_interior(u_interior);
  return u;
}

ForwardSolution solve_forward(const ProblemSpec& spec, const KrylovOptions& opts) {
  spec.validate();
  const auto sym = stencil_symbol(StencilParams::from(spec));
  const auto rhs = forward_rhs(spec, spec.f);
  const auto A = build_fast_operator(sym, spec.grid, spec.q);
  std::vector<double> x(A.size(), 0.0);
  auto report = krylov_solve(A, rhs.values, x, opts);
  require_converged(report, "forward solve");
  Field u(spec.grid);
  const auto ring = ring_values(spec.grid, spec.f);
  std::copy(ring.begin(), ring.end(), u.values().begin());
  u.set_interior(x);
  return ForwardSolution{std::move(u), rhs.values, std::move(report), rhs.eps_R};
}

std::vector<double> forward_operator(const ProblemSpec& spec, const KrylovOptions& opts) {
  const auto sol = solve_forward(spec, opts);
  return observe_exterior(spec, sol.u.interior(), spec.W2);
}

Field solve_sensitivity(const ProblemSpec& spec, const Field& delta_q, const Field& u_q, const KrylovOptions& opts) {
  if (!delta_q.grid().same_as(spec.grid) || !u_q.grid().same_as(spec.grid))
    throw std::invalid_argument("sensitivity: grid mismatch");
  const auto sym = stencil_symbol(StencilParams::from(spec));
  const auto A = build_fast_operator(sym, spec.grid, spec.q);
  const auto u = u_q.interior();
  const auto dq = delta_q.interior();
  std::vector<double> rhs(A.size());
  for (std::size_t k = 0; k < rhs.size(); ++k) rhs[k] = -dq[k] * u[k];
  std::vector<double> phi(A.size(), 0.0);
  auto rep = krylov_solve(A, rhs, phi, opts);
  require_converged(rep, "sensitivity solve");
  Field out(spec.grid);
  out.set_interior(phi);
  return out;
}

Field solve_adjoint(const ProblemSpec& spec, std::span<const double> residual_on_W2, const KrylovOptions& opts) {
  if (residual_on_W2.size() != spec.W2.size()) throw std::invalid_argument("adjoint: residual size mismatch");
  const auto sym = stencil_symbol(StencilParams::from(spec));
  const auto A = build_fast_operator(sym, spec.grid, spec.q);
  ObservationOperator obs(spec.grid, spec.s, spec.W2);
  auto rhs = obs.apply_transpose(residual_on_W2);
  for (auto& v : rhs) v = -v;
  std::vector<double> v(A.size(), 0.0);
  auto rep = krylov_solve(A, rhs, v, opts);
  require_converged(rep, "adjoint solve");
  Field out(spec.grid);
  for (std::size_t k = 0; k < spec.W2.size(); ++k) out.at(spec.W2[k].i, spec.W2[k].j) = residual_on_W2[k];
  out.set_interior(v);
  return out;
}

}  // namespace fraccal
