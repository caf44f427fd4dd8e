#include "fraccal/inversion.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace fraccal {

double choose_alpha(double delta, double c) {
  if (!(delta > 0.0)) throw std::invalid_argument("alpha rule c*delta^2 needs delta > 0; pass an explicit alpha");
  if (!(c > 0.0)) throw std::invalid_argument("alpha rule constant must be positive");
  return c * delta * delta;
}

double InversionConfig::effective_alpha() const {
  if (alpha_rule == AlphaRule::Explicit) return alpha;
  return choose_alpha(delta, alpha_c);
}

double InversionConfig::stop_threshold() const {
  if (delta > 0.0) return stop_factor * delta * delta;
  return (10.0 * inner_rtol) * (10.0 * inner_rtol);
}

void InversionConfig::validate() const {
  if (!(delta >= 0.0)) throw std::invalid_argument("delta must be non-negative");
  if (alpha_rule == AlphaRule::Explicit && !(alpha >= 0.0)) throw std::invalid_argument("alpha must be non-negative");
  if (!(stop_factor > 0.0)) throw std::invalid_argument("stop factor must be positive");
  if (max_outer_iter < 0) throw std::invalid_argument("max_outer_iter must be non-negative");
  if (!(inner_rtol > 0.0 && inner_rtol < 1.0)) throw std::invalid_argument("inner rtol must lie in (0,1)");
  if (restart_every < 1) throw std::invalid_argument("restart interval must be positive");
  (void)effective_alpha();
}

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::Discrepancy: return "discrepancy";
    case StopReason::MaxIterations: return "max_iterations";
    case StopReason::DegenerateStep: return "degenerate_step";
    case StopReason::Stagnation: return "stagnation";
  }
  return "unknown";
}

namespace {

double weight(const Grid& g) { return std::pow(g.h(), g.dim()); }

double dot_plain(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

// Zero-extended interior value.
double at(const Grid& g, std::span<const double> q, int i, int j) {
  if (!g.is_interior(i, j)) return 0.0;
  return q[g.interior_index(i, j)];
}

std::vector<double> laplacian_2d(const Grid& g, std::span<const double> q) {
  const double inv = 1.0 / (g.h() * g.h());
  std::vector<double> out(g.interior_count());
  for (int j = 1; j < g.N(); ++j)
    for (int i = 1; i < g.N(); ++i)
      out[g.interior_index(i, j)] =
          inv * (at(g, q, i + 1, j) + at(g, q, i - 1, j) + at(g, q, i, j + 1) + at(g, q, i, j - 1) -
                 4.0 * at(g, q, i, j));
  return out;
}

}  // namespace

std::vector<double> penalty_apply(const Grid& g, std::span<const double> q) {
  if (q.size() != g.interior_count()) throw std::invalid_argument("penalty: q has the wrong size");
  if (g.dim() == 2) return laplacian_2d(g, q);
  std::vector<double> out(g.N());
  for (int e = 0; e < g.N(); ++e) out[e] = (at(g, q, e + 1, 0) - at(g, q, e, 0)) / g.h();
  return out;
}

double penalty_value(const Grid& g, std::span<const double> q) {
  const auto p = penalty_apply(g, q);
  return weight(g) * dot_plain(p, p);
}

std::vector<double> penalty_gradient(const Grid& g, std::span<const double> q) {
  if (g.dim() == 2) {
    const auto lq = laplacian_2d(g, q);
    return laplacian_2d(g, lq);
  }
  const double inv = 1.0 / (g.h() * g.h());
  std::vector<double> out(g.interior_count());
  for (int i = 1; i < g.N(); ++i)
    out[g.interior_index(i)] = -inv * (at(g, q, i + 1, 0) - 2.0 * at(g, q, i, 0) + at(g, q, i - 1, 0));
  return out;
}

std::vector<char> free_nodes(const Grid& g, int collar) {
  std::vector<char> mask(g.interior_count(), 0);
  const int lo = 1 + collar;
  const int hi = g.N() - 1 - collar;
  auto ok = [&](int i) { return i >= lo && i <= hi; };
  const int jlo = g.dim() == 2 ? 1 : 0;
  const int jhi = g.dim() == 2 ? g.N() - 1 : 0;
  for (int j = jlo; j <= jhi; ++j)
    for (int i = 1; i < g.N(); ++i) mask[g.interior_index(i, j)] = ok(i) && (g.dim() == 1 || ok(j));
  return mask;
}

double residual_energy(const Grid& g, std::span<const double> residual) {
  return weight(g) * dot_plain(residual, residual);
}

namespace {

std::vector<double> residual_of(const ForwardModel& model, std::span<const double> u, const Observation& data) {
  auto r = model.observe(u);
  for (std::size_t k = 0; k < r.size(); ++k) r[k] -= data.values[k];
  return r;
}

void check_data(const ForwardModel& model, const Observation& data) {
  if (data.points != model.spec().W2 || data.values.size() != data.points.size())
    throw std::invalid_argument("observation points do not match the model's W2 nodes");
}

}  // namespace

double tikhonov_value(const ForwardModel& model, std::span<const double> q, const Observation& data, double alpha) {
  check_data(model, data);
  const auto sol = model.solve(q);
  const auto r = residual_of(model, sol.u.interior(), data);
  const Grid& g = model.spec().grid;
  return 0.5 * residual_energy(g, r) + 0.5 * alpha * penalty_value(g, q);
}

std::vector<double> gradient(const ForwardModel& model, std::span<const double> q, std::span<const double> u,
                             std::span<const double> v, double alpha) {
  const Grid& g = model.spec().grid;
  if (q.size() != g.interior_count() || u.size() != q.size() || v.size() != q.size())
    throw std::invalid_argument("gradient: size mismatch");
  const auto mask = free_nodes(g, model.spec().collar);
  std::vector<double> out(q.size(), 0.0);
  std::vector<double> pen;
  if (alpha != 0.0) pen = penalty_gradient(g, q);
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (!mask[k]) continue;
    out[k] = u[k] * v[k] + (alpha != 0.0 ? alpha * pen[k] : 0.0);
  }
  return out;
}

StepSize step_size(const Grid& g, std::span<const double> q, std::span<const double> d,
                   std::span<const double> residual, std::span<const double> b_phi, double alpha) {
  const double w = weight(g);
  double num = w * dot_plain(residual, b_phi);
  double den = w * dot_plain(b_phi, b_phi);
  if (alpha != 0.0) {
    const auto pq = penalty_apply(g, q);
    const auto pd = penalty_apply(g, d);
    num += alpha * w * dot_plain(pq, pd);
    den += alpha * w * dot_plain(pd, pd);
  }
  StepSize s;
  if (!(den > 0.0) || !std::isfinite(num) || !std::isfinite(den)) {
    s.degenerate = true;
    return s;
  }
  s.beta = -num / den;
  return s;
}

InversionResult cg_reconstruct(const ForwardModel& model, const Observation& data, const InversionConfig& config,
                               std::span<const double> q0) {
  using clock = std::chrono::steady_clock;
  config.validate();
  check_data(model, data);
  const Grid& g = model.spec().grid;
  const double alpha = config.effective_alpha();
  const double threshold = config.stop_threshold();
  const double w = weight(g);
  const auto mask = free_nodes(g, model.spec().collar);
  const std::size_t n = g.interior_count();

  InversionResult res;
  InversionState& st = res.state;
  st.q.assign(n, 0.0);
  if (!q0.empty()) {
    if (q0.size() != n) throw std::invalid_argument("initial potential has the wrong size");
    for (std::size_t k = 0; k < n; ++k) st.q[k] = mask[k] ? q0[k] : 0.0;
  }

  auto t_start = clock::now();
  auto A = model.op(st.q);
  auto sol = model.solve(A);
  std::vector<double> u = sol.u.interior();
  std::vector<double> r = residual_of(model, u, data);
  st.E = residual_energy(g, r);
  double J = 0.5 * st.E + 0.5 * alpha * penalty_value(g, st.q);
  int inner = sol.report.iterations;
  std::vector<double> grad_prev;
  double gg_prev = 0.0;

  auto record = [&](int k, double beta, double gamma, bool restarted, double gnorm) {
    IterationRecord rec;
    rec.k = k;
    rec.E = st.E;
    rec.J = J;
    rec.grad_norm = gnorm;
    rec.beta = beta;
    rec.gamma = gamma;
    rec.seconds = std::chrono::duration<double>(clock::now() - t_start).count();
    rec.inner_iterations = inner;
    rec.restarted = restarted;
    st.trace.push_back(rec);
    t_start = clock::now();
    inner = 0;
  };

  res.reason = StopReason::MaxIterations;
  for (st.k = 0;; ++st.k) {
    if (st.E <= threshold) {
      res.reason = StopReason::Discrepancy;
      break;
    }
    if (st.k >= config.max_outer_iter) {
      res.reason = StopReason::MaxIterations;
      break;
    }
    KrylovReport rep;
    const auto v = model.adjoint(A, r, &rep);
    inner += rep.iterations;
    st.grad = gradient(model, st.q, u, v, alpha);
    const double gg = w * dot_plain(st.grad, st.grad);
    if (gg == 0.0) {
      res.reason = StopReason::DegenerateStep;
      if (st.trace.empty()) record(st.k, 0.0, 0.0, true, 0.0);
      break;
    }

    bool restarted = st.k == 0 || st.k % config.restart_every == 0 || st.dir.empty();
    st.gamma = restarted ? 0.0 : gg / gg_prev;
    std::vector<double> d(n);
    auto steepest = [&] {
      for (std::size_t k = 0; k < n; ++k) d[k] = -st.grad[k];
      st.gamma = 0.0;
    };
    if (restarted) {
      steepest();
    } else {
      for (std::size_t k = 0; k < n; ++k) d[k] = -st.grad[k] + st.gamma * st.dir[k];
      if (dot_plain(st.grad, d) >= 0.0) {
        steepest();
        restarted = true;
      }
    }

    // Line step along d; on an increase of E retry along -J', then halve.
    bool accepted = false;
    bool degenerate = false;
    double beta = 0.0;
    std::vector<double> q_new(n);
    std::vector<double> u_new;
    std::vector<double> r_new;
    double E_new = 0.0;
    FastOperator A_new = model.op(st.q);
    for (int attempt = 0; attempt < 2 && !accepted && !degenerate; ++attempt) {
      if (attempt == 1) {
        if (restarted) break;
        steepest();
        restarted = true;
      }
      const auto phi = model.sensitivity(A, u, d, &rep);
      inner += rep.iterations;
      const auto b_phi = model.observe_linear(phi);
      const auto step = step_size(g, st.q, d, r, b_phi, alpha);
      if (step.degenerate || step.beta == 0.0) {
        degenerate = true;
        break;
      }
      beta = step.beta;
      for (int halving = 0; halving <= config.max_halvings; ++halving) {
        for (std::size_t k = 0; k < n; ++k) q_new[k] = st.q[k] + beta * d[k];
        A_new = model.op(q_new);
        const auto trial = model.solve(A_new, u);
        inner += trial.report.iterations;
        u_new = trial.u.interior();
        r_new = residual_of(model, u_new, data);
        E_new = residual_energy(g, r_new);
        if (std::isfinite(E_new) && E_new <= st.E) {
          accepted = true;
          break;
        }
        if (halving == 0 && attempt == 0 && !restarted) break;  // retry with steepest descent first
        beta *= 0.5;
      }
    }
    if (degenerate) {
      res.reason = StopReason::DegenerateStep;
      record(st.k, 0.0, st.gamma, restarted, std::sqrt(gg));
      break;
    }
    if (!accepted) {
      res.reason = StopReason::Stagnation;
      record(st.k, 0.0, st.gamma, restarted, std::sqrt(gg));
      break;
    }
    st.q = std::move(q_new);
    st.dir = d;
    st.beta = beta;
    A = std::move(A_new);
    u = std::move(u_new);
    r = std::move(r_new);
    st.E = E_new;
    J = 0.5 * st.E + 0.5 * alpha * penalty_value(g, st.q);
    gg_prev = gg;
    record(st.k, beta, st.gamma, restarted, std::sqrt(gg));
  }
  res.q = st.q;
  res.E_final = st.E;
  res.iterations = st.k;
  return res;
}

}  // namespace fraccal
