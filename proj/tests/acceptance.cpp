// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fraccal/forward.hpp"
#include "fraccal/harness.hpp"
#include "fraccal/inversion.hpp"
#include "fraccal/stencil.hpp"
#include "fraccal/toeplitz.hpp"
#include "oracles.hpp"

using namespace fraccal;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// --- criterion 1 ---------------------------------------------------------

Outcome stencil_identity() {
  double worst = 0.0;
  bool symmetric = true;
  for (double s : {0.3, 0.5, 0.7})
    for (int N : {8, 16}) {
      const auto sym = weights_2d(StencilParams{2, s, 2.0, 1.0, 3.0, N});
      worst = std::max(worst, std::abs(sym.row_sum() + 4.0 * oracle::tail_2d(1.0, s)));
      for (int n = 0; n <= N; ++n)
        for (int m = 0; m <= N; ++m) symmetric = symmetric && sym.weight(m, n) == sym.weight(n, m);
    }
  return {worst <= 1e-9 && symmetric,
          "max |row_sum + 4 T_ext| = " + fmt("%.3e", worst) + (symmetric ? ", symmetric" : ", NOT symmetric")};
}

// --- criterion 2 ---------------------------------------------------------

Outcome fft_vs_dense() {
  double worst = 0.0;
  const std::vector<std::pair<int, int>> cases{{1, 8}, {1, 16}, {1, 32}, {1, 64}, {2, 4}, {2, 8}, {2, 16}};
  for (auto [dim, N] : cases) {
    const Grid g = Grid::make(dim, 1.0, 3.0, N);
    const auto sym = stencil_symbol(StencilParams{dim, 0.4, 2.0, 1.0, 3.0, N});
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto q = oracle::random_vector(g.interior_count(), seed, -2.0, 2.0);
      const auto x = oracle::random_vector(g.interior_count(), seed + 1000);
      FastOperator op(sym, g, q);
      worst = std::max(worst, oracle::max_abs_diff(op.apply(x), oracle::matvec(oracle::dense_operator(*sym, g, q), x)));
    }
  }
  return {worst <= 1e-12, "max |fast - dense| = " + fmt("%.3e", worst)};
}

// --- criterion 3 ---------------------------------------------------------

Outcome forward_order() {
  const double s = 0.4;
  const double R = 4.0;
  auto q = [](double x) { return 1.0 + x * x; };
  std::vector<double> hs;
  std::vector<double> errs;
  std::string detail = "errors";
  for (int N : {32, 64, 128, 256}) {
    ProblemSpec spec;
    spec.s = s;
    spec.grid = Grid::make(1, 1.0, R, N);
    const Grid& g = spec.grid;
    spec.q.resize(g.interior_count());
    for (int i = 1; i < N; ++i) spec.q[i - 1] = q(g.coord(i));
    spec.f = [R](double x, double) { return std::abs(x) < R ? std::exp(-x * x) : 0.0; };
    spec.g = [=](double x, double) { return oracle::gaussian_fl_1d(s, x) + q(x) * std::exp(-x * x); };
    const auto sol = solve_forward(spec, {1e-13, 0, KrylovMethod::Auto});
    double e = 0.0;
    for (int i = 1; i < N; ++i) e = std::max(e, std::abs(sol.u.at(i) - std::exp(-g.coord(i) * g.coord(i))));
    hs.push_back(g.h());
    errs.push_back(e);
    detail += " " + fmt("%.2e", e);
  }
  const double order = oracle::observed_order(hs, errs);
  return {order >= 1.7, detail + ", observed order " + fmt("%.3f", order)};
}

// --- shared inversion setup ---------------------------------------------

struct Setup {
  std::unique_ptr<ForwardModel> model;
  Observation data;
};

Setup make_setup(PresetId id, int N, double delta, std::uint64_t seed) {
  const auto pr = make_preset(id);
  Setup st;
  st.model = std::make_unique<ForwardModel>(build_spec(pr, N, pr.eps), KrylovOptions{1e-12, 0, KrylovMethod::Auto});
  auto fine = build_spec(pr, 2 * N, pr.eps);
  fine.W2.clear();
  for (const auto& n : st.model->spec().W2) fine.W2.push_back({2 * n.i, pr.dim == 2 ? 2 * n.j : 0});
  fine.datum_w2 = st.model->datum_ptr();
  const Grid& fg = fine.grid;
  for (int j = (pr.dim == 2 ? 1 : 0); j <= (pr.dim == 2 ? fg.N() - 1 : 0); ++j)
    for (int i = 1; i < fg.N(); ++i)
      fine.q[fg.interior_index(i, j)] = pr.q_true(fg.coord(i), pr.dim == 2 ? fg.coord(j) : 0.0);
  ForwardModel fm(fine, KrylovOptions{1e-12, 0, KrylovMethod::Auto});
  const auto clean = fm.observe(fm.solve(fine.q).u.interior());
  st.data = gen_noise(st.model->spec().W2, clean, delta, seed);
  return st;
}

// --- criterion 4 ---------------------------------------------------------

Outcome gradient_fd() {
  double worst = 0.0;
  for (int dim : {1, 2}) {
    auto st = make_setup(dim == 1 ? PresetId::Ex41 : PresetId::Ex44, dim == 1 ? 64 : 32, 1e-4, 3);
    const auto& m = *st.model;
    const Grid& g = m.spec().grid;
    const auto mask = free_nodes(g, 1);
    auto q = oracle::random_vector(g.interior_count(), 9, -0.5, 0.5);
    for (std::size_t k = 0; k < q.size(); ++k)
      if (!mask[k]) q[k] = 0.0;
    const double alpha = 1e-6;
    const auto op = m.op(q);
    const auto u = m.solve(op).u.interior();
    auto r = m.observe(u);
    for (std::size_t k = 0; k < r.size(); ++k) r[k] -= st.data.values[k];
    const auto grad = gradient(m, q, u, m.adjoint(op, r), alpha);
    const double w = std::pow(g.h(), dim);
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 4; ++trial) {
      std::size_t i = rng() % q.size();
      while (!mask[i]) i = rng() % q.size();
      const double t = 1e-4;
      auto qp = q;
      auto qm = q;
      qp[i] += t;
      qm[i] -= t;
      const double fd = (tikhonov_value(m, qp, st.data, alpha) - tikhonov_value(m, qm, st.data, alpha)) / (2 * t);
      worst = std::max(worst, std::abs(w * grad[i] - fd) / std::abs(fd));
    }
  }
  return {worst <= 1e-4, "max relative error = " + fmt("%.3e", worst)};
}

// --- criterion 5 ---------------------------------------------------------

Outcome adjoint_identity() {
  double worst = 0.0;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto pr = make_preset(PresetId::Ex41);
    auto spec = build_spec(pr, 128, pr.eps);
    spec.q = oracle::random_vector(spec.grid.interior_count(), seed, 0.0, 1.0);
    ForwardModel model(spec, {1e-12, 0, KrylovMethod::Auto});
    const auto op = model.op(spec.q);
    const auto u = model.solve(op).u.interior();
    const auto dq = oracle::random_vector(spec.q.size(), seed + 10);
    const auto r = oracle::random_vector(spec.W2.size(), seed + 20);
    const auto phi = model.sensitivity(op, u, dq);
    const auto v = model.adjoint(op, r);
    const double lhs = oracle::dot(model.observe_linear(phi), r);
    double rhs = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) rhs += dq[k] * u[k] * v[k];
    worst = std::max(worst, std::abs(lhs - rhs) / std::abs(rhs));
  }
  return {worst <= 1e-3, "max relative gap = " + fmt("%.3e", worst)};
}

// --- criteria 6 and 9 ----------------------------------------------------

std::vector<RunRecord> example_41_runs() {
  std::vector<RunRecord> out;
  for (double d : {1e-7, 1e-5, 1e-3}) {
    ExperimentConfig c;
    c.example = "ex4.1";
    c.delta = d;
    c.seed = 1;
    out.push_back(run_experiment(c));
  }
  return out;
}

std::vector<RunRecord> first_runs;

Outcome example_41() {
  first_runs = example_41_runs();
  bool ok = true;
  std::string detail;
  for (const auto& r : first_runs) {
    const bool stopped = r.error.empty() && r.E_final <= 2.0 * r.delta * r.delta && r.iterations <= 200;
    ok = ok && stopped;
    detail += "delta " + fmt("%.0e", r.delta) + ": E " + fmt("%.2e", r.E_final) + (stopped ? " <= " : " > ") +
              fmt("%.2e", 2.0 * r.delta * r.delta) + " after " + std::to_string(r.iterations) + " it, Linf " +
              fmt("%.3f", r.linf_error) + "; ";
  }
  bool increasing = true;
  for (std::size_t k = 1; k < first_runs.size(); ++k)
    increasing = increasing && first_runs[k].linf_error > first_runs[k - 1].linf_error;
  detail += increasing ? "Linf increasing" : "Linf NOT increasing";
  return {ok && increasing, detail};
}

Outcome determinism() {
  if (first_runs.empty()) first_runs = example_41_runs();
  const auto again = example_41_runs();
  bool same_noise = true;
  double worst = 0.0;
  for (std::size_t k = 0; k < again.size(); ++k) {
    same_noise = same_noise && again[k].noise == first_runs[k].noise;
    worst = std::max(worst, std::abs(again[k].linf_error - first_runs[k].linf_error));
  }
  return {same_noise && worst <= 1e-14,
          std::string(same_noise ? "identical noise" : "noise differs") + ", max Linf difference " + fmt("%.3e", worst)};
}

// --- criterion 7 ---------------------------------------------------------

Outcome stability_curve() {
  ExperimentConfig c;
  c.example = "ex4.1";
  c.deltas = {1e-7, 1e-6, 1e-5, 1e-4, 1e-3};
  const auto rows = stability_sweep(c);
  std::vector<double> x;
  std::vector<double> y;
  std::string detail = "Linf";
  for (const auto& r : rows) {
    x.push_back(r.inv_log_delta);
    y.push_back(r.linf_error);
    detail += " " + fmt("%.3f", r.linf_error);
  }
  const double rho = pearson(x, y);
  return {std::isfinite(rho) && rho >= 0.9, detail + ", pearson " + fmt("%.3f", rho)};
}

// --- criterion 8 ---------------------------------------------------------

Outcome example_44() {
  ExperimentConfig c;
  c.example = "ex4.4";
  c.delta = 1e-6;
  c.alpha = 1e-13;
  const auto rec = run_experiment(c);
  const bool stopped = rec.error.empty() && rec.E_final <= 10.0 * 1e-12 && rec.iterations <= 100;
  std::string detail = "E " + fmt("%.2e", rec.E_final) + (stopped ? " <= " : " > ") + "1.00e-11 after " +
                       std::to_string(rec.iterations) + " it, Linf " + fmt("%.3f", rec.linf_error) + "; sweep Linf";

  ExperimentConfig sc;
  sc.example = "ex4.4";
  sc.deltas = {1e-6, 1e-5, 1e-4};
  const auto rows = stability_sweep(sc);
  bool monotone = rows.size() == 3;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    detail += " " + fmt("%.3f", rows[k].linf_error);
    if (k > 0) monotone = monotone && rows[k].linf_error >= rows[k - 1].linf_error;
  }
  detail += monotone ? " (monotone)" : " (NOT monotone)";
  return {stopped && monotone, detail};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "stencil row-sum identity and symmetry", 10, stencil_identity},
      {2, "FFT apply matches dense assembly", 30, fft_vs_dense},
      {3, "forward convergence order", 120, forward_order},
      {4, "gradient finite-difference check", 120, gradient_fd},
      {5, "adjoint consistency", 60, adjoint_identity},
      {6, "example 4.1 discrepancy stop and error trend", 300, example_41},
      {7, "stability curve correlation", 600, stability_curve},
      {8, "example 4.4 discrepancy stop and sweep trend", 1800, example_44},
      {9, "determinism", 600, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.limit_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("[%s] criterion %d: %s | %s | %.1f s (limit %.0f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs, c.limit_s, in_time ? "" : ", exceeded");
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
