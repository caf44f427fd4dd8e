#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fraccal/toeplitz.hpp"
#include "oracles.hpp"

using namespace fraccal;

namespace {

struct Case {
  Grid grid;
  std::shared_ptr<const StencilSymbol> sym;
};

Case make_case(int dim, int N, double s = 0.4) {
  return {Grid::make(dim, 1.0, 3.0, N), stencil_symbol(StencilParams{dim, s, 2.0, 1.0, 3.0, N})};
}

}  // namespace

TEST_SUITE("toeplitz") {
  TEST_CASE("fast apply equals dense assembly") {
    for (auto [dim, N] : {std::pair{1, 8}, std::pair{1, 30}, std::pair{2, 6}, std::pair{2, 10}}) {
      const auto c = make_case(dim, N);
      for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto q = oracle::random_vector(c.grid.interior_count(), seed, -2.0, 2.0);
        const auto x = oracle::random_vector(c.grid.interior_count(), seed + 100);
        FastOperator op(c.sym, c.grid, q);
        const auto A = oracle::dense_operator(*c.sym, c.grid, q);
        CHECK(oracle::max_abs_diff(op.apply(x), oracle::matvec(A, x)) <= 1e-12);
        for (std::size_t k = 0; k < q.size(); ++k) CHECK(op.diagonal(k) == doctest::Approx(A[k][k]));
      }
    }
  }

  TEST_CASE("operator is symmetric") {
    const auto c = make_case(2, 8);
    const auto q = oracle::random_vector(c.grid.interior_count(), 5);
    FastOperator op(c.sym, c.grid, q);
    const auto x = oracle::random_vector(q.size(), 6);
    const auto y = oracle::random_vector(q.size(), 7);
    CHECK(oracle::dot(op.apply(x), y) == doctest::Approx(oracle::dot(x, op.apply(y))).epsilon(1e-13));
  }

  TEST_CASE("grid mismatch is rejected") {
    const auto c = make_case(1, 8);
    CHECK_THROWS_AS(build_fast_operator(c.sym, c.grid, std::vector<double>(3)), std::invalid_argument);
    CHECK_THROWS_AS(build_fast_operator(c.sym, Grid::make(1, 1.0, 3.0, 10), std::vector<double>(9)),
                    std::invalid_argument);
  }

  TEST_CASE("CG solves the positive definite system") {
    const auto c = make_case(1, 64);
    const auto q = oracle::random_vector(c.grid.interior_count(), 9, 0.0, 3.0);
    FastOperator op(c.sym, c.grid, q);
    const auto b = oracle::random_vector(q.size(), 10);
    std::vector<double> x(q.size(), 0.0);
    const auto rep = krylov_solve(op, b, x, {1e-12, 0, KrylovMethod::Auto});
    CHECK(rep.converged);
    CHECK(rep.method == KrylovMethod::CG);
    const auto ref = oracle::dense_solve(oracle::dense_operator(*c.sym, c.grid, q), b);
    CHECK(oracle::max_abs_diff(x, ref) <= 1e-9 * std::max(1.0, *std::max_element(ref.begin(), ref.end())));
    CHECK(rep.final_residual <= 1e-12 * rep.rhs_norm);
    // energy of the CG iterates never increases
    for (std::size_t k = 1; k < rep.energy.size(); ++k) CHECK(rep.energy[k] <= rep.energy[k - 1] + 1e-14);
    // the final energy equals 1/2 x'Ax - b'x
    const auto Ax = op.apply(x);
    CHECK(rep.energy.back() == doctest::Approx(0.5 * oracle::dot(x, Ax) - oracle::dot(b, x)).epsilon(1e-8));
  }

  TEST_CASE("indefinite potential switches to BiCGStab") {
    const auto c = make_case(1, 32);
    // a strongly negative potential makes the operator indefinite
    std::vector<double> q(c.grid.interior_count(), 0.0);
    const auto A0 = oracle::dense_operator(*c.sym, c.grid, q);
    const auto ev0 = oracle::symmetric_eigenvalues(A0);
    const double lmin = *std::min_element(ev0.begin(), ev0.end());
    const double lmax = *std::max_element(ev0.begin(), ev0.end());
    for (auto& v : q) v = -0.5 * (lmin + std::min(lmax, 4.0 * lmin)) - 0.123;
    FastOperator op(c.sym, c.grid, q);
    const auto A = oracle::dense_operator(*c.sym, c.grid, q);
    const auto ev = oracle::symmetric_eigenvalues(A);
    REQUIRE(*std::min_element(ev.begin(), ev.end()) < 0.0);
    REQUIRE(*std::max_element(ev.begin(), ev.end()) > 0.0);
    const auto b = oracle::random_vector(q.size(), 2);
    std::vector<double> x(q.size(), 0.0);
    const auto rep = krylov_solve(op, b, x, {1e-11, 0, KrylovMethod::Auto});
    CHECK(rep.method == KrylovMethod::BiCGStab);
    CHECK(rep.converged);
    CHECK(oracle::max_abs_diff(op.apply(x), b) <= 1e-9 * rep.rhs_norm);
    CHECK(rep.ritz_min < 0.0);
  }

  TEST_CASE("Lanczos Ritz value bounds the spectrum from above") {
    const auto c = make_case(1, 40);
    const auto q = oracle::random_vector(c.grid.interior_count(), 21, -1.0, 1.0);
    FastOperator op(c.sym, c.grid, q);
    const auto ev = oracle::symmetric_eigenvalues(oracle::dense_operator(*c.sym, c.grid, q));
    const double lmin = *std::min_element(ev.begin(), ev.end());
    const auto start = oracle::random_vector(q.size(), 22);
    const double ritz = lanczos_min_ritz(op, start, 20);
    CHECK(ritz >= lmin - 1e-9 * std::abs(lmin));
    // with the full Krylov space the Ritz value is the eigenvalue
    CHECK(lanczos_min_ritz(op, start, static_cast<int>(q.size())) == doctest::Approx(lmin).epsilon(1e-6));
  }

  TEST_CASE("zero right-hand side and non-convergence reporting") {
    const auto c = make_case(2, 8);
    FastOperator op(c.sym, c.grid, std::vector<double>(c.grid.interior_count(), 1.0));
    std::vector<double> x(op.size(), 5.0);
    const auto rep = krylov_solve(op, std::vector<double>(op.size(), 0.0), x);
    CHECK(rep.converged);
    CHECK(rep.iterations == 0);
    for (double v : x) CHECK(v == 0.0);

    const auto b = oracle::random_vector(op.size(), 4);
    std::vector<double> y(op.size(), 0.0);
    const auto bad = krylov_solve(op, b, y, {1e-14, 1, KrylovMethod::CG});
    CHECK_FALSE(bad.converged);
    CHECK_THROWS_AS(require_converged(bad, "test"), SolverError);
    CHECK_NOTHROW(require_converged(rep, "test"));
  }

  TEST_CASE("initial guess is used") {
    const auto c = make_case(1, 64);
    FastOperator op(c.sym, c.grid, std::vector<double>(c.grid.interior_count(), 1.0));
    const auto b = oracle::random_vector(op.size(), 8);
    std::vector<double> x(op.size(), 0.0);
    const auto cold = krylov_solve(op, b, x);
    std::vector<double> warm = x;
    const auto again = krylov_solve(op, b, warm);
    CHECK(again.iterations < cold.iterations);
    CHECK(to_string(KrylovMethod::CG) == "cg");
    CHECK(to_string(KrylovMethod::BiCGStab) == "bicgstab");
  }

  TEST_CASE("property: apply is linear on random 2D instances") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      std::mt19937_64 rng(seed);
      const int N = 4 + 2 * static_cast<int>(rng() % 6);
      const auto c = make_case(2, N, 0.3 + 0.1 * static_cast<double>(rng() % 5));
      const auto q = oracle::random_vector(c.grid.interior_count(), seed);
      FastOperator op(c.sym, c.grid, q);
      const auto x = oracle::random_vector(q.size(), seed + 1);
      const auto y = oracle::random_vector(q.size(), seed + 2);
      std::vector<double> z(q.size());
      for (std::size_t k = 0; k < z.size(); ++k) z[k] = 2.0 * x[k] - 3.0 * y[k];
      const auto Ax = op.apply(x);
      const auto Ay = op.apply(y);
      const auto Az = op.apply(z);
      for (std::size_t k = 0; k < z.size(); ++k) CHECK(Az[k] == doctest::Approx(2.0 * Ax[k] - 3.0 * Ay[k]).epsilon(1e-11));
    }
  }
}
