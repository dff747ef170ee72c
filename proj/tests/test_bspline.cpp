#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "pacecurve/bspline.hpp"
#include "support/oracles.hpp"

using namespace pacecurve;

namespace {

VelocityProfile profile_from(const std::vector<double>& grid,
                             const std::vector<double>& values, int distance) {
  VelocityProfile p;
  p.distance_m = distance;
  p.grid_m = grid;
  p.v_norm = values;
  return p;
}

std::vector<double> midpoint_grid(int distance) {
  std::vector<double> grid(distance / 50);
  for (size_t i = 0; i < grid.size(); ++i) grid[i] = 50.0 * i + 25.0;
  return grid;
}

}  // namespace

TEST_CASE("make_basis places equally spaced interior knots") {
  const FunctionalBasis basis = make_basis(500, 8, 4);
  CHECK(basis.order() == 4);
  CHECK(basis.n_basis() == 8);
  const std::vector<double> interior = basis.interior_knots();
  REQUIRE(interior.size() == 4);
  CHECK(interior[0] == Catch::Approx(100.0));
  CHECK(interior[1] == Catch::Approx(200.0));
  CHECK(interior[2] == Catch::Approx(300.0));
  CHECK(interior[3] == Catch::Approx(400.0));
  CHECK(basis.knots().size() == 12);
}

TEST_CASE("make_basis rejects underdetermined least squares") {
  CHECK_THROWS_AS(make_basis(500, 12, 4), TooManyBasisFunctions);
  CHECK_NOTHROW(make_basis(1000, 12, 4));
  CHECK_THROWS_AS(make_basis(500, 3, 4), Error);  // n_basis < order
}

TEST_CASE("partition of unity and agreement with the naive recursion") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> unif(0.0, 500.0);
  for (const auto& [n_basis, order] : {std::pair{8, 4}, {6, 3}, {10, 5}}) {
    const FunctionalBasis basis = make_basis(500, n_basis, order);
    for (int trial = 0; trial < 100; ++trial) {
      const double x = (trial == 0) ? 0.0 : (trial == 1) ? 500.0 : unif(rng);
      const Eigen::VectorXd values = basis.eval_all(x);
      CHECK(std::abs(values.sum() - 1.0) < 1e-12);
      const std::vector<double> naive =
          oracles::bspline_all(basis.knots(), n_basis, order, x);
      for (int k = 0; k < n_basis; ++k)
        CHECK(values[k] == Catch::Approx(naive[k]).margin(1e-13));
    }
  }
}

TEST_CASE("smoothing a constant profile reproduces the constant") {
  const FunctionalBasis basis = make_basis(500, 8, 4);
  const SmoothedProfile s = smooth_profile(
      profile_from(midpoint_grid(500), std::vector<double>(10, 1.0), 500), basis);
  CHECK(s.rss < 1e-20);
  for (double x : {0.0, 123.4, 250.0, 499.9, 500.0})
    CHECK(eval_smoothed(s, x) == Catch::Approx(1.0).margin(1e-10));
}

TEST_CASE("order-4 basis reproduces cubic polynomials exactly") {
  const FunctionalBasis basis = make_basis(500, 8, 4);
  const auto cubic = [](double x) {
    return 1.2 + 3e-3 * x - 7e-6 * x * x + 5e-9 * x * x * x;
  };
  const std::vector<double> grid = midpoint_grid(500);
  std::vector<double> values(grid.size());
  for (size_t i = 0; i < grid.size(); ++i) values[i] = cubic(grid[i]);
  const SmoothedProfile s = smooth_profile(profile_from(grid, values, 500), basis);
  CHECK(s.rss < 1e-10);
  for (double x : {0.0, 47.0, 333.0, 500.0})
    CHECK(eval_smoothed(s, x) == Catch::Approx(cubic(x)).margin(1e-9));
}

TEST_CASE("noisy fit matches the dense normal-equations oracle") {
  const FunctionalBasis basis = make_basis(500, 8, 4);
  const std::vector<double> grid = midpoint_grid(500);
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> noise(0.0, 0.05);
  std::vector<double> values(grid.size());
  for (size_t i = 0; i < grid.size(); ++i)
    values[i] = 1.0 + 0.1 * std::sin(grid[i] / 80.0) + noise(rng);

  const SmoothedProfile s = smooth_profile(profile_from(grid, values, 500), basis);

  std::vector<std::vector<double>> A(grid.size(),
                                     std::vector<double>(basis.n_basis()));
  for (size_t i = 0; i < grid.size(); ++i) {
    const std::vector<double> row =
        oracles::bspline_all(basis.knots(), basis.n_basis(), basis.order(), grid[i]);
    A[i] = row;
  }
  const std::vector<double> oracle_coeffs =
      oracles::solve_normal_equations(A, values);
  const double oracle_rss =
      oracles::residual_sum_of_squares(A, values, oracle_coeffs);
  CHECK(s.rss == Catch::Approx(oracle_rss).margin(1e-8));
  for (int k = 0; k < basis.n_basis(); ++k)
    CHECK(s.coeffs[k] == Catch::Approx(oracle_coeffs[k]).margin(1e-7));
}

TEST_CASE("interpolating fit reproduces the data") {
  const FunctionalBasis basis = make_basis(500, 10, 4);
  const std::vector<double> grid = midpoint_grid(500);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(0.9, 1.1);
  std::vector<double> values(grid.size());
  for (double& v : values) v = unif(rng);
  const SmoothedProfile s = smooth_profile(profile_from(grid, values, 500), basis);
  for (size_t i = 0; i < grid.size(); ++i)
    CHECK(eval_smoothed(s, grid[i]) == Catch::Approx(values[i]).margin(1e-9));
}

TEST_CASE("eval_smoothed rejects out-of-domain points") {
  const FunctionalBasis basis = make_basis(500, 8, 4);
  const SmoothedProfile s = smooth_profile(
      profile_from(midpoint_grid(500), std::vector<double>(10, 1.0), 500), basis);
  CHECK_THROWS_AS(eval_smoothed(s, -0.001), OutOfDomain);
  CHECK_THROWS_AS(eval_smoothed(s, 500.001), OutOfDomain);
  CHECK(std::isfinite(eval_smoothed(s, 0.0)));
  CHECK(std::isfinite(eval_smoothed(s, 500.0)));
}

TEST_CASE("collinear design raises SingularDesign") {
  const FunctionalBasis basis = make_basis(500, 8, 4);
  // all observations at one point: rank-1 design
  const std::vector<double> grid(10, 250.0);
  CHECK_THROWS_AS(
      smooth_profile(profile_from(grid, std::vector<double>(10, 1.0), 500), basis),
      SingularDesign);
}

TEST_CASE("quadrature weights sum to the domain length") {
  for (const auto& [distance, n_basis] : {std::pair{500, 8}, {1000, 12}}) {
    const FunctionalBasis basis = make_basis(distance, n_basis, 4);
    const QuadratureRule rule = quadrature_for(basis);
    double total = 0.0;
    for (double w : rule.weights) {
      CHECK(w > 0.0);
      total += w;
    }
    CHECK(std::abs(total - basis.domain()) < 1e-10);
  }
}

TEST_CASE("inner products: constants, symmetry, closed-form x*x") {
  const FunctionalBasis basis = make_basis(500, 8, 4);
  const QuadratureRule rule = quadrature_for(basis);
  const auto one = [](double) { return 1.0; };
  CHECK(inner_product(one, one, rule) == Catch::Approx(500.0).margin(1e-10));

  const auto b2 = [&](double x) { return basis.eval_basis(2, x); };
  const auto b5 = [&](double x) { return basis.eval_basis(5, x); };
  CHECK(inner_product(b2, b5, rule) == inner_product(b5, b2, rule));

  const auto ident = [](double x) { return x; };
  const double exact = 500.0 * 500.0 * 500.0 / 3.0;
  CHECK(inner_product(ident, ident, rule) ==
        Catch::Approx(exact).epsilon(1e-10));
}

TEST_CASE("composite rule is exact for high-degree piecewise polynomials") {
  const FunctionalBasis basis = make_basis(500, 8, 4);
  const QuadratureRule rule = quadrature_for(basis);
  // x^9 is the highest degree a 5-point Gauss rule integrates exactly.
  const auto f = [](double x) { return std::pow(x / 500.0, 9); };
  const double exact = 500.0 / 10.0;
  CHECK(inner_product(f, [](double) { return 1.0; }, rule) ==
        Catch::Approx(exact).epsilon(1e-12));
}

TEST_CASE("smoothing is linear in the data") {
  const FunctionalBasis basis = make_basis(500, 8, 4);
  const std::vector<double> grid = midpoint_grid(500);
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> unif(0.8, 1.2);
  std::vector<double> pa(grid.size()), pb(grid.size()), combo(grid.size());
  const double a = 1.7, b = -0.4;
  for (size_t i = 0; i < grid.size(); ++i) {
    pa[i] = unif(rng);
    pb[i] = unif(rng);
    combo[i] = a * pa[i] + b * pb[i];
  }
  const Eigen::VectorXd ca = smooth_profile(profile_from(grid, pa, 500), basis).coeffs;
  const Eigen::VectorXd cb = smooth_profile(profile_from(grid, pb, 500), basis).coeffs;
  const Eigen::VectorXd cc =
      smooth_profile(profile_from(grid, combo, 500), basis).coeffs;
  CHECK((cc - (a * ca + b * cb)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("residual is non-increasing for nested bases") {
  // Interior knots at multiples of 200 are a subset of multiples of 100,
  // so the two spline spaces are nested.
  const FunctionalBasis coarse = make_basis(1000, 8, 4);
  const FunctionalBasis fine = make_basis(1000, 13, 4);
  const std::vector<double> grid = midpoint_grid(1000);
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unif(0.85, 1.15);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> values(grid.size());
    for (double& v : values) v = unif(rng);
    const VelocityProfile p = profile_from(grid, values, 1000);
    const double rss_coarse = smooth_profile(p, coarse).rss;
    const double rss_fine = smooth_profile(p, fine).rss;
    CHECK(rss_fine <= rss_coarse + 1e-12);
  }
}

TEST_CASE("Gram matrix is symmetric positive definite") {
  for (const auto& [distance, n_basis] : {std::pair{500, 8}, {1000, 12}}) {
    const FunctionalBasis basis = make_basis(distance, n_basis, 4);
    const Eigen::MatrixXd G = gram_matrix(basis);
    CHECK((G - G.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    CHECK(es.eigenvalues().minCoeff() > 1e-10);
  }
}

TEST_CASE("quadrature_on splits at interior knots and endpoints") {
  const FunctionalBasis basis = make_basis(500, 8, 4);
  const QuadratureRule half = quadrature_on(basis, 0.0, 250.0);
  double total = 0.0;
  for (double w : half.weights) total += w;
  CHECK(total == Catch::Approx(250.0).margin(1e-10));
  // piecewise-cubic integrand stays exact across the split
  const auto b3 = [&](double x) { return basis.eval_basis(3, x); };
  const QuadratureRule other = quadrature_on(basis, 250.0, 500.0);
  const QuadratureRule full = quadrature_for(basis);
  const auto one = [](double) { return 1.0; };
  CHECK(inner_product(b3, one, half) + inner_product(b3, one, other) ==
        Catch::Approx(inner_product(b3, one, full)).margin(1e-12));
}
