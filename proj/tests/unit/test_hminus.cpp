#include <Eigen/Dense>
#include <cmath>
#include <doctest.h>

#include "vacsing/hminus.hpp"
#include "vacsing/rng.hpp"

using namespace vacsing;

namespace {

Field harmonic(const CircleGrid& grid, int k, double phase = 0.0) {
  Field f(grid.size());
  for (int j = 0; j < grid.size(); ++j)
    f[j] = std::cos(2.0 * M_PI * k * grid.point(j) / grid.length() + phase);
  return f;
}

Field random_band(const CircleGrid& grid, std::uint64_t seed, int band) {
  CounterRng rng(seed);
  Field f(grid.size(), 0.0);
  for (int k = 1; k <= band; ++k) {
    const double a = rng.uniform(2 * k, -1, 1), b = rng.uniform(2 * k + 1, -1, 1);
    for (int j = 0; j < grid.size(); ++j) {
      const double w = 2.0 * M_PI * k * grid.point(j) / grid.length();
      f[j] += a * std::cos(w) + b * std::sin(w);
    }
  }
  return f;
}

SpdField identity_field(const CircleGrid& grid, int dim) {
  SpdField g{MatrixField(grid.size(), dim)};
  for (int j = 0; j < grid.size(); ++j) g.g.at(j) = Matrix::Identity(dim, dim);
  return g;
}

SpdField wavy_spd_field(const CircleGrid& grid, int dim, double amp) {
  SpdField g{MatrixField(grid.size(), dim)};
  for (int j = 0; j < grid.size(); ++j) {
    const double y = grid.point(j);
    Matrix s(dim, dim);
    for (int a = 0; a < dim; ++a)
      for (int b = a; b < dim; ++b)
        s(a, b) = s(b, a) = amp * std::cos((a + b + 1) * 2.0 * M_PI * y / grid.length() + a);
    g.g.at(j) = expm_symmetric(s);
  }
  return g;
}

}  // namespace

TEST_CASE("scalar norm: Fourier oracle sqrt(pi/(1+k^2)) for k = 1..8") {
  CircleGrid grid(64, 2.0 * M_PI, DerivScheme::Spectral);
  Field a(grid.size(), 1.0);
  for (int k = 1; k <= 8; ++k) {
    const double norm = hminus_norm_scalar(harmonic(grid, k), a, grid).value;
    CHECK(norm == doctest::Approx(std::sqrt(M_PI / (1.0 + k * k))).epsilon(1e-10));
  }
}

TEST_CASE("scalar norm: constants live in the gradient kernel") {
  CircleGrid grid(64, 2.0 * M_PI, DerivScheme::Spectral);
  Field a(grid.size(), 1.0), sigma(grid.size(), -0.37);
  // |c| sqrt(2 pi), the L2(dtheta) norm of the constant
  CHECK(hminus_norm_scalar(sigma, a, grid).value ==
        doctest::Approx(0.37 * std::sqrt(2.0 * M_PI)).epsilon(1e-12));
  Field zero(grid.size(), 0.0);
  CHECK(hminus_norm_scalar(zero, a, grid).value == 0.0);
}

TEST_CASE("scalar norm: dense generalized-form oracle with a = 2") {
  for (int n : {64, 128}) {
    CircleGrid grid(n, 2.0 * M_PI, DerivScheme::Spectral);
    Field a(grid.size(), 2.0);
    Field sigma = harmonic(grid, 1);

    // dense assembly of the same mass and stiffness quadratic forms
    const double dy = grid.dy();
    Eigen::MatrixXd d(n, n);
    Field unit(n, 0.0), col(n);
    for (int j = 0; j < n; ++j) {
      unit.assign(n, 0.0);
      unit[j] = 1.0;
      col = grid.derivative(unit);
      for (int i = 0; i < n; ++i) d(i, j) = col[i];
    }
    Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(n, n), stiff(n, n);
    for (int j = 0; j < n; ++j) mass(j, j) = dy / a[j];
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
    for (int j = 0; j < n; ++j) q(j, j) = dy * a[j];
    stiff = d.transpose() * q * d;
    Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(sigma.data(), n);
    Eigen::VectorXd mv = mass * v;
    Eigen::VectorXd x = (mass + stiff).ldlt().solve(mv);
    const double dense = std::sqrt(mv.dot(x));

    CHECK(hminus_norm_scalar(sigma, a, grid).value == doctest::Approx(dense).epsilon(1e-10));
  }
}

TEST_CASE("matrix norm: eta = c Id reduces to the L2(mu) norm") {
  CircleGrid grid(48, 2.0 * M_PI, DerivScheme::Spectral);
  const int dim = 3;
  SpdField g = wavy_spd_field(grid, dim, 0.5);
  DensityField mu{random_band(grid, 7, 2)};
  for (double& w : mu.weights) w = 1.5 + 0.5 * std::tanh(w);

  const double c = -0.8;
  MatrixField svals(grid.size(), dim);
  for (int j = 0; j < grid.size(); ++j) svals.at(j) = c * g.g.at(j);  // sigma = c Id
  SelfAdjointSection eta{std::move(svals)};

  const double mass = mu.total_mass(grid);
  const double expect = std::abs(c) * std::sqrt(dim * mass);
  HminusResult res = hminus_norm_matrix(eta, g, mu, grid);
  CHECK(res.value == doctest::Approx(expect).epsilon(1e-10));
  // equality with the L2 norm since D_y eta = 0
  CHECK(res.value ==
        doctest::Approx(l2_norm_matrix(eta, g, mu, grid)).epsilon(1e-10));
  // the kernel projection sees the whole of eta
  CHECK(res.kernel_component == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("matrix and scalar norms agree at N = 1") {
  CircleGrid grid(64, 2.0 * M_PI, DerivScheme::Spectral);
  Field a(grid.size(), 1.0);
  Field sigma = random_band(grid, 17, 5);

  SpdField g = identity_field(grid, 1);
  DensityField mu = DensityField::constant(grid, 1.0);
  MatrixField svals(grid.size(), 1);
  for (int j = 0; j < grid.size(); ++j) svals.at(j)(0, 0) = sigma[j];
  SelfAdjointSection eta{std::move(svals)};

  const double matrix_norm = hminus_norm_matrix(eta, g, mu, grid).value;
  const double scalar_norm = hminus_norm_scalar(sigma, a, grid).value;
  CHECK(matrix_norm == doctest::Approx(scalar_norm).epsilon(1e-12));
}

TEST_CASE("norm properties: homogeneity, triangle, L2 bound") {
  CircleGrid grid(48, 2.0 * M_PI, DerivScheme::Spectral);
  const int dim = 2;
  SpdField g = wavy_spd_field(grid, dim, 0.4);
  DensityField mu = DensityField::constant(grid, 2.0);

  auto section_from_seed = [&](std::uint64_t seed) {
    MatrixField svals(grid.size(), dim);
    Field f1 = random_band(grid, seed, 4), f2 = random_band(grid, seed + 1, 4),
          f3 = random_band(grid, seed + 2, 4);
    for (int j = 0; j < grid.size(); ++j) {
      svals.at(j)(0, 0) = f1[j];
      svals.at(j)(1, 1) = f2[j];
      svals.at(j)(0, 1) = svals.at(j)(1, 0) = f3[j];
    }
    return SelfAdjointSection{std::move(svals)};
  };

  for (std::uint64_t seed : {100u, 200u, 300u}) {
    SelfAdjointSection x = section_from_seed(seed), y = section_from_seed(seed + 50);
    const double nx = hminus_norm_matrix(x, g, mu, grid).value;
    const double ny = hminus_norm_matrix(y, g, mu, grid).value;

    // homogeneity
    SelfAdjointSection cx = x;
    for (double& v : cx.s.raw()) v *= -2.5;
    CHECK(hminus_norm_matrix(cx, g, mu, grid).value == doctest::Approx(2.5 * nx).epsilon(1e-10));

    // triangle inequality
    SelfAdjointSection sum = x;
    for (size_t i = 0; i < sum.s.raw().size(); ++i) sum.s.raw()[i] += y.s.raw()[i];
    CHECK(hminus_norm_matrix(sum, g, mu, grid).value <= nx + ny + 1e-10);

    // dual norm is dominated by the L2(mu) norm
    CHECK(nx <= l2_norm_matrix(x, g, mu, grid) + 1e-12);
  }
}

TEST_CASE("grid refinement consistency for band-limited input") {
  auto value_at = [&](int n) {
    CircleGrid grid(n, 2.0 * M_PI, DerivScheme::Spectral);
    Field a(grid.size());
    for (int j = 0; j < n; ++j) a[j] = 2.0 + 0.3 * std::cos(grid.point(j));
    Field sigma(grid.size());
    for (int j = 0; j < n; ++j)
      sigma[j] = std::cos(grid.point(j)) - 0.4 * std::sin(3.0 * grid.point(j));
    return hminus_norm_scalar(sigma, a, grid).value;
  };
  CHECK(std::abs(value_at(64) - value_at(128)) < 1e-6);
}

TEST_CASE("invalid inputs are rejected") {
  CircleGrid grid(16, 2.0 * M_PI, DerivScheme::FD4);
  Field a(grid.size(), 1.0), sigma(grid.size(), 1.0);
  a[3] = 0.0;
  CHECK_THROWS(hminus_norm_scalar(sigma, a, grid));
  Field short_sigma(8, 1.0);
  Field good_a(grid.size(), 1.0);
  CHECK_THROWS(hminus_norm_scalar(short_sigma, good_a, grid));
}
