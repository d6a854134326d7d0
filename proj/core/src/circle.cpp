#include "vacsing/circle.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace vacsing {

namespace {

// Trigonometric differentiation matrix for even n on [0, L):
//   D[j][k] = (pi/L) * (-1)^(j-k) * cot(pi (j-k)/n),  j != k.
// Exactly antisymmetric; the Nyquist mode is annihilated.
std::shared_ptr<const Eigen::MatrixXd> build_spectral_matrix(int n, double length) {
  auto d = std::make_shared<Eigen::MatrixXd>(n, n);
  d->setZero();
  const double c = M_PI / length;
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      if (j == k) continue;
      const int m = j - k;
      const double sgn = (m % 2 == 0) ? 1.0 : -1.0;
      (*d)(j, k) = c * sgn / std::tan(M_PI * m / n);
    }
  }
  return d;
}

}  // namespace

CircleGrid::CircleGrid(int n, double length, DerivScheme scheme)
    : n_(n), length_(length), scheme_(scheme) {
  if (n < 8 || n % 2 != 0)
    throw std::invalid_argument("CircleGrid: n must be even and >= 8, got " + std::to_string(n));
  if (!(length > 0.0))
    throw std::invalid_argument("CircleGrid: circumference must be positive");
  if (scheme_ == DerivScheme::Spectral) spectral_d_ = build_spectral_matrix(n_, length_);
}

std::vector<double> CircleGrid::points() const {
  std::vector<double> p(n_);
  for (int j = 0; j < n_; ++j) p[j] = point(j);
  return p;
}

void CircleGrid::derivative(const double* f, double* df) const {
  if (scheme_ == DerivScheme::Spectral) {
    Eigen::Map<const Eigen::VectorXd> in(f, n_);
    Eigen::Map<Eigen::VectorXd> out(df, n_);
    out.noalias() = (*spectral_d_) * in;
    return;
  }
  // centered 5-point 4th-order stencil; paired differences cancel exactly
  // on homogeneous data
  const double inv12h = 1.0 / (12.0 * dy());
  const int n = n_;
  for (int j = 0; j < n; ++j) {
    const int jm2 = (j - 2 + n) % n, jm1 = (j - 1 + n) % n;
    const int jp1 = (j + 1) % n, jp2 = (j + 2) % n;
    df[j] = inv12h * (8.0 * (f[jp1] - f[jm1]) - (f[jp2] - f[jm2]));
  }
}

Field CircleGrid::derivative(const Field& f) const {
  if (static_cast<int>(f.size()) != n_)
    throw std::invalid_argument("CircleGrid::derivative: field length mismatch");
  Field df(n_);
  derivative(f.data(), df.data());
  return df;
}

double CircleGrid::integrate(const Field& f) const {
  if (static_cast<int>(f.size()) != n_)
    throw std::invalid_argument("CircleGrid::integrate: field length mismatch");
  double s = 0.0;
  for (double v : f) s += v;
  return s * dy();
}

DensityField DensityField::constant(const CircleGrid& grid, double w) {
  return DensityField{Field(grid.size(), w)};
}

void DensityField::validate() const {
  for (double w : weights)
    if (!(w > 0.0)) throw std::invalid_argument("DensityField: weights must be strictly positive");
}

Field periodic_derivative(const Field& f, const CircleGrid& grid) {
  return grid.derivative(f);
}

}  // namespace vacsing
