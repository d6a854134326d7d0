#include "vacsing/spd.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unsupported/Eigen/MatrixFunctions>

namespace vacsing {

Matrix expm(const Matrix& a) { return a.exp(); }

Matrix expm_symmetric(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  return es.eigenvectors() * es.eigenvalues().array().exp().matrix().asDiagonal() *
         es.eigenvectors().transpose();
}

double self_adjoint_violation(const Matrix& sigma, const Matrix& g) {
  Matrix resid = sigma.transpose() - g * sigma * g.inverse();
  return resid.norm() / (1.0 + sigma.norm());
}

void SpdMatrix::validate() const {
  if (m.rows() != m.cols() || m.rows() < 1)
    throw std::invalid_argument("SpdMatrix: not square");
  const double scale = m.norm();
  if ((m - m.transpose()).norm() > 1e-13 * (1.0 + scale))
    throw std::invalid_argument("SpdMatrix: not symmetric within 1e-13 relative");
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues().minCoeff() > 0.0))
    throw std::invalid_argument("SpdMatrix: eigenvalues not strictly positive");
}

Matrix enforce_spd(const Matrix& a, const std::string& context) {
  Matrix s = sym_part(a);
  Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
  const double min_eig = es.eigenvalues().minCoeff();
  const double tr = s.trace();
  if (!(min_eig >= 1e-12 * tr) || !(tr > 0.0)) {
    std::ostringstream msg;
    msg << "positivity lost (" << context << "): min eigenvalue " << min_eig << ", trace " << tr;
    throw std::runtime_error(msg.str());
  }
  return s;
}

Matrix vtd_geodesic(const SpdMatrix& g0, const Matrix& w, double s) {
  if (w.rows() != g0.m.rows() || w.cols() != g0.m.cols())
    throw std::invalid_argument("vtd_geodesic: dimension mismatch");
  const double violation = self_adjoint_violation(w, g0.m);
  if (violation > 1e-10) {
    std::ostringstream msg;
    msg << "vtd_geodesic: W is not self-adjoint w.r.t. G0 (violation norm " << violation << ")";
    throw std::invalid_argument(msg.str());
  }
  return enforce_spd(g0.m * expm(s * w), "vtd_geodesic");
}

MatrixField MatrixField::derivative(const CircleGrid& grid) const {
  if (grid.size() != npts_)
    throw std::invalid_argument("MatrixField::derivative: grid size mismatch");
  MatrixField out(npts_, dim_);
  const int comps = dim_ * dim_;
  std::vector<double> col(npts_), dcol(npts_);
  for (int c = 0; c < comps; ++c) {
    for (int j = 0; j < npts_; ++j) col[j] = data_[j * comps + c];
    grid.derivative(col.data(), dcol.data());
    for (int j = 0; j < npts_; ++j) out.raw()[j * comps + c] = dcol[j];
  }
  return out;
}

double MatrixField::max_frobenius() const {
  double m = 0.0;
  for (int j = 0; j < npts_; ++j) m = std::max(m, at(j).norm());
  return m;
}

void SpdField::validate() const {
  for (int j = 0; j < g.points(); ++j) {
    SpdMatrix check{};
    check.m = g.at(j);
    try {
      check.validate();
    } catch (const std::exception& e) {
      throw std::invalid_argument("SpdField: point " + std::to_string(j) + ": " + e.what());
    }
  }
}

MatrixField SpdField::log_derivative(const CircleGrid& grid) const {
  MatrixField gy = g.derivative(grid);
  MatrixField b(g.points(), g.dim());
  for (int j = 0; j < g.points(); ++j)
    b.at(j) = g.at(j).partialPivLu().solve(Matrix(gy.at(j)));
  return b;
}

MatrixField SelfAdjointSection::to_sigma(const SpdField& g) const {
  if (g.points() != points() || g.dim() != dim())
    throw std::invalid_argument("SelfAdjointSection::to_sigma: shape mismatch");
  MatrixField sigma(points(), dim());
  for (int j = 0; j < points(); ++j)
    sigma.at(j) = g.g.at(j).partialPivLu().solve(Matrix(s.at(j)));
  return sigma;
}

SelfAdjointSection SelfAdjointSection::from_symmetric(MatrixField s_vals) {
  for (int j = 0; j < s_vals.points(); ++j) s_vals.at(j) = sym_part(s_vals.at(j));
  return SelfAdjointSection{std::move(s_vals)};
}

SelfAdjointSection SelfAdjointSection::from_sigma(const MatrixField& sigma, const SpdField& g) {
  if (g.points() != sigma.points() || g.dim() != sigma.dim())
    throw std::invalid_argument("SelfAdjointSection::from_sigma: shape mismatch");
  MatrixField s_vals(sigma.points(), sigma.dim());
  for (int j = 0; j < sigma.points(); ++j) s_vals.at(j) = sym_part(Matrix(g.g.at(j) * sigma.at(j)));
  return SelfAdjointSection{std::move(s_vals)};
}

double self_adjoint_defect(const MatrixField& sigma, const SpdField& g) {
  if (g.points() != sigma.points() || g.dim() != sigma.dim())
    throw std::invalid_argument("self_adjoint_defect: shape mismatch");
  double worst = 0.0;
  for (int j = 0; j < sigma.points(); ++j)
    worst = std::max(worst, self_adjoint_violation(sigma.at(j), g.g.at(j)));
  return worst;
}

SelfAdjointSection covariant_dy(const SelfAdjointSection& sigma, const SpdField& g,
                                const CircleGrid& grid) {
  if (g.points() != sigma.points() || g.dim() != sigma.dim())
    throw std::invalid_argument("covariant_dy: shape mismatch");
  MatrixField b = g.log_derivative(grid);
  MatrixField sy = sigma.s.derivative(grid);
  MatrixField out(sigma.points(), sigma.dim());
  for (int j = 0; j < sigma.points(); ++j) {
    Matrix bs = b.at(j).transpose() * sigma.s.at(j);
    out.at(j) = sy.at(j) - 0.5 * (bs + bs.transpose());
  }
  return SelfAdjointSection{std::move(out)};
}

}  // namespace vacsing
