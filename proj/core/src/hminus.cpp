#include "vacsing/hminus.hpp"

#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace vacsing {

namespace {

constexpr double kCgRelResidual = 1e-12;

// Row sum of squares of the derivative operator, used to estimate the
// stiffness diagonal for the Jacobi preconditioner.
double derivative_row_norm2(const CircleGrid& grid) {
  if (grid.scheme() == DerivScheme::FD4) {
    const double c = 1.0 / (12.0 * grid.dy());
    return c * c * (1.0 + 64.0 + 64.0 + 1.0);
  }
  const int n = grid.size();
  const double c = M_PI / grid.length();
  double s = 0.0;
  for (int m = 1; m < n; ++m) {
    const double d = c / std::tan(M_PI * m / n);
    s += d * d;
  }
  return s;
}

// Preconditioned conjugate gradients on a caller-supplied SPD operator over
// flat double vectors.
struct CgOutcome {
  int iterations;
  double residual;
};

CgOutcome conjugate_gradients(const std::function<void(const std::vector<double>&, std::vector<double>&)>& apply,
                              const std::vector<double>& diag, const std::vector<double>& rhs,
                              std::vector<double>& x) {
  const size_t n = rhs.size();
  x.assign(n, 0.0);
  std::vector<double> r = rhs, z(n), p(n), ap(n);
  double rhs_norm = 0.0;
  for (double v : rhs) rhs_norm += v * v;
  rhs_norm = std::sqrt(rhs_norm);
  if (rhs_norm == 0.0) return {0, 0.0};

  for (size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
  p = z;
  double rz = 0.0;
  for (size_t i = 0; i < n; ++i) rz += r[i] * z[i];

  const int max_iter = static_cast<int>(20 * n) + 100;
  double res = rhs_norm;
  for (int it = 1; it <= max_iter; ++it) {
    apply(p, ap);
    double pap = 0.0;
    for (size_t i = 0; i < n; ++i) pap += p[i] * ap[i];
    const double alpha = rz / pap;
    res = 0.0;
    for (size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
      res += r[i] * r[i];
    }
    res = std::sqrt(res);
    if (res <= kCgRelResidual * rhs_norm) return {it, res / rhs_norm};
    double rz_new = 0.0;
    for (size_t i = 0; i < n; ++i) {
      z[i] = r[i] / diag[i];
      rz_new += r[i] * z[i];
    }
    const double beta = rz_new / rz;
    rz = rz_new;
    for (size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  std::ostringstream msg;
  msg << "hminus norm: conjugate gradients did not converge (relative residual "
      << res / rhs_norm << ")";
  throw std::runtime_error(msg.str());
}

}  // namespace

HminusResult hminus_norm_matrix(const SelfAdjointSection& eta, const SpdField& g,
                                const DensityField& mu, const CircleGrid& grid) {
  const int npts = grid.size();
  const int dim = g.dim();
  if (eta.points() != npts || g.points() != npts || eta.dim() != dim ||
      static_cast<int>(mu.weights.size()) != npts)
    throw std::invalid_argument("hminus_norm_matrix: shape mismatch");
  mu.validate();

  const double dy = grid.dy();
  const int comps = dim * dim;
  const size_t nd = static_cast<size_t>(npts) * comps;

  MatrixField b = g.log_derivative(grid);
  std::vector<Matrix> ginv(npts);
  for (int j = 0; j < npts; ++j) ginv[j] = sym_part(g.g.at(j).inverse());

  auto apply_mass = [&](const MatrixField& in, MatrixField& out) {
    for (int j = 0; j < npts; ++j)
      out.at(j) = (mu.weights[j] * dy) * (ginv[j] * in.at(j) * ginv[j]);
  };

  // D_y in the S-parametrization, its adjoint, and the middle weight
  auto apply_dy = [&](const MatrixField& in, MatrixField& out) {
    out = in.derivative(grid);
    for (int j = 0; j < npts; ++j) {
      Matrix bs = b.at(j).transpose() * in.at(j);
      out.at(j) -= 0.5 * (bs + Matrix(bs.transpose()));
    }
  };
  auto apply_dy_adjoint = [&](const MatrixField& in, MatrixField& out) {
    out = in.derivative(grid);
    for (int j = 0; j < npts; ++j) {
      Matrix bu = b.at(j) * in.at(j);
      out.at(j) = -out.at(j) - 0.5 * (bu + Matrix(bu.transpose()));
    }
  };

  MatrixField scratch_t(npts, dim), scratch_q(npts, dim), scratch_m(npts, dim),
      scratch_s(npts, dim);

  // The operator is symmetric (and the solve SPD) on the symmetric-matrix
  // subspace only, so every application projects back onto it; otherwise
  // rounding seeds a component on which CG cannot make progress.
  auto apply_operator = [&](const std::vector<double>& in_raw, std::vector<double>& out_raw) {
    MatrixField in(npts, dim);
    in.raw() = in_raw;
    for (int j = 0; j < npts; ++j) in.at(j) = sym_part(in.at(j));
    apply_mass(in, scratch_m);
    apply_dy(in, scratch_t);
    for (int j = 0; j < npts; ++j)
      scratch_q.at(j) = (dy / mu.weights[j]) * sym_part(ginv[j] * scratch_t.at(j) * ginv[j]);
    apply_dy_adjoint(scratch_q, scratch_s);
    out_raw.resize(nd);
    for (size_t i = 0; i < nd; ++i) out_raw[i] = scratch_m.raw()[i] + scratch_s.raw()[i];
    MatrixField out(npts, dim);
    out.raw() = std::move(out_raw);
    for (int j = 0; j < npts; ++j) out.at(j) = sym_part(out.at(j));
    out_raw = std::move(out.raw());
  };

  // Jacobi diagonal: exact for the mass part, derivative-row estimate for the
  // stiffness part (only the preconditioner, not the operator).
  const double row2 = derivative_row_norm2(grid);
  std::vector<double> diag(nd);
  for (int j = 0; j < npts; ++j) {
    for (int a = 0; a < dim; ++a)
      for (int c = 0; c < dim; ++c) {
        const double gg = ginv[j](a, a) * ginv[j](c, c);
        diag[static_cast<size_t>(j) * comps + a * dim + c] =
            mu.weights[j] * dy * gg + (dy / mu.weights[j]) * row2 * gg;
      }
  }

  MatrixField meta(npts, dim);
  apply_mass(eta.s, meta);

  std::vector<double> x;
  auto outcome = conjugate_gradients(apply_operator, diag, meta.raw(), x);

  double norm2 = 0.0;
  for (size_t i = 0; i < nd; ++i) norm2 += meta.raw()[i] * x[i];
  norm2 = std::max(norm2, 0.0);

  // component along the identity section in L2(mu)
  double tr_int = 0.0, mass = 0.0;
  for (int j = 0; j < npts; ++j) {
    tr_int += (ginv[j] * eta.s.at(j)).trace() * mu.weights[j] * dy;
    mass += mu.weights[j] * dy;
  }

  HminusResult res;
  res.value = std::sqrt(norm2);
  res.kernel_component = std::abs(tr_int) / std::sqrt(dim * mass);
  res.iterations = outcome.iterations;
  return res;
}

HminusResult hminus_norm_scalar(const Field& sigma, const Field& a, const CircleGrid& grid) {
  const int npts = grid.size();
  if (static_cast<int>(sigma.size()) != npts || static_cast<int>(a.size()) != npts)
    throw std::invalid_argument("hminus_norm_scalar: shape mismatch");
  for (double v : a)
    if (!(v > 0.0)) throw std::invalid_argument("hminus_norm_scalar: a must be positive");

  const double dy = grid.dy();
  std::vector<double> mdiag(npts), q(npts);
  for (int j = 0; j < npts; ++j) {
    mdiag[j] = dy / a[j];     // mass of a^{-1} dtheta
    q[j] = dy * a[j];         // gradient weight a^2 * a^{-1}
  }

  Field dv(npts), qd(npts), back(npts);
  auto apply_operator = [&](const std::vector<double>& in, std::vector<double>& out) {
    grid.derivative(in.data(), dv.data());
    for (int j = 0; j < npts; ++j) qd[j] = q[j] * dv[j];
    grid.derivative(qd.data(), back.data());
    out.resize(npts);
    for (int j = 0; j < npts; ++j) out[j] = mdiag[j] * in[j] - back[j];
  };

  const double row2 = derivative_row_norm2(grid);
  std::vector<double> diag(npts);
  for (int j = 0; j < npts; ++j) diag[j] = mdiag[j] + q[j] * row2;

  std::vector<double> rhs(npts);
  for (int j = 0; j < npts; ++j) rhs[j] = mdiag[j] * sigma[j];

  std::vector<double> x;
  auto outcome = conjugate_gradients(apply_operator, diag, rhs, x);

  double norm2 = 0.0, proj = 0.0, mass = 0.0;
  for (int j = 0; j < npts; ++j) {
    norm2 += rhs[j] * x[j];
    proj += sigma[j] * mdiag[j];
    mass += mdiag[j];
  }

  HminusResult res;
  res.value = std::sqrt(std::max(norm2, 0.0));
  res.kernel_component = std::abs(proj) / std::sqrt(mass);
  res.iterations = outcome.iterations;
  return res;
}

double l2_norm_matrix(const SelfAdjointSection& eta, const SpdField& g, const DensityField& mu,
                      const CircleGrid& grid) {
  double s = 0.0;
  for (int j = 0; j < grid.size(); ++j) {
    Matrix sig = g.g.at(j).partialPivLu().solve(Matrix(eta.s.at(j)));
    s += (sig * sig).trace() * mu.weights[j] * grid.dy();
  }
  return std::sqrt(std::max(s, 0.0));
}

double l2_norm_scalar(const Field& sigma, const Field& a, const CircleGrid& grid) {
  double s = 0.0;
  for (int j = 0; j < grid.size(); ++j) s += sigma[j] * sigma[j] / a[j] * grid.dy();
  return std::sqrt(std::max(s, 0.0));
}

}  // namespace vacsing
