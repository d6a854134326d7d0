#ifndef VACSING_SPD_HPP
#define VACSING_SPD_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "vacsing/circle.hpp"

namespace vacsing {

using Matrix = Eigen::MatrixXd;

inline Matrix sym_part(const Matrix& a) { return 0.5 * (a + a.transpose()); }

// General matrix exponential (scaling-and-squaring with Pade approximants,
// degree chosen by backward-error bounds).
Matrix expm(const Matrix& a);

// Exponential of a symmetric matrix through its eigendecomposition.
Matrix expm_symmetric(const Matrix& a);

// ||sigma^T - G sigma G^{-1}||_F / (1 + ||sigma||_F) at one point.
double self_adjoint_violation(const Matrix& sigma, const Matrix& g);

// Symmetric positive definite matrix with a validated constructor.
struct SpdMatrix {
  Matrix m;

  SpdMatrix() = default;
  explicit SpdMatrix(const Matrix& a) : m(a) { validate(); }

  int dim() const { return static_cast<int>(m.rows()); }
  // throws if not symmetric to 1e-13 relative or not positive definite
  void validate() const;
};

// After reconstructing a metric from arithmetic, symmetrize and insist on
// positivity; silent clipping would mask an instability.
//   min eigenvalue >= 1e-12 * trace, otherwise throws with `context`.
Matrix enforce_spd(const Matrix& a, const std::string& context);

// G(s) = G0 exp(s W) for W self-adjoint with respect to G0; the unique
// solution of (G^{-1} G_s)_s = 0 with G(0) = G0, G^{-1} G_s = W.
Matrix vtd_geodesic(const SpdMatrix& g0, const Matrix& w, double s);

// Field of square matrices on a circle grid, row-major (point, i, j) layout.
class MatrixField {
 public:
  using Map = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstMap =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  MatrixField() = default;
  MatrixField(int npts, int dim) : npts_(npts), dim_(dim), data_(npts * dim * dim, 0.0) {}

  int points() const { return npts_; }
  int dim() const { return dim_; }
  Map at(int j) { return Map(data_.data() + j * dim_ * dim_, dim_, dim_); }
  ConstMap at(int j) const { return ConstMap(data_.data() + j * dim_ * dim_, dim_, dim_); }
  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  // componentwise periodic derivative of every matrix entry
  MatrixField derivative(const CircleGrid& grid) const;

  double max_frobenius() const;

 private:
  int npts_ = 0;
  int dim_ = 0;
  std::vector<double> data_;
};

// Circle-indexed field of SPD matrices (the torus-orbit metric G).
struct SpdField {
  MatrixField g;

  int points() const { return g.points(); }
  int dim() const { return g.dim(); }
  // checks symmetry/positivity at every point
  void validate() const;
  // B = G^{-1} G_y, the self-adjoint spatial log-derivative
  MatrixField log_derivative(const CircleGrid& grid) const;
};

// Self-adjoint section stored as sigma = G^{-1} S with S symmetric, which
// makes the constraint sigma^T = G sigma G^{-1} exact by construction.
struct SelfAdjointSection {
  MatrixField s;  // the symmetric S values

  int points() const { return s.points(); }
  int dim() const { return s.dim(); }

  MatrixField to_sigma(const SpdField& g) const;  // sigma = G^{-1} S

  static SelfAdjointSection from_symmetric(MatrixField s_vals);
  // S = sym(G sigma); the discarded asymmetry is the caller's defect to check
  static SelfAdjointSection from_sigma(const MatrixField& sigma, const SpdField& g);
};

// max over the grid of ||sigma^T - G sigma G^{-1}||_F / (1 + ||sigma||_F)
double self_adjoint_defect(const MatrixField& sigma, const SpdField& g);

// D_y sigma = sigma_y + 1/2 [G^{-1} G_y, sigma]; maps self-adjoint sections
// to self-adjoint sections. In the S-parametrization this is
//   S  ->  S_y - 1/2 (B^T S + S B),   B = G^{-1} G_y.
SelfAdjointSection covariant_dy(const SelfAdjointSection& sigma, const SpdField& g,
                                const CircleGrid& grid);

}  // namespace vacsing

#endif
