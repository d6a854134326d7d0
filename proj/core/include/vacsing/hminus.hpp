#ifndef VACSING_HMINUS_HPP
#define VACSING_HMINUS_HPP

#include "vacsing/circle.hpp"
#include "vacsing/spd.hpp"

namespace vacsing {

// Dual Sobolev norms realized as a mass/stiffness solve: with M the mass
// operator of the measure's trace pairing and S the stiffness operator of the
// gradient form, the supremum over test sections is attained at
//   ||eta||^2 = <M eta, (M + S)^{-1} M eta>.
// The solve is symmetric positive definite; conjugate gradients with Jacobi
// preconditioning to relative residual 1e-12.
struct HminusResult {
  double value = 0.0;
  // L2 size of the component along the constant (identity) direction, the
  // guaranteed kernel of the gradient form; reported, not subtracted.
  double kernel_component = 0.0;
  int iterations = 0;

  operator double() const { return value; }
};

// Matrix-section norm: measure d(mu) = mu.weights * dy, gradient form
// integrand Tr((D_y eta)^2) / mu per unit length.
HminusResult hminus_norm_matrix(const SelfAdjointSection& eta, const SpdField& g,
                                const DensityField& mu, const CircleGrid& grid);

// Scalar norm on L2(Y; a^{-1} dtheta) with gradient form a^2 sigma_theta^2;
// agrees with the matrix norm at N = 1 under mu <-> a^{-1} dtheta.
HminusResult hminus_norm_scalar(const Field& sigma, const Field& a, const CircleGrid& grid);

// L2 norms of the same pairings, for the norm <= L2 comparison.
double l2_norm_matrix(const SelfAdjointSection& eta, const SpdField& g, const DensityField& mu,
                      const CircleGrid& grid);
double l2_norm_scalar(const Field& sigma, const Field& a, const CircleGrid& grid);

}  // namespace vacsing

#endif
