#ifndef VACSING_CMCFLOW_HPP
#define VACSING_CMCFLOW_HPP

#include <functional>
#include <vector>

#include "vacsing/certificate.hpp"
#include "vacsing/spd.hpp"

namespace vacsing::cmc {

// One homogeneous block of a multi-warped CMC Einstein flow: an n_i-dim
// factor carrying a unit Einstein reference metric with Ricci =
// eps_i (n_i - 1) metric, scaled by a_i, with second-fundamental-form
// eigenvalue kappa_i.
struct Block {
  int n = 1;           // block dimension
  int eps = 0;         // sign of the reference Einstein constant (-1, 0, +1)
  double a = 1.0;      // scale > 0
  double kappa = 0.0;  // K eigenvalue on the block
  double vol0 = 1.0;   // volume of the unit reference metric
};

// Homogeneous CMC Einstein flow in the Hubble gauge H = -n/t.
struct MultiWarpedFlow {
  std::vector<Block> blocks;
  double t = 1.0;  // Hubble time > 0

  int dim() const;                 // n = sum n_i
  double hubble() const;           // H = sum n_i kappa_i
  double k_norm2() const;          // |K|^2 = sum n_i kappa_i^2
  double k0_norm2() const;         // |K|^2 - H^2/n
  double scalar_curvature() const; // R = sum eps_i n_i (n_i - 1) / a_i^2
  // Hubble-CMC lapse, algebraic in the homogeneous reduction:
  //   L = (n/t^2) / (|K0|^2 + H^2/n)
  double lapse() const;
  double volume() const;           // prod a_i^{n_i} vol0_i
  double constraint_residual() const;  // |R - |K0|^2 + (1-1/n) H^2| / H^2
  double hubble_gauge_residual() const;  // |H + n/t| * t/n

  void validate() const;  // constraint < 1e-9, gauge < 1e-10
};

// Flat-slice flow in matrix form (R = 0).
struct MatrixFlow {
  Matrix hmat;  // positive definite spatial metric
  Matrix kmat;  // symmetric second fundamental form
  double t = 1.0;

  double hubble() const;   // Tr(h^{-1} K)
  double k_norm2() const;  // Tr((h^{-1} K)^2)
  double constraint_residual() const;
  void validate() const;
};

enum class FamilyKind { Cone, ConeTorus, KantowskiSachs, Kasner };

// Closed-form exact families, parametrized by Hubble time. Where the natural
// coordinate time of the family is not Hubble time (Kantowski-Sachs), the
// evaluation inverts t = -n/H by monotone bisection.
struct Family {
  FamilyKind kind = FamilyKind::Cone;
  int cone_dim = 3;
  int torus_dim = 0;
  double ks_mass = 1.0;
  std::vector<double> kasner_p;  // diagonal Kasner exponents
  Matrix kasner_m;               // matrix Kasner (symmetric, Tr M = Tr M^2 = 1)
  Matrix kasner_href;            // reference metric commuting with M
  double vol0 = 1.0;

  int dim() const;
  MultiWarpedFlow at(double t) const;
  bool has_matrix_form() const { return kind == FamilyKind::Kasner && kasner_m.size() > 0; }
  MatrixFlow matrix_at(double t) const;
};

Family make_cone(int n, double vol0 = 1.0);
Family make_cone_torus(int cone_dim, int torus_dim, double vol0 = 1.0);
Family make_kantowski_sachs(double mass);
// diagonal exponents p with sum p = sum p^2 = 1
Family make_kasner(const std::vector<double>& p, double vol0 = 1.0);
// matrix form; href must be SPD with href * M symmetric
Family make_kasner_matrix(const Matrix& m, const Matrix& href);

struct CmcTrajectory {
  std::vector<MultiWarpedFlow> samples;  // monotone in t, uniform in ln t
  double max_constraint_residual = 0.0;
  double max_hubble_residual = 0.0;
};

// RK4 on a_i' = -L kappa_i a_i, kappa_i' = L H kappa_i + L eps_i (n_i-1)/a_i^2
// with the algebraic lapse, uniform steps in ln t. Aborts if a block scale
// crosses zero (reports the crossing time) or constraint drift exceeds 1e-6.
CmcTrajectory evolve_cmc(const MultiWarpedFlow& start, double t_end, int steps);

// Exact samples of a closed-form family, uniform in ln t.
CmcTrajectory sample_family(const Family& family, double t_lo, double t_hi, int count);

// V_n = (-H)^n vol and V_1 = (-H) vol with their finite-difference identities
//   dV_n/dt = -n (-H)^{n-1} |K0|^2 L vol,   dV_1/dt = -L R vol,
// monotonicity verdicts, the lapse bounds, and the integral transcription
// Int(-t^2 R) L (vol/t) dt/t = V_1(t_hi) - V_1(t_lo).
Certificate monotone_quantities(const CmcTrajectory& traj);

struct Dvol0Result {
  double value = 0.0;
  bool nonzero = false;
  std::vector<double> sequence;  // values along the geometric t-sequence
};
// lim_{t->0} (-H) vol-density = n vol(t)/t by Richardson extrapolation on a
// geometric t-sequence (closed form), flagged zero vs nonzero.
Dvol0Result dvol0_limit(const Family& family, double t0, int levels = 24);
Dvol0Result dvol0_limit(const CmcTrajectory& traj);

// Rescaling L_s(u) = L(su), h_s(u) = s^-2 h(su), K_s = s^-1 K(su): block data
// (a/scale, kappa*scale) at u = t/scale. Hubble gauge is preserved.
MultiWarpedFlow rescale(const MultiWarpedFlow& flow, double scale);
CmcTrajectory rescale(const CmcTrajectory& traj, double scale);

// d ln a_i / d ln t per block; the rescaling-limit exponents.
std::vector<double> block_exponents(const MultiWarpedFlow& flow);

struct KasnerReconstruction {
  Matrix m;                   // (h^{-1} K)/H at the first time
  Matrix h_hat;               // h (-H)^{2M}
  double tr_m = 0.0;
  double tr_m2 = 0.0;
  double m_variation = 0.0;   // max over times of ||M(t) - M(t_0)||
  double m_asymmetry = 0.0;
  double h_prediction_residual = 0.0;  // max rel error of h = h_hat (-H)^{-2M}
};
// Inverts the flat-slice closed form on a history of >= 3 matrix flows.
KasnerReconstruction kasner_reconstruct(const std::vector<MatrixFlow>& history);

struct CurvatureReport {
  std::vector<std::array<double, 2>> samples;  // (t, t^2 |Rm|_T)
  double type_i_constant = 0.0;                // sup of the samples
};
// Orthonormal-frame spacetime curvature of g = -L^2 dt^2 + h(t), assembled
// from finite differences in t of the block scales; exact in space for the
// block-homogeneous metrics (constant-curvature references).
CurvatureReport curvature_report(const Family& family, const std::vector<double>& t_samples);

struct CausalRadius {
  double value = 0.0;
  bool divergent = false;
  double divergence_exponent = 0.0;  // local exponent of L/a_i at t -> 0
};
// Coordinate past-cone radius r_i = Int_{t_lo}^{t_hi} L(s)/a_i(s) ds; a
// divergent integral (t_lo = 0 with exponent >= 1) reports +inf.
CausalRadius causal_radius(const Family& family, int block_index, double t_lo, double t_hi);

// Prop-style bound Int ds/f(s) with f(s) = min_i a_i(s)/a_i(t_ref).
double causal_past_bound(const Family& family, double t_lo, double t_hi, double t_ref);

bool disjointness(const Family& family, int block_index, double separation, double lambda,
                  double t);

// Integrals of |L_s - 1/n|, ||K_s|^2 - n^2/u^2| and |R_s| over
// u in [lambda^-1, lambda] weighted by the dvol0 mass, on a decreasing
// sequence of scales; vacuous when the mass vanishes.
Certificate kasner_limit_check(const Family& family, double lambda,
                               const std::vector<double>& scales,
                               std::optional<double> mass_override = std::nullopt);

}  // namespace vacsing::cmc

#endif
