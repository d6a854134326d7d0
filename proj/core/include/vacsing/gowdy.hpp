#ifndef VACSING_GOWDY_HPP
#define VACSING_GOWDY_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "vacsing/certificate.hpp"
#include "vacsing/circle.hpp"
#include "vacsing/hminus.hpp"
#include "vacsing/spd.hpp"

namespace vacsing::gowdy {

// Periodic torus-symmetric vacuum data in the conformal gauge, evolved in the
// log-conformal time s = -ln T (the singularity sits at s -> +infinity).
// State variables are (G, Atilde = G^{-1} G_s); the wave equation reduces to
//   G_s = G Atilde,   Atilde_s = e^{-2s} (G^{-1} G_y)_y,
// with det G = e^{-2s}, tr Atilde = -2 and tr(G^{-1} G_y) = 0 as constraints.
struct GowdyState {
  CircleGrid grid;
  int dim = 0;          // torus dimension N
  double s = 0.0;       // log-conformal time
  MatrixField g;        // SPD, det = e^{-2s}
  MatrixField atilde;   // G^{-1} G_s, self-adjoint w.r.t. G
  DensityField mu;      // the t-independent density; 2*dy in this gauge

  double time_T() const;
  double areal_time() const;  // t = T^{2/N}

  // max relative violation of det G = e^{-2s}
  double det_residual() const;
  // max |tr Atilde + 2|
  double trace_atilde_residual() const;
  // max |tr(G^{-1} G_y)|
  double trace_b_residual() const;
  // self-adjointness of Atilde w.r.t. G
  double atilde_self_adjoint_defect() const;

  // throws if the gauge constraints are violated beyond their tolerances
  void validate() const;
};

struct GowdyEnergies {
  double e = 0.0;       // lapse-weighted energy in areal time
  double ehat = 0.0;    // scale-invariant, nonincreasing in t
  double etilde = 0.0;  // = T^2 * ehat, nondecreasing in t
};

struct EvolveOptions {
  double cfl = 0.5;       // step bound ds <= cfl * dy * e^s (speed e^-s)
  double max_ds = 0.01;   // accuracy cap on the step
  int output_count = 9;   // states reported at uniform s spacing
};

struct Trajectory {
  std::vector<GowdyState> outputs;
  long long steps = 0;
  double max_det_correction = 0.0;  // largest one-step det renormalization
};

// G = T [[e^P, e^P Q], [e^P Q, e^P Q^2 + e^-P]] with T = e^{-s0}; N = 2 only.
GowdyState init_from_pq(const Field& p, const Field& q, const Field& p_s, const Field& q_s,
                        double s0, const CircleGrid& grid);

struct PqFields {
  Field p, q, p_s, q_s;
};
PqFields extract_pq(const GowdyState& state);

// Spatially homogeneous power-law data G = diag(T^{2 q_i}), sum q_i = 1.
GowdyState vtd_state(const CircleGrid& grid, const std::vector<double>& exponents, double s0);

// Polarized N = 2 standing wave: P = J0(k T) cos(k y) solves P_TT + P_T/T = P_yy.
GowdyState bessel_state(const CircleGrid& grid, int k, double s0);
double bessel_solution_p(int k, double time_T, double y);

// Band-limited random data from the counter-based generator; exact gauge
// constraints by construction. N = 2 goes through the (P, Q) chart, N >= 3
// through G = e^{-2s/N} exp(S0) with S0 symmetric traceless.
GowdyState random_band_limited_state(const CircleGrid& grid, int dim, double s0,
                                     std::uint64_t seed, double amplitude, int band);

// Method-of-lines evolution with classical RK4; aborts on SPD loss or on a
// one-step det renormalization above 1e-6.
Trajectory evolve(const GowdyState& initial, double s_end, const EvolveOptions& opts);

GowdyEnergies energies(const GowdyState& state);

// Gauge-reduced forms of the monotonicity identities,
//   dEhat/dT = -(1/T) Int Tr(Ahat^2) dy,   dEtilde/dT = T Int Tr(B^2) dy,
// checked by centered finite differences across the trajectory outputs
// (4th-order in the uniform s grid, chain-ruled to T).
Certificate energy_identities(const Trajectory& traj);

// (G^{-1} G_s)_s = e^{-2s} (G^{-1} G_y)_y, evaluated directly from the state.
SelfAdjointSection avtd_defect(const GowdyState& state);

// W(s) = e^{2s} ||(G^{-1}G_s)_s||^2 in the dual norm with measure mu, fed to
// the tail integral with weight 0; trajectory must span >= 3 in s.
Certificate decay_certificate(const Trajectory& traj, int threads = 1);

// Test section for the weak formulation: sigma = G^{-1} (bump(s) S0(y)), or
// bump(s) * Id when profile is empty.
struct TestSection {
  MatrixField profile;  // symmetric spatial profile; empty => identity section
  double s_lo = 0.0;    // bump support, must lie strictly inside the run
  double s_hi = 0.0;

  double bump(double s) const;
  double bump_prime(double s) const;
};

// Integrated weak form of the evolution equation against the test section:
//   II Tr(sigma_s Atilde) dmu ds = 2 II e^{-2s} Tr((D_y sigma) B) dy ds.
Certificate weak_form_check(const Trajectory& traj, const TestSection& section);

// mu = sqrt(det G) (d_T ln det G) dy must equal 2 dy at every output time.
Certificate twist_density_check(const Trajectory& traj);

// max_y ||d_y B||_F, a visibility diagnostic for under-resolved steep features
double lipschitz_b(const GowdyState& state);

// Snapshot persistence: one-line JSON header, then little-endian binary
// blocks of G and Atilde entries in row-major (point, i, j) order.
void save_snapshot(const GowdyState& state, const std::string& path);
GowdyState load_snapshot(const std::string& path);

}  // namespace vacsing::gowdy

#endif
