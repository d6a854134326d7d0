#ifndef VACSING_TSYM_HPP
#define VACSING_TSYM_HPP

#include <optional>
#include <string>
#include <vector>

#include "vacsing/certificate.hpp"
#include "vacsing/circle.hpp"

namespace vacsing::tsym {

// Scalar metric functions of a T^2-symmetric nonGowdy slice at areal time R.
// No evolution lives here: histories are supplied (from files or from the
// formal large-tau expansions) and the module evaluates functionals,
// residuals and integrability certificates on them.
struct TsymState {
  CircleGrid grid;
  double R = 1.0;        // areal time > 0
  double K = 1.0;        // twist constant > 0
  Field u;               // metric exponent U
  Field A;               // off-diagonal torus potential
  Field eta;             // conformal exponent (may be absent: see has_eta)
  Field a;               // a > 0
  Field gconn, hconn;    // connection components G, H

  bool has_eta = true;
  bool has_derivatives = false;
  Field u_R, A_R, eta_R, a_R, h_R;  // d/dR fields when present

  double tau() const;
  // tau-derivatives by the chain rule f_tau = -R f_R
  Field u_tau() const;
  Field a_tau() const;
  Field A_tau() const;

  void validate() const;
};

struct TsymHistory {
  std::vector<TsymState> entries;  // strictly increasing tau (decreasing R)

  void validate() const;  // shared grid and K, monotone times, derivatives
};

// Free functions of theta parametrizing the formal large-tau asymptotics:
//   U ~ -(1-k) tau/2 + U_ss,  A ~ A_star + A_ss e^{-2 k tau},
//   a ~ a_star,  H ~ H_star.
struct ExpansionProfile {
  Field k, u_ss, A_star, A_ss, a_star, h_star;
  bool allow_wide_k = false;  // permit k outside (0,1) (the stated range)

  void validate(const CircleGrid& grid) const;
};

// State generated from the expansion at time tau >= 1; eta is set to zero and
// flagged absent (the expansion provides none), which disables the twist
// residual on such data.
TsymState expansion_fields(const ExpansionProfile& profile, double tau, const CircleGrid& grid,
                           double twist_k = 1.0);

TsymHistory expansion_history(const ExpansionProfile& profile, double tau_lo, double tau_hi,
                              int count, const CircleGrid& grid, double twist_k = 1.0);

struct KEnergies {
  double d_integral = 0.0;  // Int D dtheta
  double ehat_k = 0.0;      // Int (D + 1/4 K^2 R^-4 e^{2 eta} a^-1) dtheta
  double etilde_k = 0.0;    // R^2 ehat_k + 1/2 K Int H dtheta
  double holonomy = 0.0;    // Int H dtheta
};
KEnergies energies_k(const TsymState& state);

// Finite-difference d(Etilde_K)/dR against 2R Int(a U_theta^2 + ...) dtheta,
// and d(Ehat_K)/dR against its identity; reports relative residuals and the
// sign verdict (Etilde_K nondecreasing in R).
Certificate monotonicity_residual(const TsymHistory& history);

struct FieldResiduals {
  std::vector<double> taus;          // interior entries of the window
  std::vector<Field> twist;          // H_R - K R^-3 a^-1 e^{2 eta}
  std::vector<Field> uwave;          // wave operator residual for U
  double twist_sup = 0.0;
  double uwave_sup = 0.0;
  bool twist_available = true;       // false when eta is absent
};
FieldResiduals field_residuals(const TsymHistory& history);

struct AvtdReport {
  std::vector<double> taus;
  std::vector<double> norm_q_avtd;   // H^-1 norms per time
  std::vector<double> norm_q_full;
  std::vector<double> norm_aux;      // e^{4U} a^2 A_theta^2
  std::vector<double> holonomy;
  Certificate cert_aux;              // integrability of the aux field (weight 2)
  Certificate cert_q_full;
  Certificate cert_q_avtd;
  double holonomy_min = 0.0;
  double holonomy_tail_slope = 0.0;
  bool holonomy_bounded_below = false;
  bool implication_holds = true;     // bounded holonomy + aux convergent => q_avtd convergent
  double max_triangle_violation = 0.0;
};
// q_avtd = a (a^-1 U_tau)_tau - 1/2 e^{2 tau} e^{4U} A_tau^2 and
// q_full = q_avtd + 1/2 e^{4U} a^2 A_theta^2, with their dual norms on
// L^2(Y; a^-1 dtheta) and the three weight-2 integrability certificates.
AvtdReport avtd_quantities(const TsymHistory& history);

// History persistence: JSON header (n_y, K, times, fields present) followed
// by little-endian binary field blocks per time.
void save_history(const TsymHistory& history, const std::string& path);
TsymHistory load_history(const std::string& path);

}  // namespace vacsing::tsym

#endif
