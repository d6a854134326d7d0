#include "vacsing/tsym.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

#include "vacsing/hminus.hpp"
#include "vacsing/series.hpp"

namespace vacsing::tsym {

namespace {

Field scaled(const Field& f, double c) {
  Field out(f.size());
  for (size_t i = 0; i < f.size(); ++i) out[i] = c * f[i];
  return out;
}

bool uniform_spacing(const std::vector<double>& x) {
  if (x.size() < 2) return true;
  const double h = x[1] - x[0];
  for (size_t i = 1; i < x.size(); ++i)
    if (std::abs((x[i] - x[i - 1]) - h) > 1e-12 * std::max(1.0, std::abs(h))) return false;
  return true;
}

// first derivative of a per-entry scalar series against abscissae x
std::vector<double> series_derivative(const std::vector<double>& x,
                                      const std::vector<double>& f) {
  if (x.size() >= 5 && uniform_spacing(x)) return fd5_first_uniform(f, x[1] - x[0]);
  return fd3_first(x, f);
}

}  // namespace

double TsymState::tau() const { return -std::log(R); }

Field TsymState::u_tau() const { return scaled(u_R, -R); }
Field TsymState::a_tau() const { return scaled(a_R, -R); }
Field TsymState::A_tau() const { return scaled(A_R, -R); }

void TsymState::validate() const {
  const size_t n = grid.size();
  if (!(R > 0.0)) throw std::invalid_argument("TsymState: areal time R must be positive");
  // K = 0 is allowed as the degenerate Gowdy-limit cross-check
  if (!(K >= 0.0)) throw std::invalid_argument("TsymState: twist constant K must be nonnegative");
  auto check = [&](const Field& f, const char* name) {
    if (f.size() != n)
      throw std::invalid_argument(std::string("TsymState: field ") + name + " length mismatch");
  };
  check(u, "U");
  check(A, "A");
  check(a, "a");
  check(gconn, "G");
  check(hconn, "H");
  if (has_eta) check(eta, "eta");
  for (double v : a)
    if (!(v > 0.0)) throw std::invalid_argument("TsymState: a must be positive everywhere");
  if (has_derivatives) {
    check(u_R, "U_R");
    check(A_R, "A_R");
    check(a_R, "a_R");
    check(h_R, "H_R");
    if (has_eta) check(eta_R, "eta_R");
  }
}

void TsymHistory::validate() const {
  if (entries.empty()) throw std::invalid_argument("TsymHistory: empty");
  const auto& first = entries.front();
  for (const auto& st : entries) {
    st.validate();
    if (!st.grid.same_layout(first.grid))
      throw std::invalid_argument("TsymHistory: entries must share one grid");
    if (st.K != first.K)
      throw std::invalid_argument("TsymHistory: entries must share the twist constant");
  }
  for (size_t i = 1; i < entries.size(); ++i)
    if (!(entries[i].tau() > entries[i - 1].tau()))
      throw std::invalid_argument("TsymHistory: times must be strictly monotone");
}

void ExpansionProfile::validate(const CircleGrid& grid) const {
  const size_t n = grid.size();
  for (const Field* f : {&k, &u_ss, &A_star, &A_ss, &a_star, &h_star})
    if (f->size() != n) throw std::invalid_argument("ExpansionProfile: field length mismatch");
  if (!allow_wide_k) {
    for (double v : k)
      if (!(v > 0.0 && v < 1.0))
        throw std::invalid_argument(
            "ExpansionProfile: k must lie in (0,1); set allow_wide_k to override");
  }
  for (double v : a_star)
    if (!(v > 0.0)) throw std::invalid_argument("ExpansionProfile: a_star must be positive");
}

TsymState expansion_fields(const ExpansionProfile& profile, double tau, const CircleGrid& grid,
                           double twist_k) {
  if (!(tau >= 1.0)) throw std::invalid_argument("expansion_fields: tau >= 1 required");
  profile.validate(grid);
  const int n = grid.size();
  TsymState st{grid};
  st.R = std::exp(-tau);
  st.K = twist_k;
  st.u.resize(n);
  st.A.resize(n);
  st.a = profile.a_star;
  st.hconn = profile.h_star;
  st.gconn.assign(n, 0.0);
  st.has_eta = false;
  st.eta.assign(n, 0.0);
  st.has_derivatives = true;
  st.u_R.resize(n);
  st.A_R.resize(n);
  st.a_R.assign(n, 0.0);
  st.eta_R.assign(n, 0.0);
  st.h_R.assign(n, 0.0);
  for (int j = 0; j < n; ++j) {
    const double kj = profile.k[j];
    const double decay = std::exp(-2.0 * kj * tau);
    st.u[j] = -0.5 * (1.0 - kj) * tau + profile.u_ss[j];
    st.A[j] = profile.A_star[j] + profile.A_ss[j] * decay;
    // term-by-term tau differentiation, converted through f_R = -f_tau / R
    const double u_tau = -0.5 * (1.0 - kj);
    const double a_tau = -2.0 * kj * profile.A_ss[j] * decay;
    st.u_R[j] = -u_tau / st.R;
    st.A_R[j] = -a_tau / st.R;
  }
  return st;
}

TsymHistory expansion_history(const ExpansionProfile& profile, double tau_lo, double tau_hi,
                              int count, const CircleGrid& grid, double twist_k) {
  if (count < 2 || !(tau_hi > tau_lo))
    throw std::invalid_argument("expansion_history: bad sampling request");
  TsymHistory hist;
  hist.entries.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double tau = tau_lo + (tau_hi - tau_lo) * i / (count - 1);
    hist.entries.push_back(expansion_fields(profile, tau, grid, twist_k));
  }
  return hist;
}

KEnergies energies_k(const TsymState& state) {
  state.validate();
  if (!state.has_derivatives)
    throw std::invalid_argument("energies_k: derivative fields required");
  const CircleGrid& grid = state.grid;
  const int n = grid.size();
  Field u_theta = grid.derivative(state.u);
  Field a_theta = grid.derivative(state.A);
  const double r = state.R;
  const double k2 = state.K * state.K;

  Field density(n), with_twist(n), hfield = state.hconn;
  for (int j = 0; j < n; ++j) {
    const double e4u = std::exp(4.0 * state.u[j]);
    const double aj = state.a[j];
    density[j] = state.u_R[j] * state.u_R[j] / aj + aj * u_theta[j] * u_theta[j] +
                 0.25 / (r * r) * e4u *
                     (state.A_R[j] * state.A_R[j] / aj + aj * a_theta[j] * a_theta[j]);
    const double eta_j = state.has_eta ? state.eta[j] : 0.0;
    with_twist[j] = density[j] + 0.25 * k2 / (r * r * r * r) * std::exp(2.0 * eta_j) / aj;
  }
  KEnergies out;
  out.d_integral = grid.integrate(density);
  out.ehat_k = grid.integrate(with_twist);
  out.holonomy = grid.integrate(hfield);
  out.etilde_k = r * r * out.ehat_k + 0.5 * state.K * out.holonomy;
  return out;
}

Certificate monotonicity_residual(const TsymHistory& history) {
  history.validate();
  const auto& entries = history.entries;
  if (entries.size() < 5)
    throw std::invalid_argument("monotonicity_residual: need >= 5 times");
  for (const auto& st : entries)
    if (!st.has_derivatives)
      throw std::invalid_argument("monotonicity_residual: full derivative fields required");

  const size_t n = entries.size();
  std::vector<double> rv(n), ehat(n), etilde(n), rhs_tilde(n), rhs_hat(n);
  for (size_t i = 0; i < n; ++i) {
    const TsymState& st = entries[i];
    const CircleGrid& grid = st.grid;
    KEnergies en = energies_k(st);
    rv[i] = st.R;
    ehat[i] = en.ehat_k;
    etilde[i] = en.etilde_k;

    Field u_theta = grid.derivative(st.u);
    Field a_theta = grid.derivative(st.A);
    Field f_tilde(grid.size()), f_hat(grid.size()), f_twist(grid.size());
    for (int j = 0; j < grid.size(); ++j) {
      const double e4u = std::exp(4.0 * st.u[j]);
      const double aj = st.a[j];
      f_tilde[j] = aj * u_theta[j] * u_theta[j] +
                   0.25 / (st.R * st.R) * e4u * st.A_R[j] * st.A_R[j] / aj;
      f_hat[j] = st.u_R[j] * st.u_R[j] / aj +
                 0.25 / (st.R * st.R) * e4u * aj * a_theta[j] * a_theta[j];
      const double eta_j = st.has_eta ? st.eta[j] : 0.0;
      f_twist[j] = std::exp(2.0 * eta_j) / aj;
    }
    rhs_tilde[i] = 2.0 * st.R * grid.integrate(f_tilde);
    rhs_hat[i] = -2.0 / st.R * grid.integrate(f_hat) -
                 st.K * st.K / std::pow(st.R, 5) * grid.integrate(f_twist);
  }

  std::vector<double> d_tilde = series_derivative(rv, etilde);
  std::vector<double> d_hat = series_derivative(rv, ehat);

  double worst_tilde = 0.0, worst_hat = 0.0;
  std::vector<double> resid_tilde(n), resid_hat(n);
  for (size_t i = 0; i < n; ++i) {
    resid_tilde[i] = d_tilde[i] - rhs_tilde[i];
    resid_hat[i] = d_hat[i] - rhs_hat[i];
  }
  for (size_t i = 2; i + 2 < n; ++i) {
    worst_tilde = std::max(worst_tilde,
                           std::abs(resid_tilde[i]) /
                               std::max(std::abs(rhs_tilde[i]), 1e-14 * (1.0 + std::abs(etilde[i]))));
    worst_hat = std::max(worst_hat,
                         std::abs(resid_hat[i]) /
                             std::max(std::abs(rhs_hat[i]), 1e-14 * (1.0 + std::abs(ehat[i]))));
  }

  // Etilde_K nondecreasing in R: entries are tau-ascending, so R descends
  bool nondecreasing = true;
  for (size_t i = 1; i < n; ++i) {
    const double tol = 1e-9 * (1.0 + std::abs(etilde[i]));
    if (etilde[i] - etilde[i - 1] > tol) nondecreasing = false;  // grew as R shrank
  }

  Certificate cert;
  cert.name = "tsym-monotonicity-residual";
  cert.metrics["max_rel_residual_etilde"] = worst_tilde;
  cert.metrics["max_rel_residual_ehat"] = worst_hat;
  cert.metrics["etilde_nondecreasing_in_R"] = nondecreasing ? 1.0 : 0.0;
  for (size_t i = 0; i < n; ++i) cert.samples.push_back({entries[i].tau(), etilde[i]});
  cert.series["R"] = rv;
  cert.series["residual_etilde"] = resid_tilde;
  cert.series["residual_ehat"] = resid_hat;
  cert.pass = nondecreasing;
  cert.verdict = nondecreasing ? "nondecreasing" : "violated";
  return cert;
}

FieldResiduals field_residuals(const TsymHistory& history) {
  history.validate();
  const auto& entries = history.entries;
  if (entries.size() < 3)
    throw std::invalid_argument("field_residuals: need a window of >= 3 times");
  for (const auto& st : entries)
    if (!st.has_derivatives)
      throw std::invalid_argument("field_residuals: derivative fields required");

  const CircleGrid& grid = entries.front().grid;
  const int npts = grid.size();
  const size_t n = entries.size();

  std::vector<double> rv(n);
  for (size_t i = 0; i < n; ++i) rv[i] = entries[i].R;

  FieldResiduals out;
  // eta has no expansion profile; without it only the U-wave residual is
  // defined and requesting the twist residual is an error downstream
  out.twist_available = entries.front().has_eta;
  for (size_t i = 1; i + 1 < n; ++i) {
    const TsymState& st = entries[i];
    Field u_theta = grid.derivative(st.u);
    Field a_theta = grid.derivative(st.A);
    // (R a^{-1} U_R) differenced across the window, (R a U_theta) in theta
    Field flux(npts);
    for (int j = 0; j < npts; ++j) flux[j] = st.R * st.a[j] * u_theta[j];
    Field flux_theta = grid.derivative(flux);

    Field twist(npts), uwave(npts);
    for (int j = 0; j < npts; ++j) {
      // three-point stencils in R through the neighbors
      const double x0 = rv[i - 1], x1 = rv[i], x2 = rv[i + 1];
      auto d3 = [&](double f0, double f1, double f2) {
        const double l0 = (2 * x1 - x1 - x2) / ((x0 - x1) * (x0 - x2));
        const double l1 = (2 * x1 - x0 - x2) / ((x1 - x0) * (x1 - x2));
        const double l2 = (2 * x1 - x0 - x1) / ((x2 - x0) * (x2 - x1));
        return f0 * l0 + f1 * l1 + f2 * l2;
      };
      const double h_r = d3(entries[i - 1].hconn[j], st.hconn[j], entries[i + 1].hconn[j]);
      twist[j] = out.twist_available
                     ? h_r - st.K / std::pow(st.R, 3) / st.a[j] * std::exp(2.0 * st.eta[j])
                     : 0.0;

      auto mom = [&](const TsymState& e) { return e.R / e.a[j] * e.u_R[j]; };
      const double mom_r = d3(mom(entries[i - 1]), mom(st), mom(entries[i + 1]));
      const double e4u = std::exp(4.0 * st.u[j]);
      uwave[j] = mom_r - flux_theta[j] -
                 0.5 / st.R * e4u *
                     (st.A_R[j] * st.A_R[j] / st.a[j] - st.a[j] * a_theta[j] * a_theta[j]);
      out.twist_sup = std::max(out.twist_sup, std::abs(twist[j]));
      out.uwave_sup = std::max(out.uwave_sup, std::abs(uwave[j]));
    }
    out.taus.push_back(st.tau());
    out.twist.push_back(std::move(twist));
    out.uwave.push_back(std::move(uwave));
  }
  return out;
}

AvtdReport avtd_quantities(const TsymHistory& history) {
  history.validate();
  const auto& entries = history.entries;
  if (entries.size() < 8)
    throw std::invalid_argument("avtd_quantities: need >= 8 times for the certificates");
  for (const auto& st : entries)
    if (!st.has_derivatives)
      throw std::invalid_argument("avtd_quantities: derivative fields required");

  const CircleGrid& grid = entries.front().grid;
  const int npts = grid.size();
  const size_t n = entries.size();

  std::vector<double> taus(n);
  for (size_t i = 0; i < n; ++i) taus[i] = entries[i].tau();

  // (a^{-1} U_tau)_tau by per-point differencing of the stored series
  std::vector<Field> g_series(n, Field(npts));
  for (size_t i = 0; i < n; ++i) {
    Field ut = entries[i].u_tau();
    for (int j = 0; j < npts; ++j) g_series[i][j] = ut[j] / entries[i].a[j];
  }
  std::vector<Field> g_tau(n, Field(npts));
  {
    std::vector<double> col(n), dcol(n);
    for (int j = 0; j < npts; ++j) {
      for (size_t i = 0; i < n; ++i) col[i] = g_series[i][j];
      dcol = series_derivative(taus, col);
      for (size_t i = 0; i < n; ++i) g_tau[i][j] = dcol[i];
    }
  }

  AvtdReport rep;
  rep.taus = taus;
  rep.norm_q_avtd.resize(n);
  rep.norm_q_full.resize(n);
  rep.norm_aux.resize(n);
  rep.holonomy.resize(n);

  for (size_t i = 0; i < n; ++i) {
    const TsymState& st = entries[i];
    const double e2t = std::exp(2.0 * taus[i]);
    Field a_tau = st.A_tau();
    Field a_theta = grid.derivative(st.A);
    Field q_avtd(npts), q_full(npts), aux(npts);
    for (int j = 0; j < npts; ++j) {
      const double e4u = std::exp(4.0 * st.u[j]);
      q_avtd[j] = st.a[j] * g_tau[i][j] - 0.5 * e2t * e4u * a_tau[j] * a_tau[j];
      aux[j] = e4u * st.a[j] * st.a[j] * a_theta[j] * a_theta[j];
      q_full[j] = q_avtd[j] + 0.5 * aux[j];
    }
    rep.norm_q_avtd[i] = hminus_norm_scalar(q_avtd, st.a, grid).value;
    rep.norm_q_full[i] = hminus_norm_scalar(q_full, st.a, grid).value;
    rep.norm_aux[i] = hminus_norm_scalar(aux, st.a, grid).value;
    rep.holonomy[i] = grid.integrate(st.hconn);
    // subadditivity: ||q_avtd|| <= ||q_full|| + 1/2 ||aux||
    rep.max_triangle_violation =
        std::max(rep.max_triangle_violation,
                 rep.norm_q_avtd[i] - (rep.norm_q_full[i] + 0.5 * rep.norm_aux[i]));
  }

  auto square = [](const std::vector<double>& v) {
    std::vector<double> out(v.size());
    for (size_t i = 0; i < v.size(); ++i) out[i] = v[i] * v[i];
    return out;
  };
  rep.cert_aux = weighted_tail_integral(taus, square(rep.norm_aux), 2.0);
  rep.cert_aux.name = "tsym-aux-integrability";
  rep.cert_q_full = weighted_tail_integral(taus, square(rep.norm_q_full), 2.0);
  rep.cert_q_full.name = "tsym-q-full-integrability";
  rep.cert_q_avtd = weighted_tail_integral(taus, square(rep.norm_q_avtd), 2.0);
  rep.cert_q_avtd.name = "tsym-q-avtd-integrability";

  rep.holonomy_min = *std::min_element(rep.holonomy.begin(), rep.holonomy.end());
  std::vector<double> tail_t, tail_h;
  for (size_t i = 0; i < n; ++i)
    if (taus[i] >= taus.back() - 1.0) {
      tail_t.push_back(taus[i]);
      tail_h.push_back(rep.holonomy[i]);
    }
  rep.holonomy_tail_slope =
      (tail_t.size() >= 2) ? least_squares_slope(tail_t, tail_h) : 0.0;
  const double h_scale = 1.0 + std::abs(rep.holonomy.back());
  rep.holonomy_bounded_below = rep.holonomy_tail_slope >= -0.05 * h_scale;

  const bool aux_ok = rep.cert_aux.verdict == "convergent-so-far";
  const bool q_ok = rep.cert_q_avtd.verdict == "convergent-so-far";
  rep.implication_holds = !(rep.holonomy_bounded_below && aux_ok) || q_ok;
  return rep;
}

void save_history(const TsymHistory& history, const std::string& path) {
  static_assert(std::endian::native == std::endian::little,
                "history format is little-endian");
  history.validate();
  const auto& first = history.entries.front();
  std::vector<double> times;
  for (const auto& st : history.entries) times.push_back(st.R);
  nlohmann::json header = {
      {"format", "tsym-history-v1"},
      {"n_y", first.grid.size()},
      {"L_c", first.grid.length()},
      {"scheme", first.grid.scheme() == DerivScheme::Spectral ? "spectral" : "fd4"},
      {"K", first.K},
      {"times_R", times},
      {"has_eta", first.has_eta},
      {"has_derivatives", first.has_derivatives},
      {"byte_order", "little"},
  };
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("tsym history: cannot open " + path + " for writing");
  out << header.dump() << "\n";
  auto block = [&](const Field& f) {
    out.write(reinterpret_cast<const char*>(f.data()),
              static_cast<std::streamsize>(f.size() * sizeof(double)));
  };
  for (const auto& st : history.entries) {
    block(st.u);
    block(st.A);
    if (st.has_eta) block(st.eta);
    block(st.a);
    block(st.gconn);
    block(st.hconn);
    if (st.has_derivatives) {
      block(st.u_R);
      block(st.A_R);
      if (st.has_eta) block(st.eta_R);
      block(st.a_R);
      block(st.h_R);
    }
  }
  if (!out) throw std::runtime_error("tsym history: write failed for " + path);
}

TsymHistory load_history(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("tsym history: cannot open " + path);
  std::string header_line;
  if (!std::getline(in, header_line)) throw std::runtime_error("tsym history: missing header");
  nlohmann::json header = nlohmann::json::parse(header_line);
  if (header.value("format", "") != "tsym-history-v1")
    throw std::runtime_error("tsym history: unknown format");

  const int n = header.at("n_y").get<int>();
  const double length = header.at("L_c").get<double>();
  const std::string scheme = header.at("scheme").get<std::string>();
  const double twist_k = header.at("K").get<double>();
  const std::vector<double> times = header.at("times_R").get<std::vector<double>>();
  const bool has_eta = header.at("has_eta").get<bool>();
  const bool has_derivatives = header.at("has_derivatives").get<bool>();

  CircleGrid grid(n, length, scheme == "spectral" ? DerivScheme::Spectral : DerivScheme::FD4);
  auto block = [&](Field& f) {
    f.resize(n);
    in.read(reinterpret_cast<char*>(f.data()),
            static_cast<std::streamsize>(f.size() * sizeof(double)));
    if (!in) throw std::runtime_error("tsym history: truncated binary block");
  };

  TsymHistory hist;
  for (double r : times) {
    TsymState st{grid};
    st.R = r;
    st.K = twist_k;
    st.has_eta = has_eta;
    st.has_derivatives = has_derivatives;
    block(st.u);
    block(st.A);
    if (has_eta) block(st.eta);
    else st.eta.assign(n, 0.0);
    block(st.a);
    block(st.gconn);
    block(st.hconn);
    if (has_derivatives) {
      block(st.u_R);
      block(st.A_R);
      if (has_eta) block(st.eta_R);
      else st.eta_R.assign(n, 0.0);
      block(st.a_R);
      block(st.h_R);
    }
    hist.entries.push_back(std::move(st));
  }
  hist.validate();
  return hist;
}

}  // namespace vacsing::tsym
