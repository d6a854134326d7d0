#include "vacsing/cmcflow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "vacsing/series.hpp"

namespace vacsing::cmc {

namespace {

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa,
                        double fm, double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double tol) {
  if (a == b) return 0.0;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 48);
}

}  // namespace

int MultiWarpedFlow::dim() const {
  int n = 0;
  for (const Block& b : blocks) n += b.n;
  return n;
}

double MultiWarpedFlow::hubble() const {
  double h = 0.0;
  for (const Block& b : blocks) h += b.n * b.kappa;
  return h;
}

double MultiWarpedFlow::k_norm2() const {
  double k2 = 0.0;
  for (const Block& b : blocks) k2 += b.n * b.kappa * b.kappa;
  return k2;
}

double MultiWarpedFlow::k0_norm2() const {
  const double h = hubble();
  return k_norm2() - h * h / dim();
}

double MultiWarpedFlow::scalar_curvature() const {
  double r = 0.0;
  for (const Block& b : blocks) r += b.eps * b.n * (b.n - 1) / (b.a * b.a);
  return r;
}

double MultiWarpedFlow::lapse() const {
  const double n = dim();
  const double h = hubble();
  return (n / (t * t)) / (k0_norm2() + h * h / n);
}

double MultiWarpedFlow::volume() const {
  double v = 1.0;
  for (const Block& b : blocks) v *= std::pow(b.a, b.n) * b.vol0;
  return v;
}

double MultiWarpedFlow::constraint_residual() const {
  const double h = hubble();
  const double n = dim();
  return std::abs(scalar_curvature() - k0_norm2() + (1.0 - 1.0 / n) * h * h) / (h * h);
}

double MultiWarpedFlow::hubble_gauge_residual() const {
  return std::abs(hubble() + dim() / t) * t / dim();
}

void MultiWarpedFlow::validate() const {
  if (blocks.empty()) throw std::invalid_argument("MultiWarpedFlow: no blocks");
  if (!(t > 0.0)) throw std::invalid_argument("MultiWarpedFlow: Hubble time must be positive");
  for (const Block& b : blocks) {
    if (b.n < 1 || b.eps < -1 || b.eps > 1 || !(b.a > 0.0) || !(b.vol0 > 0.0))
      throw std::invalid_argument("MultiWarpedFlow: invalid block data");
    if (b.eps != 0 && b.n < 2)
      throw std::invalid_argument("MultiWarpedFlow: curved block needs dimension >= 2");
  }
  if (constraint_residual() > 1e-9)
    throw std::invalid_argument("MultiWarpedFlow: Hamiltonian constraint violated");
  if (hubble_gauge_residual() > 1e-10)
    throw std::invalid_argument("MultiWarpedFlow: Hubble gauge H = -n/t violated");
}

double MatrixFlow::hubble() const { return (hmat.partialPivLu().solve(kmat)).trace(); }

double MatrixFlow::k_norm2() const {
  Matrix hk = hmat.partialPivLu().solve(kmat);
  return (hk * hk).trace();
}

double MatrixFlow::constraint_residual() const {
  const double h = hubble();
  const double n = static_cast<double>(hmat.rows());
  const double k0 = k_norm2() - h * h / n;
  return std::abs(-k0 + (1.0 - 1.0 / n) * h * h) / (h * h);
}

void MatrixFlow::validate() const {
  SpdMatrix check{};
  check.m = hmat;
  check.validate();
  if ((kmat - kmat.transpose()).norm() > 1e-12 * (1.0 + kmat.norm()))
    throw std::invalid_argument("MatrixFlow: K must be symmetric");
  if (constraint_residual() > 1e-9)
    throw std::invalid_argument("MatrixFlow: flat-slice constraint violated");
}

int Family::dim() const {
  switch (kind) {
    case FamilyKind::Cone: return cone_dim;
    case FamilyKind::ConeTorus: return cone_dim + torus_dim;
    case FamilyKind::KantowskiSachs: return 3;
    case FamilyKind::Kasner:
      return kasner_p.empty() ? static_cast<int>(kasner_m.rows())
                              : static_cast<int>(kasner_p.size());
  }
  return 0;
}

namespace {

// Kantowski-Sachs interior coordinate time from Hubble time, by bisection on
// the monotone branch t_c in (0, 3m/2).
double ks_coordinate_time(double t, double m) {
  auto hubble_time = [&](double tc) {
    const double ar = std::sqrt((2.0 * m - tc) / tc);
    return 3.0 * tc * tc * ar / (3.0 * m - 2.0 * tc);
  };
  double lo = 1e-300, hi = 1.5 * m * (1.0 - 1e-15);
  // expand lo until bracketed
  lo = 1.5 * m * 1e-18;
  while (hubble_time(lo) > t) lo *= 0.125;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (hubble_time(mid) < t)
      lo = mid;
    else
      hi = mid;
    if ((hi - lo) <= 1e-12 * hi) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

MultiWarpedFlow Family::at(double t) const {
  if (!(t > 0.0)) throw std::invalid_argument("Family::at: t must be positive");
  MultiWarpedFlow flow;
  flow.t = t;
  switch (kind) {
    case FamilyKind::Cone: {
      flow.blocks.push_back({cone_dim, -1, t, -1.0 / t, vol0});
      break;
    }
    case FamilyKind::ConeTorus: {
      const int n = cone_dim + torus_dim;
      const double tc = static_cast<double>(cone_dim) / n * t;
      flow.blocks.push_back({cone_dim, -1, tc, -1.0 / tc, vol0});
      flow.blocks.push_back({torus_dim, 0, 1.0, 0.0, 1.0});
      break;
    }
    case FamilyKind::KantowskiSachs: {
      const double m = ks_mass;
      const double tc = ks_coordinate_time(t, m);
      const double ar = std::sqrt((2.0 * m - tc) / tc);
      flow.blocks.push_back({1, 0, ar, m / (tc * tc * ar), 1.0});
      flow.blocks.push_back({2, 1, tc, -ar / tc, vol0});
      break;
    }
    case FamilyKind::Kasner: {
      const int n = dim();
      for (double p : kasner_p)
        flow.blocks.push_back({1, 0, std::pow(t / n, p), -n * p / t, 1.0});
      if (!flow.blocks.empty()) flow.blocks.front().vol0 = vol0;
      break;
    }
  }
  return flow;
}

MatrixFlow Family::matrix_at(double t) const {
  if (!has_matrix_form())
    throw std::invalid_argument("Family::matrix_at: only the matrix Kasner family");
  const int n = static_cast<int>(kasner_m.rows());
  Eigen::SelfAdjointEigenSolver<Matrix> es(kasner_m);
  Eigen::VectorXd powers = es.eigenvalues();
  for (int i = 0; i < n; ++i) powers[i] = std::pow(t / n, 2.0 * powers[i]);
  Matrix tm = es.eigenvectors() * powers.asDiagonal() * es.eigenvectors().transpose();
  MatrixFlow flow;
  flow.t = t;
  flow.hmat = kasner_href * tm;
  flow.kmat = -(n / t) * kasner_href * kasner_m * tm;
  flow.hmat = 0.5 * (flow.hmat + Matrix(flow.hmat.transpose()));
  flow.kmat = 0.5 * (flow.kmat + Matrix(flow.kmat.transpose()));
  return flow;
}

Family make_cone(int n, double vol0) {
  if (n < 2) throw std::invalid_argument("make_cone: dimension >= 2 required");
  Family f;
  f.kind = FamilyKind::Cone;
  f.cone_dim = n;
  f.vol0 = vol0;
  return f;
}

Family make_cone_torus(int cone_dim, int torus_dim, double vol0) {
  if (cone_dim < 2 || torus_dim < 1)
    throw std::invalid_argument("make_cone_torus: need cone dim >= 2 and torus dim >= 1");
  Family f;
  f.kind = FamilyKind::ConeTorus;
  f.cone_dim = cone_dim;
  f.torus_dim = torus_dim;
  f.vol0 = vol0;
  return f;
}

Family make_kantowski_sachs(double mass) {
  if (!(mass > 0.0)) throw std::invalid_argument("make_kantowski_sachs: mass must be positive");
  Family f;
  f.kind = FamilyKind::KantowskiSachs;
  f.ks_mass = mass;
  return f;
}

Family make_kasner(const std::vector<double>& p, double vol0) {
  double s1 = 0.0, s2 = 0.0;
  for (double v : p) {
    s1 += v;
    s2 += v * v;
  }
  if (std::abs(s1 - 1.0) > 1e-12 || std::abs(s2 - 1.0) > 1e-12)
    throw std::invalid_argument("make_kasner: exponents must satisfy sum p = sum p^2 = 1");
  Family f;
  f.kind = FamilyKind::Kasner;
  f.kasner_p = p;
  f.vol0 = vol0;
  return f;
}

Family make_kasner_matrix(const Matrix& m, const Matrix& href) {
  if ((m - m.transpose()).norm() > 1e-12 * (1.0 + m.norm()))
    throw std::invalid_argument("make_kasner_matrix: M must be symmetric");
  if (std::abs(m.trace() - 1.0) > 1e-12 || std::abs((m * m).trace() - 1.0) > 1e-12)
    throw std::invalid_argument("make_kasner_matrix: Tr M = Tr M^2 = 1 required");
  SpdMatrix check{};
  check.m = href;
  check.validate();
  if ((href * m - (href * m).transpose()).norm() > 1e-10 * (1.0 + href.norm()))
    throw std::invalid_argument("make_kasner_matrix: href * M must be symmetric");
  Family f;
  f.kind = FamilyKind::Kasner;
  f.kasner_m = m;
  f.kasner_href = href;
  // diagonal exponents for the block view when M is diagonal
  bool diag = true;
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j)
      if (i != j && std::abs(m(i, j)) > 0.0) diag = false;
  if (diag)
    for (int i = 0; i < m.rows(); ++i) f.kasner_p.push_back(m(i, i));
  return f;
}

CmcTrajectory evolve_cmc(const MultiWarpedFlow& start, double t_end, int steps) {
  start.validate();
  if (!(t_end > 0.0) || t_end == start.t)
    throw std::invalid_argument("evolve_cmc: bad time range");
  if (steps < 1) throw std::invalid_argument("evolve_cmc: steps >= 1 required");

  const int nb = static_cast<int>(start.blocks.size());
  const int n = start.dim();
  const double u0 = std::log(start.t);
  const double du = (std::log(t_end) - u0) / steps;

  // state y = (a_1..a_nb, kappa_1..kappa_nb), independent variable u = ln t
  std::vector<double> y(2 * nb);
  for (int i = 0; i < nb; ++i) {
    y[i] = start.blocks[i].a;
    y[nb + i] = start.blocks[i].kappa;
  }

  auto rhs = [&](double u, const std::vector<double>& state, std::vector<double>& dy) {
    const double t = std::exp(u);
    double h = 0.0, k2 = 0.0;
    for (int i = 0; i < nb; ++i) {
      h += start.blocks[i].n * state[nb + i];
      k2 += start.blocks[i].n * state[nb + i] * state[nb + i];
    }
    const double k0 = k2 - h * h / n;
    const double lapse = (n / (t * t)) / (k0 + h * h / n);
    for (int i = 0; i < nb; ++i) {
      const Block& b = start.blocks[i];
      const double ricci = b.eps * (b.n - 1) / (state[i] * state[i]);
      dy[i] = t * (-lapse * state[nb + i] * state[i]);
      dy[nb + i] = t * (lapse * h * state[nb + i] + lapse * ricci);
    }
  };

  CmcTrajectory traj;
  traj.samples.reserve(steps + 1);
  traj.samples.push_back(start);

  std::vector<double> k1(2 * nb), k2(2 * nb), k3(2 * nb), k4(2 * nb), work(2 * nb);
  double u = u0;
  for (int step = 0; step < steps; ++step) {
    rhs(u, y, k1);
    for (int i = 0; i < 2 * nb; ++i) work[i] = y[i] + 0.5 * du * k1[i];
    rhs(u + 0.5 * du, work, k2);
    for (int i = 0; i < 2 * nb; ++i) work[i] = y[i] + 0.5 * du * k2[i];
    rhs(u + 0.5 * du, work, k3);
    for (int i = 0; i < 2 * nb; ++i) work[i] = y[i] + du * k3[i];
    rhs(u + du, work, k4);
    for (int i = 0; i < 2 * nb; ++i)
      y[i] += du / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    u += du;

    MultiWarpedFlow flow = start;
    flow.t = std::exp(u);
    for (int i = 0; i < nb; ++i) {
      if (!(y[i] > 0.0)) {
        std::ostringstream msg;
        msg << "evolve_cmc: block " << i << " scale crossed zero near t = " << flow.t;
        throw std::runtime_error(msg.str());
      }
      flow.blocks[i].a = y[i];
      flow.blocks[i].kappa = y[nb + i];
    }
    const double resid = flow.constraint_residual();
    traj.max_constraint_residual = std::max(traj.max_constraint_residual, resid);
    traj.max_hubble_residual = std::max(traj.max_hubble_residual, flow.hubble_gauge_residual());
    if (resid > 1e-6) {
      std::ostringstream msg;
      msg << "evolve_cmc: constraint drift " << resid << " exceeded 1e-6 at t = " << flow.t;
      throw std::runtime_error(msg.str());
    }
    traj.samples.push_back(std::move(flow));
  }
  return traj;
}

CmcTrajectory sample_family(const Family& family, double t_lo, double t_hi, int count) {
  if (!(t_lo > 0.0) || !(t_hi > t_lo) || count < 2)
    throw std::invalid_argument("sample_family: bad sampling request");
  CmcTrajectory traj;
  traj.samples.reserve(count);
  const double u0 = std::log(t_lo), u1 = std::log(t_hi);
  for (int i = 0; i < count; ++i) {
    MultiWarpedFlow flow = family.at(std::exp(u0 + (u1 - u0) * i / (count - 1)));
    traj.max_constraint_residual =
        std::max(traj.max_constraint_residual, flow.constraint_residual());
    traj.samples.push_back(std::move(flow));
  }
  return traj;
}

Certificate monotone_quantities(const CmcTrajectory& traj) {
  const auto& samples = traj.samples;
  if (samples.size() < 5) throw std::invalid_argument("monotone_quantities: need >= 5 samples");
  const size_t m = samples.size();
  const int n = samples.front().dim();

  std::vector<double> u(m), vn(m), v1(m), rhs_n(m), rhs_1(m), lapse_v(m), w1(m);
  for (size_t i = 0; i < m; ++i) {
    const MultiWarpedFlow& f = samples[i];
    const double negh = -f.hubble();
    const double vol = f.volume();
    const double lap = f.lapse();
    u[i] = std::log(f.t);
    vn[i] = std::pow(negh, n) * vol;
    v1[i] = negh * vol;
    rhs_n[i] = -n * std::pow(negh, n - 1) * f.k0_norm2() * lap * vol;
    rhs_1[i] = -lap * f.scalar_curvature() * vol;
    lapse_v[i] = lap;
    w1[i] = rhs_1[i] * f.t;  // dV_1/du for the integral transcription
  }
  const double du = u[1] - u[0];
  for (size_t i = 1; i < m; ++i)
    if (std::abs((u[i] - u[i - 1]) - du) > 1e-9 * std::abs(du))
      throw std::invalid_argument("monotone_quantities: samples must be uniform in ln t");

  std::vector<double> dvn = fd5_first_uniform(vn, du);
  std::vector<double> dv1 = fd5_first_uniform(v1, du);

  double worst_n = 0.0, worst_1 = 0.0;
  for (size_t i = 2; i + 2 < m; ++i) {
    const double t = samples[i].t;
    const double fd_n = dvn[i] / t;  // d/dt = (1/t) d/du
    const double fd_1 = dv1[i] / t;
    worst_n = std::max(worst_n, std::abs(fd_n - rhs_n[i]) /
                                    std::max(std::abs(rhs_n[i]), 1e-12 * n * vn[i] / t));
    worst_1 = std::max(worst_1, std::abs(fd_1 - rhs_1[i]) /
                                    std::max(std::abs(rhs_1[i]), 1e-12 * n * v1[i] / t));
  }

  // verdicts against increasing t
  bool vn_nonincreasing = true, v1_nondecreasing = true, r_nonpositive = true;
  double lapse_min = lapse_v[0], lapse_max = lapse_v[0];
  for (size_t i = 0; i < m; ++i) {
    if (samples[i].scalar_curvature() > 1e-12) r_nonpositive = false;
    lapse_min = std::min(lapse_min, lapse_v[i]);
    lapse_max = std::max(lapse_max, lapse_v[i]);
  }
  const bool ascending = u[1] > u[0];
  for (size_t i = 1; i < m; ++i) {
    const size_t hi = ascending ? i : i - 1, lo = ascending ? i - 1 : i;
    if (vn[hi] - vn[lo] > 1e-9 * (1.0 + std::abs(vn[lo]))) vn_nonincreasing = false;
    if (v1[hi] - v1[lo] < -1e-9 * (1.0 + std::abs(v1[lo]))) v1_nondecreasing = false;
  }

  // Int (-t^2 R) L (vol/t) dt/t over the span equals V_1(t_hi) - V_1(t_lo)
  const double integral = integrate_simpson(w1, du);
  const double delta_v1 = v1.back() - v1.front();
  const double integral_residual =
      std::abs(integral - delta_v1) / std::max(std::abs(delta_v1), 1e-12 * (1.0 + v1[0]));

  Certificate cert;
  cert.name = "cmc-monotone-quantities";
  cert.metrics["max_rel_residual_vn"] = worst_n;
  cert.metrics["max_rel_residual_v1"] = worst_1;
  cert.metrics["vn_nonincreasing"] = vn_nonincreasing ? 1.0 : 0.0;
  cert.metrics["v1_nondecreasing"] = v1_nondecreasing ? 1.0 : 0.0;
  cert.metrics["r_nonpositive"] = r_nonpositive ? 1.0 : 0.0;
  cert.metrics["lapse_min"] = lapse_min;
  cert.metrics["lapse_max"] = lapse_max;
  cert.metrics["v1_integral_identity_residual"] = integral_residual;
  cert.metrics["vn_first"] = vn.front();
  cert.metrics["vn_last"] = vn.back();
  cert.metrics["v1_first"] = v1.front();
  cert.metrics["v1_last"] = v1.back();
  for (size_t i = 0; i < m; ++i) cert.samples.push_back({samples[i].t, v1[i]});
  cert.pass = vn_nonincreasing && (!r_nonpositive || v1_nondecreasing);
  cert.verdict = cert.pass ? "pass" : "fail";
  return cert;
}

Dvol0Result dvol0_limit(const Family& family, double t0, int levels) {
  Dvol0Result out;
  double prev = 0.0;
  bool r_nonpositive = true;
  for (int k = 0; k <= levels; ++k) {
    const double t = t0 * std::pow(2.0, -k);
    MultiWarpedFlow flow = family.at(t);
    if (flow.scalar_curvature() > 1e-12) r_nonpositive = false;
    const double v = -flow.hubble() * flow.volume();
    if (k > 0 && r_nonpositive && v > prev * (1.0 + 1e-12) + 1e-300)
      throw std::runtime_error(
          "dvol0_limit: (-H) vol increased toward t = 0 with R <= 0 (monotonicity violated)");
    out.sequence.push_back(v);
    prev = v;
  }
  out.value = richardson_limit(out.sequence, 2.0);
  out.nonzero = std::abs(out.value) > 1e-8 * (1.0 + std::abs(out.sequence.front()));
  return out;
}

Dvol0Result dvol0_limit(const CmcTrajectory& traj) {
  const auto& samples = traj.samples;
  if (samples.size() < 8) throw std::invalid_argument("dvol0_limit: need >= 8 samples");
  const double t_first = samples.front().t, t_last = samples.back().t;
  const double t_hi = std::max(t_first, t_last), t_lo = std::min(t_first, t_last);
  if (t_lo > 1e-4 * t_hi)
    throw std::invalid_argument("dvol0_limit: trajectory must reach t <= 1e-4 t0");

  // interpolate ln((-H) vol) on the ln t grid at the geometric sequence
  std::vector<double> lt(samples.size()), lv(samples.size());
  bool r_nonpositive = true;
  for (size_t i = 0; i < samples.size(); ++i) {
    lt[i] = std::log(samples[i].t);
    lv[i] = std::log(std::max(-samples[i].hubble() * samples[i].volume(), 1e-300));
    if (samples[i].scalar_curvature() > 1e-12) r_nonpositive = false;
  }
  if (lt.front() > lt.back()) {
    std::reverse(lt.begin(), lt.end());
    std::reverse(lv.begin(), lv.end());
  }
  // with R <= 0 the density (-H) vol is pointwise nondecreasing in t; a
  // violation in the samples signals a bug upstream
  if (r_nonpositive) {
    for (size_t i = 1; i < lv.size(); ++i)
      if (lv[i] < lv[i - 1] - 1e-12)
        throw std::runtime_error(
            "dvol0_limit: (-H) vol decreased with t although R <= 0 (monotonicity violated)");
  }
  auto value_at = [&](double t) {
    const double x = std::log(t);
    size_t j = 1;
    while (j + 1 < lt.size() && lt[j] < x) ++j;
    const double w = (x - lt[j - 1]) / (lt[j] - lt[j - 1]);
    return std::exp(lv[j - 1] + w * (lv[j] - lv[j - 1]));
  };

  Dvol0Result out;
  for (double t = t_hi; t >= t_lo * (1.0 + 1e-12); t *= 0.5) out.sequence.push_back(value_at(t));
  out.value = richardson_limit(out.sequence, 2.0);
  out.nonzero = std::abs(out.value) > 1e-6 * (1.0 + std::abs(out.sequence.front()));
  return out;
}

MultiWarpedFlow rescale(const MultiWarpedFlow& flow, double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("rescale: scale must be positive");
  MultiWarpedFlow out = flow;
  out.t = flow.t / scale;
  for (Block& b : out.blocks) {
    b.a /= scale;
    b.kappa *= scale;
  }
  return out;
}

CmcTrajectory rescale(const CmcTrajectory& traj, double scale) {
  CmcTrajectory out;
  out.max_constraint_residual = traj.max_constraint_residual;
  out.max_hubble_residual = traj.max_hubble_residual;
  out.samples.reserve(traj.samples.size());
  for (const auto& f : traj.samples) out.samples.push_back(rescale(f, scale));
  return out;
}

std::vector<double> block_exponents(const MultiWarpedFlow& flow) {
  // d ln a_i / d ln t = -t L kappa_i
  const double lap = flow.lapse();
  std::vector<double> p;
  for (const Block& b : flow.blocks) p.push_back(-flow.t * lap * b.kappa);
  return p;
}

KasnerReconstruction kasner_reconstruct(const std::vector<MatrixFlow>& history) {
  if (history.size() < 3) throw std::invalid_argument("kasner_reconstruct: need >= 3 times");
  // noisy histories are admitted (the reconstruction flags them); only the
  // structural requirements are enforced here
  for (const MatrixFlow& f : history) {
    SpdMatrix check{};
    check.m = f.hmat;
    check.validate();
    if ((f.kmat - f.kmat.transpose()).norm() > 1e-10 * (1.0 + f.kmat.norm()))
      throw std::invalid_argument("kasner_reconstruct: K must be symmetric");
  }

  std::vector<Matrix> ms;
  for (const MatrixFlow& f : history) {
    const double h = f.hubble();
    if (std::abs(h) < 1e-300) throw std::invalid_argument("kasner_reconstruct: H = 0");
    ms.push_back(Matrix(f.hmat.partialPivLu().solve(f.kmat)) / h);
  }

  KasnerReconstruction rec;
  rec.m = ms.front();
  rec.tr_m = rec.m.trace();
  rec.tr_m2 = (rec.m * rec.m).trace();
  rec.m_asymmetry = (rec.m - rec.m.transpose()).norm() / (1.0 + rec.m.norm());
  for (const Matrix& mi : ms)
    rec.m_variation = std::max(rec.m_variation, (mi - rec.m).norm());

  auto matrix_power = [&](const Matrix& m, double x) {
    // (-H)^x M via eigendecomposition of the (symmetric) M
    if ((m - m.transpose()).norm() <= 1e-10 * (1.0 + m.norm())) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + Matrix(m.transpose())));
      Eigen::VectorXd v = es.eigenvalues();
      for (int i = 0; i < v.size(); ++i) v[i] = std::pow(x, v[i]);
      return Matrix(es.eigenvectors() * v.asDiagonal() * es.eigenvectors().transpose());
    }
    return expm(Matrix(std::log(x) * m));
  };

  const double h0 = -history.front().hubble();
  rec.h_hat = history.front().hmat * matrix_power(2.0 * rec.m, h0);
  // h(t) prediction from the reconstructed (h_hat, M)
  for (const MatrixFlow& f : history) {
    const double nh = -f.hubble();
    Matrix pred = rec.h_hat * matrix_power(-2.0 * rec.m, nh);
    rec.h_prediction_residual =
        std::max(rec.h_prediction_residual, (pred - f.hmat).norm() / f.hmat.norm());
  }
  return rec;
}

CurvatureReport curvature_report(const Family& family, const std::vector<double>& t_samples) {
  CurvatureReport report;
  for (double t : t_samples) {
    if (!(t > 0.0)) throw std::invalid_argument("curvature_report: t must be positive");
    const double delta = 1e-3 * t;
    if (t - 4.0 * delta <= 0.0)
      throw std::invalid_argument("curvature_report: sample too close to t = 0");

    MultiWarpedFlow center = family.at(t);
    const int nb = static_cast<int>(center.blocks.size());
    const double lap = center.lapse();

    // beta_i = a_i'/(L a_i) on a 5-node stencil, then beta' at the center
    std::vector<std::vector<double>> beta(nb, std::vector<double>(5));
    for (int node = 0; node < 5; ++node) {
      const double tn = t + (node - 2) * delta;
      // 5-point first derivative of ln a at tn
      for (int i = 0; i < nb; ++i) {
        double stencil[5];
        for (int k = 0; k < 5; ++k)
          stencil[k] = std::log(family.at(tn + (k - 2) * delta).blocks[i].a);
        const double dlna =
            (-stencil[4] + 8.0 * stencil[3] - 8.0 * stencil[1] + stencil[0]) / (12.0 * delta);
        beta[i][node] = dlna / family.at(tn).lapse();
      }
    }

    double sum = 0.0;
    std::vector<double> beta_c(nb), q(nb);
    for (int i = 0; i < nb; ++i) {
      beta_c[i] = beta[i][2];
      const double dbeta =
          (-beta[i][4] + 8.0 * beta[i][3] - 8.0 * beta[i][1] + beta[i][0]) / (12.0 * delta);
      q[i] = dbeta / lap + beta_c[i] * beta_c[i];
    }
    for (int i = 0; i < nb; ++i) {
      const Block& bi = center.blocks[i];
      sum += bi.n * q[i] * q[i];
      if (bi.n >= 2) {
        const double kii = bi.eps / (bi.a * bi.a) + beta_c[i] * beta_c[i];
        sum += 0.5 * bi.n * (bi.n - 1) * kii * kii;
      }
      for (int j = i + 1; j < nb; ++j) {
        const double kij = beta_c[i] * beta_c[j];
        sum += bi.n * center.blocks[j].n * kij * kij;
      }
    }
    const double rm = 2.0 * std::sqrt(sum);
    report.samples.push_back({t, t * t * rm});
    report.type_i_constant = std::max(report.type_i_constant, t * t * rm);
  }
  return report;
}

CausalRadius causal_radius(const Family& family, int block_index, double t_lo, double t_hi) {
  if (!(t_hi > t_lo) || t_lo < 0.0)
    throw std::invalid_argument("causal_radius: need 0 <= t_lo < t_hi");
  const int nb = static_cast<int>(family.at(t_hi).blocks.size());
  if (block_index < 0 || block_index >= nb)
    throw std::invalid_argument("causal_radius: block index out of range");

  auto integrand = [&](double s) {
    MultiWarpedFlow f = family.at(s);
    return f.lapse() / f.blocks[block_index].a;
  };

  CausalRadius out;
  if (t_lo > 0.0) {
    out.value = integrate_adaptive(integrand, t_lo, t_hi, 1e-14 * integrand(t_hi) * (t_hi - t_lo));
    return out;
  }

  // local exponent of the integrand at t -> 0
  double q = 0.0;
  {
    const double eps = 1e-3;
    double probe = t_hi * 1e-6;
    for (int it = 0; it < 4; ++it) {
      q = -(std::log(integrand(probe * (1.0 + eps))) - std::log(integrand(probe / (1.0 + eps)))) /
          (2.0 * std::log1p(eps));
      probe *= 1e-2;
    }
  }
  out.divergence_exponent = q;
  if (q >= 1.0 - 1e-9) {
    out.divergent = true;
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }
  const double cut = t_hi * 1e-6;
  // power-law tail below the cut, exact for exact power integrands
  const double tail = integrand(cut) * cut / (1.0 - q);
  out.value = tail + integrate_adaptive(integrand, cut, t_hi, 1e-14 * integrand(t_hi) * t_hi);
  return out;
}

double causal_past_bound(const Family& family, double t_lo, double t_hi, double t_ref) {
  MultiWarpedFlow ref = family.at(t_ref);
  auto inv_f = [&](double s) {
    MultiWarpedFlow f = family.at(s);
    double worst = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < f.blocks.size(); ++i)
      worst = std::min(worst, f.blocks[i].a / ref.blocks[i].a);
    return 1.0 / worst;
  };
  return integrate_adaptive(inv_f, t_lo, t_hi, 1e-13 * inv_f(t_hi) * (t_hi - t_lo));
}

bool disjointness(const Family& family, int block_index, double separation, double lambda,
                  double t) {
  if (!(lambda > 1.0)) throw std::invalid_argument("disjointness: lambda > 1 required");
  return 2.0 * causal_radius(family, block_index, t / lambda, t).value < separation;
}

Certificate kasner_limit_check(const Family& family, double lambda,
                               const std::vector<double>& scales,
                               std::optional<double> mass_override) {
  if (!(lambda > 1.0)) throw std::invalid_argument("kasner_limit_check: lambda > 1 required");
  if (scales.size() < 2)
    throw std::invalid_argument("kasner_limit_check: need a decreasing scale sequence");

  double mass;
  bool vacuous;
  if (mass_override) {
    mass = *mass_override;
    vacuous = !(std::abs(mass) > 0.0);
  } else {
    Dvol0Result d = dvol0_limit(family, scales.front());
    mass = d.value;
    vacuous = !d.nonzero;
  }

  Certificate cert;
  cert.name = "cmc-kasner-limit";
  cert.metrics["lambda"] = lambda;
  cert.metrics["dvol0_mass"] = mass;
  if (vacuous) {
    cert.verdict = "vacuous";
    cert.note = "dvol0 = 0; the rescaling-limit statement carries no information";
    return cert;
  }

  const int n = family.dim();
  const int quad_points = 129;
  double first_total = 0.0, last_total = 0.0;
  for (size_t si = 0; si < scales.size(); ++si) {
    const double s = scales[si];
    std::vector<double> f_l(quad_points), f_k(quad_points), f_r(quad_points);
    const double h = (lambda - 1.0 / lambda) / (quad_points - 1);
    for (int i = 0; i < quad_points; ++i) {
      const double u = 1.0 / lambda + h * i;
      MultiWarpedFlow flow = family.at(s * u);
      if (flow.scalar_curvature() > 1e-12)
        throw std::runtime_error("kasner_limit_check: R > 0 along the flow (hypothesis violated)");
      f_l[i] = std::abs(flow.lapse() - 1.0 / n);
      f_k[i] = std::abs(s * s * flow.k_norm2() - n * n / (u * u));
      f_r[i] = std::abs(s * s * flow.scalar_curvature());
    }
    const double il = mass * integrate_simpson(f_l, h);
    const double ik = mass * integrate_simpson(f_k, h);
    const double ir = mass * integrate_simpson(f_r, h);
    cert.samples.push_back({s, il + ik + ir});
    if (si == 0) first_total = il + ik + ir;
    if (si + 1 == scales.size()) {
      last_total = il + ik + ir;
      cert.metrics["lapse_integral"] = il;
      cert.metrics["k2_integral"] = ik;
      cert.metrics["r_integral"] = ir;
    }
  }
  const bool converged =
      last_total <= 1e-10 * (1.0 + std::abs(mass)) || last_total <= 0.25 * first_total;
  cert.metrics["first_total"] = first_total;
  cert.metrics["last_total"] = last_total;
  cert.verdict = converged ? "converging" : "not-converging";
  cert.pass = converged;
  return cert;
}

}  // namespace vacsing::cmc
