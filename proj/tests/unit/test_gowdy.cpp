#include <cmath>
#include <cstdio>
#include <doctest.h>

#include "vacsing/gowdy.hpp"
#include "vacsing/rng.hpp"
#include "vacsing/series.hpp"

using namespace vacsing;
using namespace vacsing::gowdy;

namespace {

double rel_diff(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

}  // namespace

TEST_CASE("init_from_pq: flat point and determinant identity") {
  CircleGrid grid(32, 2.0 * M_PI, DerivScheme::Spectral);
  Field zero(grid.size(), 0.0);
  GowdyState st = init_from_pq(zero, zero, zero, zero, 0.7, grid);
  const double time_T = std::exp(-0.7);
  for (int j = 0; j < grid.size(); ++j)
    CHECK((st.g.at(j) - time_T * Matrix::Identity(2, 2)).norm() < 1e-15);

  // det G = T^2 for random (P, Q) is an identity of the parametrization
  CounterRng rng(5);
  Field p(grid.size()), q(grid.size());
  for (int j = 0; j < grid.size(); ++j) {
    p[j] = rng.uniform(2 * j, -1, 1);
    q[j] = rng.uniform(2 * j + 1, -1, 1);
  }
  GowdyState st2 = init_from_pq(p, q, zero, zero, 0.3, grid);
  CHECK(st2.det_residual() < 1e-12);
  CHECK(st2.trace_atilde_residual() < 1e-13);
}

TEST_CASE("init_from_pq round trip to 1e-12") {
  CircleGrid grid(64, 2.0 * M_PI, DerivScheme::Spectral);
  CounterRng rng(6);
  Field p(grid.size()), q(grid.size()), ps(grid.size()), qs(grid.size());
  for (int j = 0; j < grid.size(); ++j) {
    p[j] = rng.uniform(4 * j, -1, 1);
    q[j] = rng.uniform(4 * j + 1, -1, 1);
    ps[j] = rng.uniform(4 * j + 2, -1, 1);
    qs[j] = rng.uniform(4 * j + 3, -1, 1);
  }
  GowdyState st = init_from_pq(p, q, ps, qs, 0.2, grid);
  PqFields back = extract_pq(st);
  for (int j = 0; j < grid.size(); ++j) {
    CHECK(back.p[j] == doctest::Approx(p[j]).epsilon(1e-12));
    CHECK(back.q[j] == doctest::Approx(q[j]).epsilon(1e-12));
    CHECK(back.p_s[j] == doctest::Approx(ps[j]).epsilon(1e-11));
    CHECK(back.q_s[j] == doctest::Approx(qs[j]).epsilon(1e-11));
  }
}

TEST_CASE("homogeneous power-law data evolves along the geodesic to 1e-10 over span 3") {
  CircleGrid grid(16, 2.0 * M_PI, DerivScheme::FD4);
  GowdyState st = vtd_state(grid, {1.0, 0.0}, 0.0);
  st.validate();

  EvolveOptions opts;
  opts.max_ds = 1e-3;
  Trajectory traj = evolve(st, 3.0, opts);
  const GowdyState& fin = traj.outputs.back();

  SpdMatrix g0{Matrix(st.g.at(0))};
  Matrix w = st.atilde.at(0);
  Matrix expect = vtd_geodesic(g0, w, 3.0);
  for (int j = 0; j < grid.size(); ++j) CHECK(rel_diff(fin.g.at(j), expect) < 1e-10);
}

TEST_CASE("polarized Bessel wave matched to 1e-6 at n_y = 512") {
  const int k = 2;
  CircleGrid grid(512, 2.0 * M_PI, DerivScheme::Spectral);
  GowdyState st = bessel_state(grid, k, 0.0);
  st.validate();

  EvolveOptions opts;
  Trajectory traj = evolve(st, 1.5, opts);
  const GowdyState& fin = traj.outputs.back();
  PqFields f = extract_pq(fin);
  const double time_T = fin.time_T();
  double worst = 0.0;
  for (int j = 0; j < grid.size(); ++j)
    worst = std::max(worst, std::abs(f.p[j] - bessel_solution_p(k, time_T, grid.point(j))));
  CHECK(worst < 1e-6);
  for (double v : f.q) CHECK(std::abs(v) < 1e-10);  // stays polarized
}

TEST_CASE("trace constraints held to 1e-9 over 1e4 steps of random N = 3 data") {
  CircleGrid grid(64, 2.0 * M_PI, DerivScheme::Spectral);
  GowdyState st = random_band_limited_state(grid, 3, 0.0, 99, 0.25, 2);
  st.validate();

  EvolveOptions opts;
  opts.max_ds = 2e-4;  // forces ~1e4 steps over the span
  Trajectory traj = evolve(st, 2.0, opts);
  CHECK(traj.steps >= 10000);
  const GowdyState& fin = traj.outputs.back();
  CHECK(fin.trace_atilde_residual() < 1e-9);
  CHECK(fin.trace_b_residual() < 1e-9);
  CHECK(fin.det_residual() < 1e-8);
  CHECK(fin.atilde_self_adjoint_defect() < 1e-9);
}

TEST_CASE("energies: closed forms and the Etilde = T^2 Ehat identity") {
  CircleGrid grid(32, 2.0 * M_PI, DerivScheme::Spectral);

  // G = T Id at N = 2: Ahat = (1/T) Id, Ehat = L_c / T^2, Etilde = L_c
  Field zero(grid.size(), 0.0);
  GowdyState flat = init_from_pq(zero, zero, zero, zero, 0.4, grid);
  GowdyEnergies en = energies(flat);
  const double time_T = flat.time_T();
  CHECK(en.ehat == doctest::Approx(grid.length() / (time_T * time_T)).epsilon(1e-12));
  CHECK(en.etilde == doctest::Approx(grid.length()).epsilon(1e-12));

  // VTD data with q = (1, 0): B = 0 and Ahat = diag(2 q_i / T)
  GowdyState vtd = vtd_state(grid, {1.0, 0.0}, 0.3);
  GowdyEnergies en2 = energies(vtd);
  const double t2 = vtd.time_T();
  CHECK(en2.ehat == doctest::Approx(0.5 * (4.0 / (t2 * t2)) * grid.length()).epsilon(1e-12));

  // Etilde / Ehat = T^2 on random states
  GowdyState rnd = random_band_limited_state(grid, 2, 0.1, 3, 0.5, 4);
  GowdyEnergies en3 = energies(rnd);
  CHECK(en3.etilde / en3.ehat ==
        doctest::Approx(rnd.time_T() * rnd.time_T()).epsilon(1e-13));
}

TEST_CASE("energy identities: homogeneous trajectory has zero Etilde residual") {
  CircleGrid grid(16, 2.0 * M_PI, DerivScheme::FD4);
  GowdyState st = vtd_state(grid, {0.6, 0.4}, 0.0);
  EvolveOptions opts;
  opts.output_count = 21;
  Trajectory traj = evolve(st, 2.0, opts);
  Certificate cert = energy_identities(traj);
  // the exact identity has both sides zero; the reported residual is the
  // finite-difference roundoff on the constant Etilde
  CHECK(cert.metrics.at("max_abs_residual_etilde") < 1e-11);
  CHECK(cert.metrics.at("etilde_drift") < 1e-12);
  CHECK(cert.metrics.at("etilde_monotone") == 1.0);
  CHECK(cert.metrics.at("ehat_monotone") == 1.0);
}

TEST_CASE("energy identities: residuals < 1e-4 at n_y = 256 with 4th-order decay") {
  auto residuals = [&](int n, int outputs) {
    CircleGrid grid(n, 2.0 * M_PI, DerivScheme::FD4);
    GowdyState st = random_band_limited_state(grid, 2, 0.0, 12345, 0.25, 3);
    EvolveOptions opts;
    opts.max_ds = 0.5 * grid.dy();
    opts.output_count = outputs;
    Trajectory traj = evolve(st, 2.0, opts);
    Certificate cert = energy_identities(traj);
    return std::array<double, 2>{cert.metrics.at("max_rel_residual_ehat"),
                                 cert.metrics.at("max_rel_residual_etilde")};
  };
  auto r256 = residuals(256, 55);
  auto r512 = residuals(512, 109);  // nested outputs at half the spacing
  CHECK(r256[0] < 1e-4);
  CHECK(r256[1] < 1e-4);
  // the identity residual of a run is dominated by the Etilde side; the
  // worst-of-both decays at the order of the scheme
  CHECK(std::max(r256[0], r256[1]) / std::max(r512[0], r512[1]) > 12.0);
}

TEST_CASE("running integral of T Int Tr(B^2) dT matches the Etilde increment") {
  CircleGrid grid(128, 2.0 * M_PI, DerivScheme::Spectral);
  GowdyState st = random_band_limited_state(grid, 2, 0.0, 77, 0.3, 3);
  EvolveOptions opts;
  opts.output_count = 201;
  Trajectory traj = evolve(st, 2.0, opts);

  // Simpson in s of e^{-2s} Int Tr(B^2) dy equals Etilde(s0) - Etilde(s_end)
  std::vector<double> integrand;
  for (const GowdyState& out : traj.outputs) {
    MatrixField b = SpdField{out.g}.log_derivative(out.grid);
    double ib = 0.0;
    for (int j = 0; j < out.grid.size(); ++j) ib += (b.at(j) * b.at(j)).trace();
    integrand.push_back(std::exp(-2.0 * out.s) * ib * out.grid.dy());
  }
  const double ds = traj.outputs[1].s - traj.outputs[0].s;
  const double integral = integrate_simpson(integrand, ds);
  const double drop =
      energies(traj.outputs.front()).etilde - energies(traj.outputs.back()).etilde;
  CHECK(integral == doctest::Approx(drop).epsilon(1e-6));
}

TEST_CASE("avtd defect: homogeneous data gives zero, trace vanishes pointwise") {
  CircleGrid grid(32, 2.0 * M_PI, DerivScheme::Spectral);
  GowdyState st = vtd_state(grid, {0.25, 0.25, 0.5}, 0.5);
  SelfAdjointSection defect = avtd_defect(st);
  CHECK(defect.s.max_frobenius() < 1e-12);

  CircleGrid fine(128, 2.0 * M_PI, DerivScheme::Spectral);
  GowdyState rnd = random_band_limited_state(fine, 2, 0.2, 8, 0.3, 2);
  SelfAdjointSection d2 = avtd_defect(rnd);
  SpdField gf{rnd.g};
  MatrixField sigma = d2.to_sigma(gf);
  for (int j = 0; j < fine.size(); ++j) CHECK(std::abs(sigma.at(j).trace()) < 1e-10);
}

TEST_CASE("avtd defect cross-checked against finite differences of Atilde in s") {
  const int k = 1;
  CircleGrid grid(128, 2.0 * M_PI, DerivScheme::Spectral);
  GowdyState st = bessel_state(grid, k, 0.1);
  EvolveOptions opts;
  opts.max_ds = 1e-3;
  opts.output_count = 401;
  Trajectory traj = evolve(st, 0.9, opts);

  const int mid = 200;
  const double ds = traj.outputs[1].s - traj.outputs[0].s;
  const GowdyState& sm = traj.outputs[mid - 1];
  const GowdyState& s0 = traj.outputs[mid];
  const GowdyState& sp = traj.outputs[mid + 1];
  SelfAdjointSection defect = avtd_defect(s0);
  SpdField gf{s0.g};
  MatrixField sigma = defect.to_sigma(gf);
  double worst = 0.0;
  for (int j = 0; j < grid.size(); ++j) {
    Matrix fd = (Matrix(sp.atilde.at(j)) - Matrix(sm.atilde.at(j))) / (2.0 * ds);
    worst = std::max(worst, (fd - sigma.at(j)).norm());
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("decay certificate: homogeneous data is trivially convergent") {
  CircleGrid grid(16, 2.0 * M_PI, DerivScheme::FD4);
  GowdyState st = vtd_state(grid, {0.7, 0.3}, 0.0);
  EvolveOptions opts;
  opts.output_count = 33;
  Trajectory traj = evolve(st, 3.5, opts);
  Certificate cert = decay_certificate(traj);
  CHECK(cert.verdict == "convergent-so-far");
  CHECK(cert.metrics.at("integral") == 0.0);
}

TEST_CASE("decay certificate: polarized wave decays with tail exponent <= -1") {
  CircleGrid grid(256, 2.0 * M_PI, DerivScheme::Spectral);
  GowdyState st = bessel_state(grid, 1, 0.0);
  EvolveOptions opts;
  opts.output_count = 41;
  Trajectory traj = evolve(st, 4.0, opts);
  Certificate cert = decay_certificate(traj);
  CHECK(cert.verdict == "convergent-so-far");
  CHECK(*cert.fitted_exponent <= -1.0);
  CHECK(cert.metrics.at("final_efold_fraction") < 0.01);
}

TEST_CASE("weak form: identity section vanishes to 1e-10") {
  CircleGrid grid(64, 2.0 * M_PI, DerivScheme::Spectral);
  GowdyState st = random_band_limited_state(grid, 2, 0.0, 21, 0.3, 3);
  EvolveOptions opts;
  opts.output_count = 151;
  Trajectory traj = evolve(st, 3.0, opts);
  TestSection section;
  section.s_lo = 0.5;
  section.s_hi = 2.5;
  Certificate cert = weak_form_check(traj, section);
  CHECK(cert.metrics.at("rel_mismatch") < 1e-10);
}

TEST_CASE("weak form: homogeneous trajectory, profile section, both sides vanish") {
  CircleGrid grid(32, 2.0 * M_PI, DerivScheme::Spectral);
  GowdyState st = vtd_state(grid, {0.8, 0.2}, 0.0);
  EvolveOptions opts;
  opts.output_count = 151;
  Trajectory traj = evolve(st, 3.0, opts);

  TestSection section;
  section.s_lo = 0.5;
  section.s_hi = 2.5;
  section.profile = MatrixField(grid.size(), 2);
  for (int j = 0; j < grid.size(); ++j) {
    Matrix s0(2, 2);
    const double y = grid.point(j);
    s0 << std::cos(y), 0.2 * std::sin(y), 0.2 * std::sin(y), -0.3 * std::cos(2 * y);
    section.profile.at(j) = s0;
  }
  Certificate cert = weak_form_check(traj, section);
  CHECK(std::abs(cert.metrics.at("rhs")) < 1e-12);
  CHECK(cert.metrics.at("rel_mismatch") < 1e-8);
}

TEST_CASE("weak form: random data and band-limited section, mismatch < 1e-5 at n_y = 256") {
  CircleGrid grid(256, 2.0 * M_PI, DerivScheme::FD4);
  GowdyState st = random_band_limited_state(grid, 2, 0.0, 31, 0.35, 4);
  EvolveOptions opts;
  opts.output_count = 201;
  Trajectory traj = evolve(st, 4.0, opts);

  TestSection section;
  section.s_lo = 0.6;
  section.s_hi = 3.4;
  section.profile = MatrixField(grid.size(), 2);
  for (int j = 0; j < grid.size(); ++j) {
    const double y = grid.point(j);
    Matrix s0(2, 2);
    s0(0, 0) = std::cos(y) + 0.4 * std::sin(2 * y);
    s0(1, 1) = -0.7 * std::cos(y);
    s0(0, 1) = s0(1, 0) = 0.3 * std::sin(y) - 0.2 * std::cos(3 * y);
    section.profile.at(j) = s0;
  }
  Certificate cert = weak_form_check(traj, section);
  CHECK(cert.metrics.at("rel_mismatch") < 1e-5);

  TestSection bad = section;
  bad.s_hi = 4.5;
  CHECK_THROWS(weak_form_check(traj, bad));  // not compactly supported
}

TEST_CASE("twist density: 2 dy at all times, negative control fails") {
  CircleGrid grid(64, 2.0 * M_PI, DerivScheme::Spectral);
  GowdyState st = random_band_limited_state(grid, 2, 0.0, 41, 0.12, 1);
  EvolveOptions opts;
  opts.output_count = 9;
  Trajectory traj = evolve(st, 1.0, opts);
  Certificate ok = twist_density_check(traj);
  CHECK(ok.pass);
  CHECK(ok.metrics.at("max_deviation") < 1e-10);
  CHECK(ok.metrics.at("total_mass") == doctest::Approx(2.0 * grid.length()));

  // synthetically violate the determinant constraint
  Trajectory broken = traj;
  for (int j = 0; j < grid.size(); ++j) broken.outputs[1].g.at(j) *= 1.001;
  Certificate bad = twist_density_check(broken);
  CHECK_FALSE(bad.pass);
}

TEST_CASE("snapshot round trip is exact") {
  CircleGrid grid(32, 2.0 * M_PI, DerivScheme::FD4);
  GowdyState st = random_band_limited_state(grid, 3, 0.3, 55, 0.3, 3);
  const std::string path = "/tmp/vacsing_test_snapshot.gowdy";
  save_snapshot(st, path);
  GowdyState back = load_snapshot(path);
  CHECK(back.dim == st.dim);
  CHECK(back.s == st.s);
  CHECK(back.grid.size() == st.grid.size());
  CHECK(back.g.raw() == st.g.raw());
  CHECK(back.atilde.raw() == st.atilde.raw());
  std::remove(path.c_str());
}

TEST_CASE("evolve input validation") {
  CircleGrid grid(16, 2.0 * M_PI, DerivScheme::FD4);
  GowdyState st = vtd_state(grid, {0.5, 0.5}, 0.0);
  EvolveOptions opts;
  CHECK_THROWS(evolve(st, 0.0, opts));  // empty span
  opts.cfl = 0.0;
  CHECK_THROWS(evolve(st, 1.0, opts));
  opts.cfl = 0.5;
  opts.output_count = 1;
  CHECK_THROWS(evolve(st, 1.0, opts));
}

TEST_CASE("bessel oracle error drops at the scheme order under refinement") {
  auto bessel_error = [&](int n) {
    CircleGrid grid(n, 2.0 * M_PI, DerivScheme::FD4);
    GowdyState st = bessel_state(grid, 2, 0.0);
    EvolveOptions opts;
    opts.max_ds = 0.25 * grid.dy();  // keep the time error at the spatial order
    Trajectory traj = evolve(st, 1.0, opts);
    PqFields f = extract_pq(traj.outputs.back());
    const double time_T = traj.outputs.back().time_T();
    double worst = 0.0;
    for (int j = 0; j < grid.size(); ++j)
      worst = std::max(worst, std::abs(f.p[j] - bessel_solution_p(2, time_T, grid.point(j))));
    return worst;
  };
  const double e128 = bessel_error(128), e256 = bessel_error(256);
  CHECK(e128 / e256 >= 12.0);
}

TEST_CASE("evolution away from the singularity follows the geodesic too") {
  CircleGrid grid(16, 2.0 * M_PI, DerivScheme::FD4);
  GowdyState st = vtd_state(grid, {0.75, 0.25}, 1.0);
  EvolveOptions opts;
  opts.max_ds = 1e-3;
  Trajectory traj = evolve(st, 0.0, opts);  // toward T = 1
  SpdMatrix g0{Matrix(st.g.at(0))};
  Matrix expect = vtd_geodesic(g0, Matrix(st.atilde.at(0)), -1.0);
  CHECK((Matrix(traj.outputs.back().g.at(0)) - expect).norm() < 1e-10 * expect.norm());
  CHECK(traj.outputs.back().s == 0.0);
}
