#include <cmath>
#include <doctest.h>

#include "vacsing/cmcflow.hpp"

using namespace vacsing;
using namespace vacsing::cmc;

TEST_CASE("kasner family: lapse, curvature and |K|^2 closed forms") {
  Family f = make_kasner({2.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0});
  for (double t : {0.3, 1.0, 4.0}) {
    MultiWarpedFlow flow = f.at(t);
    flow.validate();
    CHECK(flow.lapse() == doctest::Approx(1.0 / 3.0).epsilon(1e-13));
    CHECK(flow.scalar_curvature() == 0.0);
    CHECK(flow.k_norm2() == doctest::Approx(9.0 / (t * t)).epsilon(1e-13));
    CHECK(flow.hubble() == doctest::Approx(-3.0 / t).epsilon(1e-13));
  }
  CHECK_THROWS(make_kasner({0.5, 0.5, 0.5}));  // constraint violated
}

TEST_CASE("cone family: H = -n/t and (-H)^n vol constant in t") {
  Family f = make_cone(3);
  const MultiWarpedFlow a = f.at(0.2), b = f.at(2.0);
  a.validate();
  b.validate();
  CHECK(a.lapse() == doctest::Approx(1.0).epsilon(1e-13));
  const double va = std::pow(-a.hubble(), 3) * a.volume();
  const double vb = std::pow(-b.hubble(), 3) * b.volume();
  CHECK(va == doctest::Approx(vb).epsilon(1e-13));
}

TEST_CASE("kantowski-sachs family satisfies the constraint in Hubble time") {
  Family f = make_kantowski_sachs(1.0);
  for (double t : {1e-3, 0.1, 1.0, 10.0}) {
    MultiWarpedFlow flow = f.at(t);
    CHECK(flow.constraint_residual() < 1e-9);
    CHECK(flow.hubble_gauge_residual() < 1e-10);
  }
}

TEST_CASE("kantowski-sachs rescaling limit approaches the (2/3, 2/3, -1/3) exponents") {
  Family f = make_kantowski_sachs(1.0);
  MultiWarpedFlow flow = f.at(1e-4);
  std::vector<double> p = block_exponents(flow);
  // block 0 is the 1-dim interior direction, block 1 the 2-sphere
  CHECK(std::abs(p[0] - (-1.0 / 3.0)) < 1e-3);
  CHECK(std::abs(p[1] - 2.0 / 3.0) < 1e-3);
}

TEST_CASE("evolve_cmc reproduces the Kasner closed form to 1e-9 over a decade") {
  Family f = make_kasner({2.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0});
  CmcTrajectory traj = evolve_cmc(f.at(1.0), 0.1, 2000);
  const MultiWarpedFlow& last = traj.samples.back();
  MultiWarpedFlow expect = f.at(last.t);
  for (size_t i = 0; i < last.blocks.size(); ++i) {
    CHECK(last.blocks[i].a == doctest::Approx(expect.blocks[i].a).epsilon(1e-9));
    CHECK(last.blocks[i].kappa == doctest::Approx(expect.blocks[i].kappa).epsilon(1e-9));
  }
  CHECK(traj.max_hubble_residual < 1e-10);
}

TEST_CASE("evolve_cmc keeps the cone exactly self-similar") {
  Family f = make_cone(3);
  CmcTrajectory traj = evolve_cmc(f.at(1.0), 0.1, 6000);
  for (const auto& s : traj.samples) {
    CHECK(s.blocks[0].a == doctest::Approx(s.t).epsilon(1e-10));
    CHECK(s.lapse() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("evolve_cmc matches the Kantowski-Sachs closed form to 1e-7 over a decade") {
  Family f = make_kantowski_sachs(1.0);
  const double t1 = 0.05;
  CmcTrajectory traj = evolve_cmc(f.at(t1), t1 / 10.0, 4000);
  const MultiWarpedFlow& last = traj.samples.back();
  MultiWarpedFlow expect = f.at(last.t);
  for (size_t i = 0; i < last.blocks.size(); ++i)
    CHECK(last.blocks[i].a == doctest::Approx(expect.blocks[i].a).epsilon(1e-7));
}

TEST_CASE("monotone quantities on the exact families") {
  // cone: V_n constant, both sides of the identity vanish
  {
    Certificate cert = monotone_quantities(sample_family(make_cone(3), 0.1, 1.0, 129));
    CHECK(cert.metrics.at("vn_nonincreasing") == 1.0);
    CHECK(std::abs(cert.metrics.at("vn_first") - cert.metrics.at("vn_last")) <
          1e-10 * cert.metrics.at("vn_first"));
  }
  // kasner: R = 0 so V_1 is constant, V_n strictly decreasing
  {
    Certificate cert =
        monotone_quantities(sample_family(make_kasner({2. / 3, 2. / 3, -1. / 3}), 0.1, 1.0, 129));
    CHECK(std::abs(cert.metrics.at("v1_first") - cert.metrics.at("v1_last")) <
          1e-10 * cert.metrics.at("v1_first"));
    CHECK(cert.metrics.at("vn_last") < cert.metrics.at("vn_first"));
  }
  // cone x torus: R < 0, V_1 strictly increasing, residuals < 1e-6
  {
    Certificate cert =
        monotone_quantities(sample_family(make_cone_torus(2, 1), 0.1, 1.0, 513));
    CHECK(cert.metrics.at("v1_nondecreasing") == 1.0);
    CHECK(cert.metrics.at("v1_last") > cert.metrics.at("v1_first"));
    CHECK(cert.metrics.at("max_rel_residual_vn") < 1e-6);
    CHECK(cert.metrics.at("max_rel_residual_v1") < 1e-6);
    CHECK(cert.metrics.at("v1_integral_identity_residual") < 1e-8);
  }
}

TEST_CASE("lapse bounds 1/n <= L <= 1 along R <= 0 trajectories") {
  for (const Family& f : {make_cone(3), make_cone_torus(2, 1),
                          make_kasner({2. / 3, 2. / 3, -1. / 3})}) {
    Certificate cert = monotone_quantities(sample_family(f, 0.05, 1.0, 65));
    const int n = f.dim();
    CHECK(cert.metrics.at("r_nonpositive") == 1.0);
    CHECK(cert.metrics.at("lapse_min") >= 1.0 / n - 1e-12);
    CHECK(cert.metrics.at("lapse_max") <= 1.0 + 1e-12);
  }
}

TEST_CASE("dvol0 limits: kasner nonzero, cones zero") {
  Dvol0Result kasner = dvol0_limit(make_kasner({2. / 3, 2. / 3, -1. / 3}, 2.0), 1.0);
  // det h = (t/n)^2 det href, so (-H) vol = n vol0 (t/n)/t = vol0
  CHECK(kasner.nonzero);
  CHECK(kasner.value == doctest::Approx(2.0).epsilon(1e-10));

  Dvol0Result cone = dvol0_limit(make_cone(3), 1.0);
  CHECK_FALSE(cone.nonzero);

  Dvol0Result ct = dvol0_limit(make_cone_torus(2, 1), 1.0);
  CHECK_FALSE(ct.nonzero);
}

TEST_CASE("rescaling: cone fixed point, composition law, Hubble gauge preserved") {
  Family cone = make_cone(3);
  MultiWarpedFlow flow = cone.at(0.7);
  MultiWarpedFlow scaled = rescale(flow, 3.0);
  // self-similar: the rescaled state equals the family at the rescaled time
  MultiWarpedFlow expect = cone.at(flow.t / 3.0);
  CHECK(scaled.t == doctest::Approx(expect.t));
  CHECK(scaled.blocks[0].a == doctest::Approx(expect.blocks[0].a).epsilon(1e-14));
  CHECK(scaled.blocks[0].kappa == doctest::Approx(expect.blocks[0].kappa).epsilon(1e-14));
  CHECK(scaled.hubble_gauge_residual() < 1e-13);

  Family kas = make_kasner({2. / 3, 2. / 3, -1. / 3});
  MultiWarpedFlow k0 = kas.at(1.3);
  MultiWarpedFlow once = rescale(rescale(k0, 2.0), 3.0);
  MultiWarpedFlow direct = rescale(k0, 6.0);
  CHECK(once.t == doctest::Approx(direct.t).epsilon(1e-15));
  for (size_t i = 0; i < once.blocks.size(); ++i) {
    CHECK(once.blocks[i].a == doctest::Approx(direct.blocks[i].a).epsilon(1e-15));
    CHECK(once.blocks[i].kappa == doctest::Approx(direct.blocks[i].kappa).epsilon(1e-15));
  }
  // kasner rescaling preserves the exponents
  std::vector<double> p0 = block_exponents(k0);
  std::vector<double> p1 = block_exponents(rescale(k0, 100.0));
  for (size_t i = 0; i < p0.size(); ++i) CHECK(p0[i] == doctest::Approx(p1[i]).epsilon(1e-12));
}

TEST_CASE("kasner reconstruction: synthetic histories round trip") {
  Matrix m(3, 3);
  m << 2. / 3, 0, 0, 0, 2. / 3, 0, 0, 0, -1. / 3;
  // non-diagonal reference commuting with M inside its eigenblocks
  Matrix href(3, 3);
  href << 2.0, 0.4, 0.0, 0.4, 1.5, 0.0, 0.0, 0.0, 1.0;
  Family f = make_kasner_matrix(m, href);

  std::vector<MatrixFlow> hist;
  for (double t : {1.0, 0.5, 0.25, 0.125}) hist.push_back(f.matrix_at(t));
  KasnerReconstruction rec = kasner_reconstruct(hist);
  CHECK((rec.m - m).norm() < 1e-10);
  CHECK(rec.tr_m == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rec.tr_m2 == doctest::Approx(1.0).epsilon(1e-9));
  CHECK((rec.h_hat - href).norm() < 1e-10 * href.norm());
  CHECK(rec.m_variation < 1e-10);
  CHECK(rec.h_prediction_residual < 1e-10);

  // perturbed history: the M-variation flags the noise scale
  std::vector<MatrixFlow> noisy = hist;
  for (size_t i = 0; i < noisy.size(); ++i) {
    noisy[i].hmat(0, 0) *= (1.0 + 1e-3 * (i % 2 ? 1 : -1));
    noisy[i].hmat(1, 1) *= (1.0 - 5e-4 * (i % 2 ? 1 : -1));
  }
  KasnerReconstruction rec2 = kasner_reconstruct(noisy);
  CHECK(rec2.m_variation > 1e-5);
  CHECK(rec2.m_variation < 1e-1);
}

TEST_CASE("curvature report: flat and generic Kasner against the tensor oracle") {
  // M = diag(1, 0, 0) is locally flat spacetime
  {
    Family f = make_kasner({1.0, 0.0, 0.0});
    CurvatureReport rep = curvature_report(f, {0.5, 1.0, 2.0});
    CHECK(rep.type_i_constant < 1e-8);
  }
  // generic exponents: t^2 |Rm|_T = 2 n^2 sqrt(sum p^2(p-1)^2 + sum_{a<b} p_a^2 p_b^2)
  {
    const std::vector<double> p{2. / 3, 2. / 3, -1. / 3};
    Family f = make_kasner(p);
    double sum = 0.0;
    for (double v : p) sum += v * v * (v - 1.0) * (v - 1.0);
    for (size_t a = 0; a < 3; ++a)
      for (size_t b = a + 1; b < 3; ++b) sum += p[a] * p[a] * p[b] * p[b];
    const double oracle = 2.0 * 9.0 * std::sqrt(sum);
    CurvatureReport rep = curvature_report(f, {0.5, 2.0});
    CHECK(rep.samples[0][1] == doctest::Approx(oracle).epsilon(1e-6));
    CHECK(rep.samples[1][1] == doctest::Approx(rep.samples[0][1]).epsilon(1e-6));
  }
  // cone over the hyperbolic plane section: flat spacetime, t-independent
  {
    Family f = make_cone(3);
    CurvatureReport rep = curvature_report(f, {0.3, 3.0});
    CHECK(std::abs(rep.samples[0][1] - rep.samples[1][1]) < 1e-6);
  }
}

TEST_CASE("kantowski-sachs is type-I: t^2 |Rm|_T bounded") {
  Family f = make_kantowski_sachs(1.0);
  CurvatureReport rep = curvature_report(f, {1e-3, 1e-2, 1e-1, 0.5});
  CHECK(rep.type_i_constant < 50.0);
  CHECK(rep.type_i_constant > 0.0);
}

TEST_CASE("causal radius: Kasner closed forms, divergence, scale covariance") {
  const int n = 3;
  const std::vector<double> p{2. / 3, 2. / 3, -1. / 3};
  Family f = make_kasner(p);
  // finite radii for p_i < 1: r = (1/n) t^{1-p} n^p / (1-p) from t_lo = 0
  for (int i = 0; i < 3; ++i) {
    const double t = 0.8;
    CausalRadius r = causal_radius(f, i, 0.0, t);
    const double expect =
        std::pow(t, 1.0 - p[i]) * std::pow(n, p[i]) / (n * (1.0 - p[i]));
    CHECK_FALSE(r.divergent);
    CHECK(r.value == doctest::Approx(expect).epsilon(1e-10));
  }
  // p = 1 block diverges logarithmically
  Family flat = make_kasner({1.0, 0.0, 0.0});
  CausalRadius r = causal_radius(flat, 0, 0.0, 1.0);
  CHECK(r.divergent);
  CHECK(r.divergence_exponent == doctest::Approx(1.0).epsilon(1e-6));

  // flat blocks of self-similar families: r(t/lambda, t) = t r(1/lambda, 1)
  Family ct = make_cone_torus(2, 1);
  const double lambda = 4.0;
  for (double t : {0.3, 1.7}) {
    const double lhs = causal_radius(ct, 1, t / lambda, t).value;
    const double rhs = t * causal_radius(ct, 1, 1.0 / lambda, 1.0).value;
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }
  // p = 0 Kasner block shows the same covariance
  for (double t : {0.5, 2.0}) {
    const double lhs = causal_radius(flat, 1, t / lambda, t).value;
    const double rhs = t * causal_radius(flat, 1, 1.0 / lambda, 1.0).value;
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }

  CHECK(disjointness(f, 0, 10.0, 2.0, 0.5));
  CHECK_FALSE(disjointness(f, 0, 1e-9, 2.0, 0.5));
}

TEST_CASE("kasner limit check: integrands vanish on Kasner, vacuous on cones") {
  Family kas = make_kasner({2. / 3, 2. / 3, -1. / 3});
  Certificate cert = kasner_limit_check(kas, 2.0, {1.0, 0.1, 0.01});
  CHECK(cert.verdict == "converging");
  // exact zeros up to floating-point evaluation of the closed forms
  CHECK(cert.metrics.at("lapse_integral") < 1e-12);
  CHECK(cert.metrics.at("k2_integral") < 1e-12);
  CHECK(cert.metrics.at("r_integral") < 1e-12);

  Certificate vac = kasner_limit_check(make_cone(3), 2.0, {1.0, 0.1});
  CHECK(vac.verdict == "vacuous");

  // negative control: with a synthetic unit measure, the cone's lapse misses
  // 1/n by a constant and the check reports non-convergence
  Certificate ctl = kasner_limit_check(make_cone(3), 2.0, {1.0, 0.1, 0.01}, 1.0);
  CHECK(ctl.verdict == "not-converging");
}

TEST_CASE("evolution aborts on constraint violations and bad input") {
  Family f = make_cone(3);
  MultiWarpedFlow flow = f.at(1.0);
  CHECK_THROWS(evolve_cmc(flow, 1.0, 100));  // empty span
  CHECK_THROWS(evolve_cmc(flow, 0.1, 0));
  flow.blocks[0].kappa *= 1.1;  // break the constraint
  CHECK_THROWS(evolve_cmc(flow, 0.1, 100));
}

TEST_CASE("matrix flow validation") {
  Matrix h = Matrix::Identity(3, 3);
  Matrix k = Matrix::Identity(3, 3);
  MatrixFlow flow{h, k, 1.0};
  CHECK_THROWS(flow.validate());  // does not satisfy the flat constraint
  CHECK_THROWS(kasner_reconstruct({flow, flow}));  // too few times
}

TEST_CASE("constraint residual drops at the integrator order when steps double") {
  Family f = make_kantowski_sachs(1.0);
  auto worst_resid = [&](int steps) {
    CmcTrajectory traj = evolve_cmc(f.at(0.05), 0.005, steps);
    return traj.max_constraint_residual;
  };
  const double r500 = worst_resid(500), r1000 = worst_resid(1000);
  CHECK(r500 / r1000 >= 12.0);  // 5th-order local truncation, 4th-order global
}

TEST_CASE("equality cases: constant V_n forces K0 = 0, constant V_1 forces Kasner relations") {
  // cone: V_n constant along the family and K0 vanishes identically
  CmcTrajectory cone = sample_family(make_cone(3), 0.1, 1.0, 65);
  double vn0 = std::pow(-cone.samples.front().hubble(), 3) * cone.samples.front().volume();
  for (const auto& s : cone.samples) {
    CHECK(std::pow(-s.hubble(), 3) * s.volume() == doctest::Approx(vn0).epsilon(1e-12));
    CHECK(std::abs(s.k0_norm2()) < 1e-13 * s.hubble() * s.hubble());
  }
  // kasner: V_1 constant with R <= 0 and |K|^2 = H^2, R = 0
  CmcTrajectory kas = sample_family(make_kasner({2. / 3, 2. / 3, -1. / 3}), 0.1, 1.0, 65);
  double v10 = -kas.samples.front().hubble() * kas.samples.front().volume();
  for (const auto& s : kas.samples) {
    CHECK(-s.hubble() * s.volume() == doctest::Approx(v10).epsilon(1e-12));
    CHECK(s.scalar_curvature() == 0.0);
    CHECK(s.k_norm2() == doctest::Approx(s.hubble() * s.hubble()).epsilon(1e-12));
  }
}

TEST_CASE("dvol0 on a trajectory rejects non-monotone samples under R <= 0") {
  // a synthetic volume bump toward t = 0 violates the pointwise monotonicity
  CmcTrajectory traj = sample_family(make_cone(3), 1e-5, 1.0, 129);
  CmcTrajectory broken = traj;
  // inflate the reference volume of an early-time (small t) sample
  broken.samples[5].blocks[0].vol0 *= 10.0;
  CHECK_NOTHROW(dvol0_limit(traj));
  CHECK_THROWS(dvol0_limit(broken));
}
