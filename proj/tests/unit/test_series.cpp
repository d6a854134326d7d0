#include <cmath>
#include <doctest.h>
#include <vector>

#include "vacsing/series.hpp"

using namespace vacsing;

TEST_CASE("tail integral: pure exponential decay under weight 2") {
  std::vector<double> s, v;
  for (int i = 0; i <= 60; ++i) {
    s.push_back(0.1 * i);
    v.push_back(std::exp(-3.0 * s.back()));
  }
  Certificate c = weighted_tail_integral(s, v, 2.0);
  CHECK(c.verdict == "convergent-so-far");
  CHECK(*c.fitted_exponent == doctest::Approx(-1.0).epsilon(1e-6));
  // integral of e^{-s} over [0,6]
  CHECK(c.metrics.at("integral") == doctest::Approx(1.0 - std::exp(-6.0)).epsilon(1e-3));
}

TEST_CASE("tail integral: constant value grows under weight 2") {
  std::vector<double> s, v;
  for (int i = 0; i <= 40; ++i) {
    s.push_back(0.25 * i);
    v.push_back(1.0);
  }
  Certificate c = weighted_tail_integral(s, v, 2.0);
  CHECK(c.verdict == "growing");
  CHECK(*c.fitted_exponent == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("tail integral: slope of s e^{-2s} matches -2 + 1/sbar over the last e-fold") {
  std::vector<double> s, v;
  for (int i = 0; i <= 100; ++i) {
    s.push_back(1.0 + 0.05 * i);  // up to s = 6
    v.push_back(s.back() * std::exp(-2.0 * s.back()));
  }
  Certificate c = weighted_tail_integral(s, v, 0.0);
  const double sbar = 5.5;  // midpoint of the final e-fold [5, 6]
  const double expect = -2.0 + 1.0 / sbar;
  CHECK(std::abs(*c.fitted_exponent - expect) < 0.05 * std::abs(expect));
  CHECK(c.verdict == "convergent-so-far");
}

TEST_CASE("tail integral: identically zero series is trivially convergent") {
  std::vector<double> s, v;
  for (int i = 0; i < 12; ++i) {
    s.push_back(0.5 * i);
    v.push_back(0.0);
  }
  Certificate c = weighted_tail_integral(s, v, 2.0);
  CHECK(c.verdict == "convergent-so-far");
  CHECK(c.metrics.at("integral") == 0.0);
}

TEST_CASE("tail integral input validation") {
  std::vector<double> s{0, 1, 2, 3, 4, 5, 6}, v(7, 1.0);
  CHECK_THROWS(weighted_tail_integral(s, v, 0.0));  // fewer than 8 samples
  std::vector<double> bad{0, 1, 2, 3, 3, 5, 6, 7}, v8(8, 1.0);
  CHECK_THROWS(weighted_tail_integral(bad, v8, 0.0));  // not strictly increasing
}

TEST_CASE("richardson extrapolation removes the linear error term") {
  std::vector<double> vals;
  for (int k = 0; k <= 6; ++k) vals.push_back(3.0 + 2.0 * std::pow(2.0, -k));
  CHECK(richardson_limit(vals, 2.0) == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("five-point derivative is exact on quartics") {
  const double h = 0.1;
  std::vector<double> f, expect;
  for (int i = 0; i < 11; ++i) {
    const double x = -0.5 + h * i;
    f.push_back(1.0 + x - 2.0 * x * x + 0.5 * x * x * x + x * x * x * x);
    expect.push_back(1.0 - 4.0 * x + 1.5 * x * x + 4.0 * x * x * x);
  }
  std::vector<double> d = fd5_first_uniform(f, h);
  for (size_t i = 0; i < d.size(); ++i) CHECK(d[i] == doctest::Approx(expect[i]).epsilon(1e-11));
}

TEST_CASE("three-point derivative is exact on quadratics, nonuniform grid") {
  std::vector<double> x{0.0, 0.3, 0.7, 1.2, 1.4}, f, expect;
  for (double xi : x) {
    f.push_back(2.0 - xi + 3.0 * xi * xi);
    expect.push_back(-1.0 + 6.0 * xi);
  }
  std::vector<double> d = fd3_first(x, f);
  for (size_t i = 0; i < d.size(); ++i) CHECK(d[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("simpson handles odd interval counts and is exact on cubics") {
  const double h = 0.125;
  auto eval = [&](int count) {
    std::vector<double> f;
    for (int i = 0; i < count; ++i) {
      const double x = h * i;
      f.push_back(x * x * x);
    }
    return integrate_simpson(f, h);
  };
  const double upper9 = h * 8;   // even interval count
  const double upper10 = h * 9;  // odd interval count
  CHECK(eval(9) == doctest::Approx(std::pow(upper9, 4) / 4.0).epsilon(1e-14));
  CHECK(eval(10) == doctest::Approx(std::pow(upper10, 4) / 4.0).epsilon(1e-14));
}

TEST_CASE("least squares slope") {
  std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
  CHECK(least_squares_slope(x, y) == doctest::Approx(2.0));
}
