#include "vacsing/series.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vacsing {

double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("least_squares_slope: need >= 2 matching samples");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw std::invalid_argument("least_squares_slope: degenerate abscissae");
  return (n * sxy - sx * sy) / denom;
}

double integrate_simpson(const std::vector<double>& values, double h) {
  const size_t n = values.size();
  if (n < 2) return 0.0;
  if (n == 2) return 0.5 * h * (values[0] + values[1]);
  size_t intervals = n - 1;
  double total = 0.0;
  size_t start = 0;
  if (intervals % 2 != 0) {
    // 3/8 rule on the first three intervals
    total += 3.0 * h / 8.0 * (values[0] + 3.0 * values[1] + 3.0 * values[2] + values[3]);
    start = 3;
  }
  for (size_t i = start; i + 2 <= n - 1; i += 2)
    total += h / 3.0 * (values[i] + 4.0 * values[i + 1] + values[i + 2]);
  return total;
}

std::vector<double> cumulative_trapezoid(const std::vector<double>& x,
                                         const std::vector<double>& values) {
  if (x.size() != values.size()) throw std::invalid_argument("cumulative_trapezoid: size mismatch");
  std::vector<double> out(x.size(), 0.0);
  for (size_t i = 1; i < x.size(); ++i)
    out[i] = out[i - 1] + 0.5 * (x[i] - x[i - 1]) * (values[i] + values[i - 1]);
  return out;
}

std::vector<double> fd3_first(const std::vector<double>& x, const std::vector<double>& f) {
  const size_t n = x.size();
  if (f.size() != n || n < 3) throw std::invalid_argument("fd3_first: need >= 3 samples");
  std::vector<double> d(n);
  auto quad = [&](size_t i0, size_t i1, size_t i2, double at) {
    // derivative of the interpolating quadratic through three samples
    const double x0 = x[i0], x1 = x[i1], x2 = x[i2];
    const double l0 = (2 * at - x1 - x2) / ((x0 - x1) * (x0 - x2));
    const double l1 = (2 * at - x0 - x2) / ((x1 - x0) * (x1 - x2));
    const double l2 = (2 * at - x0 - x1) / ((x2 - x0) * (x2 - x1));
    return f[i0] * l0 + f[i1] * l1 + f[i2] * l2;
  };
  d[0] = quad(0, 1, 2, x[0]);
  for (size_t i = 1; i + 1 < n; ++i) d[i] = quad(i - 1, i, i + 1, x[i]);
  d[n - 1] = quad(n - 3, n - 2, n - 1, x[n - 1]);
  return d;
}

std::vector<double> fd5_first_uniform(const std::vector<double>& f, double h) {
  const size_t n = f.size();
  if (n < 5) throw std::invalid_argument("fd5_first_uniform: need >= 5 samples");
  std::vector<double> d(n);
  const double c = 1.0 / (12.0 * h);
  for (size_t i = 2; i + 2 < n; ++i)
    d[i] = c * (-f[i + 2] + 8.0 * f[i + 1] - 8.0 * f[i - 1] + f[i - 2]);
  // one-sided 5-point stencils, 4th order
  d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h);
  d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * h);
  d[n - 2] = (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]) /
             (12.0 * h);
  d[n - 1] = (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4] +
              3.0 * f[n - 5]) /
             (12.0 * h);
  return d;
}

double richardson_limit(const std::vector<double>& values, double ratio) {
  if (values.size() < 2) throw std::invalid_argument("richardson_limit: need >= 2 samples");
  if (!(ratio > 1.0)) throw std::invalid_argument("richardson_limit: ratio must exceed 1");
  const double a = values[values.size() - 2];
  const double b = values[values.size() - 1];
  return (ratio * b - a) / (ratio - 1.0);
}

Certificate weighted_tail_integral(const std::vector<double>& s, const std::vector<double>& value,
                                   double weight_exponent) {
  if (s.size() != value.size()) throw std::invalid_argument("weighted_tail_integral: size mismatch");
  if (s.size() < 8) throw std::invalid_argument("weighted_tail_integral: need >= 8 samples");
  for (size_t i = 1; i < s.size(); ++i)
    if (!(s[i] > s[i - 1]))
      throw std::invalid_argument("weighted_tail_integral: s grid must be strictly increasing");

  const size_t n = s.size();
  std::vector<double> integrand(n);
  double peak = 0.0;
  for (size_t i = 0; i < n; ++i) {
    integrand[i] = std::exp(weight_exponent * s[i]) * value[i];
    peak = std::max(peak, std::abs(integrand[i]));
  }
  std::vector<double> cumulative = cumulative_trapezoid(s, integrand);

  Certificate cert;
  cert.name = "weighted-tail-integral";
  cert.metrics["weight_exponent"] = weight_exponent;
  cert.metrics["integral"] = cumulative.back();
  for (size_t i = 0; i < n; ++i) cert.samples.push_back({s[i], integrand[i]});

  if (peak == 0.0) {
    cert.verdict = "convergent-so-far";
    cert.metrics["final_efold_fraction"] = 0.0;
    cert.note = "integrand identically zero";
    return cert;
  }

  // fit ln(integrand) over the final e-fold of s
  const double window_start = s.back() - 1.0;
  std::vector<double> xs, ys;
  for (size_t i = 0; i < n; ++i) {
    if (s[i] < window_start) continue;
    xs.push_back(s[i]);
    ys.push_back(std::log(std::max(std::abs(integrand[i]), 1e-300)));
  }
  if (xs.size() < 3) {
    xs.clear();
    ys.clear();
    for (size_t i = n - 3; i < n; ++i) {
      xs.push_back(s[i]);
      ys.push_back(std::log(std::max(std::abs(integrand[i]), 1e-300)));
    }
  }
  const double slope = least_squares_slope(xs, ys);
  cert.fitted_exponent = slope;

  // fraction of the cumulative integral contributed by the final e-fold
  double at_window = cumulative.back();
  for (size_t i = 1; i < n; ++i) {
    if (s[i] >= window_start) {
      const double t = (window_start - s[i - 1]) / (s[i] - s[i - 1]);
      at_window = cumulative[i - 1] + t * (cumulative[i] - cumulative[i - 1]);
      break;
    }
  }
  const double total = cumulative.back();
  cert.metrics["final_efold_fraction"] =
      (total != 0.0) ? (total - at_window) / total : 0.0;

  cert.verdict = (slope < 0.0) ? "convergent-so-far" : "growing";
  return cert;
}

}  // namespace vacsing
