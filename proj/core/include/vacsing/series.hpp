#ifndef VACSING_SERIES_HPP
#define VACSING_SERIES_HPP

#include <vector>

#include "vacsing/certificate.hpp"

namespace vacsing {

// Least-squares slope of y against x.
double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y);

// Composite Simpson on a uniform grid (3/8 rule absorbs an odd interval).
double integrate_simpson(const std::vector<double>& values, double h);

// Trapezoid cumulative integral on a (possibly nonuniform) grid.
std::vector<double> cumulative_trapezoid(const std::vector<double>& x,
                                         const std::vector<double>& values);

// Interior first derivative on a nonuniform grid through the 3-point stencil.
// Endpoints use one-sided quadratic stencils.
std::vector<double> fd3_first(const std::vector<double>& x, const std::vector<double>& f);

// 4th-order centered first derivative on a uniform grid (one-sided 5-point
// stencils at the two points nearest each end).
std::vector<double> fd5_first_uniform(const std::vector<double>& f, double h);

// One level of Richardson extrapolation, error model f(t) = f0 + c t, on
// values sampled at a geometric sequence t_k = t0 * ratio^-k.
double richardson_limit(const std::vector<double>& values, double ratio);

// Cumulative integral of e^{weight_exponent * s} * value(s), the fitted
// log-slope of that integrand over the final e-fold of s, and a verdict.
// Requires at least 8 samples on a strictly increasing s grid.
Certificate weighted_tail_integral(const std::vector<double>& s, const std::vector<double>& value,
                                   double weight_exponent);

}  // namespace vacsing

#endif
