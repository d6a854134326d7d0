#ifndef VACSING_CERTIFICATE_HPP
#define VACSING_CERTIFICATE_HPP

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vacsing {

// Outcome of a monotonicity / decay / integrability check: a verdict plus
// the sampled values, fitted exponents and tolerances that back it up.
struct Certificate {
  std::string name;
  std::string verdict;  // "pass", "fail", "convergent-so-far", "growing", "vacuous"
  bool pass = true;
  std::optional<double> fitted_exponent;
  std::map<std::string, double> metrics;
  std::vector<std::array<double, 2>> samples;  // (time, value)
  std::map<std::string, std::vector<double>> series;  // named per-sample series
  std::string note;
};

}  // namespace vacsing

#endif
