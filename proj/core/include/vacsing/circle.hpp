#ifndef VACSING_CIRCLE_HPP
#define VACSING_CIRCLE_HPP

#include <Eigen/Dense>
#include <memory>
#include <vector>

namespace vacsing {

using Field = std::vector<double>;

enum class DerivScheme { Spectral, FD4 };

// Uniform periodic grid on [0, L) with n equally spaced points.
//
// Both derivative schemes are realized by exactly antisymmetric operators
// (trigonometric differentiation matrix / centered 5-point stencil), which is
// what makes the mass+stiffness operators of the dual norms symmetric
// positive definite at the discrete level.
class CircleGrid {
 public:
  CircleGrid(int n, double length, DerivScheme scheme);

  int size() const { return n_; }
  double length() const { return length_; }
  double dy() const { return length_ / n_; }
  DerivScheme scheme() const { return scheme_; }
  double point(int j) const { return dy() * j; }
  std::vector<double> points() const;

  // d/dy of a periodic sample vector; spectral is exact for resolved
  // trigonometric polynomials, FD4 is 4th-order.
  void derivative(const double* f, double* df) const;
  Field derivative(const Field& f) const;

  // trapezoid quadrature (spectrally accurate on the periodic circle)
  double integrate(const Field& f) const;

  bool same_layout(const CircleGrid& other) const {
    return n_ == other.n_ && length_ == other.length_;
  }

 private:
  int n_;
  double length_;
  DerivScheme scheme_;
  std::shared_ptr<const Eigen::MatrixXd> spectral_d_;  // only for Spectral
};

// Strictly positive weights per grid point; w[j] is the density per unit
// coordinate length, so the measure of a cell is w[j] * dy.
struct DensityField {
  Field weights;

  double total_mass(const CircleGrid& grid) const {
    return grid.integrate(weights);
  }
  static DensityField constant(const CircleGrid& grid, double w);
  void validate() const;  // throws if any weight <= 0
};

Field periodic_derivative(const Field& f, const CircleGrid& grid);

}  // namespace vacsing

#endif
