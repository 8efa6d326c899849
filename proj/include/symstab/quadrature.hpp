#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace symstab {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

// n-point Gauss-Legendre rule on [a, b].
QuadratureRule gauss_legendre(std::size_t n, double a, double b);

// n-point Gauss-Hermite rule for the standard normal density (weights sum to 1).
QuadratureRule gauss_hermite(std::size_t n);

// Uniform angles 2*pi*k/m, k = 0..m-1.
std::vector<double> periodic_grid(std::size_t m);

// Derivative with respect to the parameter u of a 2*pi-periodic function
// sampled at periodic_grid(samples.size()).
std::vector<double> spectral_derivative(std::span<const double> samples);

// Trigonometric interpolant of uniformly sampled periodic data. Harmonics
// below a relative threshold are dropped so evaluation stays cheap for
// smooth data.
class PeriodicInterpolant {
 public:
  PeriodicInterpolant() = default;
  explicit PeriodicInterpolant(std::span<const double> samples, double drop_tol = 1e-15);

  double operator()(double theta) const;
  double derivative(double theta) const;
  std::size_t harmonics() const { return cos_.size(); }
  double mean() const { return mean_; }

 private:
  double mean_ = 0.0;
  std::vector<double> cos_;  // coefficient of cos(k theta), k = 1..
  std::vector<double> sin_;
};

}  // namespace symstab
