#pragma once

#include <span>

namespace symstab {

// Centered ball B(0, r) in R^n.
class BallSpec {
 public:
  BallSpec(int dim, double radius);

  int dim() const { return dim_; }
  double radius() const { return radius_; }

 private:
  int dim_;
  double radius_;
};

// Radius parametrized around the bulk of the chi distribution:
// r(s, n) = sqrt(n + s*sqrt(2n)).
class ScaledRadius {
 public:
  ScaledRadius(double s, int dim);

  double s() const { return s_; }
  int dim() const { return dim_; }
  double radius() const;

 private:
  double s_;
  int dim_;
};

// Bounds on the Stirling remainder at index m (m may be a half-integer
// when it is derived from an odd dimension).
struct GammaExpansionBounds {
  double m;
  double lambda_lower;
  double lambda_upper;
};

struct GammaInterval {
  double lower;
  double upper;
  GammaExpansionBounds bounds;
};

struct EdgeworthTerms {
  double exact;
  double clt_term;
  double correction_term;
};

double normal_pdf(double x);
double normal_cdf(double x);
double normal_quantile(double p);
// Standard Gaussian density on R^n.
double gaussian_density(std::span<const double> x);
// Density value at any point of the sphere |x| = r.
double gaussian_density_at_radius(int dim, double r);

double gaussian_measure_ball(const BallSpec& spec);
double gaussian_measure_ball_complement(const BallSpec& spec);
// d/dr of gaussian_measure_ball (chi density).
double gaussian_measure_ball_derivative(const BallSpec& spec);

// Radius whose centered ball has Gaussian measure a.
double radius_for_measure(int dim, double a);

double sphere_volume(int dim);
double log_sphere_volume(int dim);
double sphere_volume_wallis(int dim);

// Integral of sin^k over [0, pi].
double wallis_integral(int k);

// Integral over B(0, r) of (1 - x_1^2) against the Gaussian measure.
double second_moment_defect_ball(const BallSpec& spec);
double second_moment_defect_ball_complement(const BallSpec& spec);

GammaExpansionBounds lambda_bounds(double m);
GammaInterval gamma_half_expansion(int dim);

EdgeworthTerms edgeworth_ball_measure(const ScaledRadius& sr);

}  // namespace symstab
