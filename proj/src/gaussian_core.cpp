#include "symstab/gaussian_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace symstab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double clamp_probability(double p) { return std::clamp(p, 0.0, 1.0); }

}  // namespace

BallSpec::BallSpec(int dim, double radius) : dim_(dim), radius_(radius) {
  if (dim < 1) throw std::invalid_argument("BallSpec: dimension must be >= 1");
  if (!(radius >= 0.0)) throw std::invalid_argument("BallSpec: radius must be >= 0");
}

ScaledRadius::ScaledRadius(double s, int dim) : s_(s), dim_(dim) {
  if (dim < 1) throw std::invalid_argument("ScaledRadius: dimension must be >= 1");
  if (!std::isfinite(s)) throw std::invalid_argument("ScaledRadius: s must be finite");
  if (dim + s * std::sqrt(2.0 * dim) < 0.0)
    throw std::invalid_argument("ScaledRadius: n + s*sqrt(2n) is negative");
}

double ScaledRadius::radius() const {
  return std::sqrt(std::max(0.0, dim_ + s_ * std::sqrt(2.0 * dim_)));
}

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi); }

double normal_cdf(double x) {
  if (x == std::numeric_limits<double>::infinity()) return 1.0;
  if (x == -std::numeric_limits<double>::infinity()) return 0.0;
  return 0.5 * boost::math::erfc(-x / std::numbers::sqrt2);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw std::domain_error("normal_quantile: p outside [0, 1]");
  }
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double gaussian_density(std::span<const double> x) {
  double sq = 0.0;
  for (double v : x) sq += v * v;
  return std::exp(-0.5 * sq - 0.5 * static_cast<double>(x.size()) * kLog2Pi);
}

double gaussian_density_at_radius(int dim, double r) {
  return std::exp(-0.5 * r * r - 0.5 * dim * kLog2Pi);
}

double gaussian_measure_ball(const BallSpec& spec) {
  const double r = spec.radius();
  if (r == 0.0) return 0.0;
  if (std::isinf(r)) return 1.0;
  return clamp_probability(boost::math::gamma_p(0.5 * spec.dim(), 0.5 * r * r));
}

double gaussian_measure_ball_complement(const BallSpec& spec) {
  const double r = spec.radius();
  if (r == 0.0) return 1.0;
  if (std::isinf(r)) return 0.0;
  return clamp_probability(boost::math::gamma_q(0.5 * spec.dim(), 0.5 * r * r));
}

double gaussian_measure_ball_derivative(const BallSpec& spec) {
  const double r = spec.radius();
  const int n = spec.dim();
  if (r == 0.0) return n == 1 ? 2.0 * normal_pdf(0.0) : 0.0;
  if (std::isinf(r)) return 0.0;
  return std::exp(log_sphere_volume(n) + (n - 1) * std::log(r) - 0.5 * r * r -
                  0.5 * n * kLog2Pi);
}

double radius_for_measure(int dim, double a) {
  if (dim < 1) throw std::invalid_argument("radius_for_measure: dimension must be >= 1");
  if (!(a > 0.0 && a < 1.0))
    throw std::domain_error("radius_for_measure: measure must lie in (0, 1)");

  // Work with whichever tail is smaller so that a close to 1 keeps precision.
  const bool upper = a > 0.5;
  auto residual = [&](double r) {
    const BallSpec b(dim, r);
    return upper ? (1.0 - a) - gaussian_measure_ball_complement(b)
                 : gaussian_measure_ball(b) - a;
  };

  double lo = 0.0;
  double hi = std::max(1.0, std::sqrt(static_cast<double>(dim)));
  while (residual(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
  }

  double r = 0.5 * (lo + hi);
  for (int iter = 0; iter < 400; ++iter) {
    const double g = residual(r);
    if (g == 0.0) break;
    if (g < 0.0) lo = r; else hi = r;
    const double slope = gaussian_measure_ball_derivative(BallSpec(dim, r));
    double next = slope > 0.0 ? r - g / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double step = std::abs(next - r);
    r = next;
    if (step <= 4.0 * std::numeric_limits<double>::epsilon() * r || hi - lo <= 1e-300) break;
  }
  if (std::abs(residual(r)) > 1e-12)
    throw std::runtime_error("radius_for_measure: solver did not reach tolerance");
  return r;
}

double log_sphere_volume(int dim) {
  if (dim < 1) throw std::invalid_argument("sphere_volume: dimension must be >= 1");
  return std::log(2.0) + 0.5 * dim * std::log(kPi) - std::lgamma(0.5 * dim);
}

double sphere_volume(int dim) { return std::exp(log_sphere_volume(dim)); }

double sphere_volume_wallis(int dim) {
  if (dim < 1) throw std::invalid_argument("sphere_volume: dimension must be >= 1");
  if (dim == 1) return 2.0;
  double v = 2.0 * kPi;
  for (int k = 1; k <= dim - 2; ++k) v *= wallis_integral(k);
  return v;
}

double wallis_integral(int k) {
  if (k < 0) throw std::invalid_argument("wallis_integral: k must be >= 0");
  // (k-1)!!/k!! times pi (k even) or 2 (k odd), built up by the ratio (k-1)/k.
  double v = (k % 2 == 0) ? kPi : 2.0;
  for (int j = (k % 2 == 0) ? 2 : 3; j <= k; j += 2)
    v *= static_cast<double>(j - 1) / static_cast<double>(j);
  return v;
}

double second_moment_defect_ball(const BallSpec& spec) {
  const double r = spec.radius();
  const int n = spec.dim();
  if (r == 0.0 || std::isinf(r)) return 0.0;
  return std::exp(log_sphere_volume(n) + n * std::log(r) - 0.5 * r * r - std::log(n) -
                  0.5 * n * kLog2Pi);
}

double second_moment_defect_ball_complement(const BallSpec& spec) {
  return -second_moment_defect_ball(spec);
}

GammaExpansionBounds lambda_bounds(double m) {
  if (!(m > 1.0)) throw std::invalid_argument("lambda_bounds: m must exceed 1");
  const double base = 1.0 / (360.0 * m * (m - 1.0) * (m + 1.0));
  const double scale = m * m * (m - 1.0) * (m + 1.0);
  return {m, base - 1.0 / (120.0 * scale), base + 11.0 / (480.0 * scale)};
}

GammaInterval gamma_half_expansion(int dim) {
  if (dim < 8)
    throw std::invalid_argument("gamma_half_expansion: requires n >= 8 (m = (n-2)/2 >= 3)");
  const double m = 0.5 * (dim - 2);
  const GammaExpansionBounds b = lambda_bounds(m);
  const double log_core = 0.5 * std::log(2.0 * kPi) + 0.5 * (dim - 1) * std::log(m) - m +
                          1.0 / (6.0 * (dim - 2));
  return {std::exp(log_core - b.lambda_upper), std::exp(log_core - b.lambda_lower), b};
}

EdgeworthTerms edgeworth_ball_measure(const ScaledRadius& sr) {
  const double s = sr.s();
  const double exact = gaussian_measure_ball(BallSpec(sr.dim(), sr.radius()));
  return {exact, normal_cdf(s), (1.0 - s * s) * normal_pdf(s) / std::sqrt(sr.dim())};
}

}  // namespace symstab
