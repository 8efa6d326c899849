#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "symstab/hermite.hpp"
#include "symstab/sets.hpp"

namespace symstab {

class Correlation {
 public:
  explicit Correlation(double rho);
  double rho() const { return rho_; }
  // sqrt(1 - rho^2)
  double complement() const;

 private:
  double rho_;
};

enum class StabilityMethod { series, montecarlo, closed_form_rho0 };

struct StabilityEstimate {
  double value = 0.0;
  StabilityMethod method = StabilityMethod::series;
  std::optional<int> truncation_degree;
  std::optional<double> tail_bound;
  std::optional<double> std_error;
};

struct PointwiseValue {
  double value = 0.0;
  // Degree-wise bound from the Hermite growth estimate; infinite when the
  // majorant series diverges at x.
  double tail_bound = 0.0;
  // Cauchy-Schwarz bound from the Parseval residual and the Mehler diagonal.
  double l2_tail_bound = 0.0;
};

// Coefficients of T_rho f: each entry scaled by rho^{|l|}.
FourierTable apply_noise(const FourierTable& table, const Correlation& rho);

// T_rho f(x) from a truncated table. `mass` is the squared L2 norm of f (the
// Gaussian measure for an indicator), used for the tail bounds. Throws
// std::runtime_error when a tolerance is given and both tail bounds exceed it.
PointwiseValue t_rho_apply(const FourierTable& table, double mass, const Correlation& rho,
                           std::span<const double> x, std::optional<double> tolerance = {});
PointwiseValue t_rho_apply(const SymmetricSet& set, const Correlation& rho, std::span<const double> x,
                           int max_degree = kDefaultFourierDegree, std::optional<double> tolerance = {});
// Hermite series of the tilt, whose coefficients are lambda^l.
PointwiseValue t_rho_apply(const ExponentialTilt& tilt, const Correlation& rho, double x,
                           int max_degree = kDefaultFourierDegree);

// T_rho 1_B(x) for a 1D set, in closed form through the normal CDF.
double t_rho_indicator_1d(std::span<const Interval> pieces, const Correlation& rho, double x);

StabilityEstimate stability_series(const FourierTable& a, double mass_a, const FourierTable& b,
                                   double mass_b, const Correlation& rho);
StabilityEstimate stability_series(const SymmetricSet& a, const SymmetricSet& b, const Correlation& rho,
                                   int max_degree = kDefaultFourierDegree);

// Worker threads for Monte Carlo; SYMSTAB_THREADS caps hardware concurrency.
unsigned worker_count();

StabilityEstimate stability_mc(const SymmetricSet& a, const SymmetricSet& b, const Correlation& rho,
                               std::int64_t samples, std::uint64_t seed);

double second_derivative_at_zero(const SymmetricSet& set);
double functional_F(const SymmetricSet& set);

struct QuadraticRemainder {
  double stability;
  double quadratic_model;
  double remainder;
};
QuadraticRemainder quadratic_remainder(const SymmetricSet& set, const Correlation& rho,
                                       int max_degree = kDefaultFourierDegree);

// d/dx T_rho 1_B(x) for a 1D set, from the Gaussian integration by parts
// identity evaluated on each interval.
double t_rho_derivative_1d(const SymmetricSet& set, const Correlation& rho, double x);

struct LevelSetReport {
  double threshold = 0.0;
  bool is_sublevel_set = false;
  double max_violation = 0.0;
  // T_rho 1_B is constant (rho = 0), so the level-set question is vacuous.
  bool degenerate = false;
};

struct LevelSetOptions {
  std::size_t grid_points = 4096;
  double half_width = 6.0;
  // Measure of disagreement allowed; by default four grid cells at the mode.
  std::optional<double> tolerance;
};

// Whether A coincides (up to grid resolution) with {T_rho 1_B <= c} for the
// best threshold c. Both sets must be 1D.
LevelSetReport level_set_check(const SymmetricSet& a, const SymmetricSet& b, const Correlation& rho,
                               const LevelSetOptions& opts = {});

struct RearrangementDeficit {
  double measure;       // a
  double ball_radius;   // r with gamma_1([-r, r]) = a
  double l1_distance;   // gamma_1 of the symmetric difference
  double lhs;
  double rhs;
};

// Compares B' with the centered interval of the same measure.
RearrangementDeficit rearrangement_deficit(const SymmetricSet& b_prime);
// Same, insisting that gamma_1(B') equals a to within tol.
RearrangementDeficit rearrangement_deficit(const SymmetricSet& b_prime, double a, double tol = 1e-12);

}  // namespace symstab
