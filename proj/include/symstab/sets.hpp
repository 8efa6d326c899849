#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "symstab/gaussian_core.hpp"
#include "symstab/hermite.hpp"
#include "symstab/quadrature.hpp"

namespace symstab {

using Point2 = std::array<double, 2>;

inline constexpr int kDefaultFourierDegree = 20;
inline constexpr std::size_t kDefaultAngularNodes = 2048;
inline constexpr std::size_t kDefaultRadialNodes = 64;

class Ball {
 public:
  Ball(int dim, double radius) : spec_(dim, radius) {}
  explicit Ball(const BallSpec& spec) : spec_(spec) {}
  const BallSpec& spec() const { return spec_; }
  int dim() const { return spec_.dim(); }
  double radius() const { return spec_.radius(); }

 private:
  BallSpec spec_;
};

class BallComplement {
 public:
  BallComplement(int dim, double radius) : spec_(dim, radius) {}
  explicit BallComplement(const BallSpec& spec) : spec_(spec) {}
  const BallSpec& spec() const { return spec_; }
  int dim() const { return spec_.dim(); }
  double radius() const { return spec_.radius(); }

 private:
  BallSpec spec_;
};

// {x in R^n : |x_1| <= w}.
class Strip {
 public:
  Strip(int dim, double halfwidth);
  int dim() const { return dim_; }
  double halfwidth() const { return halfwidth_; }

 private:
  int dim_;
  double halfwidth_;
};

// Axis-aligned ellipse x^2/a1^2 + y^2/a2^2 <= 1.
class Ellipse2D {
 public:
  Ellipse2D(double semi_axis_1, double semi_axis_2);
  double semi_axis_1() const { return a1_; }
  double semi_axis_2() const { return a2_; }
  // Boundary distance from the origin in direction theta.
  double radius_at(double theta) const;

 private:
  double a1_;
  double a2_;
};

struct Interval {
  double lo;
  double hi;
};

// Finite union of closed intervals in R, stored as maximal disjoint pieces.
class IntervalUnion1D {
 public:
  IntervalUnion1D() = default;
  explicit IntervalUnion1D(std::vector<Interval> pieces);
  std::span<const Interval> intervals() const { return pieces_; }
  bool empty() const { return pieces_.empty(); }

 private:
  std::vector<Interval> pieces_;
};

// Star-shaped planar set {rho (cos t, sin t) : rho <= R(t)} from samples of R
// on a uniform angular grid.
class StarShaped2D {
 public:
  explicit StarShaped2D(std::vector<double> radii);
  std::span<const double> radii() const { return radii_; }
  std::size_t size() const { return radii_.size(); }
  double radius_at(double theta) const { return interp_(theta); }

 private:
  std::vector<double> radii_;
  PeriodicInterpolant interp_;
};

using SymmetricSet =
    std::variant<Ball, BallComplement, Strip, Ellipse2D, IntervalUnion1D, StarShaped2D>;

int dimension(const SymmetricSet& set);
bool contains(const SymmetricSet& set, std::span<const double> x);
std::string describe(const SymmetricSet& set);
// Whether the set is invariant under each coordinate reflection, which makes
// all cross moments vanish.
bool is_axis_aligned(const SymmetricSet& set);

// Region {s p(u) : 0 <= s <= 1} swept from the origin by a closed curve p
// sampled at u_k = 2 pi k / M, counter-clockwise.
class StarDomain {
 public:
  explicit StarDomain(std::vector<Point2> boundary);
  static StarDomain from_radii(std::span<const double> radii);
  static StarDomain from_function(std::size_t m, const auto& radius_of_theta) {
    const auto theta = periodic_grid(m);
    std::vector<double> r(m);
    for (std::size_t k = 0; k < m; ++k) r[k] = radius_of_theta(theta[k]);
    return from_radii(r);
  }

  std::size_t size() const { return points_.size(); }
  const Point2& point(std::size_t k) const { return points_[k]; }
  // d p / d u at the sample.
  const Point2& tangent(std::size_t k) const { return tangents_[k]; }
  // p x p', the Jacobian factor of the sweep.
  double sweep(std::size_t k) const { return sweep_[k]; }
  // Outward unit normal and arclength density |p'|.
  Point2 normal(std::size_t k) const;
  double speed(std::size_t k) const;
  double du() const;

  double measure() const;
  std::array<double, 2> defect() const;
  double cross_moment() const;

  // Interior tensor rule: s in (0,1) Gauss-Legendre times the periodic grid.
  // Weights include the sweep Jacobian (Lebesgue measure, no Gaussian).
  struct InteriorNode {
    Point2 x;
    double weight;
  };
  std::vector<InteriorNode> interior_rule(std::size_t radial_nodes) const;

 private:
  std::vector<Point2> points_;
  std::vector<Point2> tangents_;
  std::vector<double> sweep_;
};

StarDomain ellipse_domain(const Ellipse2D& e, std::size_t angular_nodes = kDefaultAngularNodes);
StarDomain star_domain(const StarShaped2D& s);

// Truncated Hermite-Fourier coefficients of an indicator, indexed by
// multi-index; coefficient of l is the integral of 1_A sqrt(l!) h_l.
class FourierTable {
 public:
  FourierTable(std::size_t dim, int max_degree, std::string set_id = {});

  std::size_t dim() const { return dim_; }
  int max_degree() const { return max_degree_; }
  const std::string& set_id() const { return set_id_; }
  std::span<const MultiIndex> indices() const { return indices_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double operator[](const MultiIndex& ell) const;
  double& at(const MultiIndex& ell);
  std::size_t position(const MultiIndex& ell) const;

 private:
  std::size_t dim_;
  int max_degree_;
  std::string set_id_;
  std::vector<MultiIndex> indices_;
  std::vector<double> values_;
  std::map<MultiIndex, std::size_t> lookup_;
};

struct CoefficientOptions {
  std::size_t angular_nodes = kDefaultAngularNodes;  // ellipse only
  std::size_t radial_nodes = kDefaultRadialNodes;
};

double set_measure(const SymmetricSet& set);
std::vector<double> defect_vector(const SymmetricSet& set);
// Integral of x_i x_j over the set (0-based, i != j).
double cross_moment(const SymmetricSet& set, std::size_t i, std::size_t j);

double fourier_coefficient(const SymmetricSet& set, const MultiIndex& ell,
                           const CoefficientOptions& opts = {});
FourierTable fourier_table(const SymmetricSet& set, int max_degree = kDefaultFourierDegree,
                           const CoefficientOptions& opts = {});
FourierTable fourier_table(const StarDomain& domain, int max_degree,
                           std::size_t radial_nodes = kDefaultRadialNodes);

// 1D sets as interval lists (Ball, BallComplement, Strip and IntervalUnion1D
// in dimension 1).
std::vector<Interval> intervals_1d(const SymmetricSet& set);

// Parse "ball n=2 r=2.4", "complement n=2 r=2.4", "strip n=2 w=1.9",
// "ellipse a=2.5 b=2.3", "intervals [-1,1]U[2,3]U[-3,-2]",
// "star m=2048 file=boundary.csv", "full n=2".
SymmetricSet parse_set(std::string_view text);

}  // namespace symstab
