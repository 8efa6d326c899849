#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "symstab/noise_stability.hpp"
#include "symstab/quadrature.hpp"
#include "symstab/sets.hpp"

namespace symstab {

enum class BaseSet { ball, complement };
enum class Phase { locally_max, boundary, not_locally_max };

const char* phase_name(Phase p);
Phase phase_classify(int dim, double radius);

// Surface (Lebesgue) quadrature on the sphere of radius r. n = 2 is the
// periodic trapezoid rule on `resolution` points; n = 3 is Gauss-Legendre in
// the polar cosine (resolution / 2 nodes) times the trapezoid rule in the
// azimuth (resolution nodes). Other dimensions are rejected.
struct SphereRule {
  int dim = 0;
  double radius = 0.0;
  std::vector<std::vector<double>> points;
  std::vector<double> weights;
  std::size_t size() const { return weights.size(); }
};
std::size_t default_sphere_resolution(int dim);
SphereRule sphere_rule(int dim, double radius, std::size_t resolution = 0);

enum class SphereMomentKind { x1_4, x1sq_x2sq };
double sphere_moment(int dim, double radius, SphereMomentKind kind);

// Surface inner products of g_i(x) = (n-1) x_i^2 - sum_{j != i} x_j^2.
std::vector<std::vector<double>> g_gram_matrix(int dim, double radius);
double g_function(int i, std::span<const double> x);

// f: dB(0, r) -> R, either f = sum_i a_i g_i (any n >= 2) or periodic samples
// f(theta_k) on the circle (n = 2).
class NormalPerturbation {
 public:
  static NormalPerturbation from_coefficients(int dim, double radius, std::vector<double> a);
  static NormalPerturbation from_grid(double radius, std::vector<double> samples);

  int dim() const { return dim_; }
  double radius() const { return radius_; }
  bool is_polynomial() const { return samples_.empty(); }
  std::span<const double> coefficients() const { return coeffs_; }
  std::span<const double> samples() const { return samples_; }
  // f = sum_j w_j x_j^2 on the sphere, with sum_j w_j = 0.
  std::vector<double> weights() const;
  double operator()(std::span<const double> x) const;
  double at_angle(double theta) const;  // grid form only

  double surface_mean() const;
  double surface_norm_sq() const;
  NormalPerturbation scaled(double c) const;
  NormalPerturbation normalized() const;
  bool is_mean_zero(double tol = 1e-10) const;
  bool is_normalized(double tol = 1e-10) const;

 private:
  NormalPerturbation() = default;
  int dim_ = 2;
  double radius_ = 1.0;
  std::vector<double> coeffs_;
  std::vector<double> samples_;
  PeriodicInterpolant interp_;
};

// Vector fields used to generate flows.
struct Dilation {
  int dim;
};
// X_j = r w_j (x_j + (|x|^2 - r^2) x_j / 2): tangent to nothing in particular,
// but <X, x/r> = sum_j w_j x_j^2 and div X = <X, x> on the sphere when
// sum w = 0.
struct CorollaryField {
  double radius;
  std::vector<double> weights;
};
// X = f(theta) (1 + (r - 1/r)(|x| - r)) x / |x| in the plane; the radial
// profile makes div X = <X, x> on the circle.
struct NormalExtension {
  double radius;
  PeriodicInterpolant f;
};
struct ZeroField {
  int dim;
};

class VectorField {
 public:
  using Kind = std::variant<Dilation, CorollaryField, NormalExtension, ZeroField>;
  explicit VectorField(Kind kind) : kind_(std::move(kind)) {}
  static VectorField for_perturbation(const NormalPerturbation& f);

  int dim() const;
  const Kind& kind() const { return kind_; }
  void value(std::span<const double> x, std::span<double> out) const;
  std::vector<double> value(std::span<const double> x) const;
  double divergence(std::span<const double> x) const;
  VectorField negated() const;
  // +1, or -1 after an odd number of negations.
  double orientation() const { return sign_; }

 private:
  Kind kind_;
  double sign_ = 1.0;
};

// Flow of an autonomous field by the classical fourth-order Runge-Kutta rule.
struct FlowSpec {
  VectorField field;
  double step = 1e-3;
  std::vector<double> push(std::span<const double> x, double t) const;
};

struct MeasureVariation {
  double first;
  double second;
};

// First and second derivative of gamma_n(A^{(t)}) for A a Ball or
// BallComplement, from boundary integrals (n = 2, 3 by quadrature; dilation,
// corollary and zero fields in closed form for any n).
MeasureVariation measure_variation(const VectorField& field, const SymmetricSet& base);
// The same by centered differences (with one Richardson step) of the measure
// along the integrated flow: n = 2 for any field, any n for dilation.
MeasureVariation measure_variation_fd(const FlowSpec& flow, const SymmetricSet& base, double h = 1e-2);

struct PoincareRatio {
  double lhs;
  double constant;
  double ratio;
};
PoincareRatio poincare_ratio(const NormalPerturbation& f);

struct VariationReport {
  double first_variation = 0.0;
  // Half the second derivative in t.
  double second_variation = 0.0;
  std::optional<double> closed_form_bound;
  Phase phase = Phase::boundary;
  // V(x, 0) of the kernel at hand.
  std::function<double(std::span<const double>)> potential;
  bool quadrature_converged = true;
  // |rho^{-2} d^2/dt^2 F_rho - (1/2) d^2/dt^2 F| (noise reports only).
  std::optional<double> rho_scaled_gap;
};

// Half the second derivative of F = sum_i (int_A (1 - x_i^2) dgamma)^2 along
// the flow of f, for A = B(0, r) or its complement.
VariationReport second_variation_F(const NormalPerturbation& f, BaseSet base = BaseSet::ball);
// Half the second derivative of the noise stability of A with itself.
VariationReport second_variation_noise(const NormalPerturbation& f, const Correlation& rho,
                                       BaseSet base = BaseSet::ball);
// Finite-difference counterpart of second_variation_F in the plane.
double second_variation_F_fd(const NormalPerturbation& f, BaseSet base = BaseSet::ball, double h = 1e-2);

// T_rho 1_{B(0,r)} at |x| = s and its radial derivative (n >= 2).
double t_rho_ball_radial(int dim, double radius, const Correlation& rho, double s);
double t_rho_ball_radial_derivative(int dim, double radius, const Correlation& rho, double s);

// Smooth symmetric kernel G(x, y) on R^2 x R^2 for the quadratic functional
// E(A) = int_A int_A G.
class Kernel2D {
 public:
  virtual ~Kernel2D() = default;
  virtual double value(const Point2& x, const Point2& y) const = 0;
  virtual Point2 grad_x(const Point2& x, const Point2& y) const = 0;
  // E(A); the default is a tensor interior quadrature.
  virtual double energy(const StarDomain& domain) const;
};

// gamma_2(x) gamma_2(y): E(A) = gamma_2(A)^2.
class ProductGaussianKernel final : public Kernel2D {
 public:
  double value(const Point2& x, const Point2& y) const override;
  Point2 grad_x(const Point2& x, const Point2& y) const override;
  double energy(const StarDomain& domain) const override;
};

// Joint density of (X, rho X + sqrt(1 - rho^2) Z): E(A) is noise stability.
class MehlerKernel final : public Kernel2D {
 public:
  explicit MehlerKernel(const Correlation& rho) : rho_(rho) {}
  double value(const Point2& x, const Point2& y) const override;
  Point2 grad_x(const Point2& x, const Point2& y) const override;
  double energy(const StarDomain& domain) const override;

 private:
  Correlation rho_;
};

// sum_i (1 - x_i^2)(1 - y_i^2) gamma_2(x) gamma_2(y): E(A) = F(A).
class DefectKernel final : public Kernel2D {
 public:
  double value(const Point2& x, const Point2& y) const override;
  Point2 grad_x(const Point2& x, const Point2& y) const override;
  double energy(const StarDomain& domain) const override;
};

struct GeneralVariationOptions {
  std::size_t radial_nodes = 32;
  double fd_step = 1e-2;
};

// Half the second derivative of E(A^{(t)}) from the boundary formula.
double general_second_variation(const Kernel2D& kernel, const StarDomain& domain, const VectorField& field,
                                const GeneralVariationOptions& opts = {});
// Half the second derivative by centered differences at steps h and h/2
// combined by Richardson extrapolation, pushing the boundary with the flow.
double general_second_variation_fd(const Kernel2D& kernel, const StarDomain& domain, const FlowSpec& flow,
                                   const GeneralVariationOptions& opts = {});

}  // namespace symstab
