#include "symstab/variation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

#include "symstab/gaussian_core.hpp"

namespace symstab {

namespace {

constexpr double kPi = std::numbers::pi;

struct SphereBase {
  int dim;
  double radius;
  double sign;  // +1 for the ball, -1 for the complement (outward normal s x / r)
};

SphereBase sphere_base(const SymmetricSet& set) {
  if (const auto* b = std::get_if<Ball>(&set)) return {b->dim(), b->radius(), 1.0};
  if (const auto* c = std::get_if<BallComplement>(&set)) return {c->dim(), c->radius(), -1.0};
  throw std::invalid_argument("variation: base set must be a ball or a ball complement");
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm_sq(std::span<const double> x) { return dot(x, x); }

// r^{n+3} Vol(S^{n-1}) / (n (n+2)), the unit of the fourth moments.
double moment_unit(int n, double r) {
  return std::exp((n + 3) * std::log(r) + log_sphere_volume(n)) / (n * (n + 2.0));
}

// Richardson-combined centered differences from samples at -h, -h/2, 0, h/2, h.
struct Derivatives {
  double first;
  double second;
};
Derivatives richardson(const std::function<double(double)>& g, double h) {
  const double m2 = g(-h), m1 = g(-h / 2), z = g(0.0), p1 = g(h / 2), p2 = g(h);
  const double d1h = (p2 - m2) / (2 * h), d1q = (p1 - m1) / h;
  const double d2h = (p2 - 2 * z + m2) / (h * h), d2q = (p1 - 2 * z + m1) / (h * h / 4);
  return {(4 * d1q - d1h) / 3, (4 * d2q - d2h) / 3};
}

std::vector<Point2> circle_points(double r, std::size_t m) {
  const auto theta = periodic_grid(m);
  std::vector<Point2> pts(m);
  for (std::size_t k = 0; k < m; ++k) pts[k] = {r * std::cos(theta[k]), r * std::sin(theta[k])};
  return pts;
}

StarDomain push_domain(std::span<const Point2> boundary, const FlowSpec& flow, double t) {
  std::vector<Point2> moved(boundary.size());
  for (std::size_t k = 0; k < boundary.size(); ++k) {
    const auto y = flow.push(boundary[k], t);
    moved[k] = {y[0], y[1]};
  }
  return StarDomain(std::move(moved));
}

constexpr std::size_t kFlowBoundaryNodes = 1024;

// Quadrature on [a, b] after z = c + h sin(phi), which absorbs square-root
// behaviour at both ends.
double endpoint_smoothed_integral(const std::function<double(double)>& g, double a, double b) {
  static const QuadratureRule rule = gauss_legendre(256, -kPi / 2, kPi / 2);
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double s = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i)
    s += rule.weights[i] * g(c + h * std::sin(rule.nodes[i])) * h * std::cos(rule.nodes[i]);
  return s;
}

}  // namespace

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::locally_max: return "locally_max";
    case Phase::boundary: return "boundary";
    case Phase::not_locally_max: return "not_locally_max";
  }
  return "?";
}

Phase phase_classify(int dim, double radius) {
  if (dim < 2) throw std::invalid_argument("phase_classify: dimension must be >= 2");
  if (!(radius > 0.0)) throw std::invalid_argument("phase_classify: radius must be positive");
  const double gap = radius * radius - dim - 2.0;
  if (std::abs(gap) <= 1e-12 * (dim + 2.0)) return Phase::boundary;
  return gap < 0 ? Phase::locally_max : Phase::not_locally_max;
}

std::size_t default_sphere_resolution(int dim) { return dim == 2 ? 2048 : 96; }

SphereRule sphere_rule(int dim, double radius, std::size_t resolution) {
  if (resolution == 0) resolution = default_sphere_resolution(dim);
  SphereRule rule{dim, radius, {}, {}};
  if (dim == 2) {
    for (double t : periodic_grid(resolution)) {
      rule.points.push_back({radius * std::cos(t), radius * std::sin(t)});
      rule.weights.push_back(radius * 2 * kPi / resolution);
    }
  } else if (dim == 3) {
    const auto polar = gauss_legendre(std::max<std::size_t>(2, resolution / 2), -1.0, 1.0);
    const auto azimuth = periodic_grid(resolution);
    for (std::size_t i = 0; i < polar.size(); ++i) {
      const double u = polar.nodes[i], sn = std::sqrt(1 - u * u);
      for (double p : azimuth) {
        rule.points.push_back({radius * sn * std::cos(p), radius * sn * std::sin(p), radius * u});
        rule.weights.push_back(radius * radius * polar.weights[i] * 2 * kPi / resolution);
      }
    }
  } else {
    throw std::invalid_argument("sphere_rule: surface quadrature is available for n = 2, 3 only");
  }
  return rule;
}

double sphere_moment(int dim, double radius, SphereMomentKind kind) {
  if (dim < 2) throw std::invalid_argument("sphere_moment: dimension must be >= 2");
  if (radius < 0) throw std::invalid_argument("sphere_moment: negative radius");
  if (radius == 0) return 0.0;
  const double unit = moment_unit(dim, radius);
  return kind == SphereMomentKind::x1_4 ? 3 * unit : unit;
}

std::vector<std::vector<double>> g_gram_matrix(int dim, double radius) {
  const double diff = sphere_moment(dim, radius, SphereMomentKind::x1_4) -
                      sphere_moment(dim, radius, SphereMomentKind::x1sq_x2sq);
  std::vector<std::vector<double>> gram(dim, std::vector<double>(dim, -dim * diff));
  for (int i = 0; i < dim; ++i) gram[i][i] = dim * (dim - 1.0) * diff;
  return gram;
}

double g_function(int i, std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  return n * x[i] * x[i] - norm_sq(x);
}

// ---------------------------------------------------------------------------

NormalPerturbation NormalPerturbation::from_coefficients(int dim, double radius, std::vector<double> a) {
  if (dim < 2) throw std::invalid_argument("NormalPerturbation: dimension must be >= 2");
  if (!(radius > 0)) throw std::invalid_argument("NormalPerturbation: radius must be positive");
  if (a.size() != static_cast<std::size_t>(dim))
    throw std::invalid_argument("NormalPerturbation: need one coefficient per coordinate");
  NormalPerturbation f;
  f.dim_ = dim;
  f.radius_ = radius;
  f.coeffs_ = std::move(a);
  return f;
}

NormalPerturbation NormalPerturbation::from_grid(double radius, std::vector<double> samples) {
  if (!(radius > 0)) throw std::invalid_argument("NormalPerturbation: radius must be positive");
  if (samples.size() < 4) throw std::invalid_argument("NormalPerturbation: need at least 4 samples");
  NormalPerturbation f;
  f.dim_ = 2;
  f.radius_ = radius;
  f.interp_ = PeriodicInterpolant(samples);
  f.samples_ = std::move(samples);
  return f;
}

std::vector<double> NormalPerturbation::weights() const {
  if (!is_polynomial()) throw std::logic_error("NormalPerturbation: grid form has no weights");
  const double total = std::accumulate(coeffs_.begin(), coeffs_.end(), 0.0);
  std::vector<double> w(coeffs_.size());
  for (std::size_t j = 0; j < w.size(); ++j) w[j] = dim_ * coeffs_[j] - total;
  return w;
}

double NormalPerturbation::operator()(std::span<const double> x) const {
  if (x.size() != static_cast<std::size_t>(dim_)) throw std::invalid_argument("NormalPerturbation: bad point");
  if (!is_polynomial()) return interp_(std::atan2(x[1], x[0]));
  double s = 0.0;
  for (int i = 0; i < dim_; ++i) s += coeffs_[i] * g_function(i, x);
  return s;
}

double NormalPerturbation::at_angle(double theta) const {
  if (dim_ != 2) throw std::logic_error("NormalPerturbation: angles only parametrize the circle");
  if (is_polynomial()) {
    const double x[2] = {radius_ * std::cos(theta), radius_ * std::sin(theta)};
    return (*this)(x);
  }
  return interp_(theta);
}

double NormalPerturbation::surface_mean() const {
  if (!is_polynomial()) {
    const double sum = std::accumulate(samples_.begin(), samples_.end(), 0.0);
    return radius_ * 2 * kPi / samples_.size() * sum;
  }
  // Each x_j^2 integrates to r^{n+1} Vol / n.
  const auto w = weights();
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  return total * std::exp((dim_ + 1) * std::log(radius_) + log_sphere_volume(dim_)) / dim_;
}

double NormalPerturbation::surface_norm_sq() const {
  if (!is_polynomial()) {
    double sum = 0.0;
    for (double v : samples_) sum += v * v;
    return radius_ * 2 * kPi / samples_.size() * sum;
  }
  const double m4 = sphere_moment(dim_, radius_, SphereMomentKind::x1_4);
  const double m22 = sphere_moment(dim_, radius_, SphereMomentKind::x1sq_x2sq);
  const auto w = weights();
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  return (m4 - m22) * norm_sq(w) + m22 * total * total;
}

NormalPerturbation NormalPerturbation::scaled(double c) const {
  if (is_polynomial()) {
    auto a = coeffs_;
    for (auto& v : a) v *= c;
    return from_coefficients(dim_, radius_, std::move(a));
  }
  auto s = samples_;
  for (auto& v : s) v *= c;
  return from_grid(radius_, std::move(s));
}

NormalPerturbation NormalPerturbation::normalized() const {
  const double n2 = surface_norm_sq();
  if (!(n2 > 0)) throw std::invalid_argument("NormalPerturbation: cannot normalize the zero function");
  return scaled(1.0 / std::sqrt(n2));
}

bool NormalPerturbation::is_mean_zero(double tol) const {
  return std::abs(surface_mean()) <= tol * std::max(1.0, std::sqrt(surface_norm_sq()));
}

bool NormalPerturbation::is_normalized(double tol) const { return std::abs(surface_norm_sq() - 1.0) <= tol; }

// ---------------------------------------------------------------------------

VectorField VectorField::for_perturbation(const NormalPerturbation& f) {
  if (f.is_polynomial()) return VectorField(CorollaryField{f.radius(), f.weights()});
  return VectorField(NormalExtension{f.radius(), PeriodicInterpolant(f.samples())});
}

int VectorField::dim() const {
  return std::visit(
      [](const auto& k) -> int {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Dilation> || std::is_same_v<T, ZeroField>)
          return k.dim;
        else if constexpr (std::is_same_v<T, CorollaryField>)
          return static_cast<int>(k.weights.size());
        else
          return 2;
      },
      kind_);
}

void VectorField::value(std::span<const double> x, std::span<double> out) const {
  const std::size_t n = x.size();
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Dilation>) {
          for (std::size_t j = 0; j < n; ++j) out[j] = x[j];
        } else if constexpr (std::is_same_v<T, ZeroField>) {
          for (std::size_t j = 0; j < n; ++j) out[j] = 0.0;
        } else if constexpr (std::is_same_v<T, CorollaryField>) {
          const double bump = 0.5 * (norm_sq(x) - k.radius * k.radius);
          for (std::size_t j = 0; j < n; ++j) out[j] = k.radius * k.weights[j] * x[j] * (1 + bump);
        } else {
          const double rho = std::sqrt(norm_sq(x));
          const double profile = 1 + (k.radius - 1 / k.radius) * (rho - k.radius);
          const double scale = k.f(std::atan2(x[1], x[0])) * profile / rho;
          out[0] = scale * x[0];
          out[1] = scale * x[1];
        }
      },
      kind_);
  for (std::size_t j = 0; j < n; ++j) out[j] *= sign_;
}

std::vector<double> VectorField::value(std::span<const double> x) const {
  std::vector<double> out(x.size());
  value(x, out);
  return out;
}

double VectorField::divergence(std::span<const double> x) const {
  const double d = std::visit(
      [&](const auto& k) -> double {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Dilation>) {
          return static_cast<double>(x.size());
        } else if constexpr (std::is_same_v<T, ZeroField>) {
          return 0.0;
        } else if constexpr (std::is_same_v<T, CorollaryField>) {
          const double bump = 0.5 * (norm_sq(x) - k.radius * k.radius);
          double s = 0.0;
          for (std::size_t j = 0; j < x.size(); ++j) s += k.weights[j] * (1 + bump + x[j] * x[j]);
          return k.radius * s;
        } else {
          // div(v(rho, theta) e_rho) = (1/rho) d(rho v)/d rho in the plane.
          const double rho = std::sqrt(norm_sq(x));
          const double slope = k.radius - 1 / k.radius;
          const double profile = 1 + slope * (rho - k.radius);
          return k.f(std::atan2(x[1], x[0])) * (slope + profile / rho);
        }
      },
      kind_);
  return sign_ * d;
}

VectorField VectorField::negated() const {
  VectorField out = *this;
  out.sign_ = -sign_;
  return out;
}

std::vector<double> FlowSpec::push(std::span<const double> x, double t) const {
  const std::size_t n = x.size();
  std::vector<double> y(x.begin(), x.end());
  if (t == 0.0) return y;
  const int steps = std::max(1, static_cast<int>(std::ceil(std::abs(t) / step - 1e-9)));
  const double dt = t / steps;
  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
  for (int s = 0; s < steps; ++s) {
    field.value(y, k1);
    for (std::size_t j = 0; j < n; ++j) tmp[j] = y[j] + 0.5 * dt * k1[j];
    field.value(tmp, k2);
    for (std::size_t j = 0; j < n; ++j) tmp[j] = y[j] + 0.5 * dt * k2[j];
    field.value(tmp, k3);
    for (std::size_t j = 0; j < n; ++j) tmp[j] = y[j] + dt * k3[j];
    field.value(tmp, k4);
    for (std::size_t j = 0; j < n; ++j) y[j] += dt / 6 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
  }
  return y;
}

// ---------------------------------------------------------------------------

MeasureVariation measure_variation(const VectorField& field, const SymmetricSet& base) {
  const auto [n, r, sign] = sphere_base(base);
  if (field.dim() != n) throw std::invalid_argument("measure_variation: field dimension mismatch");
  const double density = gaussian_density_at_radius(n, r);

  if (n == 2 || n == 3) {
    const auto rule = sphere_rule(n, r);
    double first = 0.0, second = 0.0;
    std::vector<double> X(n);
    for (std::size_t k = 0; k < rule.size(); ++k) {
      const auto& x = rule.points[k];
      field.value(x, X);
      const double normal = sign * dot(X, x) / r;
      first += rule.weights[k] * normal * density;
      second += rule.weights[k] * (field.divergence(x) - dot(X, x)) * normal * density;
    }
    return {first, second};
  }
  // Closed forms on the sphere for the polynomial fields.
  const double area = std::exp((n - 1) * std::log(r) + log_sphere_volume(n));
  if (std::holds_alternative<ZeroField>(field.kind())) return {0.0, 0.0};
  const double orient = field.orientation();
  if (std::holds_alternative<Dilation>(field.kind())) {
    // <X, N> = +-r and div X - <X, x> = +-n - (+-r^2).
    const double first = sign * orient * r * area * density;
    return {first, orient * (n - r * r) * first};
  }
  if (const auto* c = std::get_if<CorollaryField>(&field.kind())) {
    // <X, x>/r = sum w_j x_j^2 and div X - <X, x> = r sum w on the sphere.
    const double total = std::accumulate(c->weights.begin(), c->weights.end(), 0.0);
    const double first = sign * orient * total * r * r * area / n * density;
    return {first, orient * r * total * first};
  }
  throw std::invalid_argument("measure_variation: no closed form for this field in dimension > 3");
}

MeasureVariation measure_variation_fd(const FlowSpec& flow, const SymmetricSet& base, double h) {
  const auto [n, r, sign] = sphere_base(base);
  std::function<double(double)> measure;
  std::vector<Point2> circle;
  if (n == 2) {
    circle = circle_points(r, kFlowBoundaryNodes);
    measure = [&](double t) {
      const double inner = push_domain(circle, flow, t).measure();
      return sign > 0 ? inner : 1.0 - inner;
    };
  } else if (std::holds_alternative<Dilation>(flow.field.kind())) {
    measure = [&, n = n, r = r, sign = sign](double t) {
      std::vector<double> p(n, 0.0);
      p[0] = r;
      const double radius = std::abs(flow.push(p, t)[0]);
      const BallSpec spec(n, radius);
      return sign > 0 ? gaussian_measure_ball(spec) : gaussian_measure_ball_complement(spec);
    };
  } else {
    throw std::invalid_argument("measure_variation_fd: only dilations are supported for n != 2");
  }
  const auto d = richardson(measure, h);
  return {d.first, d.second};
}

PoincareRatio poincare_ratio(const NormalPerturbation& f) {
  if (!f.is_mean_zero()) throw std::invalid_argument("poincare_ratio: f must have zero surface mean");
  const int n = f.dim();
  const double r = f.radius();
  const double unit = moment_unit(n, r);
  const double norm2 = f.surface_norm_sq();
  double lhs = 0.0;
  if (n <= 3) {
    const auto rule = sphere_rule(n, r);
    std::vector<double> moments(n, 0.0);
    for (std::size_t k = 0; k < rule.size(); ++k) {
      const double v = f(rule.points[k]);
      for (int i = 0; i < n; ++i) moments[i] += rule.weights[k] * rule.points[k][i] * rule.points[k][i] * v;
    }
    lhs = norm_sq(moments);
  } else {
    // int x_i^2 f = w_i (M4 - M22) + (sum w) M22.
    const auto w = f.weights();
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (double wi : w) {
      const double m = wi * 2 * unit + total * unit;
      lhs += m * m;
    }
  }
  const double constant = 2 * unit * norm2;
  return {lhs, constant, constant > 0 ? lhs / constant : 0.0};
}

// ---------------------------------------------------------------------------

namespace {

void require_normalized(const NormalPerturbation& f, const char* what) {
  if (!f.is_mean_zero()) throw std::invalid_argument(std::string(what) + ": f must have zero surface mean");
  if (!f.is_normalized()) throw std::invalid_argument(std::string(what) + ": f must have unit surface norm");
}

double closed_form_bound(int n, double r) {
  return 2 * std::exp((n + 1) * std::log(r) - r * r + log_sphere_volume(n) - n * std::log(2 * kPi)) /
         (n * (n + 2.0)) * (r * r - n - 2);
}

}  // namespace

VariationReport second_variation_F(const NormalPerturbation& f, BaseSet base) {
  require_normalized(f, "second_variation_F");
  const int n = f.dim();
  const double r = f.radius();
  const double sign = base == BaseSet::ball ? 1.0 : -1.0;
  const double density = gaussian_density_at_radius(n, r);
  // All coordinate defects of a ball coincide; the complement's are negated.
  const double d = sign * second_moment_defect_ball(BallSpec(n, r));
  const VectorField X = sign > 0 ? VectorField::for_perturbation(f) : VectorField::for_perturbation(f).negated();

  VariationReport rep;
  rep.first_variation = density * f.surface_mean();
  rep.closed_form_bound = closed_form_bound(n, r);
  rep.phase = phase_classify(n, r);
  rep.potential = [n, d](std::span<const double> x) {
    double s = 0.0;
    for (double xi : x) s += d * (1 - xi * xi);
    return s * gaussian_density(x.subspan(0, n));
  };

  if (n <= 3) {
    // Lemma-2 form with V(x) = sum_i d_i (1 - x_i^2) gamma(x):
    // div(V X) = gamma [sum_i d_i (-2 x_i X_i) + sum_i d_i (1 - x_i^2) (div X - <X, x>)].
    const auto rule = sphere_rule(n, r);
    std::vector<double> moments(n, 0.0), Xv(n);
    double div_term = 0.0;
    for (std::size_t k = 0; k < rule.size(); ++k) {
      const auto& x = rule.points[k];
      X.value(x, Xv);
      const double fx = sign * dot(Xv, x) / r;  // <X, N>
      const double drift = X.divergence(x) - dot(Xv, x);
      double div_vx = 0.0;
      for (int i = 0; i < n; ++i) {
        moments[i] += rule.weights[k] * (1 - x[i] * x[i]) * fx * density;
        div_vx += d * (-2 * x[i] * Xv[i]) + d * (1 - x[i] * x[i]) * drift;
      }
      div_term += rule.weights[k] * div_vx * density * fx;
    }
    rep.second_variation = norm_sq(moments) + div_term;
    return rep;
  }

  // Closed form for f = sum_j w_j x_j^2: int (1 - x_i^2) f = int f - w_i (M4 - M22) - (sum w) M22,
  // and the divergence term reduces to -2 r d gamma_r int f^2 + (n - r^2) r (sum w) d gamma_r int f.
  const auto w = f.weights();
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  const double unit = moment_unit(n, r);
  const double mean = f.surface_mean();
  double term1 = 0.0;
  for (double wi : w) {
    const double m = density * (mean - wi * 2 * unit - total * unit);
    term1 += m * m;
  }
  // d and X both flip with the complement, so sign * d is the ball's defect.
  const double term2 = sign * d * density * (-2 * r * f.surface_norm_sq() + (n - r * r) * r * total * mean);
  rep.second_variation = term1 + term2;
  return rep;
}

double second_variation_F_fd(const NormalPerturbation& f, BaseSet base, double h) {
  if (f.dim() != 2) throw std::invalid_argument("second_variation_F_fd: planar perturbations only");
  const double sign = base == BaseSet::ball ? 1.0 : -1.0;
  const VectorField X = sign > 0 ? VectorField::for_perturbation(f) : VectorField::for_perturbation(f).negated();
  const FlowSpec flow{X};
  const auto circle = circle_points(f.radius(), kFlowBoundaryNodes);
  auto F = [&](double t) {
    const auto dv = push_domain(circle, flow, t).defect();
    // The complement's defects are the negatives of the inner region's.
    return dv[0] * dv[0] + dv[1] * dv[1];
  };
  return 0.5 * richardson(F, h).second;
}

double t_rho_ball_radial(int dim, double radius, const Correlation& rho, double s) {
  if (dim < 2) throw std::invalid_argument("t_rho_ball_radial: dimension must be >= 2");
  const double p = rho.rho(), sigma = rho.complement();
  if (p == 0.0) return gaussian_measure_ball(BallSpec(dim, radius));
  // Condition on the coordinate along x; the orthogonal part is sigma chi_{n-1}.
  auto g = [&](double z) {
    const double along = p * s + sigma * z;
    const double room = radius * radius - along * along;
    if (room <= 0) return 0.0;
    return normal_pdf(z) * boost::math::gamma_p(0.5 * (dim - 1), room / (2 * sigma * sigma));
  };
  return endpoint_smoothed_integral(g, (-radius - p * s) / sigma, (radius - p * s) / sigma);
}

double t_rho_ball_radial_derivative(int dim, double radius, const Correlation& rho, double s) {
  if (dim < 2) throw std::invalid_argument("t_rho_ball_radial_derivative: dimension must be >= 2");
  const double p = rho.rho(), sigma = rho.complement();
  if (p == 0.0) return 0.0;
  // (rho / sigma) E[Z_1 1_B(rho x + sigma Z)].
  auto g = [&](double z) {
    const double along = p * s + sigma * z;
    const double room = radius * radius - along * along;
    if (room <= 0) return 0.0;
    return z * normal_pdf(z) * boost::math::gamma_p(0.5 * (dim - 1), room / (2 * sigma * sigma));
  };
  return p / sigma * endpoint_smoothed_integral(g, (-radius - p * s) / sigma, (radius - p * s) / sigma);
}

namespace {

double noise_variation_at(const NormalPerturbation& f, const Correlation& rho, BaseSet base,
                          std::size_t resolution) {
  const int n = f.dim();
  const double r = f.radius();
  const double p = rho.rho(), sigma2 = 1 - p * p;
  const double sign = base == BaseSet::ball ? 1.0 : -1.0;
  const double density = gaussian_density_at_radius(n, r);
  const VectorField X = sign > 0 ? VectorField::for_perturbation(f) : VectorField::for_perturbation(f).negated();
  const auto rule = sphere_rule(n, r, resolution);
  const std::size_t m = rule.size();

  std::vector<double> fx(m), Xv(n);
  std::vector<double> grad_term(m);
  // T_rho 1_A is radial; the complement's gradient is the negative.
  const double slope = sign * t_rho_ball_radial_derivative(n, r, rho, r);
  double mean = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const auto& x = rule.points[k];
    X.value(x, Xv);
    fx[k] = sign * dot(Xv, x) / r;
    mean += rule.weights[k] * fx[k];
    grad_term[k] = slope * dot(x, Xv) / r;  // <grad T, X>
  }
  // G - gamma(x) gamma(y) = gamma_r^2 expm1(E) on the sphere, and the
  // subtracted part integrates to (gamma_r int f)^2.
  const double log_pref = -0.5 * n * std::log1p(-p * p);
  double kernel = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    if (fx[k] == 0.0) continue;
    double row = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double e = log_pref + (-2 * r * r * p * p + 2 * p * dot(rule.points[k], rule.points[j])) / (2 * sigma2);
      row += rule.weights[j] * std::expm1(e) * fx[j];
    }
    kernel += rule.weights[k] * fx[k] * row;
  }
  kernel = density * density * kernel + (density * mean) * (density * mean);

  double gradient = 0.0;
  for (std::size_t k = 0; k < m; ++k) gradient += rule.weights[k] * grad_term[k] * fx[k] * density;
  return kernel + gradient;
}

}  // namespace

VariationReport second_variation_noise(const NormalPerturbation& f, const Correlation& rho, BaseSet base) {
  require_normalized(f, "second_variation_noise");
  const int n = f.dim();
  if (n > 3) throw std::invalid_argument("second_variation_noise: surface quadrature needs n = 2 or 3");
  const double r = f.radius();
  const std::size_t res = default_sphere_resolution(n);

  VariationReport rep;
  rep.second_variation = noise_variation_at(f, rho, base, res);
  const double coarse = noise_variation_at(f, rho, base, res / 2);
  rep.quadrature_converged =
      std::abs(rep.second_variation - coarse) <= 1e-12 + 1e-7 * std::abs(rep.second_variation);
  const double tau = t_rho_ball_radial(n, r, rho, r);
  const double t_on_boundary = base == BaseSet::ball ? tau : 1 - tau;
  const double density = gaussian_density_at_radius(n, r);
  rep.first_variation = 2 * t_on_boundary * density * f.surface_mean();
  rep.phase = phase_classify(n, r);
  if (rho.rho() != 0.0) {
    const double half_f = second_variation_F(f, base).second_variation;
    rep.rho_scaled_gap = std::abs(2 * rep.second_variation / (rho.rho() * rho.rho()) - half_f);
  }
  rep.potential = [n, r, rho, base](std::span<const double> x) {
    const double s = std::sqrt(norm_sq(x));
    const double t = t_rho_ball_radial(n, r, rho, s);
    return (base == BaseSet::ball ? t : 1 - t) * gaussian_density(x);
  };
  return rep;
}

// ---------------------------------------------------------------------------

namespace {

double gamma2(const Point2& x) { return std::exp(-0.5 * (x[0] * x[0] + x[1] * x[1])) / (2 * kPi); }

}  // namespace

double Kernel2D::energy(const StarDomain& domain) const {
  const auto nodes = domain.interior_rule(16);
  double total = 0.0;
  for (const auto& a : nodes) {
    double row = 0.0;
    for (const auto& b : nodes) row += b.weight * value(a.x, b.x);
    total += a.weight * row;
  }
  return total;
}

double ProductGaussianKernel::value(const Point2& x, const Point2& y) const { return gamma2(x) * gamma2(y); }
Point2 ProductGaussianKernel::grad_x(const Point2& x, const Point2& y) const {
  const double g = value(x, y);
  return {-x[0] * g, -x[1] * g};
}
double ProductGaussianKernel::energy(const StarDomain& domain) const {
  const double m = domain.measure();
  return m * m;
}

double MehlerKernel::value(const Point2& x, const Point2& y) const {
  const double p = rho_.rho(), s2 = 1 - p * p;
  const double q = x[0] * x[0] + x[1] * x[1] + y[0] * y[0] + y[1] * y[1] - 2 * p * (x[0] * y[0] + x[1] * y[1]);
  return std::exp(-q / (2 * s2)) / (4 * kPi * kPi * s2);
}
Point2 MehlerKernel::grad_x(const Point2& x, const Point2& y) const {
  const double p = rho_.rho(), s2 = 1 - p * p;
  const double g = value(x, y);
  return {g * (p * y[0] - x[0]) / s2, g * (p * y[1] - x[1]) / s2};
}
double MehlerKernel::energy(const StarDomain& domain) const {
  // Hermite series of the stability, truncated where |rho|^{L+1} < 1e-17.
  const double p = std::abs(rho_.rho());
  const int degree =
      p == 0.0 ? 0 : std::clamp(static_cast<int>(std::ceil(std::log(1e-17) / std::log(p))), 2, kHermiteDegreeCap);
  const auto table = fourier_table(domain, degree);
  double total = 0.0;
  for (std::size_t k = 0; k < table.values().size(); ++k)
    total += std::pow(rho_.rho(), table.indices()[k].degree()) * table.values()[k] * table.values()[k];
  return total;
}

double DefectKernel::value(const Point2& x, const Point2& y) const {
  return ((1 - x[0] * x[0]) * (1 - y[0] * y[0]) + (1 - x[1] * x[1]) * (1 - y[1] * y[1])) * gamma2(x) * gamma2(y);
}
Point2 DefectKernel::grad_x(const Point2& x, const Point2& y) const {
  const double gg = gamma2(x) * gamma2(y);
  const double a0 = 1 - y[0] * y[0], a1 = 1 - y[1] * y[1];
  const double s = (1 - x[0] * x[0]) * a0 + (1 - x[1] * x[1]) * a1;
  return {gg * (-2 * x[0] * a0 - x[0] * s), gg * (-2 * x[1] * a1 - x[1] * s)};
}
double DefectKernel::energy(const StarDomain& domain) const {
  const auto d = domain.defect();
  return d[0] * d[0] + d[1] * d[1];
}

double general_second_variation(const Kernel2D& kernel, const StarDomain& domain, const VectorField& field,
                                const GeneralVariationOptions& opts) {
  if (field.dim() != 2) throw std::invalid_argument("general_second_variation: planar fields only");
  const std::size_t m = domain.size();
  const auto interior = domain.interior_rule(opts.radial_nodes);
  std::vector<double> fx(m), ds(m), div_vx(m);
  std::vector<double> Xv(2);
  for (std::size_t k = 0; k < m; ++k) {
    const Point2& x = domain.point(k);
    field.value(x, Xv);
    const Point2 nrm = domain.normal(k);
    fx[k] = Xv[0] * nrm[0] + Xv[1] * nrm[1];
    ds[k] = domain.speed(k) * domain.du();
    double v = 0.0, gx = 0.0, gy = 0.0;
    for (const auto& node : interior) {
      v += node.weight * kernel.value(x, node.x);
      const Point2 g = kernel.grad_x(x, node.x);
      gx += node.weight * g[0];
      gy += node.weight * g[1];
    }
    div_vx[k] = gx * Xv[0] + gy * Xv[1] + v * field.divergence(x);
  }
  double pair = 0.0, single = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    if (fx[k] == 0.0) continue;
    double row = 0.0;
    for (std::size_t j = 0; j < m; ++j) row += ds[j] * kernel.value(domain.point(k), domain.point(j)) * fx[j];
    pair += ds[k] * fx[k] * row;
    single += ds[k] * div_vx[k] * fx[k];
  }
  return pair + single;
}

double general_second_variation_fd(const Kernel2D& kernel, const StarDomain& domain, const FlowSpec& flow,
                                   const GeneralVariationOptions& opts) {
  std::vector<Point2> boundary(domain.size());
  for (std::size_t k = 0; k < domain.size(); ++k) boundary[k] = domain.point(k);
  auto energy = [&](double t) { return kernel.energy(push_domain(boundary, flow, t)); };
  return 0.5 * richardson(energy, opts.fd_step).second;
}

}  // namespace symstab
