#include "symstab/quadrature.hpp"

#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include <fftw3.h>
#include <gsl/gsl_integration.h>

namespace symstab {

namespace {

// The FFTW planner is not reentrant.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// Complex half-spectrum of real periodic samples.
std::vector<std::complex<double>> real_spectrum(std::span<const double> samples) {
  const std::size_t m = samples.size();
  std::vector<double> in(samples.begin(), samples.end());
  std::vector<std::complex<double>> out(m / 2 + 1);
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(m), in.data(),
                                reinterpret_cast<fftw_complex*>(out.data()), FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  return out;
}

std::vector<double> real_inverse(std::vector<std::complex<double>> spectrum, std::size_t m) {
  std::vector<double> out(m);
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_c2r_1d(static_cast<int>(m),
                                reinterpret_cast<fftw_complex*>(spectrum.data()), out.data(),
                                FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  for (double& v : out) v /= static_cast<double>(m);
  return out;
}

struct FixedWorkspaceDeleter {
  void operator()(gsl_integration_fixed_workspace* w) const { gsl_integration_fixed_free(w); }
};

struct GlTableDeleter {
  void operator()(gsl_integration_glfixed_table* t) const { gsl_integration_glfixed_table_free(t); }
};

}  // namespace

QuadratureRule gauss_legendre(std::size_t n, double a, double b) {
  if (n == 0) throw std::invalid_argument("gauss_legendre: n must be positive");
  std::unique_ptr<gsl_integration_glfixed_table, GlTableDeleter> table(
      gsl_integration_glfixed_table_alloc(n));
  if (!table) throw std::runtime_error("gauss_legendre: allocation failed");
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    gsl_integration_glfixed_point(a, b, i, &rule.nodes[i], &rule.weights[i], table.get());
  return rule;
}

QuadratureRule gauss_hermite(std::size_t n) {
  if (n == 0) throw std::invalid_argument("gauss_hermite: n must be positive");
  // GSL weight is exp(-b (x-a)^2); b = 1/2 gives the probabilists' weight.
  std::unique_ptr<gsl_integration_fixed_workspace, FixedWorkspaceDeleter> ws(
      gsl_integration_fixed_alloc(gsl_integration_fixed_hermite, n, 0.0, 0.5, 0.0, 0.0));
  if (!ws) throw std::runtime_error("gauss_hermite: allocation failed");
  const double* x = gsl_integration_fixed_nodes(ws.get());
  const double* w = gsl_integration_fixed_weights(ws.get());
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  QuadratureRule rule;
  rule.nodes.assign(x, x + n);
  rule.weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) rule.weights[i] = w[i] * norm;
  return rule;
}

std::vector<double> periodic_grid(std::size_t m) {
  std::vector<double> theta(m);
  for (std::size_t k = 0; k < m; ++k)
    theta[k] = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(m);
  return theta;
}

std::vector<double> spectral_derivative(std::span<const double> samples) {
  const std::size_t m = samples.size();
  if (m < 3) throw std::invalid_argument("spectral_derivative: need at least 3 samples");
  auto spec = real_spectrum(samples);
  for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= std::complex<double>(0.0, k);
  // The Nyquist mode of an even-length grid has no well-defined derivative.
  if (m % 2 == 0) spec[m / 2] = 0.0;
  return real_inverse(std::move(spec), m);
}

PeriodicInterpolant::PeriodicInterpolant(std::span<const double> samples, double drop_tol) {
  const std::size_t m = samples.size();
  if (m == 0) throw std::invalid_argument("PeriodicInterpolant: no samples");
  const auto spec = real_spectrum(samples);
  const double inv_m = 1.0 / static_cast<double>(m);
  mean_ = spec[0].real() * inv_m;
  const std::size_t kmax = (m - 1) / 2;
  std::vector<double> c(kmax), s(kmax);
  double scale = std::abs(mean_);
  for (std::size_t k = 1; k <= kmax; ++k) {
    c[k - 1] = 2.0 * spec[k].real() * inv_m;
    s[k - 1] = -2.0 * spec[k].imag() * inv_m;
    scale = std::max(scale, std::hypot(c[k - 1], s[k - 1]));
  }
  std::size_t keep = 0;
  for (std::size_t k = 1; k <= kmax; ++k)
    if (std::hypot(c[k - 1], s[k - 1]) > drop_tol * scale) keep = k;
  c.resize(keep);
  s.resize(keep);
  cos_ = std::move(c);
  sin_ = std::move(s);
}

double PeriodicInterpolant::operator()(double theta) const {
  double v = mean_;
  const double c1 = std::cos(theta), s1 = std::sin(theta);
  double ck = 1.0, sk = 0.0;
  for (std::size_t k = 0; k < cos_.size(); ++k) {
    const double cn = ck * c1 - sk * s1;
    sk = sk * c1 + ck * s1;
    ck = cn;
    v += cos_[k] * ck + sin_[k] * sk;
  }
  return v;
}

double PeriodicInterpolant::derivative(double theta) const {
  double v = 0.0;
  const double c1 = std::cos(theta), s1 = std::sin(theta);
  double ck = 1.0, sk = 0.0;
  for (std::size_t k = 0; k < cos_.size(); ++k) {
    const double cn = ck * c1 - sk * s1;
    sk = sk * c1 + ck * s1;
    ck = cn;
    v += static_cast<double>(k + 1) * (sin_[k] * ck - cos_[k] * sk);
  }
  return v;
}

}  // namespace symstab
