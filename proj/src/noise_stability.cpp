#include "symstab/noise_stability.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>

#include "symstab/gaussian_core.hpp"

namespace symstab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = std::numeric_limits<double>::epsilon();

// gamma_1([c, d]) without cancellation in either tail.
double interval_mass(double c, double d) {
  if (d <= c) return 0.0;
  if (c >= 0.0) return normal_cdf(-c) - normal_cdf(-d);
  return normal_cdf(d) - normal_cdf(c);
}

// x phi(x), zero at infinity.
double x_phi(double x) { return std::isinf(x) ? 0.0 : x * normal_pdf(x); }

double pdf_or_zero(double x) { return std::isinf(x) ? 0.0 : normal_pdf(x); }

void require_1d(const SymmetricSet& set, const char* what) {
  if (dimension(set) != 1) throw std::invalid_argument(std::string(what) + ": set must be one-dimensional");
}

// Per-coordinate tables H[i][k] = sqrt(k!) h_k(x_i).
std::vector<std::vector<double>> normalized_hermite(std::span<const double> x, int degree) {
  std::vector<std::vector<double>> h(x.size(), std::vector<double>(degree + 1));
  for (std::size_t i = 0; i < x.size(); ++i) hermite_normalized_all(x[i], h[i]);
  return h;
}

// sum_{k > L} rho^k #{|l| = k} k^n 3^k M^k, the growth-bound majorant of the
// pointwise tail with unit coefficients.
double growth_tail(double rho, std::size_t dim, int degree, double max_abs) {
  const double ratio = 3.0 * std::abs(rho) * std::max(1.0, max_abs);
  if (rho == 0.0) return 0.0;
  if (ratio >= 1.0) return kInf;
  const double n = static_cast<double>(dim);
  double total = 0.0;
  for (int k = degree + 1; k < degree + 100000; ++k) {
    // log of C(k + n - 1, n - 1) k^n ratio^k
    const double log_count = std::lgamma(k + n) - std::lgamma(n) - std::lgamma(k + 1.0);
    const double term = std::exp(log_count + n * std::log(static_cast<double>(k)) + k * std::log(ratio));
    total += term;
    if (term < 1e-17 * total && k > degree + 10) break;
  }
  return total;
}

// sum over |l| > L of rho^{2|l|} (sqrt(l!) h_l(x))^2, summed directly. Per
// coordinate g_k = rho^k sqrt(k!) h_k(x_i) obeys a damped three-term
// recurrence; the degree distribution is the convolution over coordinates.
double diagonal_tail(double rho, std::span<const double> x, int degree) {
  if (rho == 0.0) return 0.0;
  constexpr int kMaxTerms = 20000;
  std::vector<std::vector<double>> u;
  std::size_t len = 0;
  for (double xi : x) {
    std::vector<double> sq{1.0};
    double prev = 0.0, cur = 1.0, total = 1.0;
    for (int k = 0; k < kMaxTerms; ++k) {
      const double next = (rho * xi * cur - rho * rho * std::sqrt(static_cast<double>(k)) * prev) /
                          std::sqrt(k + 1.0);
      prev = cur;
      cur = next;
      sq.push_back(cur * cur);
      total += cur * cur;
      if (k > degree + 10 && k > 4.0 * rho * rho * xi * xi && cur * cur < 1e-22 * total) break;
    }
    len = std::max(len, sq.size());
    u.push_back(std::move(sq));
  }
  std::vector<double> conv{1.0};
  for (auto& sq : u) {
    sq.resize(len, 0.0);
    std::vector<double> out(std::min(conv.size() + len - 1, len * x.size()), 0.0);
    for (std::size_t i = 0; i < conv.size(); ++i)
      for (std::size_t j = 0; j < len && i + j < out.size(); ++j) out[i + j] += conv[i] * sq[j];
    conv = std::move(out);
  }
  double tail = 0.0;
  for (std::size_t k = static_cast<std::size_t>(degree) + 1; k < conv.size(); ++k) tail += conv[k];
  return tail;
}

StabilityEstimate series_estimate(const FourierTable& a, double mass_a, const FourierTable& b, double mass_b,
                                  double rho, int tail_exponent) {
  if (a.dim() != b.dim()) throw std::invalid_argument("stability_series: dimension mismatch");
  const int degree = std::min(a.max_degree(), b.max_degree());
  double value = 0.0, energy_a = 0.0, energy_b = 0.0;
  for (std::size_t t = 0; t < a.indices().size(); ++t) {
    const auto& ell = a.indices()[t];
    if (ell.degree() > degree) break;  // graded order
    const double cb = b[ell];
    const double ca = a.values()[t];
    value += std::pow(rho, ell.degree()) * ca * cb;
    energy_a += ca * ca;
    energy_b += cb * cb;
  }
  // Quadrature noise can push the partial Parseval sum slightly past the mass.
  const double res_a = std::max(mass_a - energy_a, 0.0) + 8 * kEps * mass_a;
  const double res_b = std::max(mass_b - energy_b, 0.0) + 8 * kEps * mass_b;
  StabilityEstimate out;
  out.value = value;
  out.method = StabilityMethod::series;
  out.truncation_degree = degree;
  out.tail_bound = std::pow(std::abs(rho), tail_exponent) * std::sqrt(res_a * res_b);
  return out;
}

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

Correlation::Correlation(double rho) : rho_(rho) {
  if (!(rho > -1.0 && rho < 1.0)) throw std::invalid_argument("correlation must lie in (-1, 1)");
}

double Correlation::complement() const { return std::sqrt((1.0 - rho_) * (1.0 + rho_)); }

FourierTable apply_noise(const FourierTable& table, const Correlation& rho) {
  FourierTable out = table;
  auto values = out.values();
  for (std::size_t t = 0; t < values.size(); ++t) values[t] *= std::pow(rho.rho(), table.indices()[t].degree());
  return out;
}

PointwiseValue t_rho_apply(const FourierTable& table, double mass, const Correlation& rho,
                           std::span<const double> x, std::optional<double> tolerance) {
  if (x.size() != table.dim()) throw std::invalid_argument("t_rho_apply: point dimension mismatch");
  const int degree = table.max_degree();
  const double r = rho.rho();
  const auto h = normalized_hermite(x, degree);

  double value = 0.0, energy = 0.0, magnitude = 0.0;
  for (std::size_t t = 0; t < table.indices().size(); ++t) {
    const auto& ell = table.indices()[t];
    double basis = 1.0;
    for (std::size_t i = 0; i < x.size(); ++i) basis *= h[i][ell[i]];
    const double c = table.values()[t];
    const double weight = std::pow(r, ell.degree());
    value += weight * c * basis;
    magnitude += std::abs(weight * c * basis);
    energy += c * c;
  }
  const double residual = std::max(mass - energy, 0.0) + 8 * kEps * std::max(mass, 1.0);
  const double diag_tail = diagonal_tail(r, x, degree);

  double max_abs = 0.0;
  for (double xi : x) max_abs = std::max(max_abs, std::abs(xi));

  // Rounding in the partial sum itself.
  const double rounding = r == 0.0 ? 0.0 : 4 * kEps * magnitude * (degree + x.size() + 2);
  PointwiseValue out;
  out.value = value;
  // Each coefficient beyond the table is at most sqrt(residual) in size.
  out.tail_bound = std::sqrt(residual) * growth_tail(r, x.size(), degree, max_abs) + rounding;
  out.l2_tail_bound = r == 0.0 ? 0.0 : std::sqrt(residual * diag_tail) + rounding;
  if (tolerance && std::min(out.tail_bound, out.l2_tail_bound) > *tolerance)
    throw std::runtime_error("t_rho_apply: table degree " + std::to_string(degree) +
                             " insufficient for the requested tolerance");
  return out;
}

PointwiseValue t_rho_apply(const SymmetricSet& set, const Correlation& rho, std::span<const double> x,
                           int max_degree, std::optional<double> tolerance) {
  return t_rho_apply(fourier_table(set, max_degree), set_measure(set), rho, x, tolerance);
}

PointwiseValue t_rho_apply(const ExponentialTilt& tilt, const Correlation& rho, double x, int max_degree) {
  const double lambda = tilt.lambda();
  FourierTable table(1, max_degree, "tilt");
  auto values = table.values();
  for (int k = 0; k <= max_degree; ++k) values[k] = std::pow(lambda, k) / std::sqrt(factorial(k));
  const double point[1] = {x};
  return t_rho_apply(table, std::exp(lambda * lambda), rho, point);
}

double t_rho_indicator_1d(std::span<const Interval> pieces, const Correlation& rho, double x) {
  const double s = rho.complement();
  const double shift = rho.rho() * x;
  double total = 0.0;
  for (const auto& iv : pieces) total += interval_mass((iv.lo - shift) / s, (iv.hi - shift) / s);
  return total;
}

StabilityEstimate stability_series(const FourierTable& a, double mass_a, const FourierTable& b,
                                   double mass_b, const Correlation& rho) {
  return series_estimate(a, mass_a, b, mass_b, rho.rho(), std::min(a.max_degree(), b.max_degree()) + 1);
}

StabilityEstimate stability_series(const SymmetricSet& a, const SymmetricSet& b, const Correlation& rho,
                                   int max_degree) {
  if (dimension(a) != dimension(b)) throw std::invalid_argument("stability_series: dimension mismatch");
  const double mass_a = set_measure(a), mass_b = set_measure(b);
  if (rho.rho() == 0.0) {
    StabilityEstimate out;
    out.value = mass_a * mass_b;
    out.method = StabilityMethod::closed_form_rho0;
    out.truncation_degree = 0;
    out.tail_bound = 0.0;
    return out;
  }
  // Odd coefficients of symmetric sets vanish, so the first omitted degree is
  // the next even one.
  const int next_even = max_degree % 2 == 0 ? max_degree + 2 : max_degree + 1;
  return series_estimate(fourier_table(a, max_degree), mass_a, fourier_table(b, max_degree), mass_b, rho.rho(),
                         next_even);
}

unsigned worker_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SYMSTAB_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return n;
}

StabilityEstimate stability_mc(const SymmetricSet& a, const SymmetricSet& b, const Correlation& rho,
                               std::int64_t samples, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("stability_mc: samples must be >= 1");
  const int dim = dimension(a);
  if (dim != dimension(b)) throw std::invalid_argument("stability_mc: dimension mismatch");

  // Fixed batch partition with one generator per batch, so the result does
  // not depend on how batches are spread over threads.
  constexpr std::int64_t kBatch = 1 << 16;
  const std::int64_t batches = (samples + kBatch - 1) / kBatch;
  std::vector<std::int64_t> hits(batches, 0);
  std::atomic<std::int64_t> next{0};
  const double r = rho.rho(), s = rho.complement();

  auto work = [&] {
    std::vector<double> x(dim), y(dim);
    for (std::int64_t k = next++; k < batches; k = next++) {
      std::mt19937_64 gen(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(k))));
      std::normal_distribution<double> normal;
      const std::int64_t count = std::min(kBatch, samples - k * kBatch);
      std::int64_t local = 0;
      for (std::int64_t i = 0; i < count; ++i) {
        for (int d = 0; d < dim; ++d) {
          x[d] = normal(gen);
          y[d] = r * x[d] + s * normal(gen);
        }
        local += contains(a, x) && contains(b, y);
      }
      hits[k] = local;
    }
  };
  const unsigned threads = static_cast<unsigned>(std::min<std::int64_t>(worker_count(), batches));
  std::vector<std::jthread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  pool.clear();

  const std::int64_t total = std::accumulate(hits.begin(), hits.end(), std::int64_t{0});
  const double p = static_cast<double>(total) / static_cast<double>(samples);
  StabilityEstimate out;
  out.value = p;
  out.method = StabilityMethod::montecarlo;
  out.std_error = std::sqrt(p * (1.0 - p) / static_cast<double>(samples));
  return out;
}

double functional_F(const SymmetricSet& set) {
  double total = 0.0;
  for (double d : defect_vector(set)) total += d * d;
  return total;
}

double second_derivative_at_zero(const SymmetricSet& set) {
  // Twice the degree-2 Parseval mass: l = 2 e_i contributes d_i^2 / 2 and
  // l = e_i + e_j (i < j) contributes m_ij^2.
  double total = functional_F(set);
  if (is_axis_aligned(set)) return total;
  const auto n = static_cast<std::size_t>(dimension(set));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double m = cross_moment(set, i, j);
      total += 2.0 * m * m;
    }
  return total;
}

QuadraticRemainder quadratic_remainder(const SymmetricSet& set, const Correlation& rho, int max_degree) {
  const double stab = stability_series(set, set, rho, max_degree).value;
  const double mass = set_measure(set);
  const double model = mass * mass + 0.5 * rho.rho() * rho.rho() * second_derivative_at_zero(set);
  return {stab, model, std::abs(stab - model)};
}

double t_rho_derivative_1d(const SymmetricSet& set, const Correlation& rho, double x) {
  require_1d(set, "t_rho_derivative_1d");
  if (rho.rho() == 0.0) return 0.0;
  const double s = rho.complement();
  const double shift = rho.rho() * x;
  double total = 0.0;
  for (const auto& iv : intervals_1d(set))
    total += pdf_or_zero((iv.lo - shift) / s) - pdf_or_zero((iv.hi - shift) / s);
  return rho.rho() / s * total;
}

LevelSetReport level_set_check(const SymmetricSet& a, const SymmetricSet& b, const Correlation& rho,
                               const LevelSetOptions& opts) {
  require_1d(a, "level_set_check");
  require_1d(b, "level_set_check");
  const std::size_t m = opts.grid_points;
  if (m < 2) throw std::invalid_argument("level_set_check: grid too small");
  const double h = 2.0 * opts.half_width / static_cast<double>(m);
  const double tol = opts.tolerance.value_or(4.0 * h * normal_pdf(0.0));
  const auto pieces = intervals_1d(b);

  struct Node {
    double t;
    double weight;
    bool in_a;
  };
  std::vector<Node> nodes(m);
  double mass_a = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double x = -opts.half_width + (static_cast<double>(k) + 0.5) * h;
    const double point[1] = {x};
    nodes[k] = {t_rho_indicator_1d(pieces, rho, x), normal_pdf(x) * h, contains(a, point)};
    if (nodes[k].in_a) mass_a += nodes[k].weight;
  }
  std::stable_sort(nodes.begin(), nodes.end(), [](const Node& l, const Node& r) { return l.t < r.t; });

  LevelSetReport report;
  report.degenerate = rho.rho() == 0.0;
  // Empty sublevel set: everything in A disagrees.
  double violation = mass_a;
  report.max_violation = violation;
  report.threshold = nodes.front().t - 1.0;
  for (std::size_t k = 0; k < m;) {
    // Points with equal T enter the sublevel set together.
    std::size_t end = k;
    while (end < m && nodes[end].t - nodes[k].t <= 1e-14 * std::max(1.0, std::abs(nodes[k].t))) {
      violation += nodes[end].in_a ? -nodes[end].weight : nodes[end].weight;
      ++end;
    }
    if (violation < report.max_violation) {
      report.max_violation = violation;
      report.threshold = nodes[end - 1].t;
    }
    k = end;
  }
  report.max_violation = std::max(report.max_violation, 0.0);
  report.is_sublevel_set = report.max_violation <= tol;
  return report;
}

RearrangementDeficit rearrangement_deficit(const SymmetricSet& b_prime) {
  require_1d(b_prime, "rearrangement_deficit");
  const auto pieces = intervals_1d(b_prime);
  double a = 0.0;
  for (const auto& iv : pieces) a += interval_mass(iv.lo, iv.hi);
  double r = 0.0;
  if (a >= 1.0)
    r = kInf;
  else if (a > 0.0)
    r = radius_for_measure(1, a);

  // Integral of (x^2 - 1) over [c, d] is c phi(c) - d phi(d).
  auto moment = [](double c, double d) { return x_phi(c) - x_phi(d); };
  double overlap = 0.0, moment_prime = 0.0;
  for (const auto& iv : pieces) {
    moment_prime += moment(iv.lo, iv.hi);
    overlap += interval_mass(std::max(iv.lo, -r), std::min(iv.hi, r));
  }
  RearrangementDeficit out;
  out.measure = a;
  out.ball_radius = r;
  out.l1_distance = std::max(2.0 * (a - overlap), 0.0);
  out.lhs = moment(-r, r) - moment_prime;
  out.rhs = -(a / 6.0) * out.l1_distance * out.l1_distance;
  return out;
}

RearrangementDeficit rearrangement_deficit(const SymmetricSet& b_prime, double a, double tol) {
  const auto out = rearrangement_deficit(b_prime);
  if (std::abs(out.measure - a) > tol)
    throw std::invalid_argument("rearrangement_deficit: gamma_1(B') = " + std::to_string(out.measure) +
                                " differs from the prescribed measure");
  return out;
}

}  // namespace symstab
