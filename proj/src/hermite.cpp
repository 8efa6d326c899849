#include "symstab/hermite.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include <boost/multiprecision/cpp_int.hpp>

#include "symstab/gaussian_core.hpp"

namespace symstab {

namespace {

using boost::multiprecision::cpp_int;

const std::array<double, kHermiteDegreeCap + 1>& factorial_table() {
  static const auto table = [] {
    std::array<double, kHermiteDegreeCap + 1> t{};
    cpp_int f = 1;
    t[0] = 1.0;
    for (int k = 1; k <= kHermiteDegreeCap; ++k) {
      f *= k;
      t[k] = f.convert_to<double>();
    }
    return t;
  }();
  return table;
}

void check_degree(int ell) {
  if (ell < 0) throw std::invalid_argument("hermite: negative degree");
  if (ell > kHermiteDegreeCap) throw std::out_of_range("hermite: degree cap exceeded");
}

double h_times_pdf(int ell, double x) {
  if (std::isinf(x)) return 0.0;
  return hermite_1d(ell, x) * normal_pdf(x);
}

double hn_times_pdf(int ell, double x) {
  if (std::isinf(x)) return 0.0;
  return hermite_1d_normalized(ell, x) * normal_pdf(x);
}

}  // namespace

MultiIndex::MultiIndex(std::vector<int> entries) : entries_(std::move(entries)) {
  for (int e : entries_) {
    if (e < 0) throw std::invalid_argument("MultiIndex: negative entry");
    if (e > kHermiteDegreeCap) throw std::out_of_range("MultiIndex: entry exceeds degree cap");
    degree_ += e;
  }
}

MultiIndex::MultiIndex(std::initializer_list<int> entries)
    : MultiIndex(std::vector<int>(entries)) {}

double MultiIndex::factorial() const {
  cpp_int f = 1;
  for (int e : entries_)
    for (int k = 2; k <= e; ++k) f *= k;
  return f.convert_to<double>();
}

ExponentialTilt::ExponentialTilt(double lambda) : lambda_(lambda) {
  if (!std::isfinite(lambda)) throw std::invalid_argument("ExponentialTilt: lambda not finite");
}

double ExponentialTilt::operator()(double x) const {
  return std::exp(lambda_ * x - 0.5 * lambda_ * lambda_);
}

double factorial(int k) {
  check_degree(k);
  return factorial_table()[k];
}

double hermite_1d(int ell, double x) {
  check_degree(ell);
  if (ell == 0) return 1.0;
  double prev = 1.0, cur = x;
  for (int k = 1; k < ell; ++k) {
    const double next = (x * cur - prev) / (k + 1);
    prev = cur;
    cur = next;
  }
  return cur;
}

double hermite_1d_normalized(int ell, double x) {
  check_degree(ell);
  if (ell == 0) return 1.0;
  double prev = 1.0, cur = x;
  for (int k = 1; k < ell; ++k) {
    const double next = (x * cur - std::sqrt(static_cast<double>(k)) * prev) /
                        std::sqrt(static_cast<double>(k + 1));
    prev = cur;
    cur = next;
  }
  return cur;
}

void hermite_normalized_all(double x, std::span<double> out) {
  if (out.empty()) return;
  check_degree(static_cast<int>(out.size()) - 1);
  out[0] = 1.0;
  if (out.size() == 1) return;
  out[1] = x;
  for (std::size_t k = 1; k + 1 < out.size(); ++k)
    out[k + 1] = (x * out[k] - std::sqrt(static_cast<double>(k)) * out[k - 1]) /
                 std::sqrt(static_cast<double>(k + 1));
}

double hermite_nd(const MultiIndex& ell, std::span<const double> x) {
  if (x.size() != ell.dim()) throw std::invalid_argument("hermite_nd: dimension mismatch");
  double v = 1.0;
  for (std::size_t i = 0; i < x.size(); ++i) v *= hermite_1d(ell[i], x[i]);
  return v;
}

double hermite_norm(const MultiIndex& ell) { return 1.0 / ell.factorial(); }

double hermite_growth_bound(const MultiIndex& ell, std::span<const double> x) {
  if (x.size() != ell.dim())
    throw std::invalid_argument("hermite_growth_bound: dimension mismatch");
  const double d = ell.degree();
  double v = std::pow(d, static_cast<double>(ell.dim())) * std::pow(3.0, d);
  for (std::size_t i = 0; i < x.size(); ++i)
    v *= std::max(1.0, std::pow(std::abs(x[i]), ell[i]));
  return std::max(1.0, v);
}

double hermite_interval_integral(int ell, double c, double d) {
  if (ell < 1) throw std::invalid_argument("hermite_interval_integral: requires ell >= 1");
  if (c > d) throw std::invalid_argument("hermite_interval_integral: requires c <= d");
  return -(h_times_pdf(ell - 1, d) - h_times_pdf(ell - 1, c)) / ell;
}

double hermite_interval_integral_normalized(int ell, double c, double d) {
  if (ell < 0) throw std::invalid_argument("hermite_interval_integral: negative degree");
  if (c > d) throw std::invalid_argument("hermite_interval_integral: requires c <= d");
  if (ell == 0) return normal_cdf(d) - normal_cdf(c);
  return -(hn_times_pdf(ell - 1, d) - hn_times_pdf(ell - 1, c)) / std::sqrt(ell);
}

std::vector<MultiIndex> multi_indices_up_to(std::size_t dim, int max_degree) {
  if (dim == 0) throw std::invalid_argument("multi_indices_up_to: dimension must be positive");
  if (max_degree < 0) throw std::invalid_argument("multi_indices_up_to: negative degree");
  std::vector<MultiIndex> out;
  std::vector<int> cur(dim, 0);
  // Entries of a fixed total degree in lexicographically decreasing order of
  // the first coordinate.
  std::function<void(std::size_t, int)> fill = [&](std::size_t i, int remaining) {
    if (i + 1 == dim) {
      cur[i] = remaining;
      out.emplace_back(cur);
      return;
    }
    for (int e = remaining; e >= 0; --e) {
      cur[i] = e;
      fill(i + 1, remaining - e);
    }
  };
  for (int deg = 0; deg <= max_degree; ++deg) fill(0, deg);
  return out;
}

}  // namespace symstab
