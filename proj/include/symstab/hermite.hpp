#pragma once

#include <compare>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace symstab {

inline constexpr int kHermiteDegreeCap = 60;
inline constexpr int kExactFactorialDegree = 40;

class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(std::vector<int> entries);
  MultiIndex(std::initializer_list<int> entries);

  std::size_t dim() const { return entries_.size(); }
  int degree() const { return degree_; }
  int operator[](std::size_t i) const { return entries_[i]; }
  std::span<const int> entries() const { return entries_; }
  // prod_i entries_i!, accumulated in exact integer arithmetic.
  double factorial() const;

  friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
  friend auto operator<=>(const MultiIndex& a, const MultiIndex& b) {
    return a.entries_ <=> b.entries_;
  }

 private:
  std::vector<int> entries_;
  int degree_ = 0;
};

// e^{lambda x - lambda^2/2}; its Hermite coefficients are lambda^l.
class ExponentialTilt {
 public:
  explicit ExponentialTilt(double lambda);
  double lambda() const { return lambda_; }
  double operator()(double x) const;

 private:
  double lambda_;
};

// k! rounded from the exact integer, k <= kHermiteDegreeCap.
double factorial(int k);

double hermite_1d(int ell, double x);
// sqrt(ell!) h_ell(x), the L2(gamma_1)-orthonormal version.
double hermite_1d_normalized(int ell, double x);
// out[l] = sqrt(l!) h_l(x) for l = 0..out.size()-1.
void hermite_normalized_all(double x, std::span<double> out);

double hermite_nd(const MultiIndex& ell, std::span<const double> x);
double hermite_norm(const MultiIndex& ell);
double hermite_growth_bound(const MultiIndex& ell, std::span<const double> x);

// Integral of h_ell over [c, d] against gamma_1; endpoints may be infinite.
double hermite_interval_integral(int ell, double c, double d);
// Same for sqrt(ell!) h_ell; ell = 0 gives the interval's measure.
double hermite_interval_integral_normalized(int ell, double c, double d);

// All multi-indices of the given dimension with degree <= max_degree, in
// graded order (degree first, then lexicographic).
std::vector<MultiIndex> multi_indices_up_to(std::size_t dim, int max_degree);

}  // namespace symstab
