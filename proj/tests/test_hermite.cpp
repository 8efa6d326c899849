#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "oracles.hpp"
#include "symstab/gaussian_core.hpp"
#include "symstab/hermite.hpp"
#include "symstab/quadrature.hpp"

using namespace symstab;

namespace {

// h_l(x) = sum_m (-1)^m x^{l-2m} / (2^m m! (l-2m)!), summed in long double.
double explicit_hermite(int ell, double x) {
  long double total = 0.0L;
  for (int m = 0; 2 * m <= ell; ++m) {
    long double term = std::pow(static_cast<long double>(x), ell - 2 * m);
    term /= std::pow(2.0L, m) * std::tgamma(static_cast<long double>(m + 1)) *
            std::tgamma(static_cast<long double>(ell - 2 * m + 1));
    total += (m % 2 == 0) ? term : -term;
  }
  return static_cast<double>(total);
}

double explicit_hermite_abs(int ell, double x) {
  long double total = 0.0L;
  for (int m = 0; 2 * m <= ell; ++m)
    total += std::pow(std::abs(static_cast<long double>(x)), ell - 2 * m) /
             (std::pow(2.0L, m) * std::tgamma(static_cast<long double>(m + 1)) *
              std::tgamma(static_cast<long double>(ell - 2 * m + 1)));
  return static_cast<double>(total);
}

}  // namespace

TEST_CASE("reference values") {
  CHECK(hermite_1d(2, 0.0) == doctest::Approx(-0.5));
  CHECK(hermite_1d(0, 3.7) == 1.0);
  CHECK(hermite_1d(1, 3.7) == 3.7);
  CHECK(hermite_1d(4, 1.0) == doctest::Approx(-1.0 / 12.0).epsilon(1e-15));
  CHECK(explicit_hermite(4, 1.0) == doctest::Approx(-1.0 / 12.0).epsilon(1e-15));
  CHECK(hermite_1d_normalized(2, 0.0) == doctest::Approx(-std::sqrt(2.0) / 2));
}

TEST_CASE("degree cap") {
  CHECK_NOTHROW(hermite_1d(60, 1.0));
  CHECK_THROWS_AS(hermite_1d(61, 1.0), std::out_of_range);
  CHECK_THROWS_AS(MultiIndex({1, 61}), std::out_of_range);
  CHECK_THROWS_AS(MultiIndex({-1}), std::invalid_argument);
}

TEST_CASE("recurrence agrees with the explicit sum") {
  for (int ell = 0; ell <= 20; ++ell)
    for (double x = -5.0; x <= 5.0; x += 0.125) {
      // Relative to the sum of absolute terms, the conditioning scale of the
      // explicit formula (plain relative error is meaningless at the roots).
      const double scale = explicit_hermite_abs(ell, x);
      CHECK(std::abs(hermite_1d(ell, x) - explicit_hermite(ell, x)) <= 1e-10 * scale);
    }
}

TEST_CASE("orthonormality under Gauss-Hermite quadrature") {
  const auto rule = gauss_hermite(40);
  for (int l = 0; l <= 12; ++l)
    for (int m = 0; m <= 12; ++m) {
      double s = 0.0;
      for (std::size_t i = 0; i < rule.size(); ++i)
        s += rule.weights[i] * hermite_1d(l, rule.nodes[i]) * hermite_1d(m, rule.nodes[i]);
      s *= std::sqrt(factorial(l) * factorial(m));
      CHECK(std::abs(s - (l == m ? 1.0 : 0.0)) <= 1e-9);
    }
}

TEST_CASE("generating function") {
  for (double lambda : {0.3, 1.0}) {
    const ExponentialTilt tilt(lambda);
    for (double x = -3.0; x <= 3.0; x += 0.05) {
      double sum = 0.0;
      for (int l = 0; l <= 30; ++l) sum += std::pow(lambda, l) * hermite_1d(l, x);
      CHECK(std::abs(tilt(x) - sum) <= 1e-9);
    }
  }
}

TEST_CASE("derivative identity h_l' = h_{l-1}") {
  const double h = 1e-5;
  for (int l = 1; l <= 15; ++l)
    for (double x : {-2.0, -0.3, 0.0, 1.1, 2.7}) {
      const double fd = (hermite_1d(l, x + h) - hermite_1d(l, x - h)) / (2 * h);
      CHECK(fd == doctest::Approx(hermite_1d(l - 1, x)).epsilon(1e-7).scale(1.0));
    }
}

TEST_CASE("multivariate products and norms") {
  CHECK(hermite_nd(MultiIndex{1, 1}, std::vector{0.7, -1.3}) == doctest::Approx(0.7 * -1.3));
  CHECK(hermite_nd(MultiIndex{2, 0}, std::vector{0.0, 5.0}) == doctest::Approx(-0.5));
  CHECK(hermite_nd(MultiIndex{0, 0, 0}, std::vector{1.0, 2.0, 3.0}) == 1.0);
  CHECK_THROWS_AS(hermite_nd(MultiIndex{1, 1}, std::vector{1.0}), std::invalid_argument);

  CHECK(hermite_norm(MultiIndex{0}) == 1.0);
  CHECK(hermite_norm(MultiIndex{2}) == 0.5);
  CHECK(hermite_norm(MultiIndex{3, 1}) == doctest::Approx(1.0 / 6.0));
  CHECK(MultiIndex({20, 20}).factorial() == doctest::Approx(std::pow(2432902008176640000.0, 2)).epsilon(1e-15));
  CHECK(MultiIndex({40}).factorial() == doctest::Approx(8.15915283247897734e47).epsilon(1e-15));
  CHECK(MultiIndex({3, 4}).degree() == 7);
}

TEST_CASE("growth bound") {
  CHECK(hermite_growth_bound(MultiIndex{2}, std::vector{0.0}) == 18.0);
  CHECK(hermite_growth_bound(MultiIndex{0}, std::vector{4.0}) == 1.0);
  CHECK(hermite_growth_bound(MultiIndex{1, 1}, std::vector{2.0, 2.0}) == 144.0);

  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> ux(-8.0, 8.0);
  std::uniform_int_distribution<int> ul(0, 15);
  for (int trial = 0; trial < 10000; ++trial) {
    const MultiIndex ell{ul(gen), ul(gen)};
    const std::vector<double> x{ux(gen), ux(gen)};
    const double value = std::sqrt(ell.factorial()) * hermite_nd(ell, x);
    CHECK(std::abs(value) <= hermite_growth_bound(ell, x));
  }
}

TEST_CASE("interval integrals") {
  const double inf = std::numeric_limits<double>::infinity();
  for (double r : {0.5, 1.0, 2.4}) {
    const double v = hermite_interval_integral(2, -r, r);
    CHECK(v == doctest::Approx(-r * std::exp(-r * r / 2) * std::sqrt(2 / oracle::pi) / 2).epsilon(1e-14));
    CHECK(std::sqrt(2.0) * v == doctest::Approx(-r * std::exp(-r * r / 2) / std::sqrt(oracle::pi)).epsilon(1e-14));
  }
  for (int l = 1; l <= 9; l += 2) CHECK(std::abs(hermite_interval_integral(l, -1.7, 1.7)) < 1e-16);
  CHECK(std::abs(hermite_interval_integral(2, -inf, inf)) == 0.0);

  for (int l = 1; l <= 10; ++l)
    for (auto [c, d] : {std::pair{-1.0, 1.0}, {0.2, 2.5}, {-3.0, -0.4}, {-0.7, 4.0}}) {
      const double q = oracle::gauss_integral([l](double x) { return explicit_hermite(l, x); }, c, d);
      CHECK(std::abs(hermite_interval_integral(l, c, d) - q) <= 1e-10);
      CHECK(hermite_interval_integral_normalized(l, c, d) ==
            doctest::Approx(std::sqrt(factorial(l)) * q).epsilon(1e-10).scale(1.0));
    }
  for (int l = 1; l <= 10; ++l) {
    // The density is below 1e-300 beyond 40.
    const double q = oracle::gauss_integral([l](double x) { return explicit_hermite(l, x); }, 1.0, 40.0);
    CHECK(std::abs(hermite_interval_integral(l, 1.0, inf) - q) <= 1e-10);
  }
  CHECK(hermite_interval_integral_normalized(0, -1, 1) == doctest::Approx(0.682689492137086).epsilon(1e-14));
}

TEST_CASE("multi-index enumeration") {
  const auto idx = multi_indices_up_to(2, 3);
  CHECK(idx.size() == 10);
  CHECK(idx.front() == MultiIndex{0, 0});
  CHECK(idx[1] == MultiIndex{1, 0});
  CHECK(idx[2] == MultiIndex{0, 1});
  CHECK(multi_indices_up_to(3, 4).size() == 35);
  for (const auto& m : multi_indices_up_to(4, 5)) CHECK(m.degree() <= 5);
}
