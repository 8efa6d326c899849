#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <random>
#include <stdexcept>
#include <vector>

#include "oracles.hpp"
#include "symstab/noise_stability.hpp"

using namespace symstab;
using oracle::pi;

namespace {

const Ellipse2D kEllipse(2.5, 2.31394);
const Strip kStrip(2, 1.90999);

double Phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// T_rho f(x) straight from the defining integral over y.
double direct_t_rho(const std::function<double(double)>& f, double rho, double x) {
  const double s = std::sqrt(1 - rho * rho);
  return oracle::gauss_integral([&](double y) { return f(rho * x + s * y); }, -12, 12);
}

// Same for an interval indicator, splitting at the discontinuities.
double direct_t_rho_interval(double lo, double hi, double rho, double x) {
  const double s = std::sqrt(1 - rho * rho);
  return oracle::gauss_integral([](double) { return 1.0; }, (lo - rho * x) / s, (hi - rho * x) / s);
}

StarShaped2D rotated_ellipse(double angle, std::size_t m) {
  std::vector<double> r(m);
  for (std::size_t k = 0; k < m; ++k) r[k] = kEllipse.radius_at(2 * pi * k / m - angle);
  return StarShaped2D(r);
}

StarShaped2D wobbly(std::size_t m) {
  std::vector<double> r(m);
  for (std::size_t k = 0; k < m; ++k) {
    const double t = 2 * pi * k / m;
    r[k] = 1.0 + 0.1 * std::sin(2 * t) + 0.05 * std::cos(4 * t);
  }
  return StarShaped2D(r);
}

// Exact 1D stability of a centered interval, integrating the closed form of
// T_rho against the density.
double interval_stability(double r, double rho) {
  const double s = std::sqrt(1 - rho * rho);
  return oracle::gauss_integral(
      [&](double x) { return Phi((r - rho * x) / s) - Phi((-r - rho * x) / s); }, -r, r);
}

}  // namespace

TEST_CASE("correlation range") {
  CHECK_THROWS_AS(Correlation(1.0), std::invalid_argument);
  CHECK_THROWS_AS(Correlation(-1.0), std::invalid_argument);
  CHECK_THROWS_AS(Correlation(std::nan("")), std::invalid_argument);
  CHECK(Correlation(0.6).complement() == doctest::Approx(0.8));
}

TEST_CASE("T_0 is the constant measure") {
  const Ball b(2, 1.3);
  const FourierTable t = fourier_table(b, 12);
  for (auto x : {std::vector{0.0, 0.0}, std::vector{1.5, -2.0}, std::vector{4.0, 3.0}}) {
    const auto v = t_rho_apply(t, set_measure(b), Correlation(0.0), x);
    CHECK(v.value == doctest::Approx(set_measure(b)).epsilon(1e-14));
    CHECK(v.tail_bound == 0.0);
  }
}

TEST_CASE("exponential tilt maps to the damped tilt") {
  for (double lambda : {0.5, 1.0})
    for (double rho : {0.3, -0.6})
      for (double x : {-2.0, 0.0, 0.7, 2.5}) {
        const auto v = t_rho_apply(ExponentialTilt(lambda), Correlation(rho), x, 30);
        const double mu = lambda * rho;
        const double expect = std::exp(mu * x - mu * mu / 2);
        CHECK(std::abs(v.value - expect) <= v.l2_tail_bound);
        CHECK(std::abs(v.value - expect) <= 1e-12);
        CHECK(v.value == doctest::Approx(direct_t_rho(ExponentialTilt(lambda), rho, x)).epsilon(1e-11));
      }
}

TEST_CASE("T_rho of a 1D ball against the defining integral") {
  const Ball b(1, 1.0);
  const double origin[1] = {0.0};
  const auto v = t_rho_apply(b, Correlation(0.2), origin, 20);
  const double o = direct_t_rho_interval(-1, 1, 0.2, 0.0);
  CHECK(std::abs(v.value - o) <= v.tail_bound);
  CHECK(std::abs(v.value - o) <= v.l2_tail_bound);
  CHECK(v.tail_bound < 1e-2);

  const std::vector<Interval> piece{{-1.0, 1.0}};
  for (double rho : {0.1, 0.3, 0.6, -0.45})
    for (double x = -2.0; x <= 2.0; x += 0.25) {
      const double point[1] = {x};
      const double exact = direct_t_rho_interval(-1, 1, rho, x);
      CHECK(t_rho_indicator_1d(piece, Correlation(rho), x) == doctest::Approx(exact).epsilon(1e-13));
      const auto s = t_rho_apply(b, Correlation(rho), point, 30);
      CHECK(std::abs(s.value - exact) <= s.l2_tail_bound);
    }
}

TEST_CASE("T_rho of a 2D ball against nested integration") {
  const double r = 1.5, rho = 0.4, s = std::sqrt(1 - rho * rho);
  const std::vector<double> x{0.3, -0.7};
  // Slice in y1; the y2-section of the shifted disk is an interval.
  auto slice = [&](double y1) {
    const double z1 = rho * x[0] + s * y1;
    if (std::abs(z1) >= r) return 0.0;
    const double half = std::sqrt(r * r - z1 * z1);
    return oracle::phi(y1) * (Phi((half - rho * x[1]) / s) - Phi((-half - rho * x[1]) / s));
  };
  const double lo = (-r - rho * x[0]) / s, hi = (r - rho * x[0]) / s;
  const double o = oracle::integrate(slice, lo, hi, 1e-14);
  const auto v = t_rho_apply(Ball(2, r), Correlation(rho), x, 30);
  CHECK(std::abs(v.value - o) <= v.l2_tail_bound);
  CHECK(std::abs(v.value - o) <= 1e-9);
}

TEST_CASE("tolerance request fails when the table is too short") {
  const Ball b(1, 1.0);
  const double far[1] = {3.0};
  CHECK_THROWS_AS(t_rho_apply(b, Correlation(0.9), far, 4, 1e-12), std::runtime_error);
  CHECK_NOTHROW(t_rho_apply(b, Correlation(0.05), far, 20, 1e-12));
}

TEST_CASE("semigroup on coefficient tables") {
  const auto t = fourier_table(kEllipse, 16);
  for (auto [r1, r2] : {std::pair{0.3, 0.5}, {-0.4, 0.7}, {0.9, -0.2}}) {
    const auto twice = apply_noise(apply_noise(t, Correlation(r1)), Correlation(r2));
    const auto once = apply_noise(t, Correlation(r1 * r2));
    for (std::size_t k = 0; k < t.values().size(); ++k)
      CHECK(twice.values()[k] == doctest::Approx(once.values()[k]).epsilon(1e-14).scale(1e-300));
  }
}

TEST_CASE("Hermite eigenfunctions of T_rho") {
  for (int ell = 0; ell <= 6; ++ell)
    for (double rho : {0.3, -0.3})
      for (double x : {-1.7, 0.0, 0.4, 2.2}) {
        const double o = direct_t_rho([ell](double y) { return hermite_1d_normalized(ell, y); }, rho, x);
        CHECK(o == doctest::Approx(std::pow(rho, ell) * hermite_1d_normalized(ell, x)).epsilon(1e-11).scale(1.0));
      }
}

TEST_CASE("stability at rho = 0 is the product of measures") {
  const auto e = stability_series(Ball(2, 2.4), kEllipse, Correlation(0.0));
  CHECK(e.method == StabilityMethod::closed_form_rho0);
  CHECK(e.value == set_measure(Ball(2, 2.4)) * set_measure(kEllipse));
  const auto t = fourier_table(Ball(2, 1.0), 10);
  const auto s = stability_series(t, set_measure(Ball(2, 1.0)), t, set_measure(Ball(2, 1.0)), Correlation(0.0));
  CHECK(s.value == doctest::Approx(std::pow(set_measure(Ball(2, 1.0)), 2)).epsilon(1e-14));
}

TEST_CASE("series stability of a 1D ball against the exact integral") {
  for (double rho : {0.1, 0.5, 0.9}) {
    const auto e = stability_series(Ball(1, 1.0), Ball(1, 1.0), Correlation(rho), 60);
    const double exact = interval_stability(1.0, rho);
    CHECK(std::abs(e.value - exact) <= *e.tail_bound + 1e-13);
    CHECK(e.value <= set_measure(Ball(1, 1.0)));
  }
  // Towards rho = 1 the value approaches the measure.
  double prev_gap = 1.0;
  for (double rho : {0.9, 0.95, 0.98}) {
    const auto e = stability_series(Ball(1, 1.0), Ball(1, 1.0), Correlation(rho), 60);
    CHECK(std::abs(e.value - interval_stability(1.0, rho)) <= *e.tail_bound + 1e-13);
    const double gap = set_measure(Ball(1, 1.0)) - e.value;
    CHECK(gap > 0.0);
    CHECK(gap < prev_gap);
    prev_gap = gap;
  }
}

TEST_CASE("series against Monte Carlo") {
  const Ball b(1, 1.0);
  const auto series = stability_series(b, b, Correlation(0.1), 20);
  const auto mc = stability_mc(b, b, Correlation(0.1), 10'000'000, 2024);
  CHECK(std::abs(series.value - mc.value) <= 3 * *mc.std_error);

  const Ball b2(2, 2.4);
  const auto series2 = stability_series(b2, b2, Correlation(0.1), 20);
  const auto mc2 = stability_mc(b2, b2, Correlation(0.1), 2'000'000, 77);
  CHECK(std::abs(series2.value - mc2.value) <= 3 * *mc2.std_error);

  const auto cross = stability_series(kEllipse, kStrip, Correlation(-0.35), 20);
  const auto mc3 = stability_mc(kEllipse, kStrip, Correlation(-0.35), 2'000'000, 78);
  CHECK(std::abs(cross.value - mc3.value) <= 3 * *mc3.std_error + *cross.tail_bound);
}

TEST_CASE("Monte Carlo trivial cases and determinism") {
  const Ball a(2, 1.0);
  const Ball b(2, 1.8);
  const auto mc = stability_mc(a, b, Correlation(0.0), 1'000'000, 5);
  CHECK(std::abs(mc.value - set_measure(a) * set_measure(b)) <= 4 * *mc.std_error);
  CHECK(mc.method == StabilityMethod::montecarlo);

  const BallComplement full(3, 0.0);
  CHECK(stability_mc(full, full, Correlation(0.7), 100'000, 1).value == 1.0);
  CHECK_THROWS_AS(stability_mc(a, b, Correlation(0.1), 0, 1), std::invalid_argument);

  setenv("SYMSTAB_THREADS", "1", 1);
  const double one = stability_mc(a, b, Correlation(0.3), 700'001, 99).value;
  setenv("SYMSTAB_THREADS", "4", 1);
  const double four = stability_mc(a, b, Correlation(0.3), 700'001, 99).value;
  unsetenv("SYMSTAB_THREADS");
  CHECK(one == four);
  CHECK(stability_mc(a, b, Correlation(0.3), 700'001, 100).value != one);
}

TEST_CASE("series is monotone in rho for A = B") {
  for (const SymmetricSet& s : std::vector<SymmetricSet>{Ball(1, 1.0), kEllipse, kStrip}) {
    const auto table = fourier_table(s, 20);
    const double m = set_measure(s);
    double prev = -1.0;
    for (double rho = 0.0; rho < 0.99; rho += 0.05) {
      const double v = stability_series(table, m, table, m, Correlation(rho)).value;
      CHECK(v >= prev);
      prev = v;
    }
  }
}

TEST_CASE("tail bound is conservative") {
  for (const SymmetricSet& s : std::vector<SymmetricSet>{Ball(1, 1.0), Ball(2, 2.4), kEllipse, kStrip})
    for (double rho : {0.1, 0.4, 0.8})
      for (int L : {4, 10, 20}) {
        const auto lo = stability_series(s, s, Correlation(rho), L);
        const auto hi = stability_series(s, s, Correlation(rho), L + 5);
        CHECK(std::abs(hi.value - lo.value) <= *lo.tail_bound);
      }
}

TEST_CASE("F reference values") {
  CHECK(functional_F(Ball(2, 2.4)) == doctest::Approx(0.5 * std::pow(2.4, 4) * std::exp(-5.76)).epsilon(1e-13));
  CHECK(std::abs(functional_F(Ball(2, 2.4)) - 0.0522732) <= 1e-7);
  CHECK(std::abs(functional_F(kStrip) - 0.0604796) <= 1e-6);
  const double r_prime = radius_for_measure(2, std::exp(-2.88));
  CHECK(std::abs(functional_F(Ball(2, r_prime)) - 0.0059468) <= 1e-7);
  CHECK(std::abs(functional_F(kEllipse) - 0.0524720) <= 1e-5);
  CHECK(functional_F(BallComplement(4, 0.0)) == 0.0);

  // Ordering of the planar examples.
  CHECK(functional_F(kStrip) > functional_F(kEllipse));
  CHECK(functional_F(kEllipse) > functional_F(Ball(2, 2.4)));
  CHECK(functional_F(Ball(2, 2.4)) > functional_F(Ball(2, r_prime)));
}

TEST_CASE("F is unchanged by complementation") {
  for (int n : {1, 2, 5})
    for (double r : {0.3, 1.0, 2.2})
      CHECK(functional_F(BallComplement(n, r)) == doctest::Approx(functional_F(Ball(n, r))).epsilon(1e-10));
  const IntervalUnion1D u({{-2.0, -1.0}, {-0.3, 0.3}, {1.0, 2.0}});
  const double inf = std::numeric_limits<double>::infinity();
  const IntervalUnion1D uc({{-inf, -2.0}, {-1.0, -0.3}, {0.3, 1.0}, {2.0, inf}});
  CHECK(std::abs(functional_F(uc) - functional_F(u)) <= 1e-10);
}

TEST_CASE("second derivative at zero") {
  CHECK(std::abs(second_derivative_at_zero(Ball(2, 2.4)) - 0.0522732) <= 1e-7);
  CHECK(second_derivative_at_zero(BallComplement(2, 0.0)) == 0.0);
  CHECK(std::abs(second_derivative_at_zero(kEllipse) - 0.0524720) <= 1e-5);
  for (const SymmetricSet& s : std::vector<SymmetricSet>{Ball(3, 1.0), kStrip, kEllipse, wobbly(512)})
    CHECK(second_derivative_at_zero(s) >= functional_F(s));
  CHECK(second_derivative_at_zero(kStrip) == functional_F(kStrip));
}

TEST_CASE("second derivative matches the series and is rotation invariant") {
  for (const SymmetricSet& s : std::vector<SymmetricSet>{wobbly(512), rotated_ellipse(pi / 4, 2048),
                                                         rotated_ellipse(0.3, 2048)}) {
    const auto table = fourier_table(s, 8);
    double degree_two = 0.0;
    for (std::size_t k = 0; k < table.indices().size(); ++k)
      if (table.indices()[k].degree() == 2) degree_two += table.values()[k] * table.values()[k];
    CHECK(second_derivative_at_zero(s) == doctest::Approx(2 * degree_two).epsilon(1e-10));

    // Central difference of the series in rho.
    const double m = set_measure(s), h = 1e-2;
    auto S = [&](double rho) { return stability_series(table, m, table, m, Correlation(rho)).value; };
    const double fd = (S(h) - 2 * S(0.0) + S(-h)) / (h * h);
    CHECK(fd == doctest::Approx(second_derivative_at_zero(s)).epsilon(1e-3));
  }
  // Rotating the ellipse moves mass from F into the cross moment.
  const auto rot = rotated_ellipse(pi / 4, 2048);
  CHECK(std::abs(cross_moment(rot, 0, 1)) > 1e-3);
  CHECK(functional_F(rot) < functional_F(kEllipse) - 1e-4);
  CHECK(second_derivative_at_zero(rot) == doctest::Approx(second_derivative_at_zero(kEllipse)).epsilon(1e-10));
}

TEST_CASE("quadratic remainder") {
  CHECK(quadratic_remainder(Ball(1, 1.0), Correlation(0.0)).remainder == 0.0);
  CHECK(quadratic_remainder(Ball(1, 1.0), Correlation(0.2)).remainder <= 0.008);
  CHECK(quadratic_remainder(kEllipse, Correlation(0.1)).remainder <= 1e-3);
  for (const SymmetricSet& s : std::vector<SymmetricSet>{Ball(2, 2.4), kStrip, wobbly(512)})
    for (double rho : {-0.5, -0.1, 0.05, 0.3, 0.7})
      CHECK(quadratic_remainder(s, Correlation(rho)).remainder <= std::pow(std::abs(rho), 3));
  // Odd terms vanish, so the remainder is of fourth order.
  const double r1 = quadratic_remainder(wobbly(512), Correlation(0.1)).remainder;
  const double r2 = quadratic_remainder(wobbly(512), Correlation(0.05)).remainder;
  CHECK(r1 / r2 == doctest::Approx(16.0).epsilon(0.02));
}

TEST_CASE("derivative of T_rho for 1D sets") {
  const Ball b(1, 1.0);
  for (double x : {-1.0, 0.0, 2.0}) CHECK(t_rho_derivative_1d(b, Correlation(0.0), x) == 0.0);

  const std::vector<Interval> piece{{-1.0, 1.0}};
  const double fd_step = 1e-4;
  auto T = [&](double x) { return t_rho_indicator_1d(piece, Correlation(0.1), x); };
  const double fd = (T(0.5 + fd_step) - T(0.5 - fd_step)) / (2 * fd_step);
  CHECK(std::abs(t_rho_derivative_1d(b, Correlation(0.1), 0.5) - fd) <= 1e-6);

  // Against differences of the Hermite series, and for a union of intervals.
  const IntervalUnion1D u({{-3.0, -2.0}, {-0.5, 0.5}, {2.0, 3.0}});
  const auto table = fourier_table(u, 40);
  for (double x : {-1.3, 0.2, 1.9}) {
    auto S = [&](double y) {
      const double p[1] = {y};
      return t_rho_apply(table, set_measure(u), Correlation(0.3), p).value;
    };
    const double fds = (S(x + fd_step) - S(x - fd_step)) / (2 * fd_step);
    CHECK(std::abs(t_rho_derivative_1d(u, Correlation(0.3), x) - fds) <= 1e-6);
  }
  CHECK_THROWS_AS(t_rho_derivative_1d(Ball(2, 1.0), Correlation(0.1), 0.0), std::invalid_argument);
}

TEST_CASE("leading term of the derivative at small rho") {
  for (double r : {0.5, 1.0, 2.0}) {
    const double a = set_measure(Ball(1, r));
    for (double rho : {0.01, 0.03, 0.1})
      for (double x : {-1.5, 0.4, 2.0}) {
        const double lead = -rho * rho * std::sqrt(2 / pi) * x * r * std::exp(-r * r / 2);
        const double d = t_rho_derivative_1d(Ball(1, r), Correlation(rho), x);
        // The next series term is of order rho^4.
        CHECK(std::abs(d - lead) <= std::min(std::sqrt(a), std::sqrt(1 - a)) * 10 * std::pow(rho, 15.0 / 4));
        if (x > 0) CHECK(d < 0.0);
      }
  }
}

TEST_CASE("level sets of T_rho") {
  for (double rho : {0.05, 0.2, 0.5}) {
    const auto rep = level_set_check(Ball(1, 0.8), BallComplement(1, 1.3), Correlation(rho));
    CHECK(rep.is_sublevel_set);
    CHECK_FALSE(rep.degenerate);
    CHECK(rep.max_violation >= 0.0);
  }
  const auto zero = level_set_check(Ball(1, 0.8), BallComplement(1, 1.3), Correlation(0.0));
  CHECK(zero.degenerate);

  const IntervalUnion1D two({{-2.0, -1.0}, {1.0, 2.0}});
  const auto bad = level_set_check(two, Ball(1, 1.0), Correlation(0.05));
  CHECK_FALSE(bad.is_sublevel_set);
  CHECK(bad.max_violation > 0.01);

  // A centered interval is a superlevel set of T_rho 1_ball, so the
  // complement of a ball is a sublevel set.
  CHECK(level_set_check(BallComplement(1, 0.9), Ball(1, 1.0), Correlation(0.3)).is_sublevel_set);
  CHECK_THROWS_AS(level_set_check(Ball(2, 1.0), Ball(1, 1.0), Correlation(0.1)), std::invalid_argument);
}

TEST_CASE("rearrangement deficit") {
  const auto same = rearrangement_deficit(Ball(1, 0.9));
  CHECK(std::abs(same.lhs) <= 1e-15);
  CHECK(std::abs(same.rhs) <= 1e-15);
  CHECK(same.ball_radius == doctest::Approx(0.9).epsilon(1e-12));

  // Center interval plus two outer pieces.
  const IntervalUnion1D split({{-2.2, -1.6}, {-0.5, 0.5}, {1.6, 2.2}});
  const auto d = rearrangement_deficit(split);
  CHECK(d.lhs <= d.rhs);
  CHECK(d.l1_distance > 0.0);

  const auto c = rearrangement_deficit(BallComplement(1, 1.2));
  CHECK(c.lhs < c.rhs);

  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 3.5);
  for (int trial = 0; trial < 500; ++trial) {
    double e[4];
    for (auto& v : e) v = u(gen);
    std::sort(e, e + 4);
    const IntervalUnion1D s({{-e[3], -e[2]}, {-e[1], -e[0]}, {e[0], e[1]}, {e[2], e[3]}});
    if (set_measure(s) < 1e-6) continue;
    const auto r = rearrangement_deficit(s);
    CHECK(r.lhs <= r.rhs + 1e-15);
  }

  CHECK_NOTHROW(rearrangement_deficit(Ball(1, 0.9), set_measure(Ball(1, 0.9))));
  CHECK_THROWS_AS(rearrangement_deficit(Ball(1, 0.9), 0.5), std::invalid_argument);
}
