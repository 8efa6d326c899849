#include "symstab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include <boost/math/tools/roots.hpp>
#include <json.hpp>

#include "symstab/gaussian_core.hpp"
#include "symstab/noise_stability.hpp"
#include "symstab/quadrature.hpp"
#include "symstab/sets.hpp"
#include "symstab/variation.hpp"

namespace symstab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double parse_number(const std::string& s, const char* what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError(std::string("bad number for ") + what + ": '" + s + "'");
  }
  if (used != s.size()) throw ConfigError(std::string("bad number for ") + what + ": '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

std::vector<int> parse_dims(const std::string& spec) {
  const auto parts = split(spec, ':');
  if (parts.empty() || parts.size() > 2) throw ConfigError("--dim expects N or LO:HI");
  auto as_int = [](const std::string& s) {
    const double v = parse_number(s, "--dim");
    if (v != std::floor(v) || v < 1 || v > 1e6) throw ConfigError("--dim must be a positive integer");
    return static_cast<int>(v);
  };
  const int lo = as_int(parts[0]);
  const int hi = parts.size() == 2 ? as_int(parts[1]) : lo;
  if (hi < lo) throw ConfigError("--dim range is empty");
  std::vector<int> out;
  for (int n = lo; n <= hi; ++n) out.push_back(n);
  return out;
}

std::vector<double> parse_radii(const std::string& spec) {
  const auto parts = split(spec, ':');
  if (parts.empty() || parts.size() == 2 || parts.size() > 3) throw ConfigError("--radius expects R or LO:HI:STEP");
  const double lo = parse_number(parts[0], "--radius");
  if (parts.size() == 1) return {lo};
  const double hi = parse_number(parts[1], "--radius");
  const double step = parse_number(parts[2], "--radius");
  if (!(step > 0) || hi < lo) throw ConfigError("--radius range is empty");
  std::vector<double> out;
  const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  if (count > 100000) throw ConfigError("--radius range is too long");
  for (long k = 0; k <= count; ++k) out.push_back(lo + k * step);
  return out;
}

SymmetricSet parse_set_or_config_error(const std::string& text) {
  try {
    return parse_set(text);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

Provenance provenance_of(const SymmetricSet& set) {
  // Measures and defects of balls and strips are closed forms; the rest
  // come from quadrature.
  if (std::holds_alternative<Ball>(set) || std::holds_alternative<BallComplement>(set) ||
      std::holds_alternative<Strip>(set) || std::holds_alternative<IntervalUnion1D>(set))
    return Provenance::closed_form;
  return Provenance::quadrature;
}

double ball_F_2d(double r) { return 0.5 * std::pow(r, 4) * std::exp(-r * r); }

std::string describe_intervals(std::span<const Interval> pieces) {
  std::string out;
  for (const auto& p : pieces) {
    if (!out.empty()) out += "U";
    out += "[" + fmt_short(p.lo) + "," + fmt_short(p.hi) + "]";
  }
  return out.empty() ? "{}" : out;
}

}  // namespace

const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::closed_form: return "closed_form";
    case Provenance::series: return "series";
    case Provenance::quadrature: return "quadrature";
    case Provenance::montecarlo: return "montecarlo";
  }
  return "?";
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"counterexample", "phase-scan", "asymptotics", "optimize-1d",
                                                 "stability",      "functional", "variation",   "validate"};
  return names;
}

// ---------------------------------------------------------------------------

double paired_radius(double r) {
  if (!(r > 0)) throw std::invalid_argument("paired_radius: radius must be positive");
  return std::sqrt(-2.0 * std::log(-std::expm1(-0.5 * r * r)));
}

double paired_radius_threshold() {
  // r' decreases in r, so r'(r) - 2 changes sign once.
  auto g = [](double r) { return paired_radius(r) - 2.0; };
  const auto [lo, hi] = boost::math::tools::bisect(g, 1e-3, 3.0, boost::math::tools::eps_tolerance<double>(52));
  return 0.5 * (lo + hi);
}

double ball_F_exact(int dim, double radius) {
  const double d = second_moment_defect_ball(BallSpec(dim, radius));
  return dim * d * d;
}

double ball_F_model(double s, int dim) {
  const double n = dim;
  return std::exp(-s * s + s * s * s * 2 * std::numbers::sqrt2 / (3 * std::sqrt(n)) - std::pow(s, 4) / n) /
         std::numbers::pi;
}

// ---------------------------------------------------------------------------

ResultTable cmd_counterexample() {
  ResultTable t{"counterexample", {}, true};
  const double r = 2.4;
  const double rp = paired_radius(r);
  auto add_set = [&](const std::string& label, const SymmetricSet& set,
                     std::vector<std::pair<std::string, double>> inputs, double error) {
    const auto d = defect_vector(set);
    ResultRow row{label, std::move(inputs), {}, provenance_of(set), error, describe(set)};
    row.values = {{"measure", set_measure(set)}, {"d1", d[0]}, {"d2", d[1]}, {"F", functional_F(set)}};
    t.rows.push_back(row);
    return row.values.back().second;
  };
  const double f_ball = add_set("ball", Ball(2, r), {{"r", r}}, 0.0);
  add_set("ball_complement", BallComplement(2, r), {{"r", r}}, 0.0);
  const double f_pair = add_set("ball_paired", Ball(2, rp), {{"r", rp}}, 0.0);

  // Ellipse error: change under halving the angular resolution.
  const Ellipse2D ellipse(2.5, 2.31394);
  const auto fine = ellipse_domain(ellipse, 2 * kDefaultAngularNodes).defect();
  const auto coarse = ellipse_domain(ellipse, kDefaultAngularNodes).defect();
  const double err = std::abs(fine[0] * fine[0] + fine[1] * fine[1] - coarse[0] * coarse[0] - coarse[1] * coarse[1]);
  const double f_ellipse = add_set("ellipse", ellipse, {{"a1", 2.5}, {"a2", 2.31394}}, err);
  const double f_strip = add_set("strip", Strip(2, 1.90999), {{"w", 1.90999}}, 0.0);

  const bool ordered = f_strip > f_ellipse && f_ellipse > f_ball && f_ball > f_pair;
  t.rows.push_back({"ordering",
                    {},
                    {{"holds", ordered ? 1.0 : 0.0}, {"closed_form_ball", ball_F_2d(r)}, {"closed_form_paired", ball_F_2d(rp)}},
                    Provenance::closed_form,
                    0.0,
                    ordered ? "F(strip) > F(ellipse) > F(ball 2.4) > F(ball r'): ball/complement conjecture falsified "
                              "at this measure"
                            : "ordering does not hold"});
  return t;
}

ResultTable cmd_phase_scan(const std::vector<int>& dims, const std::vector<double>& radii) {
  if (dims.empty() || radii.empty()) throw ConfigError("phase-scan: ranges must be nonempty");
  ResultTable t{"phase-scan", {}, true};
  for (int n : dims) {
    if (n < 2) throw ConfigError("phase-scan: dimension must be >= 2");
    for (double r : radii) {
      if (!(r > 0)) throw ConfigError("phase-scan: radii must be positive");
      std::vector<double> a(n, 0.0);
      a[0] = 1.0;
      const auto f = NormalPerturbation::from_coefficients(n, r, a).normalized();
      const auto rep = second_variation_F(f);
      ResultRow row{"phase", {{"n", double(n)}, {"r", r}}, {}, n <= 3 ? Provenance::quadrature : Provenance::closed_form,
                    0.0, phase_name(rep.phase)};
      row.values = {{"measure", gaussian_measure_ball(BallSpec(n, r))},
                    {"second_variation", rep.second_variation},
                    {"bound", *rep.closed_form_bound},
                    {"margin", r * r - n - 2.0}};
      if (n <= 3) row.error = std::abs(rep.second_variation - *rep.closed_form_bound);
      if (n == 2) {
        const double rp = paired_radius(r);
        row.values.push_back({"r_prime", rp});
        row.values.push_back({"F_ball", ball_F_2d(r)});
        row.values.push_back({"F_paired", ball_F_2d(rp)});
        row.detail += std::string(";paired=") + phase_name(phase_classify(2, rp));
      }
      t.rows.push_back(std::move(row));
    }
  }
  if (std::find(dims.begin(), dims.end(), 2) != dims.end()) {
    const double thr = paired_radius_threshold();
    const double exact = std::sqrt(-2.0 * std::log(-std::expm1(-2.0)));
    t.rows.push_back({"threshold", {{"n", 2.0}}, {{"threshold", thr}, {"closed_form", exact}}, Provenance::closed_form,
                      std::abs(thr - exact), "smallest r with r'(r) <= 2"});
  }
  return t;
}

ResultTable cmd_asymptotics(const std::vector<double>& s_values, const std::vector<int>& dims) {
  ResultTable t{"asymptotics", {}, true};
  for (double s : s_values)
    for (int n : dims) {
      const double r2 = n + s * std::sqrt(2.0 * n);
      if (r2 < 0) throw ConfigError("asymptotics: n + s sqrt(2n) must be nonnegative");
      const double exact = ball_F_exact(n, std::sqrt(r2));
      const double model = ball_F_model(s, n);
      t.rows.push_back({"F_ball",
                        {{"s", s}, {"n", double(n)}},
                        {{"r", std::sqrt(r2)}, {"exact", exact}, {"model", model}, {"ratio", exact / model}},
                        Provenance::closed_form,
                        0.0,
                        ""});
    }
  bool increasing = true;
  double prev = ball_F_exact(1, 1.0);
  for (int n = 2; n <= 50; ++n) {
    const double cur = ball_F_exact(n, std::sqrt(double(n)));
    increasing = increasing && cur > prev;
    prev = cur;
  }
  t.rows.push_back({"monotone_s0", {{"n_max", 50.0}}, {{"increasing", increasing ? 1.0 : 0.0}}, Provenance::closed_form,
                    0.0, "F(B(0, sqrt n)) for n = 1..50"});
  const double far = ball_F_exact(10000, 100.0);
  t.rows.push_back({"limit_s0", {{"n", 10000.0}}, {{"exact", far}, {"limit", 1 / std::numbers::pi}},
                    Provenance::closed_form, 0.0, ""});
  return t;
}

// ---------------------------------------------------------------------------

namespace {

constexpr int kOptimizerDegree = 40;

struct QuantileGrid {
  int cells;
  std::vector<double> edges;  // cells + 1, symmetric, with infinite ends
  // Units: mirror pairs from the outside in, then the middle cell if odd.
  std::vector<std::vector<int>> units;
  std::vector<std::vector<double>> unit_coeffs;
};

QuantileGrid make_grid(int m) {
  QuantileGrid g{m, std::vector<double>(m + 1), {}, {}};
  g.edges[0] = -kInf;
  g.edges[m] = kInf;
  for (int k = 1; 2 * k < m; ++k) {
    g.edges[k] = normal_quantile(double(k) / m);
    g.edges[m - k] = -g.edges[k];
  }
  if (m % 2 == 0) g.edges[m / 2] = 0.0;
  for (int k = 0; 2 * k + 1 < m; ++k) g.units.push_back({k, m - 1 - k});
  if (m % 2 == 1) g.units.push_back({m / 2});
  for (const auto& u : g.units) {
    std::vector<double> c(kOptimizerDegree + 1, 0.0);
    for (int cell : u)
      for (int l = 0; l <= kOptimizerDegree; l += 2)
        c[l] += hermite_interval_integral_normalized(l, g.edges[cell], g.edges[cell + 1]);
    g.unit_coeffs.push_back(std::move(c));
  }
  return g;
}

int cells_for_measure(double a, int m, const char* name) {
  const double c = a * m;
  const double rounded = std::round(c);
  if (std::abs(c - rounded) > 1e-9 || rounded < 1 || rounded > m - 1)
    throw ConfigError(std::string("optimize-1d: measure ") + name + " = " + fmt_short(a) +
                      " is not a multiple of the cell measure 1/" + std::to_string(m));
  const int cells = static_cast<int>(rounded);
  if (m % 2 == 0 && cells % 2 == 1)
    throw ConfigError(std::string("optimize-1d: measure ") + name +
                      " needs an odd cell count, which a symmetric union of an even grid cannot have");
  return cells;
}

// All unit subsets with the given cell count, as bitmasks over units.
std::vector<unsigned> subsets_with_cells(const QuantileGrid& g, int cells) {
  std::vector<unsigned> out;
  const unsigned n = static_cast<unsigned>(g.units.size());
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    int c = 0;
    for (unsigned u = 0; u < n; ++u)
      if (mask >> u & 1u) c += static_cast<int>(g.units[u].size());
    if (c == cells) out.push_back(mask);
  }
  return out;
}

std::vector<double> mask_coeffs(const QuantileGrid& g, unsigned mask) {
  std::vector<double> c(kOptimizerDegree + 1, 0.0);
  for (std::size_t u = 0; u < g.units.size(); ++u)
    if (mask >> u & 1u)
      for (int l = 0; l <= kOptimizerDegree; ++l) c[l] += g.unit_coeffs[u][l];
  return c;
}

IntervalUnion1D mask_set(const QuantileGrid& g, unsigned mask) {
  std::vector<Interval> pieces;
  for (std::size_t u = 0; u < g.units.size(); ++u)
    if (mask >> u & 1u)
      for (int cell : g.units[u]) pieces.push_back({g.edges[cell], g.edges[cell + 1]});
  return IntervalUnion1D(std::move(pieces));
}

// Central interval: the innermost units; complement: the outermost.
unsigned central_mask(const QuantileGrid& g, int cells) {
  unsigned mask = 0;
  int c = 0;
  for (int u = static_cast<int>(g.units.size()) - 1; u >= 0 && c < cells; --u) {
    mask |= 1u << u;
    c += static_cast<int>(g.units[u].size());
  }
  return mask;
}
unsigned outer_mask(const QuantileGrid& g, int cells) {
  unsigned mask = 0;
  int c = 0;
  for (std::size_t u = 0; u < g.units.size() && c < cells; ++u) {
    mask |= 1u << u;
    c += static_cast<int>(g.units[u].size());
  }
  return mask;
}

double mask_distance(const QuantileGrid& g, unsigned a, unsigned b) {
  int cells = 0;
  for (std::size_t u = 0; u < g.units.size(); ++u)
    if ((a ^ b) >> u & 1u) cells += static_cast<int>(g.units[u].size());
  return double(cells) / g.cells;
}

double series_value(const std::vector<double>& a, const std::vector<double>& b, double rho) {
  double s = 0.0, p = 1.0;
  for (int l = 0; l <= kOptimizerDegree; ++l, p *= rho) s += p * a[l] * b[l];
  return s;
}

}  // namespace

ResultTable cmd_optimize_1d(double a, double b, double rho, int grid) {
  if (!(a > 0 && a < 1) || !(b > 0 && b < 1)) throw ConfigError("optimize-1d: measures must lie in (0, 1)");
  if (!(std::abs(rho) <= 0.3)) throw ConfigError("optimize-1d: |rho| must be at most 0.3");
  if (grid < 2 || grid > 24) throw ConfigError("optimize-1d: grid must have 2..24 cells");
  const auto g = make_grid(grid);
  const int ca = cells_for_measure(a, grid, "a");
  const int cb = cells_for_measure(b, grid, "b");
  const auto fam_a = subsets_with_cells(g, ca);
  const auto fam_b = subsets_with_cells(g, cb);
  std::vector<std::vector<double>> coeff_b;
  for (unsigned m : fam_b) coeff_b.push_back(mask_coeffs(g, m));

  double best = kInf, worst = -kInf;
  unsigned best_a = 0, best_b = 0;
  for (unsigned ma : fam_a) {
    const auto c = mask_coeffs(g, ma);
    for (std::size_t j = 0; j < fam_b.size(); ++j) {
      const double v = series_value(c, coeff_b[j], rho);
      worst = std::max(worst, v);
      if (v < best) {
        best = v;
        best_a = ma;
        best_b = fam_b[j];
      }
    }
  }
  const double tail = std::pow(std::abs(rho), kOptimizerDegree + 1) * std::sqrt(a * b);
  const bool tie = worst - best <= 1e-14;

  const unsigned ball_a = central_mask(g, ca), comp_b = outer_mask(g, cb);
  const unsigned comp_a = outer_mask(g, ca), ball_b = central_mask(g, cb);
  const double v_bc = series_value(mask_coeffs(g, ball_a), mask_coeffs(g, comp_b), rho);
  const double v_cb = series_value(mask_coeffs(g, comp_a), mask_coeffs(g, ball_b), rho);
  const double d_bc = std::max(mask_distance(g, best_a, ball_a), mask_distance(g, best_b, comp_b));
  const double d_cb = std::max(mask_distance(g, best_a, comp_a), mask_distance(g, best_b, ball_b));

  const auto set_a = mask_set(g, best_a), set_b = mask_set(g, best_b);
  const double cell = 1.0 / grid;
  double violation_a = 0.0, violation_b = 0.0;
  if (rho != 0.0 && !tie) {
    LevelSetOptions opts;
    opts.tolerance = cell;
    violation_a = level_set_check(set_a, set_b, Correlation(rho), opts).max_violation;
    violation_b = level_set_check(set_b, set_a, Correlation(rho), opts).max_violation;
  }
  const bool central_pair = std::min(d_bc, d_cb) <= cell;

  ResultTable t{"optimize-1d", {}, true};
  const std::vector<std::pair<std::string, double>> inputs = {
      {"a", a}, {"b", b}, {"rho", rho}, {"grid", double(grid)}};
  std::string detail = "A=" + describe_intervals(set_a.intervals()) + ";B=" + describe_intervals(set_b.intervals());
  if (tie) detail += ";all configurations tie at ab";
  else if (central_pair) detail += ";central/complement pair";
  t.rows.push_back({"optimum",
                    inputs,
                    {{"stability", best},
                     {"distance_ball_complement", d_bc},
                     {"distance_complement_ball", d_cb},
                     {"level_set_violation_a", violation_a},
                     {"level_set_violation_b", violation_b},
                     {"candidates", double(fam_a.size() * fam_b.size())}},
                    Provenance::series,
                    tail,
                    detail});
  t.rows.push_back({"ball_complement", inputs, {{"stability", v_bc}}, Provenance::series, tail,
                    "A=" + describe_intervals(mask_set(g, ball_a).intervals()) +
                        ";B=" + describe_intervals(mask_set(g, comp_b).intervals())});
  t.rows.push_back({"complement_ball", inputs, {{"stability", v_cb}}, Provenance::series, tail,
                    "A=" + describe_intervals(mask_set(g, comp_a).intervals()) +
                        ";B=" + describe_intervals(mask_set(g, ball_b).intervals())});
  return t;
}

// ---------------------------------------------------------------------------

namespace {

struct Check {
  std::string name;
  double residual;
  double tolerance;
  Provenance provenance;
};

}  // namespace

ResultTable cmd_validate(std::uint64_t seed, std::int64_t samples, std::optional<double> mc_tolerance) {
  if (samples <= 0) throw ConfigError("validate: samples must be positive");
  std::vector<Check> checks;
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); };

  {
    const auto disk = StarDomain::from_radii(std::vector<double>(512, 1.3));
    checks.push_back({"ball_measure_vs_domain_quadrature",
                      std::abs(gaussian_measure_ball(BallSpec(2, 1.3)) - disk.measure()), 1e-12,
                      Provenance::quadrature});
  }
  {
    const double r = radius_for_measure(5, 0.37);
    checks.push_back({"radius_for_measure_round_trip", std::abs(gaussian_measure_ball(BallSpec(5, r)) - 0.37), 1e-12,
                      Provenance::closed_form});
  }
  checks.push_back({"sphere_volume_vs_wallis", rel(sphere_volume_wallis(7), sphere_volume(7)), 1e-12,
                    Provenance::closed_form});
  {
    const auto gh = gauss_hermite(40);
    double worst = 0.0;
    for (int i = 0; i <= 20; ++i)
      for (int j = 0; j <= 20; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < gh.size(); ++k)
          s += gh.weights[k] * hermite_1d_normalized(i, gh.nodes[k]) * hermite_1d_normalized(j, gh.nodes[k]);
        worst = std::max(worst, std::abs(s - (i == j ? 1.0 : 0.0)));
      }
    checks.push_back({"hermite_orthonormality", worst, 1e-11, Provenance::quadrature});
  }
  {
    const Ellipse2D e(2.5, 2.31394);
    const auto a = ellipse_domain(e, 2048).defect(), b = ellipse_domain(e, 4096).defect();
    checks.push_back({"ellipse_defect_resolution", std::abs(a[0] - b[0]) + std::abs(a[1] - b[1]), 1e-10,
                      Provenance::quadrature});
  }
  auto mc_check = [&](const std::string& name, const SymmetricSet& sa, const SymmetricSet& sb, double rho) {
    const Correlation c(rho);
    const auto series = stability_series(sa, sb, c, 30);
    const auto mc = stability_mc(sa, sb, c, samples, seed);
    const double tol = mc_tolerance.value_or(3.0 * *mc.std_error + *series.tail_bound);
    checks.push_back({name, std::abs(series.value - mc.value), tol, Provenance::montecarlo});
  };
  mc_check("series_vs_mc_disks", Ball(2, 1.2), Ball(2, 1.2), 0.3);
  mc_check("series_vs_mc_1d_union", parse_set("intervals [-2,-1]U[1,2]"), Ball(1, 0.8), -0.2);
  mc_check("series_vs_mc_ellipse_strip", Ellipse2D(1.5, 0.9), Strip(2, 0.7), 0.2);
  {
    const Correlation c(0.2);
    const auto a = stability_mc(Ball(2, 1.0), Ball(2, 1.0), c, samples, seed);
    const auto b = stability_mc(Ball(2, 1.0), Ball(2, 1.0), c, samples, seed);
    checks.push_back({"mc_repeat_identical", std::abs(a.value - b.value), 0.0, Provenance::montecarlo});
    const auto d = stability_mc(Ball(2, 1.0), Ball(2, 1.0), c, samples, seed + 1);
    const double se = std::hypot(*a.std_error, *d.std_error);
    checks.push_back({"mc_seed_change_within_error", std::abs(a.value - d.value), mc_tolerance.value_or(4.0 * se),
                      Provenance::montecarlo});
  }
  {
    const auto f = NormalPerturbation::from_coefficients(3, 1.2, {1.0, 0.0, 0.0}).normalized();
    checks.push_back({"poincare_equality_g1", std::abs(poincare_ratio(f).ratio - 1.0), 1e-10,
                      Provenance::quadrature});
    const auto g = NormalPerturbation::from_coefficients(2, 2.4, {1.0, 0.0}).normalized();
    const auto rep = second_variation_F(g);
    checks.push_back({"F_variation_vs_bound", rel(rep.second_variation, *rep.closed_form_bound), 1e-10,
                      Provenance::quadrature});
    const auto fd = measure_variation_fd(FlowSpec{VectorField::for_perturbation(g)}, Ball(2, 2.4));
    checks.push_back({"corollary_flow_preserves_measure", std::abs(fd.first) + std::abs(fd.second), 1e-6,
                      Provenance::quadrature});
  }
  {
    const auto disk = StarDomain::from_radii(std::vector<double>(128, 1.0));
    const ProductGaussianKernel k;
    const VectorField dil(Dilation{2});
    checks.push_back({"general_variation_vs_fd",
                      rel(general_second_variation(k, disk, dil), general_second_variation_fd(k, disk, FlowSpec{dil})),
                      1e-5, Provenance::quadrature});
  }
  {
    const auto q = quadratic_remainder(Ball(2, 1.0), Correlation(0.1), 20);
    checks.push_back({"taylor_remainder_cubic", std::abs(q.remainder), 1e-3, Provenance::series});
  }
  {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.05, 2.5);
    double worst = -kInf;
    for (int trial = 0; trial < 50; ++trial) {
      double x[4];
      for (double& v : x) v = u(gen);
      std::sort(x, x + 4);
      const auto set = IntervalUnion1D({{-x[3], -x[2]}, {-x[1], x[1]}, {x[2], x[3]}});
      const auto d = rearrangement_deficit(set);
      worst = std::max(worst, d.lhs - d.rhs);
    }
    checks.push_back({"rearrangement_deficit_slack", std::max(worst, 0.0), 0.0, Provenance::closed_form});
  }
  {
    const auto rep = level_set_check(Ball(1, 0.7), BallComplement(1, 0.9), Correlation(0.2));
    checks.push_back({"ball_is_level_set_of_complement", rep.max_violation, 4.0 / 4096 * 12 * normal_pdf(0.0),
                      Provenance::quadrature});
  }

  ResultTable t{"validate", {}, true};
  for (const auto& c : checks) {
    const bool ok = c.residual <= c.tolerance;
    t.passed = t.passed && ok;
    t.rows.push_back({c.name,
                      {{"seed", double(seed)}, {"samples", double(samples)}},
                      {{"residual", c.residual}, {"tolerance", c.tolerance}, {"pass", ok ? 1.0 : 0.0}},
                      c.provenance,
                      0.0,
                      ok ? "PASS" : "FAIL"});
  }
  return t;
}

// ---------------------------------------------------------------------------

void validate_config(const ExperimentConfig& cfg) {
  const auto& names = command_names();
  if (std::find(names.begin(), names.end(), cfg.command) == names.end())
    throw ConfigError("unknown command '" + cfg.command + "'");
  if (cfg.measure && !(*cfg.measure > 0 && *cfg.measure < 1)) throw ConfigError("--measure must lie in (0, 1)");
  if (cfg.measure_b && !(*cfg.measure_b > 0 && *cfg.measure_b < 1))
    throw ConfigError("--measure-b must lie in (0, 1)");
  if (cfg.rho && !(*cfg.rho > -1 && *cfg.rho < 1)) throw ConfigError("--rho must lie in (-1, 1)");
  if (cfg.degree && (*cfg.degree < 0 || *cfg.degree > kHermiteDegreeCap))
    throw ConfigError("--degree must lie in [0, " + std::to_string(kHermiteDegreeCap) + "]");
  if (cfg.samples && *cfg.samples <= 0) throw ConfigError("--samples must be positive");
  if (cfg.grid && (*cfg.grid < 2 || *cfg.grid > 24)) throw ConfigError("--grid must lie in [2, 24]");
  if (cfg.tol && !(*cfg.tol > 0)) throw ConfigError("--tol must be positive");
  if (cfg.dim) parse_dims(*cfg.dim);
  if (cfg.radius)
    for (double r : parse_radii(*cfg.radius))
      if (!(r > 0) || !std::isfinite(r)) throw ConfigError("--radius must be positive");
  for (const auto& s : cfg.sets) parse_set_or_config_error(s);

  const std::string& c = cfg.command;
  if (c == "optimize-1d" && cfg.rho && std::abs(*cfg.rho) > 0.3) throw ConfigError("optimize-1d: |rho| <= 0.3");
  if (c == "stability") {
    if (cfg.sets.empty() || cfg.sets.size() > 2) throw ConfigError("stability: give one or two --set");
    if (!cfg.rho) throw ConfigError("stability: --rho is required");
    if (cfg.sets.size() == 2 &&
        dimension(parse_set(cfg.sets[0])) != dimension(parse_set(cfg.sets[1])))
      throw ConfigError("stability: sets must share a dimension");
  }
  if (c == "functional" && cfg.sets.empty()) throw ConfigError("functional: give at least one --set");
  if (c == "variation") {
    if (cfg.sets.size() > 1) throw ConfigError("variation: at most one --set");
    if (cfg.sets.empty() && (!cfg.dim || !cfg.radius))
      throw ConfigError("variation: give --dim and --radius, or a ball/complement --set");
    if (!cfg.sets.empty()) {
      const auto s = parse_set(cfg.sets[0]);
      if (!std::holds_alternative<Ball>(s) && !std::holds_alternative<BallComplement>(s))
        throw ConfigError("variation: the base set must be a ball or a ball complement");
      const int n = dimension(s);
      const double r = std::holds_alternative<Ball>(s) ? std::get<Ball>(s).radius() : std::get<BallComplement>(s).radius();
      if (n < 2 || !(r > 0)) throw ConfigError("variation: need n >= 2 and r > 0");
    } else {
      if (parse_dims(*cfg.dim).size() != 1 || parse_radii(*cfg.radius).size() != 1)
        throw ConfigError("variation: --dim and --radius must be single values");
      if (parse_dims(*cfg.dim)[0] < 2) throw ConfigError("variation: need n >= 2");
    }
    if (cfg.rho && cfg.rho != 0.0) {
      const int n = cfg.sets.empty() ? parse_dims(*cfg.dim)[0] : dimension(parse_set(cfg.sets[0]));
      if (n > 3) throw ConfigError("variation: the noise variation needs n = 2 or 3");
    }
  }
  if (c == "phase-scan" && cfg.dim)
    for (int n : parse_dims(*cfg.dim))
      if (n < 2) throw ConfigError("phase-scan: dimension must be >= 2");
  if (c == "asymptotics") {
    const std::vector<double> s = cfg.s_values.empty() ? std::vector<double>{-1, 0, 1} : cfg.s_values;
    if (cfg.dim)
      for (int n : parse_dims(*cfg.dim))
        for (double v : s)
          if (n + v * std::sqrt(2.0 * n) < 0) throw ConfigError("asymptotics: n + s sqrt(2n) must be nonnegative");
  }
}

namespace {

ResultTable cmd_stability(const ExperimentConfig& cfg) {
  const auto a = parse_set(cfg.sets[0]);
  const auto b = cfg.sets.size() == 2 ? parse_set(cfg.sets[1]) : a;
  const Correlation rho(*cfg.rho);
  const int degree = cfg.degree.value_or(kDefaultFourierDegree);
  ResultTable t{"stability", {}, true};
  const std::vector<std::pair<std::string, double>> inputs = {{"rho", rho.rho()}, {"degree", double(degree)}};
  const std::string detail = describe(a) + " | " + describe(b);
  const auto s = stability_series(a, b, rho, degree);
  t.rows.push_back({"series",
                    inputs,
                    {{"value", s.value}},
                    s.method == StabilityMethod::closed_form_rho0 ? Provenance::closed_form : Provenance::series,
                    s.tail_bound.value_or(0.0),
                    detail});
  if (cfg.samples) {
    const auto m = stability_mc(a, b, rho, *cfg.samples, cfg.seed);
    auto in = inputs;
    in.push_back({"samples", double(*cfg.samples)});
    in.push_back({"seed", double(cfg.seed)});
    t.rows.push_back({"montecarlo", in, {{"value", m.value}}, Provenance::montecarlo, m.std_error.value_or(0.0), detail});
  }
  return t;
}

ResultTable cmd_functional(const ExperimentConfig& cfg) {
  ResultTable t{"functional", {}, true};
  for (const auto& text : cfg.sets) {
    const auto set = parse_set(text);
    ResultRow row{"functional", {{"dim", double(dimension(set))}}, {}, provenance_of(set), 0.0, describe(set)};
    row.values.push_back({"measure", set_measure(set)});
    const auto d = defect_vector(set);
    for (std::size_t i = 0; i < d.size(); ++i) row.values.push_back({"d" + std::to_string(i + 1), d[i]});
    row.values.push_back({"F", functional_F(set)});
    row.values.push_back({"second_derivative_at_zero", second_derivative_at_zero(set)});
    t.rows.push_back(std::move(row));
  }
  return t;
}

ResultTable cmd_variation(const ExperimentConfig& cfg) {
  int n = 0;
  double r = 0.0;
  BaseSet base = BaseSet::ball;
  if (!cfg.sets.empty()) {
    const auto s = parse_set(cfg.sets[0]);
    n = dimension(s);
    if (const auto* b = std::get_if<Ball>(&s)) {
      r = b->radius();
    } else {
      r = std::get<BallComplement>(s).radius();
      base = BaseSet::complement;
    }
  } else {
    n = parse_dims(*cfg.dim)[0];
    r = parse_radii(*cfg.radius)[0];
  }
  std::vector<double> a(n, 0.0);
  a[0] = 1.0;
  const auto f = NormalPerturbation::from_coefficients(n, r, a).normalized();
  const std::vector<std::pair<std::string, double>> inputs = {{"n", double(n)}, {"r", r}};
  const std::string base_name = base == BaseSet::ball ? "ball" : "complement";
  ResultTable t{"variation", {}, true};

  const auto rep = second_variation_F(f, base);
  t.rows.push_back({"F_second_variation",
                    inputs,
                    {{"first", rep.first_variation},
                     {"second", rep.second_variation},
                     {"bound", *rep.closed_form_bound}},
                    n <= 3 ? Provenance::quadrature : Provenance::closed_form,
                    n <= 3 ? std::abs(rep.second_variation - *rep.closed_form_bound) : 0.0,
                    base_name + ";" + phase_name(rep.phase)});
  const auto pr = poincare_ratio(f);
  t.rows.push_back({"poincare", inputs, {{"lhs", pr.lhs}, {"constant", pr.constant}, {"ratio", pr.ratio}},
                    n <= 3 ? Provenance::quadrature : Provenance::closed_form, 0.0, base_name});
  const SymmetricSet base_set = base == BaseSet::ball ? SymmetricSet(Ball(n, r)) : SymmetricSet(BallComplement(n, r));
  const auto mv = measure_variation(VectorField::for_perturbation(f), base_set);
  t.rows.push_back({"measure_variation", inputs, {{"first", mv.first}, {"second", mv.second}},
                    n <= 3 ? Provenance::quadrature : Provenance::closed_form, 0.0, base_name});
  if (cfg.rho && *cfg.rho != 0.0) {
    const Correlation rho(*cfg.rho);
    const auto nr = second_variation_noise(f, rho, base);
    auto in = inputs;
    in.push_back({"rho", rho.rho()});
    t.rows.push_back({"noise_second_variation",
                      in,
                      {{"first", nr.first_variation},
                       {"second", nr.second_variation},
                       {"rho_scaled_gap", nr.rho_scaled_gap.value_or(0.0)},
                       {"converged", nr.quadrature_converged ? 1.0 : 0.0}},
                      Provenance::quadrature,
                      0.0,
                      base_name + ";" + phase_name(nr.phase)});
  }
  return t;
}

}  // namespace

ResultTable run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const std::string& c = cfg.command;
  if (c == "counterexample") return cmd_counterexample();
  if (c == "phase-scan")
    return cmd_phase_scan(parse_dims(cfg.dim.value_or("2:6")), parse_radii(cfg.radius.value_or("0.5:3:0.1")));
  if (c == "asymptotics") {
    const std::vector<double> s = cfg.s_values.empty() ? std::vector<double>{-1, 0, 1} : cfg.s_values;
    const std::vector<int> dims = cfg.dim ? parse_dims(*cfg.dim) : std::vector<int>{2, 5, 10, 100, 1000, 10000};
    return cmd_asymptotics(s, dims);
  }
  if (c == "optimize-1d") {
    const double a = cfg.measure.value_or(0.3);
    return cmd_optimize_1d(a, cfg.measure_b.value_or(a), cfg.rho.value_or(0.05), cfg.grid.value_or(20));
  }
  if (c == "stability") return cmd_stability(cfg);
  if (c == "functional") return cmd_functional(cfg);
  if (c == "variation") return cmd_variation(cfg);
  return cmd_validate(cfg.seed, cfg.samples.value_or(200000), cfg.tol);
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> columns(const ResultTable& t, bool inputs) {
  std::vector<std::string> out;
  for (const auto& row : t.rows)
    for (const auto& [name, v] : inputs ? row.inputs : row.values)
      if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
  return out;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

const double* lookup(const std::vector<std::pair<std::string, double>>& kv, const std::string& name) {
  for (const auto& [k, v] : kv)
    if (k == name) return &v;
  return nullptr;
}

nlohmann::ordered_json number(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

void write_csv(std::ostream& os, const ResultTable& table) {
  const auto in = columns(table, true), val = columns(table, false);
  os << "label";
  for (const auto& c : in) os << ',' << csv_escape(c);
  for (const auto& c : val) os << ',' << csv_escape(c);
  os << ",provenance,error,detail\n";
  for (const auto& row : table.rows) {
    os << csv_escape(row.label);
    for (const auto& c : in) {
      os << ',';
      if (const double* v = lookup(row.inputs, c)) os << fmt17(*v);
    }
    for (const auto& c : val) {
      os << ',';
      if (const double* v = lookup(row.values, c)) os << fmt17(*v);
    }
    os << ',' << provenance_name(row.provenance) << ',' << fmt17(row.error) << ',' << csv_escape(row.detail) << '\n';
  }
}

void write_json(std::ostream& os, const ResultTable& table) {
  nlohmann::ordered_json doc;
  doc["command"] = table.command;
  doc["passed"] = table.passed;
  doc["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : table.rows) {
    nlohmann::ordered_json r;
    r["label"] = row.label;
    r["inputs"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : row.inputs) r["inputs"][k] = number(v);
    r["values"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : row.values) r["values"][k] = number(v);
    r["provenance"] = provenance_name(row.provenance);
    r["error"] = number(row.error);
    r["detail"] = row.detail;
    doc["rows"].push_back(std::move(r));
  }
  os << doc.dump(2) << '\n';
}

}  // namespace symstab
