#include "symstab/sets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <regex>
#include <sstream>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

namespace symstab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Integral of s e^{-s^2 q/2} over [0,1].
double radial_first(double q) {
  if (q == 0.0) return 0.5;
  return -std::expm1(-0.5 * q) / q;
}

// Integral of s^3 e^{-s^2 q/2} over [0,1], i.e. (2 - e^{-q/2}(q+2))/q^2.
double radial_third(double q) {
  const double h = 0.5 * q;
  if (h < 0.5) {
    // 1 - e^{-h}(1+h) = sum_{k>=2} (-1)^k (k-1) h^k / k!
    double term = 1.0, sum = 0.0;
    for (int k = 1; k <= 30; ++k) {
      term *= h / k;
      if (k >= 2) sum += ((k % 2 == 0) ? 1.0 : -1.0) * (k - 1) * term;
    }
    return sum / (2.0 * h * h);
  }
  return (2.0 - std::exp(-h) * (q + 2.0)) / (q * q);
}

// Antiderivative helper: integral over [c,d] of (1 - x^2) dgamma_1 = [x phi(x)]_c^d.
double x_phi(double x) { return std::isinf(x) ? 0.0 : x * normal_pdf(x); }

double interval_defect(const Interval& iv) { return x_phi(iv.hi) - x_phi(iv.lo); }

double interval_measure(const Interval& iv) { return normal_cdf(iv.hi) - normal_cdf(iv.lo); }

double intervals_coefficient(std::span<const Interval> pieces, int ell) {
  double v = 0.0;
  for (const auto& iv : pieces) v += hermite_interval_integral_normalized(ell, iv.lo, iv.hi);
  return v;
}

// (j-1)!! for even j >= 0, the Gaussian moment E[X^j].
double gaussian_moment(int j) {
  double v = 1.0;
  for (int k = j - 1; k > 1; k -= 2) v *= k;
  return v;
}

// Coefficient of x^{ell-2m} in sqrt(ell!) h_ell(x).
double hermite_monomial_coefficient(int ell, int m) {
  return std::sqrt(factorial(ell)) * ((m % 2 == 0) ? 1.0 : -1.0) /
         (std::ldexp(1.0, m) * factorial(m) * factorial(ell - 2 * m));
}

// Coefficient of a centered ball. Expanding the Hermite product into
// monomials x^alpha, E[x^alpha 1{|x| <= r}] = E[x^alpha] P((|alpha|+n)/2, r^2/2)
// because the direction of a Gaussian vector is independent of its norm.
double ball_coefficient(const BallSpec& spec, const MultiIndex& ell, bool complement) {
  const int n = spec.dim();
  const double r = spec.radius();
  for (std::size_t i = 0; i < ell.dim(); ++i)
    if (ell[i] % 2 != 0) return 0.0;
  if (ell.degree() == 0)
    return complement ? gaussian_measure_ball_complement(spec) : gaussian_measure_ball(spec);
  if (r == 0.0) return 0.0;
  if (std::isinf(r)) return 0.0;

  // Evaluate against whichever tail is smaller; the full-space sum is zero.
  const double x = 0.5 * r * r;
  const bool use_upper = boost::math::gamma_p(0.5 * n, x) > 0.5;
  std::vector<int> m(ell.dim(), 0);
  double total = 0.0;
  for (;;) {
    double a = 1.0;
    int deg = 0;
    for (std::size_t i = 0; i < ell.dim(); ++i) {
      const int power = ell[i] - 2 * m[i];
      a *= hermite_monomial_coefficient(ell[i], m[i]) * gaussian_moment(power);
      deg += power;
    }
    const double shape = 0.5 * (deg + n);
    total += use_upper ? -a * boost::math::gamma_q(shape, x) : a * boost::math::gamma_p(shape, x);
    std::size_t i = 0;
    while (i < m.size()) {
      if (2 * (m[i] + 1) <= ell[i]) {
        ++m[i];
        break;
      }
      m[i] = 0;
      ++i;
    }
    if (i == m.size()) break;
  }
  return complement ? -total : total;
}

std::vector<Interval> normalize_pieces(std::vector<Interval> pieces) {
  for (const auto& iv : pieces) {
    if (std::isnan(iv.lo) || std::isnan(iv.hi) || iv.lo > iv.hi)
      throw std::invalid_argument("IntervalUnion1D: malformed interval");
  }
  std::erase_if(pieces, [](const Interval& iv) { return iv.lo == iv.hi; });
  std::sort(pieces.begin(), pieces.end(),
            [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::vector<Interval> out;
  for (const auto& iv : pieces) {
    if (!out.empty() && iv.lo <= out.back().hi)
      out.back().hi = std::max(out.back().hi, iv.hi);
    else
      out.push_back(iv);
  }
  return out;
}

bool mirror_equal(double a, double b) {
  if (std::isinf(a) || std::isinf(b)) return a == -b;
  return std::abs(a + b) <= 1e-12 * std::max(1.0, std::abs(a));
}

double parse_number(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  if (s == "inf" || s == "+inf" || s == "\xE2\x88\x9E" || s == "+\xE2\x88\x9E") return kInf;
  if (s == "-inf" || s == "-\xE2\x88\x9E") return -kInf;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::invalid_argument("set description: bad number '" + std::string(s) + "'");
  return v;
}

int parse_int(std::string_view s) {
  const double v = parse_number(s);
  if (v != std::floor(v) || std::abs(v) > 1e9)
    throw std::invalid_argument("set description: expected an integer, got '" + std::string(s) +
                                "'");
  return static_cast<int>(v);
}

std::map<std::string, std::string> parse_keys(std::istringstream& in) {
  std::map<std::string, std::string> kv;
  std::string tok;
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos || eq == 0)
      throw std::invalid_argument("set description: expected key=value, got '" + tok + "'");
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return kv;
}

const std::string& require(const std::map<std::string, std::string>& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw std::invalid_argument("set description: missing '" + key + "'");
  return it->second;
}

StarShaped2D load_star(std::size_t m, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("set description: cannot open '" + path + "'");
  std::vector<std::pair<double, double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    try {
      const double theta = parse_number(std::string_view(line).substr(0, comma));
      const double r = parse_number(std::string_view(line).substr(comma + 1));
      double t = std::fmod(theta, 2.0 * kPi);
      if (t < 0) t += 2.0 * kPi;
      rows.emplace_back(t, r);
    } catch (const std::invalid_argument&) {
      if (!rows.empty()) throw;  // only a header line may fail to parse
    }
  }
  if (rows.size() < 4) throw std::invalid_argument("star boundary: need at least 4 rows");
  std::sort(rows.begin(), rows.end());
  // Periodic piecewise-linear resampling onto the uniform grid.
  const auto theta = periodic_grid(m);
  std::vector<double> radii(m);
  std::size_t j = 0;
  for (std::size_t k = 0; k < m; ++k) {
    const double t = theta[k];
    while (j < rows.size() && rows[j].first <= t) ++j;
    const auto& right = rows[j % rows.size()];
    const auto& left = rows[(j + rows.size() - 1) % rows.size()];
    double tl = left.first, tr = right.first;
    if (j == 0) tl -= 2.0 * kPi;
    if (j == rows.size()) tr += 2.0 * kPi;
    const double w = (tr > tl) ? (t - tl) / (tr - tl) : 0.0;
    radii[k] = (1.0 - w) * left.second + w * right.second;
  }
  return StarShaped2D(std::move(radii));
}

}  // namespace

Strip::Strip(int dim, double halfwidth) : dim_(dim), halfwidth_(halfwidth) {
  if (dim < 1) throw std::invalid_argument("Strip: dimension must be >= 1");
  if (!(halfwidth >= 0.0)) throw std::invalid_argument("Strip: halfwidth must be >= 0");
}

Ellipse2D::Ellipse2D(double semi_axis_1, double semi_axis_2) : a1_(semi_axis_1), a2_(semi_axis_2) {
  if (!(a1_ > 0.0 && a2_ > 0.0 && std::isfinite(a1_) && std::isfinite(a2_)))
    throw std::invalid_argument("Ellipse2D: semi-axes must be positive and finite");
}

double Ellipse2D::radius_at(double theta) const {
  const double c = std::cos(theta) / a1_, s = std::sin(theta) / a2_;
  return 1.0 / std::sqrt(c * c + s * s);
}

IntervalUnion1D::IntervalUnion1D(std::vector<Interval> pieces)
    : pieces_(normalize_pieces(std::move(pieces))) {
  const std::size_t m = pieces_.size();
  for (std::size_t i = 0; i < m; ++i) {
    const auto& a = pieces_[i];
    const auto& b = pieces_[m - 1 - i];
    if (!mirror_equal(a.lo, b.hi) || !mirror_equal(a.hi, b.lo))
      throw std::invalid_argument("IntervalUnion1D: union is not symmetric about 0");
  }
}

StarShaped2D::StarShaped2D(std::vector<double> radii) : radii_(std::move(radii)) {
  const std::size_t m = radii_.size();
  if (m < 4 || m % 2 != 0)
    throw std::invalid_argument("StarShaped2D: need an even number (>= 4) of samples");
  for (double r : radii_)
    if (!(r > 0.0) || !std::isfinite(r))
      throw std::invalid_argument("StarShaped2D: radii must be positive and finite");
  for (std::size_t k = 0; k < m / 2; ++k)
    if (std::abs(radii_[k] - radii_[k + m / 2]) > 1e-12 * std::max(1.0, radii_[k]))
      throw std::invalid_argument("StarShaped2D: boundary is not symmetric, R(t) != R(t+pi)");
  interp_ = PeriodicInterpolant(radii_);
}

int dimension(const SymmetricSet& set) {
  return std::visit(overloaded{[](const Ball& b) { return b.dim(); },
                               [](const BallComplement& b) { return b.dim(); },
                               [](const Strip& s) { return s.dim(); },
                               [](const Ellipse2D&) { return 2; },
                               [](const IntervalUnion1D&) { return 1; },
                               [](const StarShaped2D&) { return 2; }},
                    set);
}

bool contains(const SymmetricSet& set, std::span<const double> x) {
  if (static_cast<int>(x.size()) != dimension(set))
    throw std::invalid_argument("contains: dimension mismatch");
  auto sq = [&] {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
  };
  return std::visit(
      overloaded{
          [&](const Ball& b) { return sq() <= b.radius() * b.radius(); },
          [&](const BallComplement& b) { return sq() >= b.radius() * b.radius(); },
          [&](const Strip& s) { return std::abs(x[0]) <= s.halfwidth(); },
          [&](const Ellipse2D& e) {
            const double u = x[0] / e.semi_axis_1(), v = x[1] / e.semi_axis_2();
            return u * u + v * v <= 1.0;
          },
          [&](const IntervalUnion1D& u) {
            for (const auto& iv : u.intervals())
              if (x[0] >= iv.lo && x[0] <= iv.hi) return true;
            return false;
          },
          [&](const StarShaped2D& s) {
            const double rho = std::hypot(x[0], x[1]);
            return rho <= s.radius_at(std::atan2(x[1], x[0]));
          }},
      set);
}

std::string describe(const SymmetricSet& set) {
  return std::visit(
      overloaded{
          [](const Ball& b) {
            return "ball n=" + std::to_string(b.dim()) + " r=" + fmt17(b.radius());
          },
          [](const BallComplement& b) {
            return "complement n=" + std::to_string(b.dim()) + " r=" + fmt17(b.radius());
          },
          [](const Strip& s) {
            return "strip n=" + std::to_string(s.dim()) + " w=" + fmt17(s.halfwidth());
          },
          [](const Ellipse2D& e) {
            return "ellipse a=" + fmt17(e.semi_axis_1()) + " b=" + fmt17(e.semi_axis_2());
          },
          [](const IntervalUnion1D& u) {
            std::string out = "intervals ";
            bool first = true;
            for (const auto& iv : u.intervals()) {
              if (!first) out += "U";
              first = false;
              out += "[" + fmt17(iv.lo) + "," + fmt17(iv.hi) + "]";
            }
            return out;
          },
          [](const StarShaped2D& s) { return "star m=" + std::to_string(s.size()); }},
      set);
}

bool is_axis_aligned(const SymmetricSet& set) {
  return !std::holds_alternative<StarShaped2D>(set);
}

StarDomain::StarDomain(std::vector<Point2> boundary) : points_(std::move(boundary)) {
  const std::size_t m = points_.size();
  if (m < 4) throw std::invalid_argument("StarDomain: need at least 4 boundary samples");
  std::vector<double> xs(m), ys(m);
  for (std::size_t k = 0; k < m; ++k) {
    xs[k] = points_[k][0];
    ys[k] = points_[k][1];
  }
  const auto dx = spectral_derivative(xs);
  const auto dy = spectral_derivative(ys);
  tangents_.resize(m);
  sweep_.resize(m);
  for (std::size_t k = 0; k < m; ++k) {
    tangents_[k] = {dx[k], dy[k]};
    sweep_[k] = xs[k] * dy[k] - ys[k] * dx[k];
    if (!(sweep_[k] > 0.0))
      throw std::invalid_argument("StarDomain: boundary is not star-shaped about the origin");
  }
}

StarDomain StarDomain::from_radii(std::span<const double> radii) {
  const std::size_t m = radii.size();
  const auto theta = periodic_grid(m);
  const auto dr = spectral_derivative(radii);
  std::vector<Point2> pts(m);
  for (std::size_t k = 0; k < m; ++k)
    pts[k] = {radii[k] * std::cos(theta[k]), radii[k] * std::sin(theta[k])};
  StarDomain d(std::move(pts));
  for (std::size_t k = 0; k < m; ++k) {
    const double c = std::cos(theta[k]), s = std::sin(theta[k]);
    d.tangents_[k] = {dr[k] * c - radii[k] * s, dr[k] * s + radii[k] * c};
    d.sweep_[k] = radii[k] * radii[k];
  }
  return d;
}

Point2 StarDomain::normal(std::size_t k) const {
  const auto& t = tangents_[k];
  const double len = std::hypot(t[0], t[1]);
  return {t[1] / len, -t[0] / len};
}

double StarDomain::speed(std::size_t k) const {
  return std::hypot(tangents_[k][0], tangents_[k][1]);
}

double StarDomain::du() const { return 2.0 * kPi / static_cast<double>(points_.size()); }

double StarDomain::measure() const {
  double acc = 0.0;
  for (std::size_t k = 0; k < points_.size(); ++k) {
    const auto& p = points_[k];
    acc += sweep_[k] * radial_first(p[0] * p[0] + p[1] * p[1]);
  }
  return std::clamp(acc * du() / (2.0 * kPi), 0.0, 1.0);
}

std::array<double, 2> StarDomain::defect() const {
  std::array<double, 2> acc{0.0, 0.0};
  for (std::size_t k = 0; k < points_.size(); ++k) {
    const auto& p = points_[k];
    const double q = p[0] * p[0] + p[1] * p[1];
    const double first = radial_first(q), third = radial_third(q);
    acc[0] += sweep_[k] * (first - p[0] * p[0] * third);
    acc[1] += sweep_[k] * (first - p[1] * p[1] * third);
  }
  const double scale = du() / (2.0 * kPi);
  return {acc[0] * scale, acc[1] * scale};
}

double StarDomain::cross_moment() const {
  double acc = 0.0;
  for (std::size_t k = 0; k < points_.size(); ++k) {
    const auto& p = points_[k];
    acc += sweep_[k] * p[0] * p[1] * radial_third(p[0] * p[0] + p[1] * p[1]);
  }
  return acc * du() / (2.0 * kPi);
}

std::vector<StarDomain::InteriorNode> StarDomain::interior_rule(std::size_t radial_nodes) const {
  const auto gl = gauss_legendre(radial_nodes, 0.0, 1.0);
  std::vector<InteriorNode> nodes;
  nodes.reserve(points_.size() * radial_nodes);
  for (std::size_t k = 0; k < points_.size(); ++k)
    for (std::size_t q = 0; q < gl.size(); ++q) {
      const double s = gl.nodes[q];
      nodes.push_back({{s * points_[k][0], s * points_[k][1]},
                       gl.weights[q] * s * sweep_[k] * du()});
    }
  return nodes;
}

StarDomain ellipse_domain(const Ellipse2D& e, std::size_t angular_nodes) {
  return StarDomain::from_function(angular_nodes, [&](double t) { return e.radius_at(t); });
}

StarDomain star_domain(const StarShaped2D& s) { return StarDomain::from_radii(s.radii()); }

FourierTable::FourierTable(std::size_t dim, int max_degree, std::string set_id)
    : dim_(dim), max_degree_(max_degree), set_id_(std::move(set_id)) {
  if (max_degree > kHermiteDegreeCap)
    throw std::out_of_range("FourierTable: degree cap exceeded");
  // Number of indices is C(L+n, n); refuse tables that would not fit comfortably.
  double count = 1.0;
  for (std::size_t i = 1; i <= dim; ++i) count = count * (max_degree + i) / i;
  if (count > 4e6) throw std::invalid_argument("FourierTable: too many coefficients");
  indices_ = multi_indices_up_to(dim, max_degree);
  values_.assign(indices_.size(), 0.0);
  for (std::size_t k = 0; k < indices_.size(); ++k) lookup_.emplace(indices_[k], k);
}

std::size_t FourierTable::position(const MultiIndex& ell) const {
  const auto it = lookup_.find(ell);
  if (it == lookup_.end()) throw std::out_of_range("FourierTable: index beyond degree cap");
  return it->second;
}

double FourierTable::operator[](const MultiIndex& ell) const { return values_[position(ell)]; }

double& FourierTable::at(const MultiIndex& ell) { return values_[position(ell)]; }

double set_measure(const SymmetricSet& set) {
  return std::visit(
      overloaded{
          [](const Ball& b) { return gaussian_measure_ball(b.spec()); },
          [](const BallComplement& b) { return gaussian_measure_ball_complement(b.spec()); },
          [](const Strip& s) {
            return std::isinf(s.halfwidth()) ? 1.0 : std::erf(s.halfwidth() / std::numbers::sqrt2);
          },
          [](const Ellipse2D& e) { return ellipse_domain(e).measure(); },
          [](const IntervalUnion1D& u) {
            double v = 0.0;
            for (const auto& iv : u.intervals()) v += interval_measure(iv);
            return std::clamp(v, 0.0, 1.0);
          },
          [](const StarShaped2D& s) { return star_domain(s).measure(); }},
      set);
}

std::vector<double> defect_vector(const SymmetricSet& set) {
  return std::visit(
      overloaded{
          [](const Ball& b) {
            return std::vector<double>(b.dim(), second_moment_defect_ball(b.spec()));
          },
          [](const BallComplement& b) {
            return std::vector<double>(b.dim(), second_moment_defect_ball_complement(b.spec()));
          },
          [](const Strip& s) {
            std::vector<double> d(s.dim(), 0.0);
            d[0] = 2.0 * x_phi(s.halfwidth());
            return d;
          },
          [](const Ellipse2D& e) {
            const auto d = ellipse_domain(e).defect();
            return std::vector<double>{d[0], d[1]};
          },
          [](const IntervalUnion1D& u) {
            double v = 0.0;
            for (const auto& iv : u.intervals()) v += interval_defect(iv);
            return std::vector<double>{v};
          },
          [](const StarShaped2D& s) {
            const auto d = star_domain(s).defect();
            return std::vector<double>{d[0], d[1]};
          }},
      set);
}

double cross_moment(const SymmetricSet& set, std::size_t i, std::size_t j) {
  const auto n = static_cast<std::size_t>(dimension(set));
  if (i == j || i >= n || j >= n) throw std::out_of_range("cross_moment: index out of range");
  if (const auto* s = std::get_if<StarShaped2D>(&set)) return star_domain(*s).cross_moment();
  return 0.0;
}

std::vector<Interval> intervals_1d(const SymmetricSet& set) {
  if (dimension(set) != 1) throw std::invalid_argument("expected a one-dimensional set");
  return std::visit(
      overloaded{
          [](const Ball& b) { return std::vector<Interval>{{-b.radius(), b.radius()}}; },
          [](const BallComplement& b) {
            if (b.radius() == 0.0) return std::vector<Interval>{{-kInf, kInf}};
            return std::vector<Interval>{{-kInf, -b.radius()}, {b.radius(), kInf}};
          },
          [](const Strip& s) { return std::vector<Interval>{{-s.halfwidth(), s.halfwidth()}}; },
          [](const IntervalUnion1D& u) {
            return std::vector<Interval>(u.intervals().begin(), u.intervals().end());
          },
          [](const auto&) -> std::vector<Interval> {
            throw std::invalid_argument("expected a one-dimensional set");
          }},
      set);
}

double fourier_coefficient(const SymmetricSet& set, const MultiIndex& ell,
                           const CoefficientOptions& opts) {
  if (static_cast<int>(ell.dim()) != dimension(set))
    throw std::invalid_argument("fourier_coefficient: dimension mismatch");
  if (ell.degree() % 2 != 0) return 0.0;
  if (dimension(set) == 1) return intervals_coefficient(intervals_1d(set), ell[0]);
  return std::visit(
      overloaded{
          [&](const Ball& b) { return ball_coefficient(b.spec(), ell, false); },
          [&](const BallComplement& b) { return ball_coefficient(b.spec(), ell, true); },
          [&](const Strip& s) {
            for (std::size_t i = 1; i < ell.dim(); ++i)
              if (ell[i] != 0) return 0.0;
            const Interval iv{-s.halfwidth(), s.halfwidth()};
            return intervals_coefficient(std::span(&iv, 1), ell[0]);
          },
          [&](const Ellipse2D& e) {
            return fourier_table(ellipse_domain(e, opts.angular_nodes), ell.degree(),
                                 opts.radial_nodes)[ell];
          },
          [&](const StarShaped2D& s) {
            return fourier_table(star_domain(s), ell.degree(), opts.radial_nodes)[ell];
          },
          [&](const IntervalUnion1D&) -> double { throw std::logic_error("unreachable"); }},
      set);
}

FourierTable fourier_table(const StarDomain& domain, int max_degree, std::size_t radial_nodes) {
  FourierTable table(2, max_degree, "star-domain");
  const int L = max_degree;
  const std::size_t stride = static_cast<std::size_t>(L) + 1;
  std::vector<double> acc(stride * stride, 0.0);
  std::vector<double> h1(stride), h2(stride);
  const auto gl = gauss_legendre(radial_nodes, 0.0, 1.0);
  const double scale = domain.du() / (2.0 * kPi);
  for (std::size_t k = 0; k < domain.size(); ++k) {
    const auto& p = domain.point(k);
    const double q = p[0] * p[0] + p[1] * p[1];
    for (std::size_t j = 0; j < gl.size(); ++j) {
      const double s = gl.nodes[j];
      const double w = gl.weights[j] * s * domain.sweep(k) * std::exp(-0.5 * s * s * q) * scale;
      hermite_normalized_all(s * p[0], h1);
      hermite_normalized_all(s * p[1], h2);
      for (int a = 0; a <= L; ++a) {
        const double wa = w * h1[a];
        double* row = &acc[static_cast<std::size_t>(a) * stride];
        for (int b = 0; a + b <= L; ++b) row[b] += wa * h2[b];
      }
    }
  }
  auto idx = table.indices();
  auto vals = table.values();
  for (std::size_t t = 0; t < idx.size(); ++t)
    vals[t] = acc[static_cast<std::size_t>(idx[t][0]) * stride + idx[t][1]];
  return table;
}

FourierTable fourier_table(const SymmetricSet& set, int max_degree,
                           const CoefficientOptions& opts) {
  if (const auto* e = std::get_if<Ellipse2D>(&set)) {
    auto t = fourier_table(ellipse_domain(*e, opts.angular_nodes), max_degree, opts.radial_nodes);
    FourierTable out(2, max_degree, describe(set));
    std::copy(t.values().begin(), t.values().end(), out.values().begin());
    return out;
  }
  if (const auto* s = std::get_if<StarShaped2D>(&set)) {
    auto t = fourier_table(star_domain(*s), max_degree, opts.radial_nodes);
    FourierTable out(2, max_degree, describe(set));
    std::copy(t.values().begin(), t.values().end(), out.values().begin());
    return out;
  }
  FourierTable table(static_cast<std::size_t>(dimension(set)), max_degree, describe(set));
  auto idx = table.indices();
  auto vals = table.values();
  for (std::size_t t = 0; t < idx.size(); ++t) vals[t] = fourier_coefficient(set, idx[t], opts);
  return table;
}

SymmetricSet parse_set(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string kind;
  if (!(in >> kind)) throw std::invalid_argument("set description: empty");

  if (kind == "intervals") {
    std::string rest;
    std::getline(in, rest);
    static const std::regex piece(R"(\[\s*([^,\]]+?)\s*,\s*([^\]]+?)\s*\])");
    std::vector<Interval> pieces;
    for (auto it = std::sregex_iterator(rest.begin(), rest.end(), piece);
         it != std::sregex_iterator(); ++it)
      pieces.push_back({parse_number((*it)[1].str()), parse_number((*it)[2].str())});
    // Whatever remains between the brackets must be a union separator.
    const std::string residue = std::regex_replace(rest, piece, "");
    static const std::regex separators(R"((\s|U|u|,|\xE2\x88\xAA)*)");
    if (!std::regex_match(residue, separators))
      throw std::invalid_argument("set description: cannot parse interval list '" + rest + "'");
    return IntervalUnion1D(std::move(pieces));
  }

  const auto kv = parse_keys(in);
  auto allow = [&](std::initializer_list<const char*> keys) {
    for (const auto& [k, v] : kv) {
      bool ok = false;
      for (const char* a : keys) ok = ok || k == a;
      if (!ok) throw std::invalid_argument("set description: unknown key '" + k + "'");
    }
  };
  if (kind == "ball") {
    allow({"n", "r"});
    return Ball(parse_int(require(kv, "n")), parse_number(require(kv, "r")));
  }
  if (kind == "complement") {
    allow({"n", "r"});
    return BallComplement(parse_int(require(kv, "n")), parse_number(require(kv, "r")));
  }
  if (kind == "full") {
    allow({"n"});
    return BallComplement(parse_int(require(kv, "n")), 0.0);
  }
  if (kind == "strip") {
    allow({"n", "w"});
    return Strip(parse_int(require(kv, "n")), parse_number(require(kv, "w")));
  }
  if (kind == "ellipse") {
    allow({"a", "b"});
    return Ellipse2D(parse_number(require(kv, "a")), parse_number(require(kv, "b")));
  }
  if (kind == "star") {
    allow({"m", "file"});
    const int m = kv.contains("m") ? parse_int(kv.at("m")) : 2048;
    if (m < 4) throw std::invalid_argument("set description: star needs m >= 4");
    return load_star(static_cast<std::size_t>(m), require(kv, "file"));
  }
  throw std::invalid_argument("set description: unknown kind '" + kind + "'");
}

}  // namespace symstab
