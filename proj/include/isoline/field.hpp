#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "isoline/errors.hpp"
#include "isoline/text.hpp"

namespace isoline {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Radially symmetric field peak * exp(-decay * ||p - source||).
struct CircularField {
  double peak;   // concentration at the source
  double decay;  // 1/m
  Vec2 source;

  CircularField(double peak_, double decay_, const Vec2& source_)
      : peak(peak_), decay(decay_), source(source_) {
    if (!(peak > 0.0)) throw std::invalid_argument("CircularField: peak must be > 0");
    if (!(decay > 0.0)) throw std::invalid_argument("CircularField: decay must be > 0");
  }
};

/// Field that is exactly linear in the distance to the source:
/// level - slope * (||p - source|| - radius). The isoline at `level`
/// is the circle of the given radius.
struct LinearRadialField {
  double level;   // concentration on the reference circle
  double slope;   // concentration/m
  double radius;  // m
  Vec2 source;

  LinearRadialField(double level_, double slope_, double radius_, const Vec2& source_)
      : level(level_), slope(slope_), radius(radius_), source(source_) {
    if (!(slope > 0.0)) throw std::invalid_argument("LinearRadialField: slope must be > 0");
    if (!(radius > 0.0)) throw std::invalid_argument("LinearRadialField: radius must be > 0");
  }
};

/// One term of a Gaussian mixture: amplitude * exp(-0.5 d' Cov^-1 d).
struct GaussianComponent {
  double amplitude;
  Vec2 center;
  Mat2 covariance;      // m^2, symmetric positive definite
  Mat2 covariance_inv;  // cached at construction

  GaussianComponent(double amplitude_, const Vec2& center_, const Mat2& covariance_)
      : amplitude(amplitude_), center(center_), covariance(covariance_) {
    const double asym = std::abs(covariance(0, 1) - covariance(1, 0));
    if (asym > 1e-12 * std::max(1.0, covariance.norm()))
      throw std::invalid_argument("GaussianComponent: covariance must be symmetric");
    const double det = covariance.determinant();
    if (!(covariance(0, 0) > 0.0) || !(det > 0.0))
      throw std::invalid_argument("GaussianComponent: covariance must be positive definite");
    covariance_inv = covariance.inverse();
  }
};

struct GaussianMixtureField {
  std::vector<GaussianComponent> components;

  explicit GaussianMixtureField(std::vector<GaussianComponent> components_)
      : components(std::move(components_)) {
    if (components.empty())
      throw std::invalid_argument("GaussianMixtureField: at least one component required");
  }
};

/**
 * Regular rectangular grid of samples, bilinearly interpolated inside its
 * rectangle. Queries outside the rectangle are hard errors: the grid never
 * extrapolates. Derivative queries additionally require a one-cell interior
 * margin because they are formed by central differences of the interpolant.
 */
struct GriddedField {
  int nx = 0, ny = 0;
  double x0 = 0, y0 = 0;
  double dx = 0, dy = 0;
  std::vector<double> values;  // row-major, row j holds y = y0 + j*dy

  GriddedField(int nx_, int ny_, double x0_, double y0_, double dx_, double dy_,
               std::vector<double> values_)
      : nx(nx_), ny(ny_), x0(x0_), y0(y0_), dx(dx_), dy(dy_), values(std::move(values_)) {
    if (nx < 2 || ny < 2) throw std::invalid_argument("GriddedField: nx and ny must be >= 2");
    if (!(dx > 0.0) || !(dy > 0.0))
      throw std::invalid_argument("GriddedField: dx and dy must be > 0");
    if (values.size() != static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny))
      throw std::invalid_argument("GriddedField: values length must equal nx*ny");
  }

  double x_max() const { return x0 + (nx - 1) * dx; }
  double y_max() const { return y0 + (ny - 1) * dy; }
  double node(int i, int j) const { return values[static_cast<std::size_t>(j) * nx + i]; }

  bool contains(const Vec2& p) const {
    return p.x() >= x0 && p.x() <= x_max() && p.y() >= y0 && p.y() <= y_max();
  }

  double interpolate(const Vec2& p) const {
    if (!contains(p))
      throw OutOfDomain("grid query (" + format_g9(p.x()) + ", " + format_g9(p.y()) +
                        ") outside [" + format_g9(x0) + ", " + format_g9(x_max()) + "] x [" +
                        format_g9(y0) + ", " + format_g9(y_max()) + "]");
    double fx = (p.x() - x0) / dx;
    double fy = (p.y() - y0) / dy;
    int i = std::min(static_cast<int>(fx), nx - 2);
    int j = std::min(static_cast<int>(fy), ny - 2);
    double u = fx - i;
    double w = fy - j;
    return node(i, j) * (1 - u) * (1 - w) + node(i + 1, j) * u * (1 - w) +
           node(i, j + 1) * (1 - u) * w + node(i + 1, j + 1) * u * w;
  }

  /// Derivatives need room for central differences on both sides.
  void require_interior(const Vec2& p) const {
    if (p.x() < x0 + dx || p.x() > x_max() - dx || p.y() < y0 + dy || p.y() > y_max() - dy)
      throw OutOfDomain("grid derivative query requires a one-cell interior margin");
  }
};

using ScalarField =
    std::variant<CircularField, LinearRadialField, GaussianMixtureField, GriddedField>;

namespace detail {

/// Offset from a radial field's source; rejects the source point itself,
/// where the direction (and hence gradient) is undefined.
inline std::pair<Vec2, double> radial_offset(const Vec2& p, const Vec2& source) {
  Vec2 d = p - source;
  double r = d.norm();
  if (r == 0.0) throw SingularPoint("gradient undefined at the field source");
  return {d, r};
}

}  // namespace detail

// ---- value -----------------------------------------------------------------

inline double value(const CircularField& f, const Vec2& p) {
  return f.peak * std::exp(-f.decay * (p - f.source).norm());
}

inline double value(const LinearRadialField& f, const Vec2& p) {
  return f.level - f.slope * ((p - f.source).norm() - f.radius);
}

inline double value(const GaussianMixtureField& f, const Vec2& p) {
  double s = 0.0;
  for (const auto& c : f.components) {
    Vec2 d = p - c.center;
    s += c.amplitude * std::exp(-0.5 * d.dot(c.covariance_inv * d));
  }
  return s;
}

inline double value(const GriddedField& f, const Vec2& p) { return f.interpolate(p); }

inline double value(const ScalarField& f, const Vec2& p) {
  return std::visit([&](const auto& v) { return value(v, p); }, f);
}

// ---- gradient --------------------------------------------------------------

inline Vec2 gradient(const CircularField& f, const Vec2& p) {
  auto [d, r] = detail::radial_offset(p, f.source);
  return -f.decay * value(f, p) / r * d;
}

inline Vec2 gradient(const LinearRadialField& f, const Vec2& p) {
  auto [d, r] = detail::radial_offset(p, f.source);
  return -f.slope / r * d;
}

inline Vec2 gradient(const GaussianMixtureField& f, const Vec2& p) {
  Vec2 g = Vec2::Zero();
  for (const auto& c : f.components) {
    Vec2 d = p - c.center;
    g += -c.amplitude * std::exp(-0.5 * d.dot(c.covariance_inv * d)) * (c.covariance_inv * d);
  }
  return g;
}

inline Vec2 gradient(const GriddedField& f, const Vec2& p) {
  f.require_interior(p);
  const double h = 0.5 * std::min(f.dx, f.dy);
  return {(f.interpolate({p.x() + h, p.y()}) - f.interpolate({p.x() - h, p.y()})) / (2 * h),
          (f.interpolate({p.x(), p.y() + h}) - f.interpolate({p.x(), p.y() - h})) / (2 * h)};
}

inline Vec2 gradient(const ScalarField& f, const Vec2& p) {
  return std::visit([&](const auto& v) { return gradient(v, p); }, f);
}

// ---- hessian ---------------------------------------------------------------

namespace detail {

/// Hessian of a function g(||p - source||): g'' on the radial direction,
/// g'/r on the tangential one.
inline Mat2 radial_hessian(const Vec2& p, const Vec2& source, double g1, double g2) {
  auto [d, r] = radial_offset(p, source);
  Vec2 u = d / r;
  Mat2 uu = u * u.transpose();
  return g2 * uu + g1 / r * (Mat2::Identity() - uu);
}

}  // namespace detail

inline Mat2 hessian(const CircularField& f, const Vec2& p) {
  const double s = value(f, p);
  return detail::radial_hessian(p, f.source, -f.decay * s, f.decay * f.decay * s);
}

inline Mat2 hessian(const LinearRadialField& f, const Vec2& p) {
  return detail::radial_hessian(p, f.source, -f.slope, 0.0);
}

inline Mat2 hessian(const GaussianMixtureField& f, const Vec2& p) {
  Mat2 h = Mat2::Zero();
  for (const auto& c : f.components) {
    Vec2 d = p - c.center;
    Vec2 sd = c.covariance_inv * d;
    h += c.amplitude * std::exp(-0.5 * d.dot(sd)) * (sd * sd.transpose() - c.covariance_inv);
  }
  return h;
}

inline Mat2 hessian(const GriddedField& f, const Vec2& p) {
  f.require_interior(p);
  const double h = 0.5 * std::min(f.dx, f.dy);
  auto at = [&](double ox, double oy) { return f.interpolate({p.x() + ox, p.y() + oy}); };
  const double c = at(0, 0);
  const double fxx = (at(h, 0) - 2 * c + at(-h, 0)) / (h * h);
  const double fyy = (at(0, h) - 2 * c + at(0, -h)) / (h * h);
  const double fxy = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4 * h * h);
  Mat2 out;
  out << fxx, fxy, fxy, fyy;  // symmetrized by construction
  return out;
}

inline Mat2 hessian(const ScalarField& f, const Vec2& p) {
  return std::visit([&](const auto& v) { return hessian(v, p); }, f);
}

// ---- misc field queries ----------------------------------------------------

/// Distance to the source for the radial variants; empty for fields with
/// no single source point.
inline std::optional<double> source_distance(const ScalarField& f, const Vec2& p) {
  if (const auto* c = std::get_if<CircularField>(&f)) return (p - c->source).norm();
  if (const auto* l = std::get_if<LinearRadialField>(&f)) return (p - l->source).norm();
  return std::nullopt;
}

/// Radius of the circle where peak * exp(-decay * r) equals `level`.
inline double circular_isoline_radius(double peak, double decay, double level) {
  if (!(level > 0.0) || !(level < peak))
    throw InfeasibleLevel("level " + format_g9(level) + " not in (0, " + format_g9(peak) + ")");
  return std::log(peak / level) / decay;
}

// ---- smoothness bounds -----------------------------------------------------

struct Rect {
  double xmin, xmax, ymin, ymax;
};

struct Annulus {
  Vec2 center;
  double rmin, rmax;
};

using Region = std::variant<Rect, Annulus>;

/// Gradient-norm and Hessian-norm bounds of a field over a region,
/// estimated on a sample lattice. These are lattice estimates: shrink
/// `resolution` for conservative use.
struct FieldBounds {
  double gradient_min = 0;  // gamma1, concentration/m
  double gradient_max = 0;  // gamma2, concentration/m
  double hessian_max = 0;   // gamma3, concentration/m^2
};

namespace detail {

inline double spectral_norm_sym2(const Mat2& m) {
  const double mean = 0.5 * (m(0, 0) + m(1, 1));
  const double r = std::hypot(0.5 * (m(0, 0) - m(1, 1)), m(0, 1));
  return std::abs(mean) + r;
}

template <typename Fn>
void sample_region(const Region& region, double resolution, Fn&& visit) {
  if (!(resolution > 0.0)) throw std::invalid_argument("resolution must be > 0");
  if (const auto* rect = std::get_if<Rect>(&region)) {
    if (!(rect->xmax > rect->xmin) || !(rect->ymax > rect->ymin))
      throw EmptyRegion("rectangle has no area");
    auto axis = [&](double lo, double hi) {
      std::vector<double> xs;
      for (double x = lo; x < hi; x += resolution) xs.push_back(x);
      xs.push_back(hi);
      return xs;
    };
    for (double y : axis(rect->ymin, rect->ymax))
      for (double x : axis(rect->xmin, rect->xmax)) visit(Vec2(x, y));
  } else {
    const auto& a = std::get<Annulus>(region);
    if (a.rmin < 0.0) throw std::invalid_argument("annulus rmin must be >= 0");
    if (!(a.rmax > a.rmin)) throw EmptyRegion("annulus has no area");
    std::vector<double> radii;
    for (double r = a.rmin; r < a.rmax; r += resolution) radii.push_back(r);
    radii.push_back(a.rmax);
    for (double r : radii) {
      if (r == 0.0) {
        visit(a.center);
        continue;
      }
      const int ntheta = std::max(8, static_cast<int>(std::ceil(2 * M_PI * r / resolution)));
      for (int k = 0; k < ntheta; ++k) {
        const double th = 2 * M_PI * k / ntheta;
        visit(a.center + r * Vec2(std::cos(th), std::sin(th)));
      }
    }
  }
}

}  // namespace detail

inline FieldBounds smoothness_bounds(const ScalarField& f, const Region& region,
                                     double resolution) {
  FieldBounds b;
  b.gradient_min = std::numeric_limits<double>::infinity();
  bool any = false;
  detail::sample_region(region, resolution, [&](const Vec2& p) {
    const double gn = gradient(f, p).norm();
    b.gradient_min = std::min(b.gradient_min, gn);
    b.gradient_max = std::max(b.gradient_max, gn);
    b.hessian_max = std::max(b.hessian_max, detail::spectral_norm_sym2(hessian(f, p)));
    any = true;
  });
  if (!any) throw EmptyRegion("no lattice samples in region");
  return b;
}

// ---- grid text format ------------------------------------------------------
//
//   GRID <nx> <ny> <x0> <y0> <dx> <dy>
//   <nx values for row y0>
//   ...                                  (ny rows total)
//
// Lines starting with '#' are comments. Values carry 9 significant digits.

inline GriddedField load_grid(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto next_content_line = [&](std::string& out) {
    while (std::getline(in, line)) {
      ++lineno;
      auto t = trim(line);
      if (t.empty() || t.front() == '#') continue;
      out = std::string(t);
      return true;
    }
    return false;
  };

  std::string header;
  if (!next_content_line(header)) throw ParseError(lineno + 1, "missing GRID header");
  {
    std::istringstream hs(header);
    std::string tag;
    hs >> tag;
    if (tag != "GRID") throw ParseError(lineno, "expected GRID header, got '" + tag + "'");
    long nx = 0, ny = 0;
    double x0 = 0, y0 = 0, dx = 0, dy = 0;
    if (!(hs >> nx >> ny >> x0 >> y0 >> dx >> dy))
      throw ParseError(lineno, "GRID header needs nx ny x0 y0 dx dy");
    std::string rest;
    if (hs >> rest) throw ParseError(lineno, "trailing tokens after GRID header");
    if (nx < 2 || ny < 2) throw ParseError(lineno, "grid dimensions must be >= 2");
    if (!(dx > 0.0) || !(dy > 0.0)) throw ParseError(lineno, "grid spacing must be > 0");

    const std::size_t expected = static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);
    std::vector<double> vals;
    vals.reserve(expected);
    std::string content;
    while (next_content_line(content)) {
      std::istringstream vs(content);
      std::string token;
      while (vs >> token) {
        double v = 0;
        if (!parse_double(token, v)) throw ParseError(lineno, "bad number '" + token + "'");
        vals.push_back(v);
      }
    }
    if (vals.size() != expected)
      throw DimensionMismatch("grid declares " + std::to_string(expected) + " values but " +
                              std::to_string(vals.size()) + " were given");
    return GriddedField(static_cast<int>(nx), static_cast<int>(ny), x0, y0, dx, dy,
                        std::move(vals));
  }
}

inline GriddedField load_grid_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open grid file '" + path + "'");
  return load_grid(in);
}

/// Samples any field onto a square lattice over `rect` and writes the grid
/// format. Spacing is `resolution` in both axes.
inline void save_grid(const ScalarField& f, const Rect& rect, double resolution,
                      std::ostream& out) {
  if (!(resolution > 0.0)) throw std::invalid_argument("resolution must be > 0");
  if (!(rect.xmax > rect.xmin) || !(rect.ymax > rect.ymin))
    throw EmptyRegion("rectangle has no area");
  const int nx = static_cast<int>(std::floor((rect.xmax - rect.xmin) / resolution + 1e-9)) + 1;
  const int ny = static_cast<int>(std::floor((rect.ymax - rect.ymin) / resolution + 1e-9)) + 1;
  if (nx < 2 || ny < 2) throw EmptyRegion("resolution too coarse for the rectangle");
  out << "GRID " << nx << ' ' << ny << ' ' << format_g9(rect.xmin) << ' '
      << format_g9(rect.ymin) << ' ' << format_g9(resolution) << ' ' << format_g9(resolution)
      << '\n';
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const Vec2 p(rect.xmin + i * resolution, rect.ymin + j * resolution);
      if (i) out << ' ';
      out << format_g9(value(f, p));
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing grid");
}

inline void save_grid_file(const ScalarField& f, const Rect& rect, double resolution,
                           const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  save_grid(f, rect, resolution, out);
}

}  // namespace isoline
