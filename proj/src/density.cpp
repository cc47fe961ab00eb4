#include "matchlab/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "matchlab/error.hpp"

namespace matchlab {

namespace {

// A rectangle on which the density equals the polynomial
//   d00 + d10 (x - ox) + d01 (y - oy) + d11 (x - ox)(y - oy).
// Every absolutely continuous kind decomposes into such pieces, which is what
// makes all the moment integrals closed-form.
struct Piece {
  Rect r;
  double ox = 0.0, oy = 0.0;
  double d00 = 0.0, d10 = 0.0, d01 = 0.0, d11 = 0.0;
};

void grid_range(double lo, double hi, int cells, int& first, int& last) {
  first = std::max(0, std::min(cells - 1, int(std::floor(lo * cells))));
  last = std::max(first, std::min(cells - 1, int(std::ceil(hi * cells)) - 1));
}

void collect_pieces(const DensityModel& model, const Rect& query, std::vector<Piece>& out) {
  const Rect clip = intersect(query, model.support);
  if (clip.empty()) return;
  switch (model.kind) {
    case DensityKind::uniform: {
      out.push_back({clip, 0, 0, model.values[0] * model.scale, 0, 0, 0});
      break;
    }
    case DensityKind::piecewise_constant: {
      const int m = model.m;
      int i0, i1, j0, j1;
      grid_range(clip.x0, clip.x1, m, i0, i1);
      grid_range(clip.y0, clip.y1, m, j0, j1);
      for (int j = j0; j <= j1; ++j) {
        for (int i = i0; i <= i1; ++i) {
          Rect cell{double(i) / m, double(j) / m, double(i + 1) / m, double(j + 1) / m};
          Rect r = intersect(cell, clip);
          if (r.empty()) continue;
          out.push_back({r, 0, 0, model.values[j * m + i] * model.scale, 0, 0, 0});
        }
      }
      break;
    }
    case DensityKind::smooth_sampled: {
      const int k = model.k;
      const double h = 1.0 / k;
      int i0, i1, j0, j1;
      grid_range(clip.x0, clip.x1, k, i0, i1);
      grid_range(clip.y0, clip.y1, k, j0, j1);
      for (int j = j0; j <= j1; ++j) {
        for (int i = i0; i <= i1; ++i) {
          Rect cell{double(i) / k, double(j) / k, double(i + 1) / k, double(j + 1) / k};
          Rect r = intersect(cell, clip);
          if (r.empty()) continue;
          const double f00 = model.values[j * (k + 1) + i];
          const double f10 = model.values[j * (k + 1) + i + 1];
          const double f01 = model.values[(j + 1) * (k + 1) + i];
          const double f11 = model.values[(j + 1) * (k + 1) + i + 1];
          Piece p;
          p.r = r;
          p.ox = cell.x0;
          p.oy = cell.y0;
          p.d00 = f00 * model.scale;
          p.d10 = (f10 - f00) / h * model.scale;
          p.d01 = (f01 - f00) / h * model.scale;
          p.d11 = (f11 - f10 - f01 + f00) / (h * h) * model.scale;
          out.push_back(p);
        }
      }
      break;
    }
    case DensityKind::disconnected_squares: {
      Rect r1 = intersect(clip, model.sq1);
      if (!r1.empty()) out.push_back({r1, 0, 0, model.v1 * model.scale, 0, 0, 0});
      Rect r2 = intersect(clip, model.sq2);
      if (!r2.empty()) out.push_back({r2, 0, 0, model.v2 * model.scale, 0, 0, 0});
      break;
    }
    case DensityKind::two_delta:
      // handled by the atom paths in the callers
      break;
  }
}

struct IntervalPowers {
  double i0, i1, i2, i3; // ∫ X^p dX over the interval, X measured from a center
};

IntervalPowers interval_powers(double lo, double hi, double center) {
  const double a = lo - center;
  const double b = hi - center;
  IntervalPowers p;
  p.i0 = b - a;
  p.i1 = (b * b - a * a) / 2.0;
  p.i2 = (b * b * b - a * a * a) / 3.0;
  p.i3 = (b * b * b * b - a * a * a * a) / 4.0;
  return p;
}

// Piece coefficients re-expressed about (cx, cy).
struct Centered {
  double e00, e10, e01, e11;
};

Centered recenter(const Piece& p, double cx, double cy) {
  const double sx = cx - p.ox;
  const double sy = cy - p.oy;
  Centered c;
  c.e00 = p.d00 + p.d10 * sx + p.d01 * sy + p.d11 * sx * sy;
  c.e10 = p.d10 + p.d11 * sy;
  c.e01 = p.d01 + p.d11 * sx;
  c.e11 = p.d11;
  return c;
}

bool atom_moments(const DensityModel& model, const Rect& query, const Point& center,
                  Moments& out) {
  if (model.kind != DensityKind::two_delta) return false;
  const Rect clip = intersect(query, model.support);
  const double w = 0.5 * model.scale;
  for (const Point& z : {model.z1, model.z2}) {
    if (clip.contains(z)) {
      const double dx = z.x - center.x;
      const double dy = z.y - center.y;
      out.mass += w;
      out.mx += w * dx;
      out.my += w * dy;
      out.second += w * (dx * dx + dy * dy);
    }
  }
  return true;
}

} // namespace

Moments moments_over(const DensityModel& model, const Rect& r, const Point& center) {
  Moments m;
  if (atom_moments(model, r, center, m)) return m;
  std::vector<Piece> pieces;
  collect_pieces(model, r, pieces);
  for (const Piece& p : pieces) {
    const Centered c = recenter(p, center.x, center.y);
    const IntervalPowers X = interval_powers(p.r.x0, p.r.x1, center.x);
    const IntervalPowers Y = interval_powers(p.r.y0, p.r.y1, center.y);
    m.mass += c.e00 * X.i0 * Y.i0 + c.e10 * X.i1 * Y.i0 + c.e01 * X.i0 * Y.i1 +
              c.e11 * X.i1 * Y.i1;
    m.mx += c.e00 * X.i1 * Y.i0 + c.e10 * X.i2 * Y.i0 + c.e01 * X.i1 * Y.i1 +
            c.e11 * X.i2 * Y.i1;
    m.my += c.e00 * X.i0 * Y.i1 + c.e10 * X.i1 * Y.i1 + c.e01 * X.i0 * Y.i2 +
            c.e11 * X.i1 * Y.i2;
    m.second += c.e00 * (X.i2 * Y.i0 + X.i0 * Y.i2) + c.e10 * (X.i3 * Y.i0 + X.i1 * Y.i2) +
                c.e01 * (X.i2 * Y.i1 + X.i0 * Y.i3) + c.e11 * (X.i3 * Y.i1 + X.i1 * Y.i3);
  }
  return m;
}

double mass_over(const DensityModel& model, const Rect& r) {
  return moments_over(model, r, Point{0.0, 0.0}).mass;
}

double square_integral_over(const DensityModel& model, const Rect& r) {
  if (model.kind == DensityKind::two_delta)
    fail(errc::not_positive, "two_delta measure has no square-integrable density");
  std::vector<Piece> pieces;
  collect_pieces(model, r, pieces);
  double total = 0.0;
  for (const Piece& p : pieces) {
    const Centered c = recenter(p, p.ox, p.oy); // keep the piece origin
    const IntervalPowers X = interval_powers(p.r.x0, p.r.x1, p.ox);
    const IntervalPowers Y = interval_powers(p.r.y0, p.r.y1, p.oy);
    total += c.e00 * c.e00 * X.i0 * Y.i0 + 2 * c.e00 * c.e10 * X.i1 * Y.i0 +
             2 * c.e00 * c.e01 * X.i0 * Y.i1 +
             2 * (c.e00 * c.e11 + c.e10 * c.e01) * X.i1 * Y.i1 +
             c.e10 * c.e10 * X.i2 * Y.i0 + c.e01 * c.e01 * X.i0 * Y.i2 +
             2 * c.e10 * c.e11 * X.i2 * Y.i1 + 2 * c.e01 * c.e11 * X.i1 * Y.i2 +
             c.e11 * c.e11 * X.i2 * Y.i2;
  }
  return total;
}

// ---------------------------------------------------------------------------
// construction / normalization

DensityModel make_uniform(double value) {
  DensityModel m;
  m.kind = DensityKind::uniform;
  m.values = {value};
  return m;
}

DensityModel make_piecewise_constant(int cells, std::vector<double> values) {
  DensityModel m;
  m.kind = DensityKind::piecewise_constant;
  m.m = cells;
  m.values = std::move(values);
  return m;
}

DensityModel make_smooth_sampled(int k, std::vector<double> values, double lipschitz,
                                 double lower_bound) {
  DensityModel m;
  m.kind = DensityKind::smooth_sampled;
  m.k = k;
  m.values = std::move(values);
  m.lipschitz = lipschitz;
  m.lower_bound = lower_bound;
  return m;
}

DensityModel make_two_delta(Point z1, Point z2) {
  DensityModel m;
  m.kind = DensityKind::two_delta;
  m.z1 = z1;
  m.z2 = z2;
  return m;
}

DensityModel make_disconnected(Rect sq1, Rect sq2, double v1, double v2) {
  DensityModel m;
  m.kind = DensityKind::disconnected_squares;
  m.sq1 = sq1;
  m.sq2 = sq2;
  m.v1 = v1;
  m.v2 = v2;
  return m;
}

bool is_positive_kind(const DensityModel& model) {
  return model.kind == DensityKind::uniform || model.kind == DensityKind::piecewise_constant ||
         model.kind == DensityKind::smooth_sampled;
}

namespace {

void validate_shape(const DensityModel& m) {
  auto check_values_finite = [&] {
    for (double v : m.values)
      if (!std::isfinite(v)) fail(errc::not_positive, "density values must be finite");
  };
  switch (m.kind) {
    case DensityKind::uniform:
      if (m.values.size() != 1) fail(errc::config_invalid, "uniform model stores one value");
      check_values_finite();
      break;
    case DensityKind::piecewise_constant:
      if (m.m < 1 || m.values.size() != std::size_t(m.m) * m.m)
        fail(errc::config_invalid, "piecewise-constant model needs m^2 values");
      check_values_finite();
      break;
    case DensityKind::smooth_sampled:
      if (m.k < 1 || m.values.size() != std::size_t(m.k + 1) * (m.k + 1))
        fail(errc::config_invalid, "smooth-sampled model needs (k+1)^2 vertex values");
      check_values_finite();
      break;
    case DensityKind::two_delta:
      if (!unit_square.contains(m.z1) || !unit_square.contains(m.z2))
        fail(errc::out_of_domain, "two_delta atoms must lie in the unit square");
      break;
    case DensityKind::disconnected_squares:
      if (m.sq1.empty() || m.sq2.empty() || m.sq1.x0 < 0 || m.sq1.y0 < 0 || m.sq1.x1 > 1 ||
          m.sq1.y1 > 1 || m.sq2.x0 < 0 || m.sq2.y0 < 0 || m.sq2.x1 > 1 || m.sq2.y1 > 1)
        fail(errc::out_of_domain, "disconnected squares must be non-empty and inside the unit square");
      if (m.v1 < 0 || m.v2 < 0) fail(errc::not_positive, "patch values must be nonnegative");
      break;
  }
}

// Max slope of the bilinear interpolant: per cell the partial derivatives are
// bounded by the corresponding edge difference quotients.
double smooth_gradient_bound(const DensityModel& m) {
  const int k = m.k;
  const double h = 1.0 / k;
  double bound = 0.0;
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i < k; ++i) {
      const double f00 = m.values[j * (k + 1) + i];
      const double f10 = m.values[j * (k + 1) + i + 1];
      const double f01 = m.values[(j + 1) * (k + 1) + i];
      const double f11 = m.values[(j + 1) * (k + 1) + i + 1];
      const double gx = std::max(std::abs(f10 - f00), std::abs(f11 - f01)) / h;
      const double gy = std::max(std::abs(f01 - f00), std::abs(f11 - f10)) / h;
      bound = std::max(bound, std::hypot(gx, gy));
    }
  }
  return bound;
}

} // namespace

DensityModel normalize(const DensityModel& raw) {
  DensityModel model = raw;
  validate_shape(model);
  if (is_positive_kind(model)) {
    const double min_value = *std::min_element(model.values.begin(), model.values.end());
    if (!(min_value > 0.0))
      fail(errc::not_positive, "positive density kinds require strictly positive values");
  }
  const double total = mass_over(model, model.support);
  if (!(total > 0.0)) fail(errc::zero_mass, "density integrates to zero");
  model.scale /= total;
  model.normalized = true;
  // Refresh metadata so the stored bounds always hold for the normalized grid.
  if (model.kind == DensityKind::smooth_sampled) {
    const double min_value = *std::min_element(model.values.begin(), model.values.end());
    if (model.lower_bound <= 0.0) model.lower_bound = min_value * model.scale;
    if (model.lipschitz <= 0.0) model.lipschitz = smooth_gradient_bound(model) * model.scale;
  } else if (is_positive_kind(model)) {
    const double min_value = *std::min_element(model.values.begin(), model.values.end());
    model.lower_bound = min_value * model.scale;
    model.lipschitz = 0.0;
  }
  return model;
}

namespace {
DensityModel ensure_normalized(const DensityModel& m) {
  return m.normalized ? m : normalize(m);
}
} // namespace

double evaluate(const DensityModel& model, const Point& p) {
  if (model.kind == DensityKind::two_delta)
    fail(errc::not_positive, "two_delta measure has no pointwise density");
  if (!model.support.contains(p)) return 0.0;
  switch (model.kind) {
    case DensityKind::uniform:
      return model.values[0] * model.scale;
    case DensityKind::piecewise_constant: {
      const int m = model.m;
      const int i = std::min(m - 1, int(p.x * m));
      const int j = std::min(m - 1, int(p.y * m));
      return model.values[j * m + i] * model.scale;
    }
    case DensityKind::smooth_sampled: {
      const int k = model.k;
      const int i = std::min(k - 1, int(p.x * k));
      const int j = std::min(k - 1, int(p.y * k));
      const double u = p.x * k - i;
      const double v = p.y * k - j;
      const double f00 = model.values[j * (k + 1) + i];
      const double f10 = model.values[j * (k + 1) + i + 1];
      const double f01 = model.values[(j + 1) * (k + 1) + i];
      const double f11 = model.values[(j + 1) * (k + 1) + i + 1];
      return ((1 - u) * (1 - v) * f00 + u * (1 - v) * f10 + (1 - u) * v * f01 + u * v * f11) *
             model.scale;
    }
    case DensityKind::disconnected_squares: {
      double value = 0.0;
      if (model.sq1.contains(p)) value += model.v1;
      if (model.sq2.contains(p)) value += model.v2;
      return value * model.scale;
    }
    case DensityKind::two_delta:
      break;
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// cell partitions

Rect CellPartition::cell_rect(int cell) const {
  const int i = cell % m;
  const int j = cell / m;
  return Rect{double(i) / m, double(j) / m, double(i + 1) / m, double(j + 1) / m};
}

CellPartition cell_masses(const DensityModel& model0, int m) {
  if (m < 1) fail(errc::config_invalid, "cell partition resolution m must be >= 1");
  const DensityModel model = ensure_normalized(model0);
  CellPartition part;
  part.m = m;
  part.masses.assign(std::size_t(m) * m, 0.0);
  if (model.kind == DensityKind::two_delta) {
    // Atoms are binned into half-open cells (top/right rows closed) so a
    // boundary atom lands in exactly one cell.
    for (const Point& z : {model.z1, model.z2}) {
      const int i = std::min(m - 1, int(z.x * m));
      const int j = std::min(m - 1, int(z.y * m));
      part.masses[j * m + i] += 0.5 * model.scale;
    }
    return part;
  }
  for (int cell = 0; cell < part.cell_count(); ++cell)
    part.masses[cell] = mass_over(model, part.cell_rect(cell));
  return part;
}

DensityModel conditional_restriction(const DensityModel& model0, const CellPartition& partition,
                                     int cell) {
  if (cell < 0 || cell >= partition.cell_count())
    fail(errc::out_of_domain, "cell index outside the partition");
  const double p_k = partition.masses[cell];
  if (!(p_k > 0.0)) fail(errc::empty_cell, "conditional restriction to a zero-mass cell");
  DensityModel restricted = ensure_normalized(model0);
  restricted.support = intersect(restricted.support, partition.cell_rect(cell));
  if (restricted.support.empty() && restricted.kind != DensityKind::two_delta)
    fail(errc::empty_cell, "cell does not meet the model support");
  restricted.scale /= p_k;
  return restricted;
}

// ---------------------------------------------------------------------------
// triangular map (conditional CDFs and their inverses)

namespace {

// Bisection for a monotone increasing function g on [lo,hi] with g(lo) <= 0 <= g(hi).
template <class F>
double bisect(double lo, double hi, F&& g) {
  for (int it = 0; it < 100 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

} // namespace

struct TriangularMap::Impl {
  DensityModel model; // normalized, positive kind

  // Marginal structure in y: on segment s the marginal density is
  // r2(t) = alpha[s] + beta[s] * t, with cumulative breakpoints cum.
  std::vector<double> ybreak; // size S+1, spans [support.y0, support.y1]
  std::vector<int> yrow;      // grid row of each segment (smooth kind)
  std::vector<double> alpha, beta;
  std::vector<double> cum; // size S+1, cum[0] = 0, cum[S] = total mass (~1)

  // Clipped grid columns shared by every row: [xlo[i], xhi[i]] with column
  // index col[i].
  std::vector<int> col;
  std::vector<double> xlo, xhi;

  // piecewise_constant fast path: per grid row, prefix sums of clipped column
  // masses per unit height.
  std::vector<std::vector<double>> row_prefix;

  double total = 1.0;

  bool is_uniform_like() const { return model.kind == DensityKind::uniform; }

  // density restricted to the horizontal line y = t, on clipped column c:
  // rho(x, t) = g0 + g1 * (x - ox)
  void line_coeffs(int c, double t, double& g0, double& g1, double& ox) const {
    if (model.kind == DensityKind::piecewise_constant) {
      const int m = model.m;
      const int j = std::min(m - 1, std::max(0, int(t * m)));
      g0 = model.values[j * m + col[c]] * model.scale;
      g1 = 0.0;
      ox = xlo[c];
      return;
    }
    const int k = model.k;
    const double h = 1.0 / k;
    const int j = std::min(k - 1, std::max(0, int(t * k)));
    const int i = col[c];
    const double f00 = model.values[j * (k + 1) + i];
    const double f10 = model.values[j * (k + 1) + i + 1];
    const double f01 = model.values[(j + 1) * (k + 1) + i];
    const double f11 = model.values[(j + 1) * (k + 1) + i + 1];
    const double oy = double(j) / k;
    const double tau = t - oy;
    ox = double(i) / k;
    const double d00 = f00 * model.scale;
    const double d10 = (f10 - f00) / h * model.scale;
    const double d01 = (f01 - f00) / h * model.scale;
    const double d11 = (f11 - f10 - f01 + f00) / (h * h) * model.scale;
    g0 = d00 + d01 * tau;
    g1 = d10 + d11 * tau;
  }

  // ∫_{xlo[c]}^{x} rho(s, t) ds for x inside clipped column c
  double column_partial(int c, double t, double x) const {
    double g0, g1, ox;
    line_coeffs(c, t, g0, g1, ox);
    const double a = xlo[c] - ox;
    const double b = x - ox;
    return g0 * (b - a) + g1 * (b * b - a * a) / 2.0;
  }

  double column_mass(int c, double t) const { return column_partial(c, t, xhi[c]); }

  double marginal_partial(int s, double t) const {
    const double t0 = ybreak[s];
    return alpha[s] * (t - t0) + beta[s] * (t * t - t0 * t0) / 2.0;
  }
};

TriangularMap::TriangularMap(const DensityModel& model0) : impl_(new Impl) {
  DensityModel model = ensure_normalized(model0);
  if (!is_positive_kind(model))
    fail(errc::not_positive, "triangular map requires a strictly positive density kind");
  if (model.support.empty()) fail(errc::empty_cell, "empty support");
  impl_->model = std::move(model);
  Impl& im = *impl_;
  const DensityModel& m = im.model;
  const Rect S = m.support;

  if (im.is_uniform_like()) {
    im.total = 1.0;
    return; // affine closed form, no tables needed
  }

  const int grid = (m.kind == DensityKind::piecewise_constant) ? m.m : m.k;

  // clipped columns
  int i0, i1;
  grid_range(S.x0, S.x1, grid, i0, i1);
  for (int i = i0; i <= i1; ++i) {
    const double lo = std::max(S.x0, double(i) / grid);
    const double hi = std::min(S.x1, double(i + 1) / grid);
    if (hi <= lo) continue;
    im.col.push_back(i);
    im.xlo.push_back(lo);
    im.xhi.push_back(hi);
  }

  // y segments: grid rows clipped to the support
  int j0, j1;
  grid_range(S.y0, S.y1, grid, j0, j1);
  im.ybreak.push_back(std::max(S.y0, double(j0) / grid));
  for (int j = j0; j <= j1; ++j) {
    const double hi = std::min(S.y1, double(j + 1) / grid);
    if (hi <= im.ybreak.back()) continue;
    im.yrow.push_back(j);
    im.ybreak.push_back(hi);
  }

  // marginal coefficients per segment: r2(t) = sum over columns of the line
  // integral, which is linear in t for bilinear cells and constant for
  // piecewise-constant ones
  const int segs = int(im.yrow.size());
  im.alpha.assign(segs, 0.0);
  im.beta.assign(segs, 0.0);
  for (int s = 0; s < segs; ++s) {
    if (m.kind == DensityKind::piecewise_constant) {
      const int j = im.yrow[s];
      double a = 0.0;
      for (std::size_t c = 0; c < im.col.size(); ++c)
        a += m.values[j * m.m + im.col[c]] * m.scale * (im.xhi[c] - im.xlo[c]);
      im.alpha[s] = a;
    } else {
      // the row mass is exactly linear in t inside a grid row, so two
      // evaluations pin down the segment coefficients
      const double t0 = im.ybreak[s];
      const double t1 = im.ybreak[s + 1];
      const double tm = 0.5 * (t0 + t1);
      double m0 = 0.0, m1 = 0.0;
      for (std::size_t c = 0; c < im.col.size(); ++c) {
        m0 += im.column_mass(int(c), t0);
        m1 += im.column_mass(int(c), tm);
      }
      const double slope = (m1 - m0) / (tm - t0);
      im.beta[s] = slope;
      im.alpha[s] = m0 - slope * t0;
    }
  }

  im.cum.assign(segs + 1, 0.0);
  for (int s = 0; s < segs; ++s)
    im.cum[s + 1] = im.cum[s] + im.marginal_partial(s, im.ybreak[s + 1]);
  im.total = im.cum[segs];
  if (!(im.total > 0.0)) fail(errc::zero_mass, "support carries no mass");

  if (m.kind == DensityKind::piecewise_constant) {
    im.row_prefix.assign(m.m, {});
    for (int j = 0; j < m.m; ++j) {
      auto& pref = im.row_prefix[j];
      pref.assign(im.col.size() + 1, 0.0);
      for (std::size_t c = 0; c < im.col.size(); ++c)
        pref[c + 1] = pref[c] + m.values[j * m.m + im.col[c]] * m.scale * (im.xhi[c] - im.xlo[c]);
    }
  }
}

TriangularMap::~TriangularMap() = default;
TriangularMap::TriangularMap(TriangularMap&&) noexcept = default;
TriangularMap& TriangularMap::operator=(TriangularMap&&) noexcept = default;

Point TriangularMap::forward(const Point& uv) const {
  const Impl& im = *impl_;
  const Rect S = im.model.support;
  double u = uv.x, v = uv.y;
  if (u < -1e-12 || u > 1 + 1e-12 || v < -1e-12 || v > 1 + 1e-12)
    fail(errc::out_of_domain, "triangular map input must lie in the unit square");
  u = std::clamp(u, 0.0, 1.0);
  v = std::clamp(v, 0.0, 1.0);

  if (im.is_uniform_like())
    return Point{S.x0 + u * S.width(), S.y0 + v * S.height()};

  // invert the marginal CDF of x2
  const double ty = v * im.total;
  const int segs = int(im.yrow.size());
  int s = int(std::upper_bound(im.cum.begin(), im.cum.end(), ty) - im.cum.begin()) - 1;
  s = std::clamp(s, 0, segs - 1);
  double y;
  if (im.model.kind == DensityKind::piecewise_constant) {
    y = im.ybreak[s] + (ty - im.cum[s]) / std::max(im.alpha[s], 1e-300);
  } else {
    const double local = ty - im.cum[s];
    y = bisect(im.ybreak[s], im.ybreak[s + 1],
               [&](double t) { return im.marginal_partial(s, t) - local; });
  }
  y = std::clamp(y, im.ybreak[s], im.ybreak[s + 1]);

  // invert the conditional CDF of x1 given x2 = y
  double x;
  if (im.model.kind == DensityKind::piecewise_constant) {
    const int j = im.yrow[s];
    const auto& pref = im.row_prefix[j];
    const double row_total = pref.back();
    const double tx = u * row_total;
    int c = int(std::upper_bound(pref.begin(), pref.end(), tx) - pref.begin()) - 1;
    c = std::clamp(c, 0, int(im.col.size()) - 1);
    const double width = im.xhi[c] - im.xlo[c];
    const double density = (pref[c + 1] - pref[c]) / width;
    x = im.xlo[c] + (tx - pref[c]) / std::max(density, 1e-300);
    x = std::clamp(x, im.xlo[c], im.xhi[c]);
  } else {
    const int ncols = int(im.col.size());
    double row_total = 0.0;
    std::vector<double> pref(ncols + 1, 0.0);
    for (int c = 0; c < ncols; ++c) {
      row_total += im.column_mass(c, y);
      pref[c + 1] = row_total;
    }
    const double tx = u * row_total;
    int c = int(std::upper_bound(pref.begin(), pref.end(), tx) - pref.begin()) - 1;
    c = std::clamp(c, 0, ncols - 1);
    const double local = tx - pref[c];
    x = bisect(im.xlo[c], im.xhi[c], [&](double s_) { return im.column_partial(c, y, s_) - local; });
  }
  return Point{x, y};
}

Point TriangularMap::inverse(const Point& xy) const {
  const Impl& im = *impl_;
  const Rect S = im.model.support;
  double x = xy.x, y = xy.y;
  if (x < S.x0 - 1e-12 || x > S.x1 + 1e-12 || y < S.y0 - 1e-12 || y > S.y1 + 1e-12)
    fail(errc::out_of_domain, "triangular map inverse input must lie in the support");
  x = std::clamp(x, S.x0, S.x1);
  y = std::clamp(y, S.y0, S.y1);

  if (im.is_uniform_like())
    return Point{(x - S.x0) / S.width(), (y - S.y0) / S.height()};

  const int segs = int(im.yrow.size());
  int s = int(std::upper_bound(im.ybreak.begin(), im.ybreak.end(), y) - im.ybreak.begin()) - 1;
  s = std::clamp(s, 0, segs - 1);
  const double v = (im.cum[s] + im.marginal_partial(s, y)) / im.total;

  double u;
  if (im.model.kind == DensityKind::piecewise_constant) {
    const int j = im.yrow[s];
    const auto& pref = im.row_prefix[j];
    int c = 0;
    while (c + 1 < int(im.col.size()) && x > im.xhi[c]) ++c;
    const double width = im.xhi[c] - im.xlo[c];
    const double density = (pref[c + 1] - pref[c]) / width;
    u = (pref[c] + density * (x - im.xlo[c])) / std::max(pref.back(), 1e-300);
  } else {
    const int ncols = int(im.col.size());
    int cx = 0;
    while (cx + 1 < ncols && x > im.xhi[cx]) ++cx;
    double row_total = 0.0, upto = 0.0;
    for (int c = 0; c < ncols; ++c) row_total += im.column_mass(c, y);
    for (int c = 0; c < cx; ++c) upto += im.column_mass(c, y);
    upto += im.column_partial(cx, y, std::clamp(x, im.xlo[cx], im.xhi[cx]));
    u = upto / std::max(row_total, 1e-300);
  }
  return Point{std::clamp(u, 0.0, 1.0), std::clamp(v, 0.0, 1.0)};
}

Point knothe_map(const DensityModel& model, const Point& uv) {
  return TriangularMap(model).forward(uv);
}

Point knothe_inverse(const DensityModel& model, const Point& xy) {
  return TriangularMap(model).inverse(xy);
}

// ---------------------------------------------------------------------------
// sampling

PointCloud sample_points(const DensityModel& model0, std::size_t n, Rng& rng) {
  const DensityModel model = ensure_normalized(model0);
  PointCloud cloud;
  cloud.points.resize(n);
  switch (model.kind) {
    case DensityKind::two_delta: {
      for (std::size_t i = 0; i < n; ++i)
        cloud.points[i] = rng.uniform() < 0.5 ? model.z1 : model.z2;
      break;
    }
    case DensityKind::disconnected_squares: {
      const Rect a = intersect(model.sq1, model.support);
      const Rect b = intersect(model.sq2, model.support);
      const double wa = mass_over(model, a);
      const double wb = mass_over(model, b);
      const double pa = wa / (wa + wb);
      for (std::size_t i = 0; i < n; ++i) {
        const Rect& sq = rng.uniform() < pa ? a : b;
        const double ux = rng.uniform();
        const double uy = rng.uniform();
        cloud.points[i] = Point{sq.x0 + ux * sq.width(), sq.y0 + uy * sq.height()};
      }
      break;
    }
    default: {
      const TriangularMap map(model);
      for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform();
        const double v = rng.uniform();
        cloud.points[i] = map.forward(Point{u, v});
      }
      break;
    }
  }
  return cloud;
}

PointCloud sample_points(const DensityModel& model, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return sample_points(model, n, rng);
}

// ---------------------------------------------------------------------------
// presets

DensityModel preset_density(const std::string& name) {
  if (name == "uniform") return normalize(make_uniform(1.0));
  if (name == "tilted") {
    // (x1 + x2 + 1)/2, represented exactly on a bilinear grid
    const int k = 64;
    std::vector<double> values(std::size_t(k + 1) * (k + 1));
    for (int j = 0; j <= k; ++j)
      for (int i = 0; i <= k; ++i) values[j * (k + 1) + i] = double(i + j) / (2 * k) + 0.5;
    return normalize(make_smooth_sampled(k, std::move(values)));
  }
  if (name == "pwc2x2") return normalize(make_piecewise_constant(2, {0.4, 0.8, 1.2, 1.6}));
  if (name == "two_delta") return normalize(make_two_delta(Point{0.0, 0.5}, Point{1.0, 0.5}));
  if (name == "disconnected")
    return normalize(make_disconnected(Rect{0.0, 0.375, 0.25, 0.625},
                                       Rect{0.75, 0.375, 1.0, 0.625}, 1.0, 1.0));
  fail(errc::config_invalid, "unknown density preset '" + name + "'");
}

std::vector<std::string> preset_names() {
  return {"uniform", "tilted", "pwc2x2", "two_delta", "disconnected"};
}

} // namespace matchlab
