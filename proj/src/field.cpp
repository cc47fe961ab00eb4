#include "matchlab/field.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "matchlab/error.hpp"
#include "matchlab/transport.hpp"

namespace matchlab {

namespace {

constexpr double kPi = std::numbers::pi;

void require_grid(const GridField& f, const char* what) {
  if (f.m < 1 || f.values.size() != std::size_t(f.m + 1) * (f.m + 1))
    fail(errc::size_mismatch, std::string(what) + " must carry (m+1)^2 vertex values");
  for (double v : f.values)
    if (!std::isfinite(v)) fail(errc::out_of_domain, std::string(what) + " has non-finite values");
}

DensityModel normalized_copy(const DensityModel& m) {
  return m.normalized ? m : normalize(m);
}

} // namespace

double field_integral(const GridField& f) {
  require_grid(f, "field");
  const int m = f.m;
  const double h2 = 1.0 / (double(m) * m);
  double total = 0.0;
  for (int j = 0; j <= m; ++j) {
    const double wj = vertex_weight(j, m);
    for (int i = 0; i <= m; ++i) total += wj * vertex_weight(i, m) * f.at(i, j);
  }
  return total * h2;
}

double fourier_cutoff_prediction(double n) {
  if (!std::isfinite(n) || n < 0.0) fail(errc::out_of_domain, "particle count must be a finite nonnegative number");
  if (n < 1.0) return 0.0;
  const int kmax = int(std::floor(std::sqrt(n)));
  double sum = 0.0;
  for (int k1 = 0; k1 <= kmax; ++k1) {
    for (int k2 = (k1 == 0 ? 1 : 0); double(k1) * k1 + double(k2) * k2 <= n; ++k2)
      sum += 1.0 / (double(k1) * k1 + double(k2) * k2);
  }
  return 2.0 / (kPi * kPi) * sum;
}

double heat_cutoff_prediction(double n) {
  if (!(n >= 2.0)) fail(errc::out_of_domain, "heat-kernel prediction needs n >= 2");
  return std::log(n) / (2.0 * kPi);
}

// ---------------------------------------------------------------------------
// finite-volume weighted Poisson solve

namespace {

// Face conductivities with the transverse trapezoid weight folded in, so the
// operator applies as a plain difference stencil.
struct PoissonOperator {
  int m = 0;
  std::vector<double> kx; // face (i,j)-(i+1,j): index j*m + i
  std::vector<double> ky; // face (i,j)-(i,j+1): index j*(m+1) + i

  explicit PoissonOperator(const GridField& rho) : m(rho.m) {
    const int v = m + 1;
    kx.resize(std::size_t(v) * m);
    ky.resize(std::size_t(m) * v);
    auto harm = [](double a, double b) { return 2.0 * a * b / (a + b); };
    for (int j = 0; j <= m; ++j)
      for (int i = 0; i < m; ++i)
        kx[std::size_t(j) * m + i] = harm(rho.at(i, j), rho.at(i + 1, j)) * vertex_weight(j, m);
    for (int j = 0; j < m; ++j)
      for (int i = 0; i <= m; ++i)
        ky[std::size_t(j) * v + i] = harm(rho.at(i, j), rho.at(i, j + 1)) * vertex_weight(i, m);
  }

  void apply(const std::vector<double>& x, std::vector<double>& y) const {
    const int v = m + 1;
    std::fill(y.begin(), y.end(), 0.0);
    for (int j = 0; j <= m; ++j) {
      const std::size_t row = std::size_t(j) * v;
      for (int i = 0; i < m; ++i) {
        const double f = kx[std::size_t(j) * m + i] * (x[row + i] - x[row + i + 1]);
        y[row + i] += f;
        y[row + i + 1] -= f;
      }
    }
    for (int j = 0; j < m; ++j) {
      const std::size_t row = std::size_t(j) * v;
      for (int i = 0; i <= m; ++i) {
        const double f = ky[row + i] * (x[row + i] - x[row + v + i]);
        y[row + i] += f;
        y[row + v + i] -= f;
      }
    }
  }
};

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void remove_mean(std::vector<double>& a) {
  double s = 0.0;
  for (double v : a) s += v;
  s /= double(a.size());
  for (double& v : a) v -= s;
}

} // namespace

GridField solve_weighted_poisson(const GridField& rho, const GridField& charge) {
  require_grid(rho, "weight field");
  require_grid(charge, "charge field");
  if (rho.m != charge.m) fail(errc::size_mismatch, "weight and charge resolutions differ");
  for (double v : rho.values)
    if (!(v > 0.0)) fail(errc::not_positive_weight, "weight field must be strictly positive");

  const int m = rho.m;
  const int v = m + 1;
  const std::size_t nn = std::size_t(v) * v;
  const double h2 = 1.0 / (double(m) * m);

  // right-hand side: charge times control volume, projected onto zero sum
  // (control volumes sum to 1, so the projection subtracts the mean charge)
  std::vector<double> vol(nn), b(nn);
  double total_charge = 0.0;
  for (int j = 0; j <= m; ++j)
    for (int i = 0; i <= m; ++i) {
      const std::size_t idx = std::size_t(j) * v + i;
      vol[idx] = vertex_weight(i, m) * vertex_weight(j, m) * h2;
      b[idx] = charge.at(i, j) * vol[idx];
      total_charge += b[idx];
    }
  for (std::size_t i = 0; i < nn; ++i) b[i] -= total_charge * vol[i];

  GridField phi(m);
  const double bnorm = std::sqrt(dot(b, b));
  if (bnorm == 0.0) return phi;

  const PoissonOperator op(rho);
  std::vector<double>& x = phi.values;
  std::vector<double> r = b, p = b, ap(nn);
  double rr = dot(r, r);
  const double tol = 1e-11 * bnorm;
  const int max_iter = 30 * v + 2000;
  bool converged = false;
  for (int it = 0; it < max_iter; ++it) {
    op.apply(p, ap);
    const double pap = dot(p, ap);
    if (!(pap > 0.0)) break;
    const double alpha = rr / pap;
    for (std::size_t i = 0; i < nn; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    // keep iterates clear of the constant kernel
    remove_mean(r);
    const double rr_next = dot(r, r);
    if (std::sqrt(rr_next) <= tol) {
      converged = true;
      break;
    }
    const double beta = rr_next / rr;
    rr = rr_next;
    for (std::size_t i = 0; i < nn; ++i) p[i] = r[i] + beta * p[i];
  }
  if (!converged) fail(errc::solver_diverged, "conjugate gradients stalled on the weighted Poisson system");

  // report the solution with rho-weighted zero average
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < nn; ++i) {
    num += x[i] * rho.values[i] * vol[i];
    den += rho.values[i] * vol[i];
  }
  const double shift = num / den;
  for (double& t : x) t -= shift;
  return phi;
}

double green_singular_coefficient(const DensityModel& model0, const Point& z, int m,
                                  double r_min) {
  const DensityModel model = normalized_copy(model0);
  if (!is_positive_kind(model))
    fail(errc::not_positive, "the Green function needs a strictly positive density");
  if (m < 16) fail(errc::config_invalid, "grid resolution too small for the singular fit");
  const double h = 1.0 / m;
  const int iz = int(std::lround(z.x * m));
  const int jz = int(std::lround(z.y * m));
  if (std::fabs(z.x - iz * h) > 1e-9 || std::fabs(z.y - jz * h) > 1e-9)
    fail(errc::out_of_domain, "charge location must coincide with a grid vertex");
  if (z.x < 0.25 - 1e-12 || z.x > 0.75 + 1e-12 || z.y < 0.25 - 1e-12 || z.y > 0.75 + 1e-12)
    fail(errc::out_of_domain, "charge location must be at least 1/4 away from the boundary");

  GridField rho(m), charge(m);
  for (int j = 0; j <= m; ++j)
    for (int i = 0; i <= m; ++i) {
      const double d = evaluate(model, Point{i * h, j * h});
      rho.at(i, j) = d;
      charge.at(i, j) = -d;
    }
  const double vol_z = vertex_weight(iz, m) * vertex_weight(jz, m) * h * h;
  charge.at(iz, jz) += 1.0 / vol_z;

  const GridField phi = solve_weighted_poisson(rho, charge);

  if (r_min <= 0.0) r_min = 4.0 * h;
  const double r_max = 0.125;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  long count = 0;
  for (int j = 0; j <= m; ++j)
    for (int i = 0; i <= m; ++i) {
      const double r = std::hypot(i * h - z.x, j * h - z.y);
      if (r < r_min || r > r_max) continue;
      const double t = -std::log(r);
      sx += t;
      sy += phi.at(i, j);
      sxx += t * t;
      sxy += t * phi.at(i, j);
      ++count;
    }
  if (count < 50)
    fail(errc::regression_ill_conditioned, "fewer than 50 vertices in the fitting annulus");
  const double n = double(count);
  const double denom = sxx - sx * sx / n;
  if (!(denom > 0.0))
    fail(errc::regression_ill_conditioned, "degenerate radii in the fitting annulus");
  return (sxy - sx * sy / n) / denom;
}

// ---------------------------------------------------------------------------
// cosine spectral analysis

SpectralCoeffs cosine_coefficients(const GridField& f) {
  require_grid(f, "field");
  const int m = f.m;
  const int v = m + 1;
  const double h = 1.0 / m;
  std::vector<double> cosine(std::size_t(v) * v);
  for (int k = 0; k <= m; ++k)
    for (int i = 0; i <= m; ++i)
      cosine[std::size_t(k) * v + i] = std::cos(kPi * double(k) * i / m);
  auto mode_norm = [m](int k) { return (k == 0 || k == m) ? 1.0 : 0.5; };

  // trapezoid-weighted cosine analysis along rows, then columns
  std::vector<double> t(std::size_t(v) * v, 0.0);
  for (int j = 0; j <= m; ++j)
    for (int k1 = 0; k1 <= m; ++k1) {
      double s = 0.0;
      for (int i = 0; i <= m; ++i)
        s += vertex_weight(i, m) * f.at(i, j) * cosine[std::size_t(k1) * v + i];
      t[std::size_t(j) * v + k1] = s * h / mode_norm(k1);
    }
  SpectralCoeffs out;
  out.m = m;
  out.a.assign(std::size_t(v) * v, 0.0);
  for (int k2 = 0; k2 <= m; ++k2)
    for (int k1 = 0; k1 <= m; ++k1) {
      double s = 0.0;
      for (int j = 0; j <= m; ++j)
        s += vertex_weight(j, m) * t[std::size_t(j) * v + k1] * cosine[std::size_t(k2) * v + j];
      const double c = s * h / mode_norm(k2);
      out.a[std::size_t(k2) * v + k1] = c * std::sqrt(mode_norm(k1) * mode_norm(k2));
    }
  return out;
}

double hminus1_norm(const GridField& charge) {
  const SpectralCoeffs coeffs = cosine_coefficients(charge);
  const int m = coeffs.m;
  double total = 0.0;
  for (int k2 = 0; k2 <= m; ++k2)
    for (int k1 = 0; k1 <= m; ++k1) {
      if (k1 == 0 && k2 == 0) continue;
      const double a = coeffs.at(k1, k2);
      total += a * a / (kPi * kPi * (double(k1) * k1 + double(k2) * k2));
    }
  return total;
}

SandwichReport sandwich_check(const GridField& nu1, const GridField& nu2) {
  require_grid(nu1, "density field");
  require_grid(nu2, "density field");
  if (nu1.m != nu2.m) fail(errc::size_mismatch, "density resolutions differ");
  for (const GridField* f : {&nu1, &nu2})
    for (double t : f->values)
      if (!(t > 0.0)) fail(errc::not_positive, "density fields must be strictly positive");
  const double i1 = field_integral(nu1);
  const double i2 = field_integral(nu2);
  if (std::fabs(i1 - 1.0) > 1e-6 || std::fabs(i2 - 1.0) > 1e-6)
    fail(errc::mass_imbalance, "density fields must integrate to 1");

  SandwichReport report;
  report.min_density = std::min(*std::min_element(nu1.values.begin(), nu1.values.end()),
                                *std::min_element(nu2.values.begin(), nu2.values.end()));
  report.max_density = std::max(*std::max_element(nu1.values.begin(), nu1.values.end()),
                                *std::max_element(nu2.values.begin(), nu2.values.end()));

  GridField diff(nu1.m);
  for (std::size_t i = 0; i < diff.values.size(); ++i)
    diff.values[i] = nu1.values[i] - nu2.values[i];
  const double norm = std::sqrt(hminus1_norm(diff));
  report.lower = norm / std::sqrt(report.max_density);
  report.upper = norm / std::sqrt(report.min_density);

  // collapse both densities onto control-volume centers; the collapse moves
  // mass by at most the in-cell spread, which bounds how far the measured
  // distance can sit from the true one
  const int m = nu1.m;
  const double h = 1.0 / m;
  WeightedAtoms a1, a2;
  double spread1 = 0.0, spread2 = 0.0;
  for (int j = 0; j <= m; ++j)
    for (int i = 0; i <= m; ++i) {
      const double wi = vertex_weight(i, m), wj = vertex_weight(j, m);
      const double vol = wi * wj * h * h;
      const Point p{i * h, j * h};
      const double m1 = nu1.at(i, j) * vol / i1;
      const double m2 = nu2.at(i, j) * vol / i2;
      a1.points.push_back(p);
      a1.masses.push_back(m1);
      a2.points.push_back(p);
      a2.masses.push_back(m2);
      const double cell_spread = (wi * h * wi * h + wj * h * wj * h) / 12.0;
      spread1 += m1 * cell_spread;
      spread2 += m2 * cell_spread;
    }
  report.w2 = std::sqrt(solve_transportation(a1, a2).cost);
  report.slack = std::sqrt(spread1) + std::sqrt(spread2);
  report.holds = (report.lower * (1.0 - 1e-3) - report.slack <= report.w2) &&
                 (report.w2 <= report.upper * (1.0 + 1e-3) + report.slack);
  return report;
}

} // namespace matchlab
