#pragma once

#include <vector>

#include "matchlab/density.hpp"
#include "matchlab/geometry.hpp"

namespace matchlab {

// Scalar field sampled on the (m+1)x(m+1) vertex grid of the unit square,
// vertex (i, j) at (i/m, j/m), values stored row-major with i fastest. Each
// vertex owns a control volume clipped to the square, so boundary rows weigh
// half as much as interior ones in every integral below.
struct GridField {
  int m = 0;
  std::vector<double> values;

  GridField() = default;
  explicit GridField(int resolution, double fill = 0.0)
      : m(resolution), values(std::size_t(resolution + 1) * (resolution + 1), fill) {}

  int verts() const { return m + 1; }
  double& at(int i, int j) { return values[std::size_t(j) * (m + 1) + i]; }
  double at(int i, int j) const { return values[std::size_t(j) * (m + 1) + i]; }
};

// Trapezoid weight of a vertex index along one axis.
inline double vertex_weight(int i, int m) { return (i == 0 || i == m) ? 0.5 : 1.0; }

// Control-volume integral of the field over the square.
double field_integral(const GridField& f);

// Truncated lattice sum (2/pi^2) sum_{k in N^2, k != 0, |k|^2 <= n} 1/|k|^2,
// the cutoff regularization of the matching-cost prediction. Returns 0 when
// n < 1 (empty sum). Nondecreasing in n.
double fourier_cutoff_prediction(double n);

// Leading term log(n)/(2 pi) of the heat-kernel regularization at time 1/n.
double heat_cutoff_prediction(double n);

// Solves div(rho grad phi) = -charge with zero-flux boundary, finite volumes
// with harmonic-mean face conductivities, conjugate gradients to relative
// residual 1e-11. The charge is projected to zero mean first; the returned
// phi has rho-weighted zero mean.
GridField solve_weighted_poisson(const GridField& rho, const GridField& charge);

// Coefficient of -log|x - z| in the Green function of div(rho grad .) with a
// unit charge at z (an estimate of 1/(2 pi rho(z))). z must coincide with a
// grid vertex at distance >= 1/4 from the boundary. The slope is fitted over
// vertices with r in [r_min, 1/8]; r_min defaults to 4/m.
double green_singular_coefficient(const DensityModel& model, const Point& z, int m,
                                  double r_min = 0.0);

// Coefficients on the L2-orthonormalized cosine basis
// e_k ~ cos(pi k1 x) cos(pi k2 y); a[k2*(m+1)+k1]. Parseval holds exactly
// against the trapezoid-weighted squared integral of the field.
struct SpectralCoeffs {
  int m = 0;
  std::vector<double> a;

  double at(int k1, int k2) const { return a[std::size_t(k2) * (m + 1) + k1]; }
};

SpectralCoeffs cosine_coefficients(const GridField& f);

// Squared negative-Sobolev seminorm of a charge: sum over k != 0 of
// a_k^2 / (pi^2 |k|^2). The mean component is discarded (zero-mean
// projection).
double hminus1_norm(const GridField& charge);

// Two-sided transport bound between positive densities on the same grid:
// norm/sqrt(max rho) <= W2 <= norm/sqrt(min rho) with norm the H^-1 seminorm
// of the difference. w2 is measured by an exact solve between the
// control-volume collapses of the two fields; slack is the collapse error
// bound added on both sides of the comparison.
struct SandwichReport {
  double lower = 0.0;
  double w2 = 0.0;
  double upper = 0.0;
  double slack = 0.0;
  double min_density = 0.0;
  double max_density = 0.0;
  bool holds = false;
};

SandwichReport sandwich_check(const GridField& nu1, const GridField& nu2);

} // namespace matchlab
