#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "matchlab/geometry.hpp"
#include "matchlab/rng.hpp"

namespace matchlab {

enum class DensityKind {
  uniform,
  piecewise_constant,
  smooth_sampled,
  two_delta,
  disconnected_squares,
};

// A measure on the unit square. The absolutely continuous kinds (uniform,
// piecewise_constant, smooth_sampled) are strictly positive densities; the
// degenerate kinds (two_delta, disconnected_squares) are the counterexample
// regimes and are rejected by the operations that need positivity.
//
// `support` and `scale` let a model carry a conditional restriction: the
// density is scale * (stored values) inside `support` and 0 outside.
struct DensityModel {
  DensityKind kind = DensityKind::uniform;

  // piecewise_constant: m x m cells, values row-major with origin lower-left;
  // value of cell (i,j) is values[j*m + i].
  int m = 0;
  // smooth_sampled: (k+1) x (k+1) vertex grid, bilinear in between;
  // vertex (i,j) at (i/k, j/k) carries values[j*(k+1) + i].
  int k = 0;
  std::vector<double> values;

  // Metadata for smooth_sampled (recomputed by normalize when left at 0).
  double lipschitz = 0.0;
  double lower_bound = 0.0;

  Point z1{}, z2{};          // two_delta atoms (mass 1/2 each)
  Rect sq1{}, sq2{};         // disconnected_squares patches
  double v1 = 0.0, v2 = 0.0; // patch values

  Rect support = unit_square;
  double scale = 1.0;
  bool normalized = false;
};

DensityModel make_uniform(double value = 1.0);
DensityModel make_piecewise_constant(int m, std::vector<double> values);
DensityModel make_smooth_sampled(int k, std::vector<double> values, double lipschitz = 0.0,
                                 double lower_bound = 0.0);
DensityModel make_two_delta(Point z1, Point z2);
DensityModel make_disconnected(Rect sq1, Rect sq2, double v1, double v2);

// Built-in models used by experiments and tests:
//   uniform       flat density
//   tilted        (x1 + x2 + 1)/2 stored on a 64x64 bilinear grid (exact)
//   pwc2x2        2x2 cells with values 0.4, 0.8, 1.2, 1.6
//   two_delta     atoms at (0, 1/2) and (1, 1/2), separation 1
//   disconnected  squares [0,1/4]x[3/8,5/8] and [3/4,1]x[3/8,5/8], gap 1/2
DensityModel preset_density(const std::string& name);
std::vector<std::string> preset_names();

bool is_positive_kind(const DensityModel& model);

// Rescales so the measure has total mass 1; relative values are preserved.
DensityModel normalize(const DensityModel& raw);

// Pointwise density value (0 outside the support). Rejects two_delta.
double evaluate(const DensityModel& model, const Point& p);

// Exact moments of the measure over a rectangle, taken about `center`:
//   mass   = ∫ ρ
//   mx,my  = ∫ ρ (x - center)
//   second = ∫ ρ |x - center|²
//   square = ∫ ρ²   (rejects two_delta)
// Everything is closed-form polynomial quadrature per grid cell, so these are
// exact (up to rounding) for all piecewise-constant and bilinear kinds.
struct Moments {
  double mass = 0.0;
  double mx = 0.0;
  double my = 0.0;
  double second = 0.0;
};
Moments moments_over(const DensityModel& model, const Rect& r, const Point& center);
double mass_over(const DensityModel& model, const Rect& r);
double square_integral_over(const DensityModel& model, const Rect& r);

// The m x m grid decomposition of the unit square with per-cell masses.
struct CellPartition {
  int m = 0;
  std::vector<double> masses; // row-major, origin lower-left

  Rect cell_rect(int cell) const;
  int cell_count() const { return m * m; }
};

CellPartition cell_masses(const DensityModel& model, int m);

// The conditional probability measure on cell k: (1/p_k) ρ restricted to Q_k.
DensityModel conditional_restriction(const DensityModel& model, const CellPartition& partition,
                                     int cell);

// Triangular transport map between the uniform law on the unit square and a
// positive model: forward = quantile form (uniform -> model), inverse =
// conditional-CDF form (model -> uniform; second component is the marginal CDF
// of x2, first the conditional CDF of x1 given x2). Constructing one instance
// amortizes the marginal tables over many evaluations.
class TriangularMap {
 public:
  explicit TriangularMap(const DensityModel& model);
  ~TriangularMap();
  TriangularMap(TriangularMap&&) noexcept;
  TriangularMap& operator=(TriangularMap&&) noexcept;

  Point forward(const Point& uv) const;
  Point inverse(const Point& xy) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// One-shot wrappers around TriangularMap.
Point knothe_map(const DensityModel& model, const Point& uv);
Point knothe_inverse(const DensityModel& model, const Point& xy);

// N i.i.d. draws from the model; bit-identical for identical (model, n, seed).
PointCloud sample_points(const DensityModel& model, std::size_t n, std::uint64_t seed);
PointCloud sample_points(const DensityModel& model, std::size_t n, Rng& rng);

} // namespace matchlab
