#pragma once

#include <cstdint>
#include <vector>

#include "matchlab/density.hpp"
#include "matchlab/transport.hpp"

namespace matchlab {

// A density collapsed onto one atom per grid cell: the atom sits at the mass
// barycenter b_k of the cell, carries the cell mass p_k, and remembers the
// within-cell spread s_k = ∫_cell rho |x - b_k|^2 dx. Zero-mass cells keep a
// placeholder atom at the cell center.
struct DiscretizedMeasure {
  int M = 1;
  std::vector<Point> barycenters;
  std::vector<double> masses;
  std::vector<double> second_moments;

  double collapse_cost() const {
    double s = 0.0;
    for (double v : second_moments) s += v;
    return s;
  }
};

DiscretizedMeasure discretize_measure(const DensityModel& model, int M);

// Squared 2-Wasserstein distance between the empirical measure of X and the
// density, bracketed by a grid collapse at resolution M: raw is the exact
// distance to the collapsed measure (a lower proxy), corrected adds back the
// within-cell spread, giving an upper bound on W2^2(X, rho) up to the
// coupling rearrangement inside cells.
struct SemidiscreteResult {
  double raw = 0.0;
  double corrected = 0.0;
};

SemidiscreteResult w2_to_density(const PointCloud& x, const DensityModel& model, int M,
                                 std::int64_t arc_limit = default_arc_limit);

// M = ceil(4 sqrt(N)), capped so the bipartite solve stays within the default
// arc budget.
int default_resolution(std::size_t n);

} // namespace matchlab
