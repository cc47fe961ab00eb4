#include "matchlab/semidiscrete.hpp"

#include <cmath>

#include "matchlab/error.hpp"

namespace matchlab {

DiscretizedMeasure discretize_measure(const DensityModel& model0, int M) {
  if (M < 1) fail(errc::config_invalid, "discretization resolution must be >= 1");
  DensityModel model = model0.normalized ? model0 : normalize(model0);
  if (!is_positive_kind(model))
    fail(errc::not_positive, "discretization needs an absolutely continuous density");
  const CellPartition part = cell_masses(model, M);
  DiscretizedMeasure out;
  out.M = M;
  const int cells = part.cell_count();
  out.barycenters.resize(cells);
  out.masses = part.masses;
  out.second_moments.assign(cells, 0.0);
  for (int k = 0; k < cells; ++k) {
    const Rect cell = part.cell_rect(k);
    const Point center{0.5 * (cell.x0 + cell.x1), 0.5 * (cell.y0 + cell.y1)};
    const double p = part.masses[k];
    if (!(p > 0.0)) {
      out.barycenters[k] = center;
      continue;
    }
    // moments about the cell center keep the arithmetic well conditioned;
    // the spread about the barycenter follows by the parallel-axis shift
    const Moments m = moments_over(model, cell, center);
    const Point b{center.x + m.mx / p, center.y + m.my / p};
    const double shift = (b.x - center.x) * (b.x - center.x) +
                         (b.y - center.y) * (b.y - center.y);
    out.barycenters[k] = b;
    out.second_moments[k] = std::max(0.0, m.second - p * shift);
  }
  return out;
}

SemidiscreteResult w2_to_density(const PointCloud& x, const DensityModel& model, int M,
                                 std::int64_t arc_limit) {
  validate_cloud(x);
  const DiscretizedMeasure grid = discretize_measure(model, M);
  WeightedAtoms sources;
  sources.points = x.points;
  sources.masses.assign(x.size(), 1.0 / double(x.size()));
  WeightedAtoms sinks;
  sinks.points = grid.barycenters;
  sinks.masses = grid.masses;
  const TransportPlan plan = solve_transportation(sources, sinks, arc_limit);
  SemidiscreteResult r;
  r.raw = plan.cost;
  r.corrected = plan.cost + grid.collapse_cost();
  return r;
}

int default_resolution(std::size_t n) {
  if (n == 0) return 1;
  int M = int(std::ceil(4.0 * std::sqrt(double(n))));
  const double cap = std::sqrt(double(default_arc_limit) / double(n));
  M = std::min(M, std::max(1, int(cap)));
  return M;
}

} // namespace matchlab
