#pragma once

#include <cstdint>
#include <vector>

#include "matchlab/geometry.hpp"

namespace matchlab {

// Optimal matching between two equally sized point sets under squared
// Euclidean cost. match[i] is the index of the Y point assigned to X point i.
// u and v are dual potentials satisfying u[i] + v[j] <= |x_i - y_j|^2 with
// equality on matched pairs; solvers that do not produce duals leave them
// empty.
struct Assignment {
  std::vector<int> match;
  double cost = 0.0;
  std::vector<double> u, v;
};

// Exhaustive search over all permutations. Ties broken by lexicographically
// smallest permutation. Sizes above 10 are rejected.
Assignment brute_force_assignment(const PointCloud& x, const PointCloud& y);

// Exact O(N^3) solver (successive shortest augmenting paths with dual
// potentials). Costs are evaluated on the fly from the coordinates, so memory
// stays O(N). Equal-cost augmenting steps resolve toward the lowest sink
// index, which makes the returned matching deterministic.
Assignment solve_assignment(const PointCloud& x, const PointCloud& y);

// Optimal matching of two real samples: sorts both sides and pairs order
// statistics. match is expressed on the original indexing. No duals.
Assignment monotone_1d(const std::vector<double>& x, const std::vector<double>& y);

// Matching cost divided by N, i.e. the squared 2-Wasserstein distance between
// the two empirical measures.
double empirical_w2(const PointCloud& x, const PointCloud& y);

// Largest violation of the optimality certificate for an assignment with
// duals: max over all pairs of u[i] + v[j] - cost(i,j), and over matched pairs
// of |cost(i, match[i]) - u[i] - v[match[i]]|. Optimal solutions give ~0.
double assignment_certificate(const PointCloud& x, const PointCloud& y, const Assignment& a);

struct WeightedAtoms {
  std::vector<Point> points;
  std::vector<double> masses;
  std::size_t size() const { return points.size(); }
};

struct PlanEntry {
  int i = 0, j = 0;
  double flow = 0.0;
};

// Optimal coupling between two discrete probability measures. Entries carry
// strictly positive flow; for a basic optimal solution there are at most
// n + m - 1 of them. Potentials satisfy
//   source_potentials[i] + sink_potentials[j] <= cost(i,j)
// with equality on the support.
struct TransportPlan {
  std::vector<double> source_masses, sink_masses;
  std::vector<PlanEntry> flows;
  double cost = 0.0;
  std::vector<double> source_potentials, sink_potentials;
};

inline constexpr std::int64_t default_arc_limit = std::int64_t(1) << 26;

// Exact min-cost flow on the complete bipartite graph between the atom sets,
// squared Euclidean cost. Both mass vectors must sum to 1 within 1e-9. The
// optimal cost equals the squared 2-Wasserstein distance between the two
// discrete measures.
TransportPlan solve_transportation(const WeightedAtoms& sources, const WeightedAtoms& sinks,
                                   std::int64_t arc_limit = default_arc_limit);

// Largest violation of dual feasibility / complementary slackness of a plan.
double plan_certificate(const WeightedAtoms& sources, const WeightedAtoms& sinks,
                        const TransportPlan& plan);

} // namespace matchlab
