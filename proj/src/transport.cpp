#include "matchlab/transport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "matchlab/error.hpp"

namespace matchlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_equal_sizes(const PointCloud& x, const PointCloud& y) {
  if (x.size() == 0 || x.size() != y.size())
    fail(errc::size_mismatch, "point sets must be non-empty and equally sized");
}

double cost_of_match(const PointCloud& x, const PointCloud& y, const std::vector<int>& match) {
  double c = 0.0;
  for (std::size_t i = 0; i < match.size(); ++i)
    c += squared_distance(x[i], y[std::size_t(match[i])]);
  return c;
}

} // namespace

Assignment brute_force_assignment(const PointCloud& x, const PointCloud& y) {
  require_equal_sizes(x, y);
  if (x.size() > 10) fail(errc::too_large, "exhaustive search is limited to 10 points");
  const int n = int(x.size());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_cost = cost_of_match(x, y, perm);
  // lexicographic enumeration with strict improvement keeps the smallest
  // permutation among cost ties
  while (std::next_permutation(perm.begin(), perm.end())) {
    const double c = cost_of_match(x, y, perm);
    if (c < best_cost) {
      best_cost = c;
      best = perm;
    }
  }
  Assignment a;
  a.match = std::move(best);
  a.cost = best_cost;
  return a;
}

Assignment solve_assignment(const PointCloud& x, const PointCloud& y) {
  require_equal_sizes(x, y);
  const int n = int(x.size());
  // Successive shortest augmenting paths with dual potentials, 1-based rows
  // and columns plus a sentinel column 0. Column j is matched to row p[j].
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      const Point xi = x[std::size_t(i0 - 1)];
      const double u0 = u[i0];
      double delta = kInf;
      int j1 = -1;
      // ascending scan with strict comparisons resolves ties toward the
      // lowest column index
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = squared_distance(xi, y[std::size_t(j - 1)]) - u0 - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  Assignment a;
  a.match.assign(n, -1);
  for (int j = 1; j <= n; ++j) a.match[std::size_t(p[j] - 1)] = j - 1;
  a.u.assign(u.begin() + 1, u.end());
  a.v.assign(v.begin() + 1, v.end());
  a.cost = cost_of_match(x, y, a.match);
  return a;
}

Assignment monotone_1d(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.empty() || x.size() != y.size())
    fail(errc::size_mismatch, "samples must be non-empty and equally sized");
  for (const auto& side : {x, y})
    for (double t : side)
      if (!std::isfinite(t)) fail(errc::out_of_domain, "sample values must be finite");
  const int n = int(x.size());
  std::vector<int> ix(n), iy(n);
  std::iota(ix.begin(), ix.end(), 0);
  std::iota(iy.begin(), iy.end(), 0);
  std::stable_sort(ix.begin(), ix.end(), [&](int a, int b) { return x[a] < x[b]; });
  std::stable_sort(iy.begin(), iy.end(), [&](int a, int b) { return y[a] < y[b]; });
  Assignment a;
  a.match.assign(n, -1);
  for (int k = 0; k < n; ++k) {
    a.match[ix[k]] = iy[k];
    const double d = x[ix[k]] - y[iy[k]];
    a.cost += d * d;
  }
  return a;
}

double empirical_w2(const PointCloud& x, const PointCloud& y) {
  require_equal_sizes(x, y);
  return solve_assignment(x, y).cost / double(x.size());
}

double assignment_certificate(const PointCloud& x, const PointCloud& y, const Assignment& a) {
  const std::size_t n = x.size();
  if (a.u.size() != n || a.v.size() != n || a.match.size() != n) return kInf;
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j)
      worst = std::max(worst, a.u[i] + a.v[j] - squared_distance(x[i], y[j]));
    const std::size_t j = std::size_t(a.match[i]);
    worst = std::max(worst,
                     std::fabs(squared_distance(x[i], y[j]) - a.u[i] - a.v[j]));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// transportation: primal network simplex on the complete bipartite graph
//
// Nodes 0..n-1 are sources, n..n+m-1 sinks, node n+m an artificial root. Real
// arc e in [0, n*m) runs from source e/m to sink e%m with cost evaluated from
// the coordinates; arc n*m+u ties node u to the root. The problem is
// uncapacitated, so non-tree arcs always carry zero flow and the flow vector
// reduces to one value per node: the flow on its tree arc. The spanning-tree
// bookkeeping (thread, rev_thread, succ_num, last_succ) follows the classic
// layout.

namespace {

constexpr std::int8_t STATE_TREE = 0;
constexpr std::int8_t STATE_LOWER = 1;
constexpr double kEpsPivot = 1e-12; // relative admission threshold for entering arcs
constexpr double kFeasTol = 1e-9;

class TransportSimplex {
 public:
  TransportSimplex(std::vector<Point> src, std::vector<double> src_mass, std::vector<Point> dst,
                   std::vector<double> dst_mass)
      : src_(std::move(src)), dst_(std::move(dst)), n_(int(src_.size())), m_(int(dst_.size())) {
    node_num_ = n_ + m_;
    root_ = node_num_;
    real_arcs_ = std::int64_t(n_) * m_;
    supply_.assign(node_num_, 0.0);
    for (int i = 0; i < n_; ++i) supply_[i] = src_mass[i];
    for (int j = 0; j < m_; ++j) supply_[n_ + j] = -dst_mass[j];
  }

  void solve() {
    init();
    initial_pivots();
    const std::int64_t max_pivots = 256 * std::int64_t(node_num_) + 262144;
    std::int64_t pivots = 0;
    while (find_entering_arc()) {
      if (++pivots > max_pivots)
        fail(errc::solver_diverged, "network simplex exceeded its pivot budget");
      pivot();
    }
    for (int u = 0; u < node_num_; ++u)
      if (pred_[u] >= real_arcs_ && std::fabs(flow_in_pred_[u]) > kFeasTol)
        fail(errc::solver_diverged, "residual flow on artificial arcs");
  }

  // optimal basis: flow f on real tree arcs, visited as (source, sink, flow)
  template <class Visit>
  void for_each_flow(Visit&& visit) const {
    for (int u = 0; u < node_num_; ++u) {
      const std::int64_t e = pred_[u];
      if (e < real_arcs_ && flow_in_pred_[u] > 0.0)
        visit(int(e / m_), int(e % m_), flow_in_pred_[u]);
    }
  }

  double potential(int node) const { return pi_[node]; }

 private:
  double arc_cost(std::int64_t e) const {
    return squared_distance(src_[std::size_t(e / m_)], dst_[std::size_t(e % m_)]);
  }
  int arc_src(std::int64_t e) const {
    if (e < real_arcs_) return int(e / m_);
    const int u = int(e - real_arcs_);
    return art_forward_[u] ? u : root_;
  }
  int arc_dst(std::int64_t e) const {
    if (e < real_arcs_) return n_ + int(e % m_);
    const int u = int(e - real_arcs_);
    return art_forward_[u] ? root_ : u;
  }

  void init() {
    parent_.assign(node_num_ + 1, 0);
    pred_.assign(node_num_ + 1, -1);
    thread_.assign(node_num_ + 1, 0);
    rev_thread_.assign(node_num_ + 1, 0);
    succ_num_.assign(node_num_ + 1, 0);
    last_succ_.assign(node_num_ + 1, 0);
    forward_.assign(node_num_ + 1, 0);
    pi_.assign(node_num_ + 1, 0.0);
    flow_in_pred_.assign(node_num_ + 1, 0.0);
    art_forward_.assign(node_num_, 0);
    state_.assign(std::size_t(real_arcs_), STATE_LOWER);

    // any pairwise squared distance is bounded by the joint bounding box
    double x0 = kInf, x1 = -kInf, y0 = kInf, y1 = -kInf;
    for (const auto* side : {&src_, &dst_}) {
      for (const Point& p : *side) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
      }
    }
    const double max_cost = (x1 - x0) * (x1 - x0) + (y1 - y0) * (y1 - y0);
    art_cost_ = (max_cost + 1.0) * (node_num_ + 1);

    parent_[root_] = -1;
    pred_[root_] = -1;
    thread_[root_] = 0;
    rev_thread_[0] = root_;
    succ_num_[root_] = node_num_ + 1;
    last_succ_[root_] = node_num_ - 1;
    pi_[root_] = 0.0;

    for (int u = 0; u < node_num_; ++u) {
      parent_[u] = root_;
      pred_[u] = real_arcs_ + u;
      thread_[u] = u + 1;
      rev_thread_[u + 1] = u;
      succ_num_[u] = 1;
      last_succ_[u] = u;
      if (supply_[u] >= 0) {
        art_forward_[u] = 1;
        forward_[u] = 1;
        pi_[u] = 0.0;
        flow_in_pred_[u] = supply_[u];
      } else {
        art_forward_[u] = 0;
        forward_[u] = 0;
        pi_[u] = art_cost_;
        flow_in_pred_[u] = -supply_[u];
      }
    }

    next_arc_ = 0;
    block_size_ = std::max<std::int64_t>(std::int64_t(std::sqrt(double(real_arcs_))), 10);
  }

  // One cheap pivot per sink on its cheapest incoming arc empties most of the
  // artificial star before block search starts.
  void initial_pivots() {
    for (int j = 0; j < m_; ++j) {
      double best = kInf;
      int best_i = 0;
      for (int i = 0; i < n_; ++i) {
        const double c = squared_distance(src_[i], dst_[j]);
        if (c < best) {
          best = c;
          best_i = i;
        }
      }
      const std::int64_t e = std::int64_t(best_i) * m_ + j;
      if (state_[std::size_t(e)] == STATE_TREE) continue;
      if (best + pi_[best_i] - pi_[n_ + j] >= 0) continue;
      in_arc_ = e;
      pivot();
    }
  }

  bool admissible(std::int64_t e, double min) const {
    const int s = int(e / m_);
    const int t = int(e % m_);
    double a = std::max(std::fabs(pi_[s]), std::fabs(pi_[n_ + t]));
    a = std::max({a, squared_distance(src_[s], dst_[t]), 1.0});
    return min < -kEpsPivot * a;
  }

  // Block search over the real arcs. The candidate threshold is scaled by the
  // magnitudes entering the reduced cost so rounding noise never re-admits a
  // tree-equivalent arc.
  bool find_entering_arc() {
    double min = 0.0;
    std::int64_t found = -1;
    std::int64_t e = next_arc_;
    int s = int(e / m_);
    int t = int(e % m_);
    std::int64_t cnt = block_size_;
    for (std::int64_t ind = 0; ind < real_arcs_; ++ind, ++e, ++t) {
      if (e >= real_arcs_) {
        e = 0;
        s = 0;
        t = 0;
      } else if (t == m_) {
        t = 0;
        ++s;
      }
      if (state_[std::size_t(e)]) {
        const double c = squared_distance(src_[s], dst_[t]) + pi_[s] - pi_[n_ + t];
        if (c < min) {
          min = c;
          found = e;
        }
      }
      if (--cnt == 0) {
        if (found >= 0 && admissible(found, min)) {
          in_arc_ = found;
          next_arc_ = e;
          return true;
        }
        cnt = block_size_;
      }
    }
    if (found >= 0 && admissible(found, min)) {
      in_arc_ = found;
      next_arc_ = e >= real_arcs_ ? 0 : e;
      return true;
    }
    return false;
  }

  void pivot() {
    find_join_node();
    if (!find_leaving_arc())
      fail(errc::solver_diverged, "transportation cycle is unbounded");
    change_flow();
    update_tree_structure();
    update_potential();
  }

  void find_join_node() {
    int u = arc_src(in_arc_);
    int v = arc_dst(in_arc_);
    while (u != v) {
      if (succ_num_[u] < succ_num_[v])
        u = parent_[u];
      else
        v = parent_[v];
    }
    join_ = u;
  }

  bool find_leaving_arc() {
    // entering arcs always sit at their lower bound, so the cycle is oriented
    // with the arc
    first_ = arc_src(in_arc_);
    second_ = arc_dst(in_arc_);
    delta_ = kInf;
    int result = 0;
    for (int u = first_; u != join_; u = parent_[u]) {
      const double d = forward_[u] ? flow_in_pred_[u] : kInf;
      if (d < delta_) {
        delta_ = d;
        u_out_ = u;
        result = 1;
      }
    }
    for (int u = second_; u != join_; u = parent_[u]) {
      const double d = forward_[u] ? kInf : flow_in_pred_[u];
      if (d <= delta_) {
        delta_ = d;
        u_out_ = u;
        result = 2;
      }
    }
    if (result == 1) {
      u_in_ = first_;
      v_in_ = second_;
    } else {
      u_in_ = second_;
      v_in_ = first_;
    }
    return result != 0;
  }

  void change_flow() {
    if (delta_ > 0) {
      for (int u = first_; u != join_; u = parent_[u])
        flow_in_pred_[u] += forward_[u] ? -delta_ : delta_;
      for (int u = second_; u != join_; u = parent_[u])
        flow_in_pred_[u] += forward_[u] ? delta_ : -delta_;
    }
    entering_flow_ = delta_;
    state_[std::size_t(in_arc_)] = STATE_TREE;
    const std::int64_t leaving = pred_[u_out_];
    if (leaving < real_arcs_) state_[std::size_t(leaving)] = STATE_LOWER;
  }

  void update_tree_structure() {
    int u = last_succ_[u_in_];
    const int old_rev_thread = rev_thread_[u_out_];
    const int old_succ_num = succ_num_[u_out_];
    const int old_last_succ = last_succ_[u_out_];
    v_out_ = parent_[u_out_];
    int right = thread_[u];
    int last;
    if (old_rev_thread == v_in_)
      last = thread_[last_succ_[u_out_]];
    else
      last = thread_[v_in_];

    // re-hang the stem between u_in and u_out, splicing each displaced
    // subtree out of the thread list
    thread_[v_in_] = u_in_;
    dirty_revs_.clear();
    dirty_revs_.push_back(v_in_);
    int stem = u_in_;
    int par_stem = v_in_;
    while (stem != u_out_) {
      const int new_stem = parent_[stem];
      thread_[u] = new_stem;
      dirty_revs_.push_back(u);

      const int w = rev_thread_[stem];
      thread_[w] = right;
      rev_thread_[right] = w;

      parent_[stem] = par_stem;
      par_stem = stem;
      stem = new_stem;

      u = last_succ_[stem] == last_succ_[par_stem] ? rev_thread_[par_stem] : last_succ_[stem];
      right = thread_[u];
    }
    parent_[u_out_] = par_stem;
    thread_[u] = last;
    rev_thread_[last] = last_succ_[u_out_] = u;

    if (old_rev_thread != v_in_) {
      thread_[old_rev_thread] = right;
      rev_thread_[right] = old_rev_thread;
    }

    for (int d : dirty_revs_) rev_thread_[thread_[d]] = d;

    // the stem arcs reverse orientation; their flows ride along with the
    // pred reassignment
    int tmp_sc = 0;
    const int tmp_ls = last_succ_[u_out_];
    for (int w = u_out_; w != u_in_;) {
      const int p = parent_[w];
      pred_[w] = pred_[p];
      flow_in_pred_[w] = flow_in_pred_[p];
      forward_[w] = !forward_[p];
      tmp_sc += succ_num_[w] - succ_num_[p];
      succ_num_[w] = tmp_sc;
      last_succ_[p] = tmp_ls;
      w = p;
    }
    pred_[u_in_] = in_arc_;
    flow_in_pred_[u_in_] = entering_flow_;
    forward_[u_in_] = (u_in_ == arc_src(in_arc_));
    succ_num_[u_in_] = old_succ_num;

    int up_limit_in = -1, up_limit_out = -1;
    if (last_succ_[join_] == v_in_)
      up_limit_out = join_;
    else
      up_limit_in = join_;

    for (int w = v_in_; w != up_limit_in && last_succ_[w] == v_in_; w = parent_[w])
      last_succ_[w] = last_succ_[u_out_];

    if (join_ != old_rev_thread && v_in_ != old_rev_thread) {
      for (int w = v_out_; w != up_limit_out && last_succ_[w] == old_last_succ; w = parent_[w])
        last_succ_[w] = old_rev_thread;
    } else {
      for (int w = v_out_; w != up_limit_out && last_succ_[w] == old_last_succ; w = parent_[w])
        last_succ_[w] = last_succ_[u_out_];
    }

    for (int w = v_in_; w != join_; w = parent_[w]) succ_num_[w] += old_succ_num;
    for (int w = v_out_; w != join_; w = parent_[w]) succ_num_[w] -= old_succ_num;
  }

  void update_potential() {
    const double cost_in = arc_cost(pred_[u_in_]);
    const double sigma = forward_[u_in_] ? pi_[v_in_] - pi_[u_in_] - cost_in
                                         : pi_[v_in_] - pi_[u_in_] + cost_in;
    const int end = thread_[last_succ_[u_in_]];
    for (int w = u_in_; w != end; w = thread_[w]) pi_[w] += sigma;
  }

  std::vector<Point> src_, dst_;
  int n_, m_, node_num_, root_;
  std::int64_t real_arcs_;
  double art_cost_ = 0.0;

  std::vector<double> supply_, pi_, flow_in_pred_;
  std::vector<int> parent_, thread_, rev_thread_, succ_num_, last_succ_;
  std::vector<std::int64_t> pred_;
  std::vector<char> forward_, art_forward_;
  std::vector<std::int8_t> state_;
  std::vector<int> dirty_revs_;

  std::int64_t in_arc_ = -1, next_arc_ = 0, block_size_ = 10;
  int join_ = 0, first_ = 0, second_ = 0, u_in_ = 0, v_in_ = 0, u_out_ = 0, v_out_ = 0;
  double delta_ = 0.0, entering_flow_ = 0.0;
};

} // namespace

TransportPlan solve_transportation(const WeightedAtoms& sources, const WeightedAtoms& sinks,
                                   std::int64_t arc_limit) {
  if (sources.points.size() != sources.masses.size() ||
      sinks.points.size() != sinks.masses.size() || sources.size() == 0 || sinks.size() == 0)
    fail(errc::size_mismatch, "atom lists must be non-empty with one mass per point");
  double sum_a = 0.0, sum_b = 0.0;
  for (double w : sources.masses) {
    if (!std::isfinite(w) || w < 0.0) fail(errc::mass_imbalance, "masses must be nonnegative");
    sum_a += w;
  }
  for (double w : sinks.masses) {
    if (!std::isfinite(w) || w < 0.0) fail(errc::mass_imbalance, "masses must be nonnegative");
    sum_b += w;
  }
  if (std::fabs(sum_a - 1.0) > 1e-9 || std::fabs(sum_b - 1.0) > 1e-9)
    fail(errc::mass_imbalance, "each side must sum to 1 within 1e-9");

  // drop zero-mass atoms; they take no part in the flow
  std::vector<int> si, ti;
  std::vector<Point> sp, tp;
  std::vector<double> sm, tm;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (sources.masses[i] > 0.0) {
      si.push_back(int(i));
      sp.push_back(sources.points[i]);
      sm.push_back(sources.masses[i]);
    }
  }
  for (std::size_t j = 0; j < sinks.size(); ++j) {
    if (sinks.masses[j] > 0.0) {
      ti.push_back(int(j));
      tp.push_back(sinks.points[j]);
      tm.push_back(sinks.masses[j]);
    }
  }
  if (std::int64_t(sp.size()) * std::int64_t(tp.size()) > arc_limit)
    fail(errc::problem_too_large, "arc count exceeds the configured limit");

  // absorb the rounding residue into the heaviest sink so the solver sees an
  // exactly balanced instance
  const std::size_t heaviest = std::size_t(
      std::max_element(tm.begin(), tm.end()) - tm.begin());
  tm[heaviest] += sum_a - sum_b;

  TransportSimplex simplex(sp, sm, tp, tm);
  simplex.solve();

  TransportPlan plan;
  plan.source_masses = sources.masses;
  plan.sink_masses = sinks.masses;
  plan.source_potentials.assign(sources.size(), 0.0);
  plan.sink_potentials.assign(sinks.size(), 0.0);
  for (std::size_t i = 0; i < sp.size(); ++i)
    plan.source_potentials[si[i]] = -simplex.potential(int(i));
  for (std::size_t j = 0; j < tp.size(); ++j)
    plan.sink_potentials[ti[j]] = simplex.potential(int(sp.size() + j));
  simplex.for_each_flow([&](int i, int j, double f) {
    plan.flows.push_back({si[i], ti[j], f});
    plan.cost += f * squared_distance(sources.points[si[i]], sinks.points[ti[j]]);
  });
  std::sort(plan.flows.begin(), plan.flows.end(), [](const PlanEntry& a, const PlanEntry& b) {
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  });

  // feasible duals for dropped atoms, tightest values compatible with the rest
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (sources.masses[i] > 0.0) continue;
    double best = kInf;
    for (std::size_t j = 0; j < sinks.size(); ++j)
      best = std::min(best, squared_distance(sources.points[i], sinks.points[j]) -
                                plan.sink_potentials[j]);
    plan.source_potentials[i] = best;
  }
  for (std::size_t j = 0; j < sinks.size(); ++j) {
    if (sinks.masses[j] > 0.0) continue;
    double best = kInf;
    for (std::size_t i = 0; i < sources.size(); ++i)
      best = std::min(best, squared_distance(sources.points[i], sinks.points[j]) -
                                plan.source_potentials[i]);
    plan.sink_potentials[j] = best;
  }
  return plan;
}

double plan_certificate(const WeightedAtoms& sources, const WeightedAtoms& sinks,
                        const TransportPlan& plan) {
  const std::size_t n = sources.size(), m = sinks.size();
  if (plan.source_potentials.size() != n || plan.sink_potentials.size() != m) return kInf;
  double worst = 0.0;
  std::vector<double> row(n, 0.0), col(m, 0.0);
  for (const PlanEntry& f : plan.flows) {
    if (f.i < 0 || std::size_t(f.i) >= n || f.j < 0 || std::size_t(f.j) >= m) return kInf;
    worst = std::max(worst, -f.flow);
    row[f.i] += f.flow;
    col[f.j] += f.flow;
    worst = std::max(worst,
                     std::fabs(squared_distance(sources.points[f.i], sinks.points[f.j]) -
                               plan.source_potentials[f.i] - plan.sink_potentials[f.j]));
  }
  for (std::size_t i = 0; i < n; ++i)
    worst = std::max(worst, std::fabs(row[i] - plan.source_masses[i]));
  for (std::size_t j = 0; j < m; ++j)
    worst = std::max(worst, std::fabs(col[j] - plan.sink_masses[j]));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      worst = std::max(worst, plan.source_potentials[i] + plan.sink_potentials[j] -
                                  squared_distance(sources.points[i], sinks.points[j]));
  return worst;
}

} // namespace matchlab
