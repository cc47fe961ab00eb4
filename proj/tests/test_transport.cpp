#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <optional>

#include "matchlab/density.hpp"
#include "matchlab/error.hpp"
#include "matchlab/rng.hpp"
#include "matchlab/transport.hpp"

using namespace matchlab;

namespace {

template <typename F>
std::optional<errc> thrown_code(F&& f) {
  try {
    f();
  } catch (const error& e) {
    return e.code();
  }
  return std::nullopt;
}

PointCloud random_cloud(std::size_t n, Rng& rng) {
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.points.push_back({rng.uniform(), rng.uniform()});
  return c;
}

} // namespace

TEST_SUITE("transport") {

TEST_CASE("brute force handles hand instances and limits") {
  PointCloud x, y;
  x.points = {{0.0, 0.0}, {1.0, 0.0}};
  y.points = {{1.0, 0.0}, {0.0, 0.0}};
  const Assignment a = brute_force_assignment(x, y);
  CHECK(a.cost == doctest::Approx(0.0));
  CHECK(a.match[0] == 1);
  CHECK(a.match[1] == 0);

  // all-equal costs resolve to the lexicographically smallest permutation
  PointCloud same;
  same.points = {{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}};
  const Assignment id = brute_force_assignment(same, same);
  CHECK(id.match == std::vector<int>{0, 1, 2});

  PointCloud big;
  big.points.assign(11, {0.5, 0.5});
  CHECK(thrown_code([&] { brute_force_assignment(big, big); }) == errc::too_large);
  CHECK(thrown_code([&] { brute_force_assignment(x, same); }) == errc::size_mismatch);
}

TEST_CASE("assignment solver equals brute force on 100 seeded instances") {
  const DensityModel model = preset_density("uniform");
  for (int t = 0; t < 100; ++t) {
    Rng rng(trial_seed(17, 8, std::uint64_t(t)));
    const std::size_t n = 2 + rng.next_u64() % 7;
    const PointCloud x = random_cloud(n, rng);
    const PointCloud y = random_cloud(n, rng);
    const Assignment fast = solve_assignment(x, y);
    const Assignment slow = brute_force_assignment(x, y);
    CHECK(fast.cost == doctest::Approx(slow.cost).epsilon(1e-12));
    CHECK(assignment_certificate(x, y, fast) < 1e-9);
  }
  (void)model;
}

TEST_CASE("dual certificate proves optimality at larger sizes") {
  Rng rng(3);
  const PointCloud x = random_cloud(300, rng);
  const PointCloud y = random_cloud(300, rng);
  const Assignment a = solve_assignment(x, y);
  CHECK(assignment_certificate(x, y, a) < 1e-9);
  // the match is a permutation
  std::vector<int> seen(300, 0);
  for (int j : a.match) seen[std::size_t(j)]++;
  CHECK(*std::min_element(seen.begin(), seen.end()) == 1);
}

TEST_CASE("assignment cost is symmetric and permutation invariant") {
  Rng rng(5);
  const PointCloud x = random_cloud(60, rng);
  const PointCloud y = random_cloud(60, rng);
  const double base = solve_assignment(x, y).cost;
  CHECK(solve_assignment(y, x).cost == doctest::Approx(base).epsilon(1e-12));

  PointCloud shuffled = x;
  std::reverse(shuffled.points.begin(), shuffled.points.end());
  CHECK(solve_assignment(shuffled, y).cost == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("squared cost scales quadratically under shrinking") {
  Rng rng(6);
  const PointCloud x = random_cloud(40, rng);
  const PointCloud y = random_cloud(40, rng);
  const double base = solve_assignment(x, y).cost;
  const double gamma = 0.35;
  PointCloud xs = x, ys = y;
  for (auto& p : xs.points) p = {p.x * gamma, p.y * gamma};
  for (auto& p : ys.points) p = {p.x * gamma, p.y * gamma};
  CHECK(solve_assignment(xs, ys).cost == doctest::Approx(base * gamma * gamma).epsilon(1e-10));
}

TEST_CASE("one dimensional matching is the sorted pairing") {
  Rng rng(7);
  std::vector<double> xs, ys;
  for (int i = 0; i < 50; ++i) {
    xs.push_back(rng.uniform());
    ys.push_back(rng.uniform());
  }
  const Assignment mono = monotone_1d(xs, ys);
  PointCloud px, py;
  for (double v : xs) px.points.push_back({v, 0.0});
  for (double v : ys) py.points.push_back({v, 0.0});
  const Assignment full = solve_assignment(px, py);
  CHECK(mono.cost == doctest::Approx(full.cost).epsilon(1e-12));
  // monotone matching preserves order
  double cost = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double d = xs[i] - ys[std::size_t(mono.match[i])];
    cost += d * d;
  }
  CHECK(cost == doctest::Approx(mono.cost).epsilon(1e-12));
}

TEST_CASE("empirical W2 obeys the triangle inequality") {
  Rng rng(8);
  const PointCloud x = random_cloud(30, rng);
  const PointCloud y = random_cloud(30, rng);
  const PointCloud z = random_cloud(30, rng);
  const double xy = std::sqrt(empirical_w2(x, y));
  const double yz = std::sqrt(empirical_w2(y, z));
  const double xz = std::sqrt(empirical_w2(x, z));
  CHECK(xz <= xy + yz + 1e-12);
  CHECK(empirical_w2(x, x) == doctest::Approx(0.0));
}

TEST_CASE("transportation solves hand instances") {
  // two half atoms collapsing onto their midpoint: cost 2 * 1/2 * 1/4 = 1/4
  WeightedAtoms src, dst;
  src.points = {{0.0, 0.0}, {1.0, 0.0}};
  src.masses = {0.5, 0.5};
  dst.points = {{0.5, 0.0}};
  dst.masses = {1.0};
  const TransportPlan plan = solve_transportation(src, dst);
  CHECK(plan.cost == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(plan.flows.size() == 2);
  CHECK(plan_certificate(src, dst, plan) < 1e-9);

  // identical measures cost nothing
  const TransportPlan self = solve_transportation(src, src);
  CHECK(self.cost == doctest::Approx(0.0));
}

TEST_CASE("transportation rejects bad measures and budgets") {
  WeightedAtoms src, dst;
  src.points = {{0.0, 0.0}};
  src.masses = {0.9};
  dst.points = {{1.0, 1.0}};
  dst.masses = {1.0};
  CHECK(thrown_code([&] { solve_transportation(src, dst); }) == errc::mass_imbalance);
  src.masses = {-0.5};
  CHECK(thrown_code([&] { solve_transportation(src, dst); }) == errc::mass_imbalance);

  WeightedAtoms big;
  for (int i = 0; i < 100; ++i) {
    big.points.push_back({i / 100.0, 0.5});
    big.masses.push_back(0.01);
  }
  CHECK(thrown_code([&] { solve_transportation(big, big, 512); }) == errc::problem_too_large);
}

TEST_CASE("transportation plan satisfies marginals, support bound, duals") {
  Rng rng(9);
  for (int t = 0; t < 10; ++t) {
    const std::size_t n = 5 + rng.next_u64() % 20;
    const std::size_t m = 5 + rng.next_u64() % 20;
    WeightedAtoms src, dst;
    double sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      src.points.push_back({rng.uniform(), rng.uniform()});
      src.masses.push_back(0.1 + rng.uniform());
      sa += src.masses.back();
    }
    for (std::size_t j = 0; j < m; ++j) {
      dst.points.push_back({rng.uniform(), rng.uniform()});
      dst.masses.push_back(0.1 + rng.uniform());
      sb += dst.masses.back();
    }
    for (double& w : src.masses) w /= sa;
    for (double& w : dst.masses) w /= sb;
    const TransportPlan plan = solve_transportation(src, dst);

    std::vector<double> row(n, 0.0), col(m, 0.0);
    for (const PlanEntry& e : plan.flows) {
      CHECK(e.flow > 0.0);
      row[std::size_t(e.i)] += e.flow;
      col[std::size_t(e.j)] += e.flow;
    }
    for (std::size_t i = 0; i < n; ++i) CHECK(row[i] == doctest::Approx(src.masses[i]).epsilon(1e-9));
    for (std::size_t j = 0; j < m; ++j) CHECK(col[j] == doctest::Approx(dst.masses[j]).epsilon(1e-9));
    CHECK(plan.flows.size() <= n + m - 1);
    CHECK(plan_certificate(src, dst, plan) < 1e-9);
  }
}

TEST_CASE("transportation agrees with the assignment solver on equal weights") {
  Rng rng(10);
  const std::size_t n = 40;
  const PointCloud x = random_cloud(n, rng);
  const PointCloud y = random_cloud(n, rng);
  WeightedAtoms src, dst;
  src.points = x.points;
  dst.points = y.points;
  src.masses.assign(n, 1.0 / double(n));
  dst.masses.assign(n, 1.0 / double(n));
  const double lp = solve_transportation(src, dst).cost;
  const double matching = solve_assignment(x, y).cost / double(n);
  CHECK(lp == doctest::Approx(matching).epsilon(1e-9));
}

TEST_CASE("zero mass atoms are carried through with valid duals") {
  WeightedAtoms src, dst;
  src.points = {{0.0, 0.0}, {0.3, 0.3}, {1.0, 1.0}};
  src.masses = {0.5, 0.0, 0.5};
  dst.points = {{0.0, 1.0}, {1.0, 0.0}};
  dst.masses = {0.5, 0.5};
  const TransportPlan plan = solve_transportation(src, dst);
  CHECK(plan.source_potentials.size() == 3);
  CHECK(plan_certificate(src, dst, plan) < 1e-9);
  for (const PlanEntry& e : plan.flows) CHECK(e.i != 1);
}

} // TEST_SUITE
