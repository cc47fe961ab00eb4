#include <doctest.h>

#include <cmath>
#include <optional>

#include "matchlab/density.hpp"
#include "matchlab/error.hpp"
#include "matchlab/rng.hpp"
#include "matchlab/semidiscrete.hpp"

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

} // namespace

TEST_SUITE("semidiscrete") {

TEST_CASE("uniform collapse onto one atom keeps mass, center and spread") {
  const DiscretizedMeasure d = discretize_measure(preset_density("uniform"), 1);
  REQUIRE(d.barycenters.size() == 1);
  CHECK(d.masses[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d.barycenters[0].x == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(d.barycenters[0].y == doctest::Approx(0.5).epsilon(1e-12));
  // spread of the uniform square about its center: 2 * 1/12
  CHECK(d.second_moments[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("uniform 2x2 collapse splits evenly") {
  const DiscretizedMeasure d = discretize_measure(preset_density("uniform"), 2);
  REQUIRE(d.barycenters.size() == 4);
  for (int k = 0; k < 4; ++k) {
    CHECK(d.masses[k] == doctest::Approx(0.25).epsilon(1e-12));
    // per-cell spread of a uniform half-size square: 2 * (1/2) * (1/2)^3 / 12
    CHECK(d.second_moments[k] == doctest::Approx(1.0 / 96.0).epsilon(1e-12));
  }
  CHECK(d.barycenters[0].x == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(d.barycenters[3].y == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(d.collapse_cost() == doctest::Approx(1.0 / 24.0).epsilon(1e-12));
}

TEST_CASE("tilted density shifts cell barycenters toward the heavy corner") {
  const DiscretizedMeasure d = discretize_measure(preset_density("tilted"), 2);
  // lower-left cell of rho = (x + y + 1)/2: mass 3/16, barycenter (19/72, 19/72)
  CHECK(d.masses[0] == doctest::Approx(3.0 / 16.0).epsilon(1e-9));
  CHECK(d.barycenters[0].x == doctest::Approx(19.0 / 72.0).epsilon(1e-9));
  CHECK(d.barycenters[0].y == doctest::Approx(19.0 / 72.0).epsilon(1e-9));
  double mass = 0.0;
  for (double p : d.masses) mass += p;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
  // the heavy corner cell outweighs the light one and pulls its barycenter up
  CHECK(d.masses[3] > d.masses[0]);
  CHECK(d.barycenters[3].x > 0.75);
}

TEST_CASE("single point against the one-cell uniform collapse") {
  PointCloud x;
  x.points = {{0.0, 0.0}};
  const SemidiscreteResult r = w2_to_density(x, preset_density("uniform"), 1);
  CHECK(r.raw == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.corrected == doctest::Approx(0.5 + 1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("points placed at the collapse atoms give zero raw distance") {
  const DiscretizedMeasure d = discretize_measure(preset_density("uniform"), 2);
  PointCloud x;
  x.points = d.barycenters;
  const SemidiscreteResult r = w2_to_density(x, preset_density("uniform"), 2);
  CHECK(r.raw == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.corrected == doctest::Approx(d.collapse_cost()).epsilon(1e-12));
}

TEST_CASE("corrected exceeds raw by at most the worst-case cell spread") {
  Rng rng(20240917);
  for (const char* preset : {"uniform", "tilted", "pwc2x2"}) {
    const DensityModel model = preset_density(preset);
    const PointCloud x = sample_points(model, 60, rng);
    for (int m : {1, 2, 5, 11}) {
      const SemidiscreteResult r = w2_to_density(x, model, m);
      CHECK(r.raw >= 0.0);
      CHECK(r.corrected >= r.raw);
      CHECK(r.corrected - r.raw <= 0.5 / (double(m) * m) + 1e-12);
    }
  }
}

TEST_CASE("distance stabilizes across resolutions within the collapse slack") {
  Rng rng(77001);
  const DensityModel model = preset_density("tilted");
  const PointCloud x = sample_points(model, 80, rng);
  for (int m : {4, 8, 16}) {
    const SemidiscreteResult coarse = w2_to_density(x, model, m);
    const SemidiscreteResult fine = w2_to_density(x, model, 2 * m);
    const double slack = std::sqrt(discretize_measure(model, m).collapse_cost()) +
                         std::sqrt(discretize_measure(model, 2 * m).collapse_cost());
    CHECK(std::abs(std::sqrt(coarse.raw) - std::sqrt(fine.raw)) <= slack + 1e-12);
  }
}

TEST_CASE("default resolution follows 4 sqrt(n) until the arc budget caps it") {
  CHECK(default_resolution(0) == 1);
  CHECK(default_resolution(1) == 4);
  CHECK(default_resolution(256) == 64);
  CHECK(default_resolution(512) == 91);
  // at n = 2^20 the 4 sqrt(n) rule would want 4096 columns; the arc budget
  // n * M^2 <= 2^26 only affords M = 8
  CHECK(default_resolution(std::size_t(1) << 20) == 8);
}

TEST_CASE("invalid inputs are rejected") {
  CHECK(thrown_code([] { discretize_measure(preset_density("uniform"), 0); }) ==
        errc::config_invalid);
  CHECK(thrown_code([] { discretize_measure(preset_density("two_delta"), 2); }) ==
        errc::not_positive);
  PointCloud empty;
  CHECK(thrown_code([&] { w2_to_density(empty, preset_density("uniform"), 2); }) ==
        errc::size_mismatch);
  PointCloud outside;
  outside.points = {{1.5, 0.5}};
  CHECK(thrown_code([&] { w2_to_density(outside, preset_density("uniform"), 2); }) ==
        errc::out_of_domain);
  PointCloud ok;
  ok.points = {{0.5, 0.5}};
  CHECK(thrown_code([&] { w2_to_density(ok, preset_density("uniform"), 300, 1000); }) ==
        errc::problem_too_large);
}

} // TEST_SUITE
