#include <doctest.h>

#include <cmath>
#include <sstream>

#include "dld/flowfield.hpp"

using namespace dld;

namespace {

PostArray empty_channel(double length, double height, LateralBoundary lateral = LateralBoundary::Walls) {
  return PostArray({}, 0.0, Rect{0.0, 0.0, length, height}, lateral, height);
}

/// Staggered field on a 10 x 10 unit grid with hand-set values.
FlowField blank_field(double inlet = 1.0) {
  return FlowField(empty_channel(10.0, 10.0), FluidProperties{}, 1.0, 10, 10, inlet);
}

/// Fully developed centreline/mean ratio of an empty walled channel.
double poiseuille_ratio(int cells_per_gap) {
  const double height = 45.0;
  SolverConfig cfg;
  cfg.cells_per_gap = cells_per_gap;
  const auto field = solve_steady_flow(empty_channel(6 * height, height), FluidProperties{}, cfg);
  const double x = 4.0 * height;
  const double centre = field.sample({x, 0.5 * height}).x;
  const double mean = field.flux_through_face_line(static_cast<int>(std::lround(x / field.h_um()))) /
                      (height * kMicron);
  return centre / mean;
}

}  // namespace

TEST_CASE("inlet velocity from Reynolds number") {
  const FluidProperties water;
  const double u1 = inlet_velocity_from_reynolds(1.0, water, 45.0);
  // U = Re mu / (rho G)
  CHECK(u1 == doctest::Approx(1e-3 / (1000.0 * 45e-6)).epsilon(1e-14));
  CHECK(u1 == doctest::Approx(0.022222).epsilon(1e-5));
  CHECK(inlet_velocity_from_reynolds(0.0, water, 45.0) == 0.0);
  CHECK(inlet_velocity_from_reynolds(2.0, water, 45.0) == 2.0 * u1);
  CHECK_THROWS_AS(inlet_velocity_from_reynolds(-1.0, water, 45.0), DomainError);
  FluidProperties bad;
  bad.viscosity = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("sampling a staggered grid") {
  auto f = blank_field();
  for (int i = 0; i <= 10; ++i)
    for (int j = 0; j < 10; ++j) f.u(i, j) = 0.1 * i + 0.01 * j * j;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j <= 10; ++j) f.v(i, j) = -0.2 * j + 0.03 * i;

  SUBCASE("node values come back unchanged") {
    CHECK(f.sample({3.0, 4.5}).x == doctest::Approx(f.u(3, 4)).epsilon(1e-15));
    CHECK(f.sample({6.5, 2.0}).y == doctest::Approx(f.v(6, 2)).epsilon(1e-15));
  }
  SUBCASE("midway between two nodes gives their mean") {
    CHECK(f.sample({3.5, 4.5}).x == doctest::Approx(0.5 * (f.u(3, 4) + f.u(4, 4))).epsilon(1e-15));
    CHECK(f.sample({6.5, 2.5}).y == doctest::Approx(0.5 * (f.v(6, 2) + f.v(6, 3))).epsilon(1e-15));
  }
  SUBCASE("outside the domain") {
    CHECK_THROWS_AS((void)f.sample({-0.5, 4.0}), DomainError);
    CHECK_THROWS_AS((void)f.sample({4.0, 10.5}), DomainError);
  }
}

TEST_CASE("sampling inside a post gives zero") {
  PostArray arr({{5.0, 5.0}}, 2.0, Rect{0, 0, 10, 10}, LateralBoundary::Walls, 3.0);
  FlowField f(arr, FluidProperties{}, 1.0, 10, 10, 1.0);
  for (int i = 0; i <= 10; ++i)
    for (int j = 0; j < 10; ++j) f.u(i, j) = 1.0;
  f.set_solid(5, 5, true);
  const auto v = f.sample({5.2, 5.3});
  CHECK(v.x == 0.0);
  CHECK(v.y == 0.0);
}

TEST_CASE("divergence of analytic fields") {
  SUBCASE("uniform") {
    auto f = blank_field();
    for (int i = 0; i <= 10; ++i)
      for (int j = 0; j < 10; ++j) f.u(i, j) = 1.0;
    CHECK(f.divergence_norm() == 0.0);
  }
  SUBCASE("linear shear") {
    auto f = blank_field();
    for (int i = 0; i <= 10; ++i)
      for (int j = 0; j < 10; ++j) f.u(i, j) = 0.37 * (j + 0.5);
    CHECK(divergence_norm(f) == 0.0);
  }
  SUBCASE("a source is detected") {
    auto f = blank_field();
    f.u(4, 4) = 1.0;
    CHECK(f.divergence_norm() > 0.0);
  }
}

TEST_CASE("plane Poiseuille profile") {
  const double ratio = poiseuille_ratio(32);
  CHECK(std::abs(ratio - 1.5) <= 0.02 * 1.5);
}

TEST_CASE("converged solve through posts") {
  DldDesign d = DldDesign::standard(6);
  d.n_rows = 6;
  SolverConfig cfg;
  const auto array = build_post_array(d);
  const auto field = solve_steady_flow(array, FluidProperties{}, cfg);

  CHECK(field.divergence_norm() <= cfg.tolerance);
  CHECK(field.report.residual < cfg.tolerance);

  SUBCASE("flux through every transect matches the inlet") {
    const double inlet = field.flux_through_face_line(0);
    CHECK(inlet == doctest::Approx(field.inlet_velocity() * d.domain_height_um() * kMicron).epsilon(1e-9));
    for (int i = 0; i <= field.nx(); ++i) {
      CHECK(std::abs(field.flux_through_face_line(i) - inlet) <= 0.01 * inlet);
    }
  }

  SUBCASE("mid-gap is faster than near the posts") {
    // Transect across the gap above post 3 (row 3), at its centre line.
    const Vec2 c = array.centers()[3];
    const double r = array.radius_um();
    const double mid = field.sample({c.x, c.y + r + 0.5 * d.gap_um}).norm();
    const double near_low = field.sample({c.x, c.y + r + 0.1 * d.gap_um}).norm();
    const double near_high = field.sample({c.x, c.y + r + 0.9 * d.gap_um}).norm();
    CHECK(mid > near_low);
    CHECK(mid > near_high);
  }

  SUBCASE("field dump") {
    std::ostringstream csv;
    write_field_csv(field, csv);
    const auto text = csv.str();
    CHECK(text.rfind("x_um,y_um,u_mps,v_mps,p_pa,solid\n", 0) == 0);
    std::ostringstream svg;
    write_field_svg(field, svg, 100);
    CHECK(svg.str().find("<svg") != std::string::npos);
  }
}

TEST_CASE("grid refinement changes mid-gap speed by less than 3 percent") {
  DldDesign d = DldDesign::standard(6);
  d.n_rows = 6;
  const auto array = build_post_array(d);
  const Vec2 c = array.centers()[2];
  const Vec2 probe{c.x, c.y + array.radius_um() + 0.5 * d.gap_um};
  SolverConfig coarse;
  coarse.cells_per_gap = 16;
  SolverConfig fine = coarse;
  fine.cells_per_gap = 32;
  const double s16 = solve_steady_flow(array, FluidProperties{}, coarse).sample(probe).norm();
  const double s32 = solve_steady_flow(array, FluidProperties{}, fine).sample(probe).norm();
  CHECK(std::abs(s32 - s16) < 0.03 * s32);
}

TEST_CASE("unshifted symmetric array gives a mirror-symmetric field") {
  // One post row on the centreline of a walled channel, no lateral shift.
  std::vector<Vec2> centers;
  for (int r = 0; r < 4; ++r) centers.push_back({135.0 + 90.0 * r, 90.0});
  PostArray arr(centers, 22.5, Rect{0, 0, 135.0 * 2 + 90.0 * 4, 180.0}, LateralBoundary::Walls, 45.0);
  SolverConfig cfg;
  const auto f = solve_steady_flow(arr, FluidProperties{}, cfg);
  const double scale = f.inlet_velocity();
  double worst = 0.0;
  for (int i = 0; i <= f.nx(); ++i)
    for (int j = 0; j < f.ny(); ++j) worst = std::max(worst, std::abs(f.u(i, j) - f.u(i, f.ny() - 1 - j)));
  for (int i = 0; i < f.nx(); ++i)
    for (int j = 0; j <= f.ny(); ++j) worst = std::max(worst, std::abs(f.v(i, j) + f.v(i, f.ny() - j)));
  CHECK(worst / scale < 1e-8);
}

TEST_CASE("solver errors") {
  const auto arr = empty_channel(180.0, 45.0);
  SolverConfig cfg;
  cfg.cells_per_gap = 6;
  CHECK_THROWS_AS(solve_steady_flow(arr, FluidProperties{}, cfg), ConfigError);

  SolverConfig strict;
  strict.reynolds = 5.0;
  strict.max_iterations = 1;
  strict.tolerance = 1e-300;
  try {
    (void)solve_steady_flow(build_post_array(DldDesign::standard(6)), FluidProperties{}, strict);
    FAIL("expected a solver error");
  } catch (const SolverError& e) {
    CHECK(std::string(e.what()).find("residual") != std::string::npos);
  }
}
