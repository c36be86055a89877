#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "dld/geometry.hpp"

using namespace dld;

TEST_CASE("row shift fraction is 1/N") {
  CHECK(row_shift_fraction(3) == doctest::Approx(0.3333333333).epsilon(1e-9));
  CHECK(row_shift_fraction(15) == doctest::Approx(0.0666667).epsilon(1e-6));
  CHECK(row_shift_fraction(48) == doctest::Approx(0.0208333).epsilon(1e-6));
  for (int n = 1; n <= 60; ++n) CHECK(row_shift_fraction(n) == 1.0 / n);
  CHECK_THROWS_AS(row_shift_fraction(0), DomainError);
  CHECK_THROWS_AS(row_shift_fraction(-4), DomainError);
}

TEST_CASE("parabolic-profile critical diameter at whole alphas") {
  // alpha = sqrt(N/3) is an integer for these N, so the values are exact.
  CHECK(critical_diameter_inglis(45, 3) == doctest::Approx(30.0).epsilon(1e-14));
  CHECK(critical_diameter_inglis(45, 12) == doctest::Approx(15.0).epsilon(1e-14));
  CHECK(critical_diameter_inglis(45, 48) == doctest::Approx(7.5).epsilon(1e-14));
  CHECK_THROWS_AS(critical_diameter_inglis(45, 0), DomainError);
  CHECK_THROWS_AS(critical_diameter_inglis(0, 10), DomainError);
}

TEST_CASE("empirical critical diameter") {
  CHECK(critical_diameter_davis(45, 1.0) == doctest::Approx(63.0).epsilon(1e-14));
  // 10^-0.48 = 0.331131...
  CHECK(critical_diameter_davis(45, 0.1) == doctest::Approx(63.0 * std::pow(10.0, -0.48)).epsilon(1e-13));
  CHECK(std::abs(critical_diameter_davis(45, 0.1) - 20.86) < 0.005);
  // 48^-0.48 = exp(-0.48 ln 48); the printed example rounds this to 9.82.
  const double d48 = critical_diameter_davis(45, 1.0 / 48);
  CHECK(d48 == doctest::Approx(63.0 * std::exp(-0.48 * std::log(48.0))).epsilon(1e-13));
  CHECK(std::abs(d48 - 9.82) < 0.01);
  CHECK_THROWS_AS(critical_diameter_davis(45, 0.0), DomainError);
  CHECK_THROWS_AS(critical_diameter_davis(45, 1.5), DomainError);
}

TEST_CASE("correlations are monotone and inside the sanity envelope") {
  const double g = 45.0;
  double prev = std::numeric_limits<double>::infinity();
  for (int n = 3; n <= 48; ++n) {
    const double dv = critical_diameter_davis(g, 1.0 / n);
    const double in = critical_diameter_inglis(g, n);
    CHECK(dv < prev);
    prev = dv;
    CHECK(dv > 0.0);
    CHECK(dv < g + 45.0);
    CHECK(in > 0.0);
    CHECK(in < g + 45.0);
  }
}

TEST_CASE("post array construction rule") {
  DldDesign d;
  d.period = 3;
  d.n_columns = 4;
  d.n_rows = 3;
  const auto arr = build_post_array(d);
  REQUIRE(arr.centers().size() == 12);
  CHECK(d.pitch_um() == 90.0);
  CHECK(arr.radius_um() == 22.5);

  std::set<double> offsets;
  for (int r = 0; r < 3; ++r) offsets.insert(row_offset_um(d, r));
  CHECK(offsets == std::set<double>{0.0, 30.0, 60.0});

  // Within a row, posts are one pitch apart.
  for (int r = 0; r < 3; ++r) {
    for (int j = 1; j < 4; ++j) {
      const auto a = arr.centers()[r * 4 + j - 1];
      const auto b = arr.centers()[r * 4 + j];
      CHECK(b.y - a.y == doctest::Approx(90.0));
      CHECK(b.x == a.x);
    }
  }
  // Margins are free of posts.
  for (const auto& c : arr.centers()) {
    CHECK(c.x - arr.radius_um() >= d.inlet_margin_um - 1e-9);
    CHECK(c.x + arr.radius_um() <= d.domain_length_um() - d.outlet_margin_um + 1e-9);
  }
}

TEST_CASE("offset returns to zero after a full period") {
  for (int n : {3, 7, 10, 48}) {
    DldDesign d = DldDesign::standard(n);
    CHECK(row_offset_um(d, 0) == 0.0);
    CHECK(row_offset_um(d, n) == 0.0);
    CHECK(row_offset_um(d, 2 * n + 1) == row_offset_um(d, 1));
    CHECK(row_offset_um(d, 1) == doctest::Approx(d.pitch_um() / n));
  }
}

TEST_CASE("post array is deterministic") {
  DldDesign d = DldDesign::standard(12);
  d.n_columns = 3;
  d.lateral = LateralBoundary::Walls;
  CHECK(build_post_array(d).centers() == build_post_array(d).centers());
}

TEST_CASE("design validation") {
  DldDesign d;
  d.inlet_margin_um = 60.0;  // less than one 90 um pitch
  CHECK_THROWS_AS(build_post_array(d), ConfigError);
  d = DldDesign{};
  d.period = 1;
  CHECK_THROWS_AS(d.validate(), ConfigError);
  d.period = 2;
  CHECK_NOTHROW(d.validate());
  CHECK_FALSE(d.in_validated_range());
  d.period = 48;
  CHECK(d.in_validated_range());
}

TEST_CASE("default rows cover two periods") {
  DldDesign d = DldDesign::standard(10);
  CHECK(d.rows() == 20);
  d.n_rows = 7;
  CHECK(d.rows() == 7);
}

TEST_CASE("periodic nearest post sees images across the lateral seam") {
  DldDesign d = DldDesign::standard(10);
  const auto arr = build_post_array(d);
  // Row 0 post sits at y = 0, so a point just below the top edge is near its image.
  const Vec2 c = arr.centers()[0];
  const Vec2 p{c.x, d.domain_height_um() - 30.0};
  const auto hit = arr.nearest_post(p, 60.0);
  REQUIRE(hit.has_value());
  CHECK(hit->distance_um == doctest::Approx(30.0 - arr.radius_um()));
  CHECK(hit->normal.y == doctest::Approx(-1.0));
  CHECK(arr.inside_post({c.x, d.domain_height_um() - 1.0}));
  CHECK_FALSE(arr.nearest_wall(p).has_value());
}

TEST_CASE("design JSON round trip and unknown keys") {
  DldDesign d = DldDesign::standard(24);
  d.n_columns = 2;
  d.inlet_margin_um = 180.0;
  d.lateral = LateralBoundary::Walls;
  nlohmann::json j = d;
  for (const char* key : {"d_p_um", "g_um", "n", "m_columns", "n_rows", "margins_um"}) CHECK(j.contains(key));
  const auto back = j.get<DldDesign>();
  CHECK(back.period == 24);
  CHECK(back.n_columns == 2);
  CHECK(back.rows() == 48);
  CHECK(back.inlet_margin_um == 180.0);
  CHECK(back.lateral == LateralBoundary::Walls);
  j["bogus"] = 1;
  CHECK_THROWS_AS(j.get<DldDesign>(), ConfigError);
}
