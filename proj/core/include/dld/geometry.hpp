#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dld/common.hpp"

namespace dld {

/// How the lateral (y) extent of the device is closed.
///  - Periodic: the array repeats every `n_columns` pitches, standing in for the
///    interior of a wide device.
///  - Walls: solid side walls with a half-pitch buffer.
enum class LateralBoundary { Periodic, Walls };

std::string to_string(LateralBoundary b);
LateralBoundary lateral_boundary_from_string(const std::string& s);

/// Geometric parameters of a rotated-row DLD array. Lengths in micrometres.
struct DldDesign {
  double post_diameter_um = 45.0;
  double gap_um = 45.0;
  int period = 10;
  int n_columns = 1;
  /// Defaults to two periods: particles released mid-gap need up to one
  /// period to settle into their lane, and the mode is read off the second.
  std::optional<int> n_rows;
  double inlet_margin_um = 135.0;
  double outlet_margin_um = 135.0;
  LateralBoundary lateral = LateralBoundary::Periodic;

  [[nodiscard]] double pitch_um() const { return gap_um + post_diameter_um; }
  [[nodiscard]] double row_shift_fraction() const;
  [[nodiscard]] double row_shift_um() const { return pitch_um() * row_shift_fraction(); }
  /// Bump angle in radians, arctan(epsilon).
  [[nodiscard]] double bump_angle() const;
  [[nodiscard]] int rows() const { return n_rows.value_or(2 * period); }
  [[nodiscard]] double array_length_um() const { return rows() * pitch_um(); }
  [[nodiscard]] double domain_length_um() const {
    return inlet_margin_um + array_length_um() + outlet_margin_um;
  }
  [[nodiscard]] double domain_height_um() const;

  /// Within the period range used for the published sweep (3..48).
  [[nodiscard]] bool in_validated_range() const { return period >= 3 && period <= 48; }

  /// Throws ConfigError when a construction invariant is violated.
  void validate() const;

  /// Reference device (D_p = G = 45 um) with period n.
  static DldDesign standard(int n);
};

double row_shift_fraction(int period);

/// D_c = 2 * sqrt(N/3) * G / N, the parabolic-profile estimate.
double critical_diameter_inglis(double gap_um, int period);

/// D_c = 1.4 * G * eps^0.48, the empirical correlation.
double critical_diameter_davis(double gap_um, double epsilon);

struct Rect {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  [[nodiscard]] double width() const { return x1 - x0; }
  [[nodiscard]] double height() const { return y1 - y0; }
  [[nodiscard]] bool contains(Vec2 p) const { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
};

/// Nearest obstacle surface seen from a point.
struct SurfaceHit {
  double distance_um = 0.0;  // signed distance to the surface, negative inside
  Vec2 normal;               // unit vector pointing away from the obstacle
  bool is_post = false;
};

/// Circular posts in a rectangular channel.
class PostArray {
 public:
  PostArray() = default;
  PostArray(std::vector<Vec2> centers, double radius_um, Rect bounds, LateralBoundary lateral,
            double gap_um);

  [[nodiscard]] const std::vector<Vec2>& centers() const { return centers_; }
  [[nodiscard]] double radius_um() const { return radius_; }
  [[nodiscard]] const Rect& bounds() const { return bounds_; }
  [[nodiscard]] LateralBoundary lateral() const { return lateral_; }
  /// Characteristic length for resolution and Reynolds number (the gap, or the
  /// channel height for an empty channel).
  [[nodiscard]] double gap_um() const { return gap_; }

  /// Post region along x, if the array came from a DldDesign.
  double array_x_begin = 0.0;
  double array_x_end = 0.0;

  /// Maps y into [y0, y1) when the lateral boundary is periodic.
  [[nodiscard]] Vec2 wrap(Vec2 p) const;

  /// True if p lies inside a post (inflated by `inflate_um`).
  [[nodiscard]] bool inside_post(Vec2 p, double inflate_um = 0.0) const;

  /// Nearest post surface (periodic images included) within `search_um` of p.
  [[nodiscard]] std::optional<SurfaceHit> nearest_post(Vec2 p, double search_um) const;

  /// Nearest channel side wall; empty for periodic arrays.
  [[nodiscard]] std::optional<SurfaceHit> nearest_wall(Vec2 p) const;

 private:
  void build_buckets();
  [[nodiscard]] double lateral_distance(double dy) const;

  std::vector<Vec2> centers_;
  double radius_ = 0.0;
  Rect bounds_;
  LateralBoundary lateral_ = LateralBoundary::Walls;
  double gap_ = 1.0;

  // Uniform bucket grid over the bounds for neighbour lookup.
  double bucket_size_ = 1.0;
  int bx_ = 0;
  int by_ = 0;
  std::vector<std::vector<int>> buckets_;
};

/// Lays out n_rows x n_columns posts; row r is shifted laterally by r * eps * lambda (mod lambda).
PostArray build_post_array(const DldDesign& design);

/// Lateral offset of row r, in [0, lambda).
double row_offset_um(const DldDesign& design, int row);

/// Centre of the gap nearest to mid-channel in the first row.
double default_release_y_um(const DldDesign& design);

void to_json(nlohmann::json& j, const DldDesign& d);
void from_json(const nlohmann::json& j, DldDesign& d);

}  // namespace dld
