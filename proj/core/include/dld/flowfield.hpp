#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dld/common.hpp"
#include "dld/geometry.hpp"

namespace dld {

/// Newtonian carrier fluid. Defaults to water at room temperature.
struct FluidProperties {
  double density = 1000.0;    // kg/m^3
  double viscosity = 1.0e-3;  // Pa s
  Vec2 body_force;            // N/m^3

  void validate() const;
};

struct SolverConfig {
  double reynolds = 1.0;
  int cells_per_gap = 12;
  /// Stop when the max change of the nondimensional velocity between
  /// nonlinear iterations falls below this.
  double tolerance = 1e-8;
  int max_iterations = 60;
  /// Periodic arrays only: add the uniform lateral body force that cancels the
  /// net lateral flux, as side walls would in a wide device.
  bool zero_mean_lateral_flux = true;

  void validate() const;
};

struct ConvergenceReport {
  int iterations = 0;
  double residual = 0.0;
  /// Lateral body force applied over the post region to cancel its net
  /// lateral flux, N/m^3.
  double lateral_body_force = 0.0;
};

void to_json(nlohmann::json& j, const FluidProperties& f);
void from_json(const nlohmann::json& j, FluidProperties& f);
void to_json(nlohmann::json& j, const SolverConfig& c);
void from_json(const nlohmann::json& j, SolverConfig& c);

/// Mean inlet speed giving Reynolds number `re` with the gap as length scale.
double inlet_velocity_from_reynolds(double re, const FluidProperties& fluid, double gap_um);

/// Steady velocity/pressure on a staggered (MAC) Cartesian grid.
///
/// Cell (i, j) spans [i h, (i+1) h] x [j h, (j+1) h] relative to the domain
/// origin. u lives on vertical faces ((nx+1) x ny), v on horizontal faces
/// (nx x (ny+1)); p and the solid mask live at cell centres. For periodic
/// lateral boundaries v(:, ny) duplicates v(:, 0).
class FlowField {
 public:
  FlowField() = default;
  FlowField(PostArray geometry, FluidProperties fluid, double h_um, int nx, int ny, double inlet_velocity);

  [[nodiscard]] int nx() const { return nx_; }
  [[nodiscard]] int ny() const { return ny_; }
  [[nodiscard]] double h_um() const { return h_; }
  [[nodiscard]] const PostArray& geometry() const { return geometry_; }
  [[nodiscard]] const FluidProperties& fluid() const { return fluid_; }
  [[nodiscard]] double inlet_velocity() const { return inlet_velocity_; }
  [[nodiscard]] bool periodic() const { return geometry_.lateral() == LateralBoundary::Periodic; }

  [[nodiscard]] double& u(int i, int j) { return u_[static_cast<std::size_t>(i) * ny_ + j]; }
  [[nodiscard]] double u(int i, int j) const { return u_[static_cast<std::size_t>(i) * ny_ + j]; }
  [[nodiscard]] double& v(int i, int j) { return v_[static_cast<std::size_t>(i) * (ny_ + 1) + j]; }
  [[nodiscard]] double v(int i, int j) const { return v_[static_cast<std::size_t>(i) * (ny_ + 1) + j]; }
  [[nodiscard]] double& p(int i, int j) { return p_[static_cast<std::size_t>(i) * ny_ + j]; }
  [[nodiscard]] double p(int i, int j) const { return p_[static_cast<std::size_t>(i) * ny_ + j]; }
  [[nodiscard]] bool solid(int i, int j) const { return solid_[static_cast<std::size_t>(i) * ny_ + j] != 0; }
  void set_solid(int i, int j, bool s) { solid_[static_cast<std::size_t>(i) * ny_ + j] = s ? 1 : 0; }

  /// Bilinear interpolation of each staggered component; zero inside posts.
  /// Throws DomainError outside the domain (y wraps when periodic).
  [[nodiscard]] Vec2 sample(Vec2 point_um) const;

  /// Velocity interpolated to the centre of cell (i, j).
  [[nodiscard]] Vec2 cell_velocity(int i, int j) const;

  /// L-infinity norm of the discrete divergence over fluid cells, scaled by U/G.
  [[nodiscard]] double divergence_norm() const;

  /// Volumetric flux per unit depth through the vertical face line i (m^2/s).
  [[nodiscard]] double flux_through_face_line(int i) const;

  ConvergenceReport report;

 private:
  PostArray geometry_;
  FluidProperties fluid_;
  double h_ = 1.0;
  int nx_ = 0;
  int ny_ = 0;
  double inlet_velocity_ = 0.0;
  std::vector<double> u_;
  std::vector<double> v_;
  std::vector<double> p_;
  std::vector<std::uint8_t> solid_;
};

/// Steady incompressible Navier-Stokes through the array: uniform inlet
/// velocity on the left, reference pressure on the right, no-slip on posts
/// and (for walled arrays) the side walls.
FlowField solve_steady_flow(const PostArray& array, const FluidProperties& fluid, const SolverConfig& config);

/// Free function form of FlowField::sample.
inline Vec2 sample_velocity(const FlowField& field, Vec2 point_um) { return field.sample(point_um); }
inline double divergence_norm(const FlowField& field) { return field.divergence_norm(); }

/// Cell-centred dump: x_um,y_um,u_mps,v_mps,p_pa,solid
void write_field_csv(const FlowField& field, std::ostream& out);

/// Speed-magnitude heatmap with post outlines, downsampled to at most
/// `max_pixels` blocks along the longer side.
void write_field_svg(const FlowField& field, std::ostream& out, int max_pixels = 400);

}  // namespace dld
