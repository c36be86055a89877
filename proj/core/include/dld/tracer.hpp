#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dld/common.hpp"
#include "dld/flowfield.hpp"
#include "dld/geometry.hpp"

namespace dld {

enum class ModeLabel { Zigzag, Bumped, Inconclusive };

std::string to_string(ModeLabel m);
ModeLabel mode_from_string(const std::string& s);

/// Rigid spherical particle moving in the device plane.
struct ParticleState {
  Vec2 position_um;
  Vec2 velocity;  // m/s
  double diameter_um = 1.0;
  double density = 1050.0;  // kg/m^3

  [[nodiscard]] double mass() const;  // kg
};

struct TracerConfig {
  double dt = 1e-6;  // s
  /// Zero selects 20x the estimated transit time.
  double max_time = 0.0;
  double particle_density = 1050.0;
  double lift_coefficient = 0.5;
  /// Stored samples per trajectory are targeted at this count.
  int target_samples = 10000;
  std::optional<double> release_x_um;
  std::optional<double> release_y_um;

  void validate() const;
};

void to_json(nlohmann::json& j, const TracerConfig& c);
void from_json(const nlohmann::json& j, TracerConfig& c);

/// Schiller-Naumann response time: tau = rho_p d^2 / (18 mu) / (1 + 0.15 Re_p^0.687).
double particle_relaxation_time(double diameter_um, double particle_density, double viscosity,
                                double particle_reynolds);

/// F = m (u - v) / tau, in newtons.
Vec2 drag_force(const ParticleState& p, Vec2 fluid_velocity, double tau);

/// Near-wall lift C_L rho_f |v|^2 d^2 / 2 along the outward normal, active
/// only when the gap to the steric surface is below one diameter.
Vec2 lift_force(const ParticleState& p, double fluid_density, double lift_coefficient,
                double wall_distance_um, Vec2 wall_normal);

/// One step of the particle equation of motion. Drag is integrated exactly
/// over the step (exponential relaxation toward the local fluid velocity plus
/// the lift drift); the position uses the matching exact displacement.
ParticleState advance(const ParticleState& p, const FlowField& field, double dt,
                      double lift_coefficient = 0.5);

/// Pushes a penetrating particle back onto the steric surface (post radius
/// plus d/2, or d/2 off a side wall) and removes the inward normal velocity.
ParticleState resolve_steric_collision(const ParticleState& p, const PostArray& array);

struct TrajectorySample {
  double t = 0.0;  // s
  double x_um = 0.0;
  double y_um = 0.0;

  bool operator==(const TrajectorySample&) const = default;
};

struct Trajectory {
  std::string case_id;
  int period = 0;
  double gap_um = 0.0;
  double post_diameter_um = 0.0;
  double size_um = 0.0;
  std::vector<TrajectorySample> samples;
  ModeLabel mode = ModeLabel::Inconclusive;
  double migration_ratio = 0.0;
  bool complete = false;
  long long steps = 0;
};

/// Net lateral displacement over the last period of rows (or the whole array
/// when it is shorter) divided by eps times the axial distance. Empty when the
/// trajectory does not span that stretch.
std::optional<double> migration_ratio(const Trajectory& traj, const DldDesign& design);

/// Threshold rule on the migration ratio: >= 0.75 bumped, <= 0.25 zigzag.
ModeLabel classify_migration_ratio(double ratio);

/// Computes the migration ratio and label and stores both on `traj`.
ModeLabel classify_mode(Trajectory& traj, const DldDesign& design);

/// Canonical case identifier for a (period, size) pair.
std::string case_id(int period, double size_um);

/// Releases a particle in the inlet margin and integrates until it reaches
/// the outlet margin or the time limit. Incomplete runs are labelled
/// Inconclusive with `complete == false`.
Trajectory trace(const DldDesign& design, const FlowField& field, double diameter_um,
                 const TracerConfig& config);

struct DiameterInterval {
  double lower_um = 0.0;  // largest size seen zigzagging
  double upper_um = 0.0;  // smallest size seen bumping
  bool mixed_band = false;
  int traces = 0;

  [[nodiscard]] double midpoint() const { return 0.5 * (lower_um + upper_um); }
};

/// Brackets the zigzag/bumped transition by bisection over particle size.
DiameterInterval estimate_critical_diameter(const DldDesign& design, const FlowField& field,
                                            double resolution_um, const TracerConfig& config);

/// Header: case_id,n,g_um,dp_um,size_um,t_s,x_um,y_um
void write_trajectory_csv_header(std::ostream& out);
void write_trajectory_csv_rows(const Trajectory& traj, std::ostream& out);

}  // namespace dld
