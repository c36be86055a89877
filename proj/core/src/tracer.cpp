#include "dld/tracer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <ostream>

#include <nlohmann/json.hpp>

#include "dld/io.hpp"
#include "json_keys.hpp"

namespace dld {

std::string to_string(ModeLabel m) {
  switch (m) {
    case ModeLabel::Zigzag: return "zigzag";
    case ModeLabel::Bumped: return "bumped";
    case ModeLabel::Inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

ModeLabel mode_from_string(const std::string& s) {
  if (s == "zigzag") return ModeLabel::Zigzag;
  if (s == "bumped") return ModeLabel::Bumped;
  if (s == "inconclusive") return ModeLabel::Inconclusive;
  throw DataError("unknown transport mode '" + s + "'");
}

double ParticleState::mass() const {
  const double d = diameter_um * kMicron;
  return density * std::numbers::pi * d * d * d / 6.0;
}

void TracerConfig::validate() const {
  if (!(dt > 0.0)) throw ConfigError("tracer dt must be positive");
  if (!(max_time >= 0.0)) throw ConfigError("tracer max_time must be >= 0");
  if (!(particle_density > 0.0)) throw ConfigError("particle density must be positive");
  if (!(lift_coefficient >= 0.0)) throw ConfigError("lift coefficient must be >= 0");
  if (target_samples < 2) throw ConfigError("target_samples must be >= 2");
}

void to_json(nlohmann::json& j, const TracerConfig& c) {
  j = nlohmann::json{{"dt_s", c.dt},
                     {"max_time_s", c.max_time},
                     {"particle_density", c.particle_density},
                     {"lift_coefficient", c.lift_coefficient},
                     {"target_samples", c.target_samples}};
  if (c.release_x_um) j["release_x_um"] = *c.release_x_um;
  if (c.release_y_um) j["release_y_um"] = *c.release_y_um;
}

void from_json(const nlohmann::json& j, TracerConfig& c) {
  detail::check_keys(j, {"dt_s", "max_time_s", "particle_density", "lift_coefficient", "target_samples",
                         "release_x_um", "release_y_um"},
                     "tracer");
  TracerConfig out;
  detail::read_opt(j, "dt_s", out.dt, "tracer");
  detail::read_opt(j, "max_time_s", out.max_time, "tracer");
  detail::read_opt(j, "particle_density", out.particle_density, "tracer");
  detail::read_opt(j, "lift_coefficient", out.lift_coefficient, "tracer");
  detail::read_opt(j, "target_samples", out.target_samples, "tracer");
  double v = 0.0;
  if (j.contains("release_x_um")) {
    detail::read_opt(j, "release_x_um", v, "tracer");
    out.release_x_um = v;
  }
  if (j.contains("release_y_um")) {
    detail::read_opt(j, "release_y_um", v, "tracer");
    out.release_y_um = v;
  }
  out.validate();
  c = out;
}

double particle_relaxation_time(double diameter_um, double particle_density, double viscosity,
                                double particle_reynolds) {
  if (!(diameter_um > 0.0 && particle_density > 0.0 && viscosity > 0.0)) {
    throw DomainError("particle diameter, density and viscosity must be positive");
  }
  if (!(particle_reynolds >= 0.0)) throw DomainError("particle Reynolds number must be >= 0");
  const double d = diameter_um * kMicron;
  const double stokes = particle_density * d * d / (18.0 * viscosity);
  return stokes / (1.0 + 0.15 * std::pow(particle_reynolds, 0.687));
}

Vec2 drag_force(const ParticleState& p, Vec2 fluid_velocity, double tau) {
  if (!(tau > 0.0)) throw DomainError("relaxation time must be positive");
  return (fluid_velocity - p.velocity) * (p.mass() / tau);
}

Vec2 lift_force(const ParticleState& p, double fluid_density, double lift_coefficient,
                double wall_distance_um, Vec2 wall_normal) {
  if (!(wall_distance_um < p.diameter_um)) return {};
  const double d = p.diameter_um * kMicron;
  const double speed2 = p.velocity.dot(p.velocity);
  const double magnitude = lift_coefficient * fluid_density * speed2 * d * d / 2.0;
  return wall_normal * magnitude;
}

namespace {

/// Closest steric surface (post or side wall) measured from the particle
/// surface, searched out to `reach_um`.
std::optional<SurfaceHit> nearest_surface(const PostArray& array, Vec2 center, double diameter_um,
                                          double reach_um) {
  const double r = 0.5 * diameter_um;
  std::optional<SurfaceHit> best;
  if (auto post = array.nearest_post(center, r + reach_um)) {
    post->distance_um -= r;
    best = post;
  }
  if (auto wall = array.nearest_wall(center)) {
    wall->distance_um -= r;
    if (wall->distance_um <= reach_um && (!best || wall->distance_um < best->distance_um)) best = wall;
  }
  return best;
}

}  // namespace

ParticleState advance(const ParticleState& p, const FlowField& field, double dt, double lift_coefficient) {
  if (!(dt > 0.0)) throw DomainError("time step must be positive");
  const FluidProperties& fluid = field.fluid();
  const Vec2 u = field.sample(p.position_um);
  const Vec2 slip = u - p.velocity;
  const double re_p = fluid.density * slip.norm() * p.diameter_um * kMicron / fluid.viscosity;
  const double tau = particle_relaxation_time(p.diameter_um, p.density, fluid.viscosity, re_p);

  Vec2 accel;
  if (lift_coefficient > 0.0) {
    if (auto hit = nearest_surface(field.geometry(), p.position_um, p.diameter_um, p.diameter_um)) {
      accel = lift_force(p, fluid.density, lift_coefficient, hit->distance_um, hit->normal) / p.mass();
    }
  }

  // dv/dt = (u - v)/tau + a with u, tau, a frozen over the step.
  const Vec2 terminal = u + accel * tau;
  const double decay = std::exp(-dt / tau);
  ParticleState out = p;
  out.velocity = terminal + (p.velocity - terminal) * decay;
  const Vec2 displacement = terminal * dt + (p.velocity - terminal) * (tau * (1.0 - decay));
  out.position_um = p.position_um + displacement / kMicron;
  return out;
}

ParticleState resolve_steric_collision(const ParticleState& p, const PostArray& array) {
  ParticleState out = p;
  const double r = 0.5 * p.diameter_um;
  auto push = [&](const SurfaceHit& hit) {
    // hit.distance_um is measured from the steric surface; negative = penetration.
    if (hit.distance_um >= 0.0) return;
    out.position_um += hit.normal * (-hit.distance_um);
    const double vn = out.velocity.dot(hit.normal);
    if (vn < 0.0) out.velocity = out.velocity - hit.normal * vn;
  };
  if (auto post = array.nearest_post(out.position_um, r)) {
    post->distance_um -= r;
    push(*post);
  }
  if (auto wall = array.nearest_wall(out.position_um)) {
    wall->distance_um -= r;
    push(*wall);
  }
  return out;
}

std::string case_id(int period, double size_um) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "n%02d_d%06.3f", period, size_um);
  return buf;
}

namespace {

/// y where the trajectory first reaches x = x_target (linear interpolation).
std::optional<double> y_at_first_crossing(const std::vector<TrajectorySample>& s, double x_target) {
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s[k].x_um >= x_target) {
      if (k == 0) return s[0].y_um;
      const auto& a = s[k - 1];
      const auto& b = s[k];
      const double t = (x_target - a.x_um) / (b.x_um - a.x_um);
      return a.y_um + t * (b.y_um - a.y_um);
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<double> migration_ratio(const Trajectory& traj, const DldDesign& design) {
  // Only the last full period counts; earlier rows absorb the release transient.
  const double x1 = design.inlet_margin_um + design.array_length_um();
  const int measured = std::min(design.rows(), design.period);
  const double x0 = x1 - measured * design.pitch_um();
  const auto y0 = y_at_first_crossing(traj.samples, x0);
  const auto y1 = y_at_first_crossing(traj.samples, x1);
  if (!y0 || !y1) return std::nullopt;
  return (*y1 - *y0) / (design.row_shift_fraction() * (x1 - x0));
}

ModeLabel classify_migration_ratio(double ratio) {
  if (ratio >= 0.75) return ModeLabel::Bumped;
  if (ratio <= 0.25) return ModeLabel::Zigzag;
  return ModeLabel::Inconclusive;
}

ModeLabel classify_mode(Trajectory& traj, const DldDesign& design) {
  const auto ratio = migration_ratio(traj, design);
  if (!ratio) {
    traj.migration_ratio = 0.0;
    traj.mode = ModeLabel::Inconclusive;
    return traj.mode;
  }
  traj.migration_ratio = *ratio;
  traj.mode = classify_migration_ratio(*ratio);
  return traj.mode;
}

Trajectory trace(const DldDesign& design, const FlowField& field, double diameter_um,
                 const TracerConfig& config) {
  design.validate();
  config.validate();
  if (!(diameter_um > 0.0)) throw ConfigError("particle diameter must be positive");
  if (!(diameter_um < design.gap_um)) throw ConfigError("particle must be smaller than the gap");
  const PostArray& array = field.geometry();
  const double end_x = array.array_x_end > array.array_x_begin ? array.array_x_end : array.bounds().x1;

  ParticleState p;
  p.diameter_um = diameter_um;
  p.density = config.particle_density;
  p.position_um = {config.release_x_um.value_or(0.25 * design.inlet_margin_um),
                   config.release_y_um.value_or(default_release_y_um(design))};
  if (!array.bounds().contains(p.position_um) || p.position_um.x >= array.array_x_begin) {
    throw ConfigError("release point must lie in the inlet margin");
  }
  if (array.inside_post(p.position_um, 0.5 * diameter_um)) {
    throw ConfigError("release point overlaps a post");
  }
  p.velocity = field.sample(p.position_um);

  const double speed = std::max(field.inlet_velocity(), 1e-12);
  const double transit = (end_x - p.position_um.x) * kMicron / speed;
  const double max_time = config.max_time > 0.0 ? config.max_time : 20.0 * transit;
  const auto expected_steps = static_cast<long long>(std::ceil(transit / config.dt));
  const long long stride = std::max<long long>(1, expected_steps / config.target_samples);
  const auto max_steps = static_cast<long long>(std::ceil(max_time / config.dt));

  Trajectory traj;
  traj.case_id = case_id(design.period, diameter_um);
  traj.period = design.period;
  traj.gap_um = design.gap_um;
  traj.post_diameter_um = design.post_diameter_um;
  traj.size_um = diameter_um;
  traj.samples.reserve(static_cast<std::size_t>(std::min<long long>(expected_steps / stride + 16, 1 << 20)));
  traj.samples.push_back({0.0, p.position_um.x, p.position_um.y});

  const Rect& b = array.bounds();
  long long step = 0;
  while (step < max_steps) {
    p = advance(p, field, config.dt, config.lift_coefficient);
    p = resolve_steric_collision(p, array);
    ++step;
    if (p.position_um.x < b.x0 || p.position_um.x > b.x1 ||
        (array.lateral() == LateralBoundary::Walls && (p.position_um.y < b.y0 || p.position_um.y > b.y1))) {
      throw SolverError("particle left the domain through a boundary at t=" +
                        std::to_string(static_cast<double>(step) * config.dt));
    }
    const bool done = p.position_um.x >= end_x;
    if (step % stride == 0 || done) {
      traj.samples.push_back({static_cast<double>(step) * config.dt, p.position_um.x, p.position_um.y});
    }
    if (done) {
      traj.complete = true;
      break;
    }
  }
  traj.steps = step;
  if (traj.complete) {
    classify_mode(traj, design);
  } else {
    traj.mode = ModeLabel::Inconclusive;
  }
  return traj;
}

DiameterInterval estimate_critical_diameter(const DldDesign& design, const FlowField& field,
                                            double resolution_um, const TracerConfig& config) {
  if (!(resolution_um > 0.0)) throw ConfigError("resolution must be positive");
  std::map<double, ModeLabel> cache;
  DiameterInterval out;
  auto label = [&](double d) {
    if (auto it = cache.find(d); it != cache.end()) return it->second;
    const Trajectory t = trace(design, field, d, config);
    ++out.traces;
    cache.emplace(d, t.mode);
    return t.mode;
  };

  const double lo = std::max(0.02 * design.gap_um, 0.5 * resolution_um);
  const double hi = 0.9 * design.gap_um;
  if (label(lo) != ModeLabel::Zigzag) throw SolverError("smallest probe size does not zigzag");
  if (label(hi) != ModeLabel::Bumped) throw SolverError("largest probe size does not bump");

  // Zigzag / not-zigzag boundary.
  double a = lo;
  double b = hi;
  while (b - a > resolution_um) {
    const double mid = 0.5 * (a + b);
    (label(mid) == ModeLabel::Zigzag ? a : b) = mid;
  }
  // Not-bumped / bumped boundary; shares probes with the first search until
  // an inconclusive size splits the two.
  double c = lo;
  double d = hi;
  while (d - c > resolution_um) {
    const double mid = 0.5 * (c + d);
    (label(mid) == ModeLabel::Bumped ? d : c) = mid;
  }
  for (const auto& [size, mode] : cache) {
    if (mode == ModeLabel::Inconclusive && size > a && size < d) out.mixed_band = true;
  }
  out.lower_um = std::min(a, d);
  out.upper_um = std::max(a, d);
  return out;
}

void write_trajectory_csv_header(std::ostream& out) { out << "case_id,n,g_um,dp_um,size_um,t_s,x_um,y_um\n"; }

void write_trajectory_csv_rows(const Trajectory& traj, std::ostream& out) {
  for (const auto& s : traj.samples) {
    out << traj.case_id << ',' << traj.period << ',' << format_double(traj.gap_um) << ','
        << format_double(traj.post_diameter_um) << ',' << format_double(traj.size_um) << ','
        << format_double(s.t) << ',' << format_double(s.x_um) << ',' << format_double(s.y_um) << '\n';
  }
}

}  // namespace dld
