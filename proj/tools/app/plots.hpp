#pragma once

#include <string>
#include <vector>

#include "dld/geometry.hpp"
#include "dld/ml.hpp"
#include "dld/tracer.hpp"

namespace dld::app {

/// Particle paths over the post layout, one colour per trajectory.
std::string trajectory_overlay_svg(const DldDesign& design, const std::vector<const Trajectory*>& trajectories,
                                   const std::string& title);

/// Simulated vs predicted y(x) for a set of cases.
struct PredictedPath {
  std::string label;
  std::vector<Vec2> actual;
  std::vector<Vec2> predicted;
};
std::string prediction_overlay_svg(const std::vector<PredictedPath>& paths, const std::string& title);

struct DcRow {
  int period = 0;
  double lower_um = 0.0;
  double upper_um = 0.0;
  double davis_um = 0.0;
  double inglis_um = 0.0;
  bool mixed_band = false;
  int traces = 0;

  [[nodiscard]] double midpoint() const { return 0.5 * (lower_um + upper_um); }
  [[nodiscard]] double error_pct() const { return 100.0 * (midpoint() - davis_um) / davis_um; }
};
/// Simulated intervals against both closed-form estimates, over N.
std::string dc_comparison_svg(const std::vector<DcRow>& rows, double gap_um);

/// 2x2 confusion matrices for train and test side by side.
std::string confusion_svg(const ml::EvalReport& report);

}  // namespace dld::app
