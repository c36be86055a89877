#include "plots.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dld/svg.hpp"

namespace dld::app {

namespace {

std::vector<Vec2> thin(const std::vector<Vec2>& pts, std::size_t max_points) {
  if (pts.size() <= max_points) return pts;
  std::vector<Vec2> out;
  const double step = static_cast<double>(pts.size() - 1) / static_cast<double>(max_points - 1);
  for (std::size_t k = 0; k < max_points; ++k) out.push_back(pts[static_cast<std::size_t>(std::lround(k * step))]);
  return out;
}

std::string fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string trajectory_overlay_svg(const DldDesign& design, const std::vector<const Trajectory*>& trajectories,
                                   const std::string& title) {
  double ylo = 0.0;
  double yhi = design.domain_height_um();
  for (const auto* t : trajectories) {
    for (const auto& s : t->samples) {
      ylo = std::min(ylo, s.y_um);
      yhi = std::max(yhi, s.y_um);
    }
  }
  const double xhi = design.domain_length_um();
  const double aspect = std::clamp((yhi - ylo) / xhi, 0.15, 1.0);
  const bool with_legend = trajectories.size() <= 14;
  const double legend_h = with_legend ? 2 * 56 + 16.0 * static_cast<double>(trajectories.size()) + 8 : 0.0;
  SvgPlot plot(with_legend ? 1060 : 900, std::max(120 + 780 * aspect, legend_h), 0.0, xhi, ylo, yhi, 56);
  if (with_legend) plot.reserve_legend_gutter(160);

  const auto array = build_post_array(design);
  const double height = design.domain_height_um();
  const int k0 = static_cast<int>(std::floor((ylo - height) / height));
  const int k1 = static_cast<int>(std::ceil((yhi + height) / height));
  for (const auto& c : array.centers()) {
    for (int k = k0; k <= k1; ++k) plot.circle(c.x, c.y + k * height, array.radius_um(), "#d9d9d9", "#999999");
  }
  int idx = 0;
  for (const auto* t : trajectories) {
    std::vector<Vec2> pts;
    pts.reserve(t->samples.size());
    for (const auto& s : t->samples) pts.push_back({s.x_um, s.y_um});
    const double shade = trajectories.size() > 1 ? static_cast<double>(idx) / (trajectories.size() - 1) : 0.0;
    const std::string color = ramp_color(shade);
    plot.polyline(thin(pts, 1500), color, 1.2);
    if (with_legend) {
      plot.legend(idx, color, fixed(t->size_um, 2) + " um " + to_string(t->mode));
    }
    ++idx;
  }
  plot.axes("x (um)", "y (um)");
  plot.title(title);
  return plot.str();
}

std::string prediction_overlay_svg(const std::vector<PredictedPath>& paths, const std::string& title) {
  double x0 = std::numeric_limits<double>::infinity();
  double x1 = -x0;
  double y0 = x0;
  double y1 = -x0;
  for (const auto& p : paths) {
    for (const auto* set : {&p.actual, &p.predicted}) {
      for (const auto& v : *set) {
        x0 = std::min(x0, v.x);
        x1 = std::max(x1, v.x);
        y0 = std::min(y0, v.y);
        y1 = std::max(y1, v.y);
      }
    }
  }
  if (!std::isfinite(x0)) x0 = x1 = y0 = y1 = 0.0;
  SvgPlot plot(900, 600, x0, x1, y0, y1 + 0.25 * (y1 - y0), 56);
  int k = 0;
  for (const auto& p : paths) {
    const std::string color = series_color(k);
    plot.polyline(thin(p.actual, 1500), color, 1.5);
    for (const auto& v : thin(p.predicted, 120)) plot.marker(v.x, v.y, color, 2.0);
    plot.legend(k, color, p.label);
    ++k;
  }
  plot.axes("x (um)", "y (um)");
  plot.title(title + " (lines: simulated, dots: predicted)");
  return plot.str();
}

std::string dc_comparison_svg(const std::vector<DcRow>& rows, double gap_um) {
  int nmin = 3;
  int nmax = 48;
  double dmax = 0.0;
  for (const auto& r : rows) {
    nmin = std::min(nmin, r.period);
    nmax = std::max(nmax, r.period);
    dmax = std::max(dmax, r.upper_um);
  }
  dmax = std::max(dmax, critical_diameter_davis(gap_um, 1.0 / nmin));
  SvgPlot plot(760, 520, nmin, nmax, 0.0, 1.1 * dmax, 56);
  std::vector<Vec2> davis;
  std::vector<Vec2> inglis;
  for (int n = nmin; n <= nmax; ++n) {
    davis.push_back({static_cast<double>(n), critical_diameter_davis(gap_um, 1.0 / n)});
    inglis.push_back({static_cast<double>(n), critical_diameter_inglis(gap_um, n)});
  }
  plot.polyline(davis, series_color(0), 2.0);
  plot.polyline(inglis, series_color(1), 1.5);
  for (const auto& r : rows) {
    plot.line(r.period, r.lower_um, r.period, r.upper_um, series_color(2), 3.0);
    plot.marker(r.period, r.midpoint(), series_color(2), 4.0);
  }
  plot.legend(0, series_color(0), "empirical correlation");
  plot.legend(1, series_color(1), "parabolic profile");
  plot.legend(2, series_color(2), "simulated interval");
  plot.axes("period number N", "critical diameter (um)");
  plot.title("Critical diameter, G = " + fixed(gap_um, 1) + " um");
  return plot.str();
}

std::string confusion_svg(const ml::EvalReport& report) {
  SvgPlot plot(760, 380, 0.0, 5.2, 0.0, 2.0, 56);
  auto panel = [&](double ox, const ml::ConfusionMatrix& cm, const ml::ClassificationMetrics& m,
                   const std::string& name) {
    // rows: actual (zigzag top), cols: predicted
    const long long cells[2][2] = {{cm.tn, cm.fp}, {cm.fn, cm.tp}};
    const double total = static_cast<double>(std::max<long long>(1, cm.total()));
    for (int a = 0; a < 2; ++a) {
      for (int p = 0; p < 2; ++p) {
        const double x = ox + p;
        const double y = 1.0 - a;
        const double frac = cells[a][p] / total;
        plot.rect(x, y, x + 1.0, y + 1.0, ramp_color(frac));
        plot.text_px(plot.px(x + 0.5), plot.py(y + 0.5) + 5, std::to_string(cells[a][p]), 16, "middle");
      }
    }
    plot.text_px(plot.px(ox + 1.0), plot.py(2.0) - 8,
                 name + "  acc " + fixed(m.accuracy, 3) + "  F1 " + fixed(m.f1, 3), 13, "middle");
    plot.text_px(plot.px(ox + 0.5), plot.py(0.0) + 16, "pred zigzag", 11, "middle");
    plot.text_px(plot.px(ox + 1.5), plot.py(0.0) + 16, "pred bumped", 11, "middle");
    plot.text_px(plot.px(ox) - 6, plot.py(1.5), "zigzag", 11, "end");
    plot.text_px(plot.px(ox) - 6, plot.py(0.5), "bumped", 11, "end");
  };
  panel(0.55, report.confusion_train, report.metrics_train, "train");
  panel(3.15, report.confusion_test, report.metrics_test, "test");
  plot.title("Confusion matrices, " + ml::to_string(report.kind) + " (rows: actual)");
  return plot.str();
}

}  // namespace dld::app
