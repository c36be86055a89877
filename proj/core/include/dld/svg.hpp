#pragma once

#include <string>
#include <vector>

#include "dld/common.hpp"

namespace dld {

/// Minimal standalone SVG builder. Coordinates passed to the drawing calls
/// are in data units and mapped into the plot box (and clipped to it); y
/// points up.
class SvgPlot {
 public:
  SvgPlot(double width_px, double height_px, double x0, double x1, double y0, double y1,
          double margin_px = 48.0);

  [[nodiscard]] double px(double x) const;
  [[nodiscard]] double py(double y) const;

  void rect(double x0, double y0, double x1, double y1, const std::string& fill, double opacity = 1.0);
  void circle(double cx, double cy, double r, const std::string& fill, const std::string& stroke = "none");
  void line(double x0, double y0, double x1, double y1, const std::string& stroke, double width = 1.0,
            const std::string& dash = "");
  void polyline(const std::vector<Vec2>& pts, const std::string& stroke, double width = 1.0);
  void marker(double x, double y, const std::string& fill, double radius_px = 3.0);
  /// Text in pixel coordinates.
  void text_px(double x, double y, const std::string& text, double size = 12.0,
               const std::string& anchor = "start", double rotate = 0.0);
  /// Frame, ticks and axis labels.
  void axes(const std::string& xlabel, const std::string& ylabel, int ticks = 5);
  void title(const std::string& text);
  /// Legend entry `index` in the top-right corner, or in the gutter if one is reserved.
  void legend(int index, const std::string& color, const std::string& label);
  /// Narrows the plot box to leave `px` to its right for the legend.
  void reserve_legend_gutter(double px) { gutter_ = px; }

  [[nodiscard]] std::string str() const;

 private:
  double w_, h_, x0_, x1_, y0_, y1_, m_;
  double gutter_ = 0.0;
  std::string data_;  // clipped to the plot box
  std::string body_;
};

/// Hex colour on a perceptually ordered blue-to-yellow ramp, t in [0, 1].
std::string ramp_color(double t);
/// Distinct colour for series index k.
std::string series_color(int k);

}  // namespace dld
