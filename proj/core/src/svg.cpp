#include "dld/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace dld {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string tick_label(double v) {
  char buf[32];
  if (std::abs(v) >= 1e4 || (v != 0.0 && std::abs(v) < 1e-2)) {
    std::snprintf(buf, sizeof buf, "%.2g", v);
  } else {
    std::snprintf(buf, sizeof buf, "%.4g", v);
  }
  return buf;
}

}  // namespace

SvgPlot::SvgPlot(double width_px, double height_px, double x0, double x1, double y0, double y1, double margin_px)
    : w_(width_px), h_(height_px), x0_(x0), x1_(x1 > x0 ? x1 : x0 + 1.0), y0_(y0), y1_(y1 > y0 ? y1 : y0 + 1.0),
      m_(margin_px) {}

double SvgPlot::px(double x) const { return m_ + (x - x0_) / (x1_ - x0_) * (w_ - 2 * m_ - gutter_); }
double SvgPlot::py(double y) const { return h_ - m_ - (y - y0_) / (y1_ - y0_) * (h_ - 2 * m_); }

void SvgPlot::rect(double x0, double y0, double x1, double y1, const std::string& fill, double opacity) {
  const double a = px(std::min(x0, x1));
  const double b = py(std::max(y0, y1));
  data_ += "<rect x=\"" + num(a) + "\" y=\"" + num(b) + "\" width=\"" + num(std::abs(px(x1) - px(x0))) +
           "\" height=\"" + num(std::abs(py(y1) - py(y0))) + "\" fill=\"" + fill + "\"";
  if (opacity < 1.0) data_ += " fill-opacity=\"" + num(opacity) + "\"";
  data_ += "/>\n";
}

void SvgPlot::circle(double cx, double cy, double r, const std::string& fill, const std::string& stroke) {
  const double rx = std::abs(px(cx + r) - px(cx));
  data_ += "<circle cx=\"" + num(px(cx)) + "\" cy=\"" + num(py(cy)) + "\" r=\"" + num(rx) + "\" fill=\"" + fill +
           "\" stroke=\"" + stroke + "\"/>\n";
}

void SvgPlot::line(double x0, double y0, double x1, double y1, const std::string& stroke, double width,
                   const std::string& dash) {
  data_ += "<line x1=\"" + num(px(x0)) + "\" y1=\"" + num(py(y0)) + "\" x2=\"" + num(px(x1)) + "\" y2=\"" +
           num(py(y1)) + "\" stroke=\"" + stroke + "\" stroke-width=\"" + num(width) + "\"";
  if (!dash.empty()) data_ += " stroke-dasharray=\"" + dash + "\"";
  data_ += "/>\n";
}

void SvgPlot::polyline(const std::vector<Vec2>& pts, const std::string& stroke, double width) {
  if (pts.empty()) return;
  data_ += "<polyline fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"" + num(width) + "\" points=\"";
  for (const auto& p : pts) data_ += num(px(p.x)) + "," + num(py(p.y)) + " ";
  data_ += "\"/>\n";
}

void SvgPlot::marker(double x, double y, const std::string& fill, double radius_px) {
  data_ += "<circle cx=\"" + num(px(x)) + "\" cy=\"" + num(py(y)) + "\" r=\"" + num(radius_px) + "\" fill=\"" +
           fill + "\"/>\n";
}

void SvgPlot::text_px(double x, double y, const std::string& text, double size, const std::string& anchor,
                      double rotate) {
  body_ += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" + num(size) +
           "\" font-family=\"sans-serif\" text-anchor=\"" + anchor + "\"";
  if (rotate != 0.0) body_ += " transform=\"rotate(" + num(rotate) + " " + num(x) + " " + num(y) + ")\"";
  body_ += ">" + escape(text) + "</text>\n";
}

void SvgPlot::axes(const std::string& xlabel, const std::string& ylabel, int ticks) {
  const double left = m_;
  const double right = w_ - m_ - gutter_;
  const double top = m_;
  const double bottom = h_ - m_;
  body_ += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(right - left) + "\" height=\"" +
           num(bottom - top) + "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int k = 0; k <= ticks; ++k) {
    const double xv = x0_ + (x1_ - x0_) * k / ticks;
    const double yv = y0_ + (y1_ - y0_) * k / ticks;
    const double xp = px(xv);
    const double yp = py(yv);
    body_ += "<line x1=\"" + num(xp) + "\" y1=\"" + num(bottom) + "\" x2=\"" + num(xp) + "\" y2=\"" +
             num(bottom + 4) + "\" stroke=\"#333\"/>\n";
    text_px(xp, bottom + 16, tick_label(xv), 10, "middle");
    body_ += "<line x1=\"" + num(left - 4) + "\" y1=\"" + num(yp) + "\" x2=\"" + num(left) + "\" y2=\"" + num(yp) +
             "\" stroke=\"#333\"/>\n";
    text_px(left - 6, yp + 3, tick_label(yv), 10, "end");
  }
  text_px(0.5 * (left + right), h_ - 8, xlabel, 12, "middle");
  text_px(14, 0.5 * (top + bottom), ylabel, 12, "middle", -90);
}

void SvgPlot::title(const std::string& text) { text_px(w_ / 2, 20, text, 14, "middle"); }

void SvgPlot::legend(int index, const std::string& color, const std::string& label) {
  const double x = gutter_ > 0.0 ? w_ - m_ - gutter_ + 12 : w_ - m_ - 150;
  const double y = m_ + 14 + 16 * index;
  body_ += "<rect x=\"" + num(x) + "\" y=\"" + num(y - 9) + "\" width=\"10\" height=\"10\" fill=\"" + color +
           "\"/>\n";
  text_px(x + 14, y, label, 11);
}

std::string SvgPlot::str() const {
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w_) << "\" height=\"" << num(h_)
      << "\" viewBox=\"0 0 " << num(w_) << ' ' << num(h_) << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<clipPath id=\"plotbox\"><rect x=\"" << num(m_) << "\" y=\"" << num(m_) << "\" width=\"" << num(w_ - 2 * m_ - gutter_)
      << "\" height=\"" << num(h_ - 2 * m_) << "\"/></clipPath>\n"
      << "<g clip-path=\"url(#plotbox)\">\n"
      << data_ << "</g>\n"
      << body_ << "</svg>\n";
  return out.str();
}

std::string ramp_color(double t) {
  // Control points of a viridis-like ramp.
  static constexpr std::array<std::array<double, 3>, 5> stops{{{68, 1, 84},
                                                               {59, 82, 139},
                                                               {33, 145, 140},
                                                               {94, 201, 98},
                                                               {253, 231, 37}}};
  if (!std::isfinite(t)) t = 0.0;
  t = std::clamp(t, 0.0, 1.0) * (stops.size() - 1);
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(t), stops.size() - 2);
  const double f = t - static_cast<double>(k);
  char buf[8];
  const auto c = [&](int i) { return static_cast<int>(std::lround(stops[k][i] + f * (stops[k + 1][i] - stops[k][i]))); };
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c(0), c(1), c(2));
  return buf;
}

std::string series_color(int k) {
  static constexpr std::array<const char*, 10> palette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                                       "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return palette[static_cast<std::size_t>(((k % 10) + 10) % 10)];
}

}  // namespace dld
