#include "dld/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <nlohmann/json.hpp>

namespace dld {

std::string to_string(LateralBoundary b) {
  return b == LateralBoundary::Periodic ? "periodic" : "walls";
}

LateralBoundary lateral_boundary_from_string(const std::string& s) {
  if (s == "periodic") return LateralBoundary::Periodic;
  if (s == "walls") return LateralBoundary::Walls;
  throw ConfigError("unknown lateral boundary '" + s + "' (expected periodic|walls)");
}

double row_shift_fraction(int period) {
  if (period <= 0) throw DomainError("period number must be >= 1, got " + std::to_string(period));
  return 1.0 / static_cast<double>(period);
}

double critical_diameter_inglis(double gap_um, int period) {
  if (!(gap_um > 0.0)) throw DomainError("gap must be positive");
  const double eps = row_shift_fraction(period);
  const double alpha = std::sqrt(static_cast<double>(period) / 3.0);
  return 2.0 * alpha * gap_um * eps;
}

double critical_diameter_davis(double gap_um, double epsilon) {
  if (!(gap_um > 0.0)) throw DomainError("gap must be positive");
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw DomainError("row shift fraction must be in (0, 1]");
  return 1.4 * gap_um * std::pow(epsilon, 0.48);
}

double DldDesign::row_shift_fraction() const { return dld::row_shift_fraction(period); }

double DldDesign::bump_angle() const { return std::atan(row_shift_fraction()); }

double DldDesign::domain_height_um() const {
  const double lanes = static_cast<double>(n_columns) * pitch_um();
  return lateral == LateralBoundary::Periodic ? lanes : lanes + pitch_um();
}

void DldDesign::validate() const {
  if (!(post_diameter_um > 0.0)) throw ConfigError("post diameter must be positive");
  if (!(gap_um > 0.0)) throw ConfigError("gap must be positive");
  if (period < 2) throw ConfigError("period number must be >= 2, got " + std::to_string(period));
  if (n_columns < 1) throw ConfigError("n_columns must be >= 1");
  if (rows() < 1) throw ConfigError("n_rows must be >= 1");
  if (inlet_margin_um < pitch_um() || outlet_margin_um < pitch_um()) {
    throw ConfigError("inlet/outlet margins must be at least one pitch (" +
                      std::to_string(pitch_um()) + " um)");
  }
}

DldDesign DldDesign::standard(int n) {
  DldDesign d;
  d.period = n;
  return d;
}

double row_offset_um(const DldDesign& design, int row) {
  const double lambda = design.pitch_um();
  // Integer arithmetic keeps the offset exact at whole periods.
  const int phase = row % design.period;
  return lambda * static_cast<double>(phase) / static_cast<double>(design.period);
}

PostArray build_post_array(const DldDesign& design) {
  design.validate();
  const double lambda = design.pitch_um();
  const double height = design.domain_height_um();
  const double base = design.lateral == LateralBoundary::Periodic ? 0.0 : 0.5 * lambda;

  std::vector<Vec2> centers;
  centers.reserve(static_cast<std::size_t>(design.rows()) * design.n_columns);
  for (int r = 0; r < design.rows(); ++r) {
    const double x = design.inlet_margin_um + (r + 0.5) * lambda;
    const double off = row_offset_um(design, r);
    for (int j = 0; j < design.n_columns; ++j) {
      centers.push_back({x, base + j * lambda + off});
    }
  }
  PostArray array(std::move(centers), 0.5 * design.post_diameter_um,
                  Rect{0.0, 0.0, design.domain_length_um(), height}, design.lateral,
                  design.gap_um);
  array.array_x_begin = design.inlet_margin_um;
  array.array_x_end = design.inlet_margin_um + design.array_length_um();
  return array;
}

double default_release_y_um(const DldDesign& design) {
  const double lambda = design.pitch_um();
  const double height = design.domain_height_um();
  const double base = design.lateral == LateralBoundary::Periodic ? 0.0 : 0.5 * lambda;
  // Row 0 has zero offset, so gap centres sit half a pitch above each post.
  double best = base + 0.5 * lambda;
  int last = design.lateral == LateralBoundary::Periodic ? design.n_columns : design.n_columns - 1;
  for (int j = 0; j < std::max(last, 1); ++j) {
    const double mid = base + (j + 0.5) * lambda;
    if (std::abs(mid - 0.5 * height) < std::abs(best - 0.5 * height)) best = mid;
  }
  return best;
}

PostArray::PostArray(std::vector<Vec2> centers, double radius_um, Rect bounds,
                     LateralBoundary lateral, double gap_um)
    : centers_(std::move(centers)), radius_(radius_um), bounds_(bounds), lateral_(lateral), gap_(gap_um) {
  if (!(bounds_.width() > 0.0 && bounds_.height() > 0.0)) throw ConfigError("empty domain");
  if (!(gap_ > 0.0)) throw ConfigError("characteristic gap must be positive");
  build_buckets();
}

void PostArray::build_buckets() {
  bucket_size_ = 2.0 * radius_ + gap_;
  bx_ = std::max(1, static_cast<int>(std::ceil(bounds_.width() / bucket_size_)));
  by_ = std::max(1, static_cast<int>(std::ceil(bounds_.height() / bucket_size_)));
  buckets_.assign(static_cast<std::size_t>(bx_) * by_, {});
  for (std::size_t k = 0; k < centers_.size(); ++k) {
    const Vec2 c = wrap(centers_[k]);
    const int i = std::clamp(static_cast<int>((c.x - bounds_.x0) / bucket_size_), 0, bx_ - 1);
    const int j = std::clamp(static_cast<int>((c.y - bounds_.y0) / bucket_size_), 0, by_ - 1);
    buckets_[static_cast<std::size_t>(i) * by_ + j].push_back(static_cast<int>(k));
  }
}

Vec2 PostArray::wrap(Vec2 p) const {
  if (lateral_ != LateralBoundary::Periodic) return p;
  const double h = bounds_.height();
  double y = std::fmod(p.y - bounds_.y0, h);
  if (y < 0.0) y += h;
  if (y >= h) y -= h;
  return {p.x, bounds_.y0 + y};
}

double PostArray::lateral_distance(double dy) const {
  if (lateral_ != LateralBoundary::Periodic) return dy;
  const double h = bounds_.height();
  return dy - h * std::round(dy / h);
}

std::optional<SurfaceHit> PostArray::nearest_post(Vec2 p, double search_um) const {
  if (centers_.empty()) return std::nullopt;
  const Vec2 q = wrap(p);
  const double reach = search_um + radius_;
  const int i0 = std::max(0, static_cast<int>(std::floor((q.x - reach - bounds_.x0) / bucket_size_)));
  const int i1 = std::min(bx_ - 1, static_cast<int>(std::floor((q.x + reach - bounds_.x0) / bucket_size_)));
  int j0 = static_cast<int>(std::floor((q.y - reach - bounds_.y0) / bucket_size_));
  int j1 = static_cast<int>(std::floor((q.y + reach - bounds_.y0) / bucket_size_));
  if (lateral_ == LateralBoundary::Periodic) {
    if (j1 - j0 + 1 >= by_) {
      j0 = 0;
      j1 = by_ - 1;
    }
  } else {
    j0 = std::max(j0, 0);
    j1 = std::min(j1, by_ - 1);
  }

  std::optional<SurfaceHit> best;
  for (int i = i0; i <= i1; ++i) {
    for (int jj = j0; jj <= j1; ++jj) {
      const int j = lateral_ == LateralBoundary::Periodic ? ((jj % by_) + by_) % by_ : jj;
      for (int k : buckets_[static_cast<std::size_t>(i) * by_ + j]) {
        const Vec2 c = centers_[static_cast<std::size_t>(k)];
        const Vec2 d{q.x - c.x, lateral_distance(q.y - c.y)};
        const double r = d.norm();
        const double dist = r - radius_;
        if (dist > search_um) continue;
        if (!best || dist < best->distance_um) {
          const Vec2 n = r > 0.0 ? d / r : Vec2{-1.0, 0.0};
          best = SurfaceHit{dist, n, true};
        }
      }
    }
  }
  return best;
}

bool PostArray::inside_post(Vec2 p, double inflate_um) const {
  const auto hit = nearest_post(p, inflate_um);
  return hit && hit->distance_um < inflate_um;
}

std::optional<SurfaceHit> PostArray::nearest_wall(Vec2 p) const {
  if (lateral_ == LateralBoundary::Periodic) return std::nullopt;
  const double below = p.y - bounds_.y0;
  const double above = bounds_.y1 - p.y;
  if (below <= above) return SurfaceHit{below, {0.0, 1.0}, false};
  return SurfaceHit{above, {0.0, -1.0}, false};
}

void to_json(nlohmann::json& j, const DldDesign& d) {
  j = nlohmann::json{{"d_p_um", d.post_diameter_um},
                     {"g_um", d.gap_um},
                     {"n", d.period},
                     {"m_columns", d.n_columns},
                     {"n_rows", d.rows()},
                     {"margins_um", {d.inlet_margin_um, d.outlet_margin_um}},
                     {"lateral", to_string(d.lateral)}};
}

void from_json(const nlohmann::json& j, DldDesign& d) {
  static const std::vector<std::string> known = {"d_p_um", "g_um", "n", "m_columns", "n_rows",
                                                 "margins_um", "lateral"};
  if (!j.is_object()) throw ConfigError("design must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("unknown design key '" + key + "'");
    }
  }
  try {
    DldDesign out;
    out.post_diameter_um = j.value("d_p_um", out.post_diameter_um);
    out.gap_um = j.value("g_um", out.gap_um);
    out.period = j.value("n", out.period);
    out.n_columns = j.value("m_columns", out.n_columns);
    if (j.contains("n_rows")) out.n_rows = j.at("n_rows").get<int>();
    if (j.contains("margins_um")) {
      const auto& m = j.at("margins_um");
      if (m.is_number()) {
        out.inlet_margin_um = out.outlet_margin_um = m.get<double>();
      } else {
        if (!m.is_array() || m.size() != 2) throw ConfigError("margins_um must be a number or [inlet, outlet]");
        out.inlet_margin_um = m[0].get<double>();
        out.outlet_margin_um = m[1].get<double>();
      }
    }
    if (j.contains("lateral")) out.lateral = lateral_boundary_from_string(j.at("lateral").get<std::string>());
    d = out;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed design: ") + e.what());
  }
}

}  // namespace dld
