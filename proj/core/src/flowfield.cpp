#include "dld/flowfield.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <ostream>
#include <sstream>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <nlohmann/json.hpp>

#include "dld/io.hpp"
#include "dld/svg.hpp"
#include "json_keys.hpp"

namespace dld {

void FluidProperties::validate() const {
  if (!(density > 0.0)) throw ConfigError("fluid density must be positive");
  if (!(viscosity > 0.0)) throw ConfigError("fluid viscosity must be positive");
}

void SolverConfig::validate() const {
  if (!(reynolds >= 0.0)) throw ConfigError("Reynolds number must be >= 0");
  if (cells_per_gap < 8) {
    throw ConfigError("cells_per_gap must be >= 8, got " + std::to_string(cells_per_gap));
  }
  if (!(tolerance > 0.0)) throw ConfigError("solver tolerance must be positive");
  if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
}

double inlet_velocity_from_reynolds(double re, const FluidProperties& fluid, double gap_um) {
  if (!(re >= 0.0)) throw DomainError("Reynolds number must be >= 0");
  fluid.validate();
  if (!(gap_um > 0.0)) throw DomainError("gap must be positive");
  return re * fluid.viscosity / (fluid.density * gap_um * kMicron);
}

FlowField::FlowField(PostArray geometry, FluidProperties fluid, double h_um, int nx, int ny,
                     double inlet_velocity)
    : geometry_(std::move(geometry)),
      fluid_(fluid),
      h_(h_um),
      nx_(nx),
      ny_(ny),
      inlet_velocity_(inlet_velocity),
      u_(static_cast<std::size_t>(nx + 1) * ny, 0.0),
      v_(static_cast<std::size_t>(nx) * (ny + 1), 0.0),
      p_(static_cast<std::size_t>(nx) * ny, 0.0),
      solid_(static_cast<std::size_t>(nx) * ny, 0) {}

Vec2 FlowField::sample(Vec2 point_um) const {
  const Rect& b = geometry_.bounds();
  const double x = point_um.x - b.x0;
  double y = point_um.y - b.y0;
  const double lx = nx_ * h_;
  const double ly = ny_ * h_;
  if (!(x >= 0.0 && x <= lx)) throw DomainError("sample point outside domain (x)");
  if (periodic()) {
    y = std::fmod(y, ly);
    if (y < 0.0) y += ly;
  } else if (!(y >= 0.0 && y <= ly)) {
    throw DomainError("sample point outside domain (y)");
  }

  const int ci = std::min(static_cast<int>(x / h_), nx_ - 1);
  const int cj = std::min(static_cast<int>(y / h_), ny_ - 1);
  // Stair-step cells poke slightly outside the true post outline. Only points
  // inside the post itself are pinned to zero; elsewhere the interpolated
  // near-wall velocity keeps tracers from stalling on a cell corner.
  if (solid(ci, cj) && geometry_.inside_post(point_um)) return {0.0, 0.0};

  // u at (i h, (j + 1/2) h); mirrored ghosts below/above walls.
  auto u_at = [&](int i, int j) {
    if (periodic()) return u(i, ((j % ny_) + ny_) % ny_);
    if (j < 0) return -u(i, 0);
    if (j >= ny_) return -u(i, ny_ - 1);
    return u(i, j);
  };
  // v at ((i + 1/2) h, j h); mirrored ghost at the inlet, copied at the outlet.
  auto v_at = [&](int i, int j) {
    if (periodic()) j = ((j % ny_) + ny_) % ny_;
    if (i < 0) return -v(0, j);
    if (i >= nx_) return v(nx_ - 1, j);
    return v(i, j);
  };

  Vec2 out;
  {
    const double fx = x / h_;
    const double fy = y / h_ - 0.5;
    const int i0 = std::min(static_cast<int>(std::floor(fx)), nx_ - 1);
    const int j0 = static_cast<int>(std::floor(fy));
    const double tx = fx - i0;
    const double ty = fy - j0;
    out.x = (1 - tx) * (1 - ty) * u_at(i0, j0) + tx * (1 - ty) * u_at(i0 + 1, j0) +
            (1 - tx) * ty * u_at(i0, j0 + 1) + tx * ty * u_at(i0 + 1, j0 + 1);
  }
  {
    const double fx = x / h_ - 0.5;
    const double fy = y / h_;
    const int i0 = static_cast<int>(std::floor(fx));
    const int j0 = std::min(static_cast<int>(std::floor(fy)), ny_ - 1);
    const double tx = fx - i0;
    const double ty = fy - j0;
    out.y = (1 - tx) * (1 - ty) * v_at(i0, j0) + tx * (1 - ty) * v_at(i0 + 1, j0) +
            (1 - tx) * ty * v_at(i0, j0 + 1) + tx * ty * v_at(i0 + 1, j0 + 1);
  }
  return out;
}

Vec2 FlowField::cell_velocity(int i, int j) const {
  return {0.5 * (u(i, j) + u(i + 1, j)), 0.5 * (v(i, j) + v(i, j + 1))};
}

double FlowField::divergence_norm() const {
  if (inlet_velocity_ == 0.0) return 0.0;
  const double scale = geometry_.gap_um() / h_ / inlet_velocity_;
  double worst = 0.0;
  for (int i = 0; i < nx_; ++i) {
    for (int j = 0; j < ny_; ++j) {
      if (solid(i, j)) continue;
      const double div = u(i + 1, j) - u(i, j) + v(i, j + 1) - v(i, j);
      worst = std::max(worst, std::abs(div) * scale);
    }
  }
  return worst;
}

double FlowField::flux_through_face_line(int i) const {
  double q = 0.0;
  for (int j = 0; j < ny_; ++j) q += u(i, j);
  return q * h_ * kMicron;
}

namespace {

constexpr int kFixed = -1;

/// Unknown numbering and assembly for the coupled MAC Stokes operator.
///
/// Everything is nondimensional: length unit h, velocity unit U, pressure
/// unit mu U / h. Momentum rows read  -lap(u) + grad(p) = f - Re_h (u.grad)u,
/// continuity rows read  -div(u) = 0.
class MacSystem {
 public:
  MacSystem(int nx, int ny, bool periodic, const std::vector<std::uint8_t>& solid)
      : nx_(nx), ny_(ny), periodic_(periodic), solid_(solid) {
    u_id_.assign(static_cast<std::size_t>(nx + 1) * ny, kFixed);
    v_id_.assign(static_cast<std::size_t>(nx) * (ny + 1), kFixed);
    p_id_.assign(static_cast<std::size_t>(nx) * ny, kFixed);
    int n = 0;
    for (int i = 0; i <= nx; ++i) {
      for (int j = 0; j < ny; ++j) {
        if (u_active(i, j)) uid(i, j) = n++;
      }
    }
    n_u_ = n;
    for (int i = 0; i < nx; ++i) {
      for (int j = 0; j <= ny; ++j) {
        if (v_active(i, j)) vid(i, j) = n++;
      }
    }
    n_vel_ = n;
    for (int i = 0; i < nx; ++i) {
      for (int j = 0; j < ny; ++j) {
        if (!is_solid(i, j)) pid(i, j) = n++;
      }
    }
    n_ = n;
  }

  [[nodiscard]] int size() const { return n_; }
  [[nodiscard]] int velocity_unknowns() const { return n_vel_; }

  [[nodiscard]] bool is_solid(int i, int j) const { return solid_[static_cast<std::size_t>(i) * ny_ + j] != 0; }
  int& uid(int i, int j) { return u_id_[static_cast<std::size_t>(i) * ny_ + j]; }
  [[nodiscard]] int uid(int i, int j) const { return u_id_[static_cast<std::size_t>(i) * ny_ + j]; }
  int& vid(int i, int j) { return v_id_[static_cast<std::size_t>(i) * (ny_ + 1) + j]; }
  [[nodiscard]] int vid(int i, int j) const { return v_id_[static_cast<std::size_t>(i) * (ny_ + 1) + j]; }
  int& pid(int i, int j) { return p_id_[static_cast<std::size_t>(i) * ny_ + j]; }
  [[nodiscard]] int pid(int i, int j) const { return p_id_[static_cast<std::size_t>(i) * ny_ + j]; }

  [[nodiscard]] int wrap_j(int j) const { return ((j % ny_) + ny_) % ny_; }

  /// Inlet faces are Dirichlet; outlet faces carry a pressure-outlet equation.
  [[nodiscard]] bool u_active(int i, int j) const {
    if (i == 0) return false;
    if (i == nx_) return !is_solid(nx_ - 1, j);
    return !is_solid(i - 1, j) && !is_solid(i, j);
  }

  [[nodiscard]] bool v_active(int i, int j) const {
    if (periodic_) {
      if (j == ny_) return false;  // alias of j = 0
      return !is_solid(i, wrap_j(j - 1)) && !is_solid(i, j);
    }
    if (j == 0 || j == ny_) return false;
    return !is_solid(i, j - 1) && !is_solid(i, j);
  }

  /// Fixed value of an inactive u face (nondimensional).
  [[nodiscard]] double u_fixed(int i, int j) const {
    return (i == 0 && !is_solid(0, j)) ? 1.0 : 0.0;
  }

  Eigen::SparseMatrix<double> assemble() const {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(n_) * 7);

    // u momentum
    for (int i = 1; i <= nx_; ++i) {
      for (int j = 0; j < ny_; ++j) {
        const int row = uid(i, j);
        if (row < 0) continue;
        double diag = 0.0;
        // x neighbours
        {
          const int w = uid(i - 1, j);
          diag += 1.0;
          if (w >= 0) t.emplace_back(row, w, -1.0);
          if (i < nx_) {
            const int e = uid(i + 1, j);
            diag += 1.0;
            if (e >= 0) t.emplace_back(row, e, -1.0);
          }
        }
        // y neighbours
        for (int dj : {-1, 1}) {
          int jn = j + dj;
          if (periodic_) {
            jn = wrap_j(jn);
          } else if (jn < 0 || jn >= ny_) {
            diag += 2.0;  // wall ghost
            continue;
          }
          const int nb = uid(i, jn);
          if (nb >= 0) {
            diag += 1.0;
            t.emplace_back(row, nb, -1.0);
          } else {
            diag += 2.0;  // stair-step wall ghost
          }
        }
        t.emplace_back(row, row, diag);
        if (i < nx_) {
          t.emplace_back(row, pid(i, j), 1.0);
          t.emplace_back(row, pid(i - 1, j), -1.0);
        } else {
          t.emplace_back(row, pid(i - 1, j), -2.0);
        }
      }
    }

    // v momentum
    for (int i = 0; i < nx_; ++i) {
      for (int j = 0; j <= ny_; ++j) {
        const int row = vid(i, j);
        if (row < 0) continue;
        double diag = 0.0;
        for (int di : {-1, 1}) {
          const int in = i + di;
          if (in < 0) {
            diag += 2.0;  // v = 0 on the inlet line
            continue;
          }
          if (in >= nx_) continue;  // zero normal gradient at the outlet
          const int nb = vid(in, j);
          if (nb >= 0) {
            diag += 1.0;
            t.emplace_back(row, nb, -1.0);
          } else {
            diag += 2.0;
          }
        }
        for (int dj : {-1, 1}) {
          int jn = j + dj;
          if (periodic_) jn = wrap_j(jn);
          const int nb = (jn >= 0 && jn <= ny_) ? vid(i, jn) : kFixed;
          diag += 1.0;
          if (nb >= 0) t.emplace_back(row, nb, -1.0);
        }
        t.emplace_back(row, row, diag);
        const int jlo = periodic_ ? wrap_j(j - 1) : j - 1;
        t.emplace_back(row, pid(i, periodic_ ? wrap_j(j) : j), 1.0);
        t.emplace_back(row, pid(i, jlo), -1.0);
      }
    }

    // continuity
    for (int i = 0; i < nx_; ++i) {
      for (int j = 0; j < ny_; ++j) {
        const int row = pid(i, j);
        if (row < 0) continue;
        if (const int w = uid(i, j); w >= 0) t.emplace_back(row, w, 1.0);
        if (const int e = uid(i + 1, j); e >= 0) t.emplace_back(row, e, -1.0);
        if (const int s = vid(i, j); s >= 0) t.emplace_back(row, s, 1.0);
        const int jn = periodic_ ? wrap_j(j + 1) : j + 1;
        if (const int n = vid(i, jn); n >= 0) t.emplace_back(row, n, -1.0);
      }
    }

    Eigen::SparseMatrix<double> a(n_, n_);
    a.setFromTriplets(t.begin(), t.end());
    a.makeCompressed();
    return a;
  }

  /// Columns [i0, i1) that carry the flux-balancing lateral force.
  void set_lateral_window(int i0, int i1) {
    win0_ = std::clamp(i0, 0, nx_);
    win1_ = std::clamp(i1, win0_, nx_);
  }

  /// Right-hand side for body force (fx, fy), explicit convection and an
  /// extra lateral force `fy_window` confined to the lateral window. Without
  /// `inflow` the inlet data is left out, giving a pure forcing response.
  [[nodiscard]] Eigen::VectorXd rhs(double fx, double fy, const std::vector<double>& conv_u,
                                    const std::vector<double>& conv_v, double fy_window = 0.0,
                                    bool inflow = true) const {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n_);
    for (int i = 1; i <= nx_; ++i) {
      for (int j = 0; j < ny_; ++j) {
        const int row = uid(i, j);
        if (row < 0) continue;
        double r = fx - conv_u[static_cast<std::size_t>(i) * ny_ + j];
        if (inflow && uid(i - 1, j) < 0) r += u_fixed(i - 1, j);
        b[row] = r;
      }
    }
    for (int i = 0; i < nx_; ++i) {
      for (int j = 0; j <= ny_; ++j) {
        const int row = vid(i, j);
        if (row < 0) continue;
        const double extra = i >= win0_ && i < win1_ ? fy_window : 0.0;
        b[row] = fy + extra - conv_v[static_cast<std::size_t>(i) * (ny_ + 1) + j];
      }
    }
    for (int i = 0; i < nx_; ++i) {
      for (int j = 0; j < ny_; ++j) {
        const int row = pid(i, j);
        if (row < 0) continue;
        if (inflow && uid(i, j) < 0) b[row] -= u_fixed(i, j);
      }
    }
    return b;
  }

  /// Scatters a solution into full face/cell arrays (nondimensional).
  void scatter(const Eigen::VectorXd& x, std::vector<double>& u, std::vector<double>& v,
               std::vector<double>& p) const {
    u.assign(static_cast<std::size_t>(nx_ + 1) * ny_, 0.0);
    v.assign(static_cast<std::size_t>(nx_) * (ny_ + 1), 0.0);
    p.assign(static_cast<std::size_t>(nx_) * ny_, 0.0);
    for (int i = 0; i <= nx_; ++i) {
      for (int j = 0; j < ny_; ++j) {
        const int id = uid(i, j);
        u[static_cast<std::size_t>(i) * ny_ + j] = id >= 0 ? x[id] : u_fixed(i, j);
      }
    }
    for (int i = 0; i < nx_; ++i) {
      for (int j = 0; j <= ny_; ++j) {
        const int id = periodic_ && j == ny_ ? vid(i, 0) : vid(i, j);
        v[static_cast<std::size_t>(i) * (ny_ + 1) + j] = id >= 0 ? x[id] : 0.0;
      }
    }
    for (int i = 0; i < nx_; ++i) {
      for (int j = 0; j < ny_; ++j) {
        const int id = pid(i, j);
        p[static_cast<std::size_t>(i) * ny_ + j] = id >= 0 ? x[id] : 0.0;
      }
    }
  }

  /// Sum of v over unknown faces in the lateral window: proportional to the
  /// net lateral flux there.
  [[nodiscard]] double lateral_flux(const Eigen::VectorXd& x) const {
    double sum = 0.0;
    for (int i = win0_; i < win1_; ++i) {
      for (int j = 0; j <= ny_; ++j) {
        const int id = vid(i, j);
        if (id >= 0) sum += x[id];
      }
    }
    return sum;
  }

  /// Convective term (u.grad)u at faces with central differences.
  void convection(const std::vector<double>& u, const std::vector<double>& v, double re_h,
                  std::vector<double>& cu, std::vector<double>& cv) const {
    cu.assign(u.size(), 0.0);
    cv.assign(v.size(), 0.0);
    if (re_h == 0.0) return;
    auto U = [&](int i, int j) {
      i = std::clamp(i, 0, nx_);
      if (periodic_) j = wrap_j(j);
      else if (j < 0 || j >= ny_) return 0.0;
      return u[static_cast<std::size_t>(i) * ny_ + j];
    };
    auto V = [&](int i, int j) {
      i = std::clamp(i, 0, nx_ - 1);
      if (periodic_) j = wrap_j(j);
      else if (j < 0 || j > ny_) return 0.0;
      return v[static_cast<std::size_t>(i) * (ny_ + 1) + j];
    };
    for (int i = 1; i <= nx_; ++i) {
      for (int j = 0; j < ny_; ++j) {
        if (uid(i, j) < 0) continue;
        const double uc = U(i, j);
        const double vc = 0.25 * (V(i - 1, j) + V(i, j) + V(i - 1, j + 1) + V(i, j + 1));
        const double dudx = 0.5 * (U(i + 1, j) - U(i - 1, j));
        const double dudy = 0.5 * (U(i, j + 1) - U(i, j - 1));
        cu[static_cast<std::size_t>(i) * ny_ + j] = re_h * (uc * dudx + vc * dudy);
      }
    }
    for (int i = 0; i < nx_; ++i) {
      for (int j = 0; j <= ny_; ++j) {
        if (vid(i, j) < 0) continue;
        const double vc = V(i, j);
        const double uc = 0.25 * (U(i, j - 1) + U(i + 1, j - 1) + U(i, j) + U(i + 1, j));
        const double dvdx = 0.5 * (V(i + 1, j) - V(i - 1, j));
        const double dvdy = 0.5 * (V(i, j + 1) - V(i, j - 1));
        cv[static_cast<std::size_t>(i) * (ny_ + 1) + j] = re_h * (uc * dvdx + vc * dvdy);
      }
    }
  }

 private:
  int nx_;
  int ny_;
  bool periodic_;
  const std::vector<std::uint8_t>& solid_;
  std::vector<int> u_id_;
  std::vector<int> v_id_;
  std::vector<int> p_id_;
  int n_u_ = 0;
  int n_vel_ = 0;
  int n_ = 0;
  int win0_ = 0;
  int win1_ = 0;
};

/// Marks fluid cells not connected to the inlet column as solid.
void seal_unreachable_cells(int nx, int ny, bool periodic, std::vector<std::uint8_t>& solid) {
  std::vector<std::uint8_t> seen(solid.size(), 0);
  std::deque<std::pair<int, int>> queue;
  for (int j = 0; j < ny; ++j) {
    if (!solid[static_cast<std::size_t>(j)]) {
      seen[static_cast<std::size_t>(j)] = 1;
      queue.emplace_back(0, j);
    }
  }
  while (!queue.empty()) {
    const auto [i, j] = queue.front();
    queue.pop_front();
    const std::pair<int, int> nbs[4] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
    for (auto [a, b] : nbs) {
      if (a < 0 || a >= nx) continue;
      if (periodic) b = ((b % ny) + ny) % ny;
      else if (b < 0 || b >= ny) continue;
      const std::size_t k = static_cast<std::size_t>(a) * ny + b;
      if (solid[k] || seen[k]) continue;
      seen[k] = 1;
      queue.emplace_back(a, b);
    }
  }
  for (std::size_t k = 0; k < solid.size(); ++k) {
    if (!seen[k]) solid[k] = 1;
  }
}

}  // namespace

FlowField solve_steady_flow(const PostArray& array, const FluidProperties& fluid, const SolverConfig& config) {
  config.validate();
  fluid.validate();
  const Rect& b = array.bounds();
  const double gap = array.gap_um();
  const bool periodic = array.lateral() == LateralBoundary::Periodic;

  const int ny = std::max(2, static_cast<int>(std::lround(b.height() * config.cells_per_gap / gap)));
  const double h = b.height() / ny;
  const int nx = std::max(2, static_cast<int>(std::lround(b.width() / h)));

  const double velocity = inlet_velocity_from_reynolds(config.reynolds, fluid, gap);
  FlowField field(array, fluid, h, nx, ny, velocity);

  std::vector<std::uint8_t> solid(static_cast<std::size_t>(nx) * ny, 0);
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      const Vec2 c{b.x0 + (i + 0.5) * h, b.y0 + (j + 0.5) * h};
      solid[static_cast<std::size_t>(i) * ny + j] = array.inside_post(c) ? 1 : 0;
    }
  }
  seal_unreachable_cells(nx, ny, periodic, solid);
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) field.set_solid(i, j, solid[static_cast<std::size_t>(i) * ny + j] != 0);
  }
  if (velocity == 0.0 && fluid.body_force == Vec2{}) {
    field.report = ConvergenceReport{0, 0.0, 0.0};
    return field;
  }

  MacSystem sys(nx, ny, periodic, solid);
  // Balance the lateral flux over the post region only. The open margins offer
  // almost no lateral resistance and would otherwise absorb the whole force.
  if (array.array_x_end > array.array_x_begin) {
    sys.set_lateral_window(static_cast<int>(std::lround((array.array_x_begin - b.x0) / h)),
                           static_cast<int>(std::lround((array.array_x_end - b.x0) / h)));
  } else {
    sys.set_lateral_window(0, nx);
  }
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(sys.assemble());
  if (lu.info() != Eigen::Success) throw SolverError("sparse factorization of the flow operator failed");
  auto solve = [&](const Eigen::VectorXd& rhs) -> Eigen::VectorXd { return lu.solve(rhs); };

  // Nondimensional scales. With zero inlet flow the body force sets the scale.
  const double h_m = h * kMicron;
  const double u_scale = velocity > 0.0 ? velocity : 1.0;
  const double force_scale = h_m * h_m / (fluid.viscosity * u_scale);
  const double fx = fluid.body_force.x * force_scale;
  const double fy = fluid.body_force.y * force_scale;
  const double re_h = fluid.density * u_scale * h_m / fluid.viscosity;
  const bool balance = periodic && config.zero_mean_lateral_flux;

  std::vector<double> u_nd;
  std::vector<double> v_nd;
  std::vector<double> p_nd;
  std::vector<double> cu(static_cast<std::size_t>(nx + 1) * ny, 0.0);
  std::vector<double> cv(static_cast<std::size_t>(nx) * (ny + 1), 0.0);

  Eigen::VectorXd unit_lateral;
  if (balance) {
    const std::vector<double> zu(cu.size(), 0.0);
    const std::vector<double> zv(cv.size(), 0.0);
    unit_lateral = solve(sys.rhs(0.0, 0.0, zu, zv, 1.0, false));
  }

  Eigen::VectorXd x = Eigen::VectorXd::Zero(sys.size());
  double residual = 0.0;
  double lateral_force_nd = 0.0;
  double relax = 1.0;
  double previous_residual = std::numeric_limits<double>::infinity();
  int iter = 0;
  const bool linear = re_h == 0.0;
  for (iter = 1; iter <= config.max_iterations; ++iter) {
    Eigen::VectorXd next = solve(sys.rhs(fx, fy, cu, cv));
    if (balance) {
      const double denom = sys.lateral_flux(unit_lateral);
      const double phi = denom != 0.0 ? -sys.lateral_flux(next) / denom : 0.0;
      next += phi * unit_lateral;
      lateral_force_nd = phi;
    }
    if (iter > 1) next = x + relax * (next - x);
    residual = iter == 1 ? std::numeric_limits<double>::infinity()
                         : (next.head(sys.velocity_unknowns()) - x.head(sys.velocity_unknowns()))
                               .lpNorm<Eigen::Infinity>();
    x = std::move(next);
    if (linear) {
      residual = 0.0;
      break;
    }
    if (residual < config.tolerance) break;
    if (iter > 2 && residual > previous_residual) relax = std::max(0.125, 0.5 * relax);
    previous_residual = residual;
    sys.scatter(x, u_nd, v_nd, p_nd);
    sys.convection(u_nd, v_nd, re_h, cu, cv);
  }
  if (!linear && residual >= config.tolerance) {
    std::ostringstream msg;
    msg << "flow solve did not converge in " << config.max_iterations << " iterations (residual "
        << residual << ")";
    throw SolverError(msg.str());
  }

  sys.scatter(x, u_nd, v_nd, p_nd);
  const double p_scale = fluid.viscosity * u_scale / h_m;
  for (int i = 0; i <= nx; ++i) {
    for (int j = 0; j < ny; ++j) field.u(i, j) = u_nd[static_cast<std::size_t>(i) * ny + j] * u_scale;
  }
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j <= ny; ++j) field.v(i, j) = v_nd[static_cast<std::size_t>(i) * (ny + 1) + j] * u_scale;
    for (int j = 0; j < ny; ++j) field.p(i, j) = p_nd[static_cast<std::size_t>(i) * ny + j] * p_scale;
  }
  // The inlet value was nondimensionalised by the velocity scale.
  if (velocity == 0.0) {
    for (int j = 0; j < ny; ++j) field.u(0, j) = 0.0;
  }
  field.report = ConvergenceReport{std::min(iter, config.max_iterations), linear ? 0.0 : residual,
                                   balance ? lateral_force_nd / force_scale : 0.0};
  return field;
}

void to_json(nlohmann::json& j, const FluidProperties& f) {
  j = nlohmann::json{{"density", f.density},
                     {"viscosity", f.viscosity},
                     {"body_force", {f.body_force.x, f.body_force.y}}};
}

void from_json(const nlohmann::json& j, FluidProperties& f) {
  detail::check_keys(j, {"density", "viscosity", "body_force"}, "fluid");
  FluidProperties out;
  detail::read_opt(j, "density", out.density, "fluid");
  detail::read_opt(j, "viscosity", out.viscosity, "fluid");
  if (j.contains("body_force")) {
    std::vector<double> bf;
    detail::read_opt(j, "body_force", bf, "fluid");
    if (bf.size() != 2) throw ConfigError("fluid.body_force must be [fx, fy]");
    out.body_force = {bf[0], bf[1]};
  }
  out.validate();
  f = out;
}

void to_json(nlohmann::json& j, const SolverConfig& c) {
  j = nlohmann::json{{"reynolds", c.reynolds},
                     {"cells_per_gap", c.cells_per_gap},
                     {"tolerance", c.tolerance},
                     {"max_iterations", c.max_iterations},
                     {"zero_mean_lateral_flux", c.zero_mean_lateral_flux}};
}

void from_json(const nlohmann::json& j, SolverConfig& c) {
  detail::check_keys(j, {"reynolds", "cells_per_gap", "tolerance", "max_iterations", "zero_mean_lateral_flux"},
                     "solver");
  SolverConfig out;
  detail::read_opt(j, "reynolds", out.reynolds, "solver");
  detail::read_opt(j, "cells_per_gap", out.cells_per_gap, "solver");
  detail::read_opt(j, "tolerance", out.tolerance, "solver");
  detail::read_opt(j, "max_iterations", out.max_iterations, "solver");
  detail::read_opt(j, "zero_mean_lateral_flux", out.zero_mean_lateral_flux, "solver");
  out.validate();
  c = out;
}

void write_field_csv(const FlowField& field, std::ostream& out) {
  const Rect& b = field.geometry().bounds();
  out << "x_um,y_um,u_mps,v_mps,p_pa,solid\n";
  for (int i = 0; i < field.nx(); ++i) {
    for (int j = 0; j < field.ny(); ++j) {
      const Vec2 vel = field.cell_velocity(i, j);
      out << format_double(b.x0 + (i + 0.5) * field.h_um()) << ',' << format_double(b.y0 + (j + 0.5) * field.h_um())
          << ',' << format_double(vel.x) << ',' << format_double(vel.y) << ',' << format_double(field.p(i, j)) << ','
          << (field.solid(i, j) ? 1 : 0) << '\n';
    }
  }
}

void write_field_svg(const FlowField& field, std::ostream& out, int max_pixels) {
  if (max_pixels < 1) throw ConfigError("max_pixels must be positive");
  const Rect& b = field.geometry().bounds();
  const int nmax = std::max(field.nx(), field.ny());
  const int block = std::max(1, (nmax + max_pixels - 1) / max_pixels);
  const double aspect = b.height() / b.width();
  const double width = 1000.0;
  const double height = std::clamp(width * aspect, 160.0, 1000.0) + 96.0;
  SvgPlot plot(width, height, b.x0, b.x1, b.y0, b.y1);

  double vmax = 0.0;
  for (int i = 0; i < field.nx(); ++i) {
    for (int j = 0; j < field.ny(); ++j) vmax = std::max(vmax, field.cell_velocity(i, j).norm());
  }
  const double h = field.h_um();
  for (int i = 0; i < field.nx(); i += block) {
    for (int j = 0; j < field.ny(); j += block) {
      double sum = 0.0;
      int count = 0;
      for (int a = i; a < std::min(i + block, field.nx()); ++a) {
        for (int c = j; c < std::min(j + block, field.ny()); ++c) {
          sum += field.cell_velocity(a, c).norm();
          ++count;
        }
      }
      const double speed = sum / count;
      const double x1 = b.x0 + std::min(i + block, field.nx()) * h;
      const double y1 = b.y0 + std::min(j + block, field.ny()) * h;
      plot.rect(b.x0 + i * h, b.y0 + j * h, x1, y1, ramp_color(vmax > 0.0 ? speed / vmax : 0.0));
    }
  }
  const int images = field.periodic() ? 1 : 0;
  for (const Vec2& c : field.geometry().centers()) {
    for (int k = -images; k <= images; ++k) {
      plot.circle(c.x, c.y + k * b.height(), field.geometry().radius_um(), "#dddddd", "#222222");
    }
  }
  plot.axes("x (um)", "y (um)");
  plot.title("speed |u| (max " + format_double(std::round(vmax * 1e6) / 1e3) + " mm/s)");
  out << plot.str();
}

}  // namespace dld
