#include "jointbe/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "jointbe/error.hpp"

namespace jointbe {

namespace {

// Component of the contact force vector fed by a displacement direction.
int component_of(int direction) { return direction == 2 ? kNormal : (direction == 0 ? kTangent1 : kTangent2); }

std::unordered_map<int, int> boundary_rows(const ReducedModel& rom) {
  std::unordered_map<int, int> row;
  for (int i = 0; i < rom.n_boundary; ++i) row[rom.boundary_dofs[static_cast<std::size_t>(i)]] = i;
  return row;
}

int row_of(const std::unordered_map<int, int>& rows, int dof) {
  const auto it = rows.find(dof);
  if (it == rows.end()) {
    throw Error(ErrorCategory::input,
                "coupling: interface DOF " + std::to_string(dof) + " is not a boundary DOF of the reduced model");
  }
  return it->second;
}

}  // namespace

std::array<double, 4> bilinear_weights(const std::array<Point2, 4>& c, Point2 p) {
  // Inverse isoparametric map by Newton iteration; one step for rectangles.
  double s = 0.0, t = 0.0;
  double size = 0.0;
  for (int i = 0; i < 4; ++i) size = std::max(size, std::hypot(c[i].x - c[(i + 2) % 4].x, c[i].y - c[(i + 2) % 4].y));
  for (int it = 0; it < 50; ++it) {
    const double n[4] = {0.25 * (1 - s) * (1 - t), 0.25 * (1 + s) * (1 - t), 0.25 * (1 + s) * (1 + t),
                         0.25 * (1 - s) * (1 + t)};
    const double ds[4] = {-0.25 * (1 - t), 0.25 * (1 - t), 0.25 * (1 + t), -0.25 * (1 + t)};
    const double dt[4] = {-0.25 * (1 - s), -0.25 * (1 + s), 0.25 * (1 + s), 0.25 * (1 - s)};
    double x = 0, y = 0, xs = 0, xt = 0, ys = 0, yt = 0;
    for (int i = 0; i < 4; ++i) {
      x += n[i] * c[i].x;
      y += n[i] * c[i].y;
      xs += ds[i] * c[i].x;
      xt += dt[i] * c[i].x;
      ys += ds[i] * c[i].y;
      yt += dt[i] * c[i].y;
    }
    const double rx = p.x - x, ry = p.y - y;
    const double det = xs * yt - xt * ys;
    if (!(std::abs(det) > 0.0)) throw Error(ErrorCategory::input, "coupling: degenerate interface face");
    const double ds_ = (yt * rx - xt * ry) / det;
    const double dt_ = (-ys * rx + xs * ry) / det;
    s += ds_;
    t += dt_;
    if (std::abs(ds_) + std::abs(dt_) < 1e-12) break;
  }
  const double tol = 2e-9 / std::max(size, 1e-300);
  if (std::abs(s) > 1 + tol || std::abs(t) > 1 + tol) {
    throw Error(ErrorCategory::input, "coupling: point outside face");
  }
  s = std::clamp(s, -1.0, 1.0);
  t = std::clamp(t, -1.0, 1.0);
  return {0.25 * (1 - s) * (1 - t), 0.25 * (1 + s) * (1 - t), 0.25 * (1 + s) * (1 + t),
          0.25 * (1 - s) * (1 + t)};
}

CouplingMap build_coupling(const ReducedModel& rom, const InterfaceMesh& mesh,
                           std::span<const Point2> points, std::span<const int> ids) {
  if (points.size() != ids.size()) throw Error(ErrorCategory::input, "coupling: point and ID counts differ");
  const auto rows = boundary_rows(rom);
  const int np = static_cast<int>(points.size());
  CouplingMap cp;
  cp.point_index.assign(ids.begin(), ids.end());
  cp.face_of_point.assign(points.size(), -1);
  cp.w_b = Mat::Zero(rom.n_boundary, 3 * np);

  // Bounding boxes, scanned in face order so shared edges go to the lowest ID.
  const double tol = 1e-9;
  struct Box { double x0, x1, y0, y1; };
  std::vector<Box> boxes;
  for (const auto& f : mesh.faces) {
    Box b{1e300, -1e300, 1e300, -1e300};
    for (int n : f) {
      const Point2 q = mesh.node_xy[static_cast<std::size_t>(n)];
      b = {std::min(b.x0, q.x), std::max(b.x1, q.x), std::min(b.y0, q.y), std::max(b.y1, q.y)};
    }
    boxes.push_back(b);
  }

  for (int j = 0; j < np; ++j) {
    const Point2 p = points[static_cast<std::size_t>(j)];
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
      const Box& b = boxes[f];
      if (p.x < b.x0 - tol || p.x > b.x1 + tol || p.y < b.y0 - tol || p.y > b.y1 + tol) continue;
      std::array<Point2, 4> corners{};
      for (int a = 0; a < 4; ++a) corners[static_cast<std::size_t>(a)] = mesh.node_xy[static_cast<std::size_t>(mesh.faces[f][static_cast<std::size_t>(a)])];
      std::array<double, 4> w{};
      try {
        w = bilinear_weights(corners, p);
      } catch (const Error&) {
        continue;
      }
      cp.face_of_point[static_cast<std::size_t>(j)] = static_cast<int>(f);
      for (int a = 0; a < 4; ++a) {
        const int node = mesh.faces[f][static_cast<std::size_t>(a)];
        for (int dir = 0; dir < 3; ++dir) {
          const int dof = mesh.node_dofs[static_cast<std::size_t>(node)][static_cast<std::size_t>(dir)];
          if (dof < 0) continue;  // clamped
          cp.w_b(row_of(rows, dof), 3 * j + component_of(dir)) += w[static_cast<std::size_t>(a)];
        }
      }
      break;
    }
    if (cp.face_of_point[static_cast<std::size_t>(j)] < 0) {
      std::ostringstream msg;
      msg << "coupling: BE point " << ids[static_cast<std::size_t>(j)] << " at (" << p.x << ", " << p.y
          << ") lies outside every FE interface face";
      throw Error(ErrorCategory::input, msg.str());
    }
  }
  return cp;
}

CouplingMap node_coupling(const ReducedModel& rom, const InterfaceMesh& mesh) {
  const auto rows = boundary_rows(rom);
  const int np = static_cast<int>(mesh.node_xy.size());
  CouplingMap cp;
  cp.node_based = true;
  cp.w_b = Mat::Zero(rom.n_boundary, 3 * np);
  for (int j = 0; j < np; ++j) {
    cp.point_index.push_back(j);
    cp.face_of_point.push_back(-1);
    for (int dir = 0; dir < 3; ++dir) {
      const int dof = mesh.node_dofs[static_cast<std::size_t>(j)][static_cast<std::size_t>(dir)];
      if (dof >= 0) cp.w_b(row_of(rows, dof), 3 * j + component_of(dir)) = 1.0;
    }
  }
  return cp;
}

Vec CondensedSystem::pattern_for(const Vec& reduced_load) const {
  if (rigid) throw Error(ErrorCategory::input, "condensed system: rigid structures take no FE loads");
  const Vec fb = reduced_load.head(w_b.rows());
  return w_b.transpose() * kbb.solve(fb);
}

Vec CondensedSystem::boundary_displacement(const Vec& lambda, const Vec& f_b) const {
  if (rigid) return Vec::Zero(0);
  return kbb.solve(w_b * lambda + f_b);
}

bool CondensedSystem::direction_separable() const {
  const int n = static_cast<int>(c_star.rows());
  for (int c = 0; c < n; ++c) {
    for (int r = 0; r < n; ++r) {
      if (r % 3 != c % 3 && c_star(r, c) != 0.0) return false;
    }
  }
  return true;
}

namespace {

void fill_geometry(CondensedSystem& cs, std::span<const double> heights,
                   std::span<const Point2> positions, std::span<const double> areas) {
  const int np = cs.point_count();
  if (static_cast<int>(heights.size()) != np || static_cast<int>(positions.size()) != np ||
      static_cast<int>(areas.size()) != np) {
    throw Error(ErrorCategory::input, "condense: heights/positions/areas do not match the point count");
  }
  cs.heights = Vec::Zero(3 * np);
  for (int j = 0; j < np; ++j) {
    if (!std::isfinite(heights[static_cast<std::size_t>(j)])) {
      throw Error(ErrorCategory::input, "condense: non-finite height at a retained point");
    }
    cs.heights(3 * j) = heights[static_cast<std::size_t>(j)];
  }
  cs.positions.assign(positions.begin(), positions.end());
  cs.areas.assign(areas.begin(), areas.end());
}

void add_rigid_patterns(CondensedSystem& cs) {
  const int np = cs.point_count();
  Vec approach = Vec::Zero(3 * np), sx = Vec::Zero(3 * np), sy = Vec::Zero(3 * np);
  for (int j = 0; j < np; ++j) {
    approach(3 * j + kNormal) = -1.0;
    sx(3 * j + kTangent1) = 1.0;
    sy(3 * j + kTangent2) = 1.0;
  }
  cs.patterns["approach"] = approach;
  cs.patterns["slide_x"] = sx;
  cs.patterns["slide_y"] = sy;
}

}  // namespace

CondensedSystem condense_static(const ReducedModel& rom, const CouplingMap& coupling,
                                const ComplianceMatrix& compliance, std::span<const double> heights,
                                std::span<const Point2> positions, std::span<const double> areas,
                                const CondenseOptions& options) {
  const int np = coupling.point_count();
  if (compliance.entries.rows() != 3 * np) {
    throw Error(ErrorCategory::input, "condense: compliance and coupling cover different point sets");
  }
  if (coupling.w_b.rows() != rom.n_boundary) {
    throw Error(ErrorCategory::input, "condense: coupling rows do not match the boundary DOF count");
  }
  CondensedSystem cs;
  cs.point_index = coupling.point_index;
  cs.c_be = compliance.entries;
  fill_geometry(cs, heights, positions, areas);

  if (options.rigid) {
    cs.rigid = true;
    cs.c_star = compliance.entries;
    add_rigid_patterns(cs);
    return cs;
  }

  cs.w_b = coupling.w_b;
  cs.kbb.compute(rom.kbb());
  if (cs.kbb.info() != Eigen::Success) {
    throw Error(ErrorCategory::numerical,
                "condense: reduced boundary stiffness is singular; the structure must be constrained "
                "(supports, bolt) independently of the contact");
  }
  const Mat kinv_w = cs.kbb.solve(coupling.w_b);
  Mat c_star = compliance.entries + coupling.w_b.transpose() * kinv_w;
  cs.c_star = 0.5 * (c_star + c_star.transpose());

  Eigen::LLT<Mat> check(cs.c_star);
  if (check.info() != Eigen::Success) {
    throw Error(ErrorCategory::numerical, "condense: effective compliance C* is not positive definite");
  }
  for (const auto& [name, f] : rom.loads) cs.patterns[name] = cs.pattern_for(f);
  return cs;
}

CondensedSystem condense_rigid(const ComplianceMatrix& compliance, std::span<const double> heights,
                               std::span<const Point2> positions, double element_area) {
  CondensedSystem cs;
  cs.point_index = compliance.point_index;
  cs.rigid = true;
  cs.c_be = compliance.entries;
  cs.c_star = compliance.entries;
  const std::vector<double> areas(compliance.point_index.size(), element_area);
  fill_geometry(cs, heights, positions, areas);
  add_rigid_patterns(cs);
  return cs;
}

}  // namespace jointbe
