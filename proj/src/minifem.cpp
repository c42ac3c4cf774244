#include "jointbe/minifem.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "jointbe/error.hpp"

namespace jointbe {

namespace {

constexpr int kCorner[8][3] = {{-1, -1, -1}, {1, -1, -1}, {1, 1, -1}, {-1, 1, -1},
                               {-1, -1, 1},  {1, -1, 1},  {1, 1, 1},  {-1, 1, 1}};

using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat3 = Eigen::Matrix3d;

Mat6 elasticity(const Material& m) {
  const double e = m.youngs_modulus;
  const double nu = m.poisson_ratio;
  const double f = e / ((1.0 + nu) * (1.0 - 2.0 * nu));
  Mat6 d = Mat6::Zero();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) d(i, j) = f * (i == j ? 1.0 - nu : nu);
    d(3 + i, 3 + i) = f * (1.0 - 2.0 * nu) / 2.0;
  }
  return d;
}

// Strain-displacement rows for one scalar field with global gradient g,
// displacement component `dir`, written into column `col` of b.
template <typename B>
void strain_rows(B& b, int col, int dir, const Eigen::Vector3d& g) {
  // Voigt order xx, yy, zz, xy, yz, zx.
  switch (dir) {
    case 0:
      b(0, col) = g(0);
      b(3, col) = g(1);
      b(5, col) = g(2);
      break;
    case 1:
      b(1, col) = g(1);
      b(3, col) = g(0);
      b(4, col) = g(2);
      break;
    default:
      b(2, col) = g(2);
      b(4, col) = g(1);
      b(5, col) = g(0);
  }
}

int dir_index(Face f) {
  switch (f) {
    case Face::x_min:
    case Face::x_max: return 0;
    case Face::y_min:
    case Face::y_max: return 1;
    default: return 2;
  }
}

bool is_max(Face f) { return f == Face::x_max || f == Face::y_max || f == Face::z_max; }

}  // namespace

void Material::validate() const {
  if (!(youngs_modulus > 0.0)) throw Error(ErrorCategory::input, "material: E must be positive");
  if (!(poisson_ratio >= 0.0 && poisson_ratio < 0.5)) {
    throw Error(ErrorCategory::input, "material: Poisson ratio must lie in [0, 0.5)");
  }
  if (!(density > 0.0)) throw Error(ErrorCategory::input, "material: density must be positive");
}

void BrickMeshSpec::validate() const {
  material.validate();
  for (int d = 0; d < 3; ++d) {
    if (elements[d] < 1) throw Error(ErrorCategory::input, "brick: element counts must be >= 1");
    if (!(extents[d] > 0.0)) throw Error(ErrorCategory::input, "brick: extents must be positive");
  }
  if (interface_face && dir_index(*interface_face) != 2) {
    throw Error(ErrorCategory::input, "brick: the interface face must be normal to z");
  }
}

std::vector<int> BrickMesh::nodes_on_face(Face f) const {
  const int d = dir_index(f);
  const int level = is_max(f) ? elements[d] : 0;
  std::vector<int> out;
  for (int k = 0; k <= elements[2]; ++k) {
    for (int j = 0; j <= elements[1]; ++j) {
      for (int i = 0; i <= elements[0]; ++i) {
        const int idx[3] = {i, j, k};
        if (idx[d] == level) out.push_back(node_id(i, j, k));
      }
    }
  }
  return out;
}

BrickMesh brick_mesh(const BrickMeshSpec& spec) {
  spec.validate();
  BrickMesh mesh;
  mesh.elements = spec.elements;
  const auto [ex, ey, ez] = spec.elements;
  mesh.nodes.resize(static_cast<std::size_t>((ex + 1) * (ey + 1) * (ez + 1)));
  for (int k = 0; k <= ez; ++k) {
    for (int j = 0; j <= ey; ++j) {
      for (int i = 0; i <= ex; ++i) {
        mesh.nodes[static_cast<std::size_t>(mesh.node_id(i, j, k))] = {
            spec.origin[0] + spec.extents[0] * i / ex, spec.origin[1] + spec.extents[1] * j / ey,
            spec.origin[2] + spec.extents[2] * k / ez};
      }
    }
  }
  for (int k = 0; k < ez; ++k) {
    for (int j = 0; j < ey; ++j) {
      for (int i = 0; i < ex; ++i) {
        std::array<int, 8> c{};
        for (int a = 0; a < 8; ++a) {
          c[static_cast<std::size_t>(a)] =
              mesh.node_id(i + (kCorner[a][0] + 1) / 2, j + (kCorner[a][1] + 1) / 2,
                           k + (kCorner[a][2] + 1) / 2);
        }
        mesh.connectivity.push_back(c);
      }
    }
  }
  return mesh;
}

ElementMatrices hexahedron_matrices(const std::array<std::array<double, 3>, 8>& coords,
                                    const Material& material) {
  const Mat6 d = elasticity(material);
  Eigen::Matrix<double, 8, 3> x;
  for (int a = 0; a < 8; ++a) {
    for (int c = 0; c < 3; ++c) x(a, c) = coords[static_cast<std::size_t>(a)][static_cast<std::size_t>(c)];
  }
  auto natural_gradients = [](double xi, double eta, double zeta) {
    Eigen::Matrix<double, 8, 3> dn;
    for (int a = 0; a < 8; ++a) {
      const double s = kCorner[a][0], t = kCorner[a][1], u = kCorner[a][2];
      dn(a, 0) = 0.125 * s * (1 + t * eta) * (1 + u * zeta);
      dn(a, 1) = 0.125 * t * (1 + s * xi) * (1 + u * zeta);
      dn(a, 2) = 0.125 * u * (1 + s * xi) * (1 + t * eta);
    }
    return dn;
  };

  const Mat3 j0 = (natural_gradients(0, 0, 0).transpose() * x);
  const double det0 = j0.determinant();
  if (!(det0 > 0.0)) throw Error(ErrorCategory::input, "hexahedron: degenerate or inverted element");
  const Mat3 j0inv = j0.inverse();

  Eigen::Matrix<double, 24, 24> kuu = Eigen::Matrix<double, 24, 24>::Zero();
  Eigen::Matrix<double, 24, 9> kua = Eigen::Matrix<double, 24, 9>::Zero();
  Eigen::Matrix<double, 9, 9> kaa = Eigen::Matrix<double, 9, 9>::Zero();
  ElementMatrices out;
  out.mass.setZero();

  const double gp = 1.0 / std::sqrt(3.0);
  for (int g = 0; g < 8; ++g) {
    const double xi = gp * kCorner[g][0], eta = gp * kCorner[g][1], zeta = gp * kCorner[g][2];
    const Eigen::Matrix<double, 8, 3> dn = natural_gradients(xi, eta, zeta);
    const Mat3 jac = dn.transpose() * x;
    const double det = jac.determinant();
    if (!(det > 0.0)) throw Error(ErrorCategory::input, "hexahedron: degenerate or inverted element");
    const Eigen::Matrix<double, 8, 3> dx = dn * jac.inverse().transpose();

    Eigen::Matrix<double, 6, 24> b = Eigen::Matrix<double, 6, 24>::Zero();
    for (int a = 0; a < 8; ++a) {
      for (int c = 0; c < 3; ++c) strain_rows(b, 3 * a + c, c, dx.row(a).transpose());
    }
    // Incompatible modes 1 - xi^2, 1 - eta^2, 1 - zeta^2, differentiated with the
    // centroid Jacobian so the element passes the patch test.
    Eigen::Matrix<double, 6, 9> ba = Eigen::Matrix<double, 6, 9>::Zero();
    const double nat[3] = {xi, eta, zeta};
    for (int m = 0; m < 3; ++m) {
      Eigen::Vector3d dp = Eigen::Vector3d::Zero();
      dp(m) = -2.0 * nat[m];
      const Eigen::Vector3d gx = (det0 / det) * (j0inv.transpose() * dp);
      for (int c = 0; c < 3; ++c) strain_rows(ba, 3 * m + c, c, gx);
    }
    kuu += b.transpose() * d * b * det;
    kua += b.transpose() * d * ba * det;
    kaa += ba.transpose() * d * ba * det;

    Eigen::Matrix<double, 8, 1> n;
    for (int a = 0; a < 8; ++a) {
      n(a) = 0.125 * (1 + kCorner[a][0] * xi) * (1 + kCorner[a][1] * eta) *
             (1 + kCorner[a][2] * zeta);
    }
    const Eigen::Matrix<double, 8, 8> nn = material.density * det * (n * n.transpose());
    for (int a = 0; a < 8; ++a) {
      for (int bb = 0; bb < 8; ++bb) {
        for (int c = 0; c < 3; ++c) out.mass(3 * a + c, 3 * bb + c) += nn(a, bb);
      }
    }
  }
  out.stiffness = kuu - kua * kaa.ldlt().solve(kua.transpose());
  out.stiffness = 0.5 * (out.stiffness + out.stiffness.transpose()).eval();
  return out;
}

std::vector<double> InterfaceMesh::node_areas() const {
  std::vector<double> area(node_xy.size(), 0.0);
  for (const auto& f : faces) {
    const Point2 a = node_xy[static_cast<std::size_t>(f[0])];
    const Point2 c = node_xy[static_cast<std::size_t>(f[2])];
    const double quarter = 0.25 * std::abs((c.x - a.x) * (c.y - a.y));
    for (int n : f) area[static_cast<std::size_t>(n)] += quarter;
  }
  return area;
}

namespace {

// Assembly over a node set with some DOFs eliminated.
struct Assembler {
  std::vector<int> dof_of;  // node * 3 + dir -> model coordinate or -1
  std::vector<DofInfo> dofs;
  std::vector<Eigen::Triplet<double>> k, m;

  explicit Assembler(int nodes, const std::vector<char>& fixed) {
    dof_of.assign(static_cast<std::size_t>(3 * nodes), -1);
    for (int i = 0; i < 3 * nodes; ++i) {
      if (!fixed[static_cast<std::size_t>(i)]) {
        dof_of[static_cast<std::size_t>(i)] = static_cast<int>(dofs.size());
        dofs.push_back({i / 3, i % 3, false});
      }
    }
  }

  int dof(int node, int dir) const { return dof_of[static_cast<std::size_t>(3 * node + dir)]; }

  void add_elements(const BrickMesh& mesh, int node_offset, const Material& material) {
    for (const auto& conn : mesh.connectivity) {
      std::array<std::array<double, 3>, 8> xyz{};
      for (int a = 0; a < 8; ++a) xyz[static_cast<std::size_t>(a)] = mesh.nodes[static_cast<std::size_t>(conn[static_cast<std::size_t>(a)])];
      const ElementMatrices em = hexahedron_matrices(xyz, material);
      for (int a = 0; a < 24; ++a) {
        const int ra = dof(node_offset + conn[static_cast<std::size_t>(a / 3)], a % 3);
        if (ra < 0) continue;
        for (int b = 0; b < 24; ++b) {
          const int cb = dof(node_offset + conn[static_cast<std::size_t>(b / 3)], b % 3);
          if (cb < 0) continue;
          k.emplace_back(ra, cb, em.stiffness(a, b));
          m.emplace_back(ra, cb, em.mass(a, b));
        }
      }
    }
  }

  void add_spring(int node_a, int node_b, int dir, double stiffness) {
    const int a = dof(node_a, dir);
    const int b = dof(node_b, dir);
    if (a >= 0) k.emplace_back(a, a, stiffness);
    if (b >= 0) k.emplace_back(b, b, stiffness);
    if (a >= 0 && b >= 0) {
      k.emplace_back(a, b, -stiffness);
      k.emplace_back(b, a, -stiffness);
    }
  }

  FeModel finish() const {
    const int n = static_cast<int>(dofs.size());
    FeModel model;
    model.stiffness.resize(n, n);
    model.mass.resize(n, n);
    model.stiffness.setFromTriplets(k.begin(), k.end());
    model.mass.setFromTriplets(m.begin(), m.end());
    // Exact symmetry regardless of summation order.
    model.stiffness = 0.5 * (model.stiffness + SpMat(model.stiffness.transpose()));
    model.mass = 0.5 * (model.mass + SpMat(model.mass.transpose()));
    model.dofs = dofs;
    return model;
  }
};

std::vector<char> clamped_mask(const BrickMesh& mesh, const std::vector<Face>& faces, int offset,
                               std::vector<char> mask) {
  for (Face f : faces) {
    for (int n : mesh.nodes_on_face(f)) {
      for (int c = 0; c < 3; ++c) mask[static_cast<std::size_t>(3 * (offset + n) + c)] = 1;
    }
  }
  return mask;
}

int nearest_node(const BrickMesh& mesh, const std::array<double, 3>& p) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < mesh.node_count(); ++i) {
    const auto& x = mesh.nodes[static_cast<std::size_t>(i)];
    const double d = std::hypot(x[0] - p[0], x[1] - p[1], x[2] - p[2]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

// Interface quads on a z face of a structured brick, restricted to the
// rectangle [x0, x1] x [y0, y1].
std::vector<std::array<int, 4>> face_quads(const BrickMesh& mesh, bool top, double x0, double x1,
                                           double y0, double y1, double tol) {
  const int k = top ? mesh.elements[2] : 0;
  std::vector<std::array<int, 4>> out;
  for (int j = 0; j < mesh.elements[1]; ++j) {
    for (int i = 0; i < mesh.elements[0]; ++i) {
      const std::array<int, 4> q = {mesh.node_id(i, j, k), mesh.node_id(i + 1, j, k),
                                    mesh.node_id(i + 1, j + 1, k), mesh.node_id(i, j + 1, k)};
      const auto& a = mesh.nodes[static_cast<std::size_t>(q[0])];
      const auto& c = mesh.nodes[static_cast<std::size_t>(q[2])];
      if (a[0] >= x0 - tol && c[0] <= x1 + tol && a[1] >= y0 - tol && c[1] <= y1 + tol) {
        out.push_back(q);
      }
    }
  }
  return out;
}

}  // namespace

FixtureModel build_brick_model(const BrickMeshSpec& spec) {
  FixtureModel out;
  out.mesh = brick_mesh(spec);
  const int nn = out.mesh.node_count();
  const std::vector<char> fixed =
      clamped_mask(out.mesh, spec.clamped_faces, 0, std::vector<char>(static_cast<std::size_t>(3 * nn), 0));
  Assembler as(nn, fixed);
  as.add_elements(out.mesh, 0, spec.material);
  out.model = as.finish();

  if (spec.interface_face) {
    const bool top = *spec.interface_face == Face::z_max;
    const double inf = std::numeric_limits<double>::infinity();
    const auto quads = face_quads(out.mesh, top, -inf, inf, -inf, inf, 0.0);
    std::map<int, int> local;
    for (const auto& q : quads) {
      std::array<int, 4> f{};
      for (int a = 0; a < 4; ++a) {
        const int node = q[static_cast<std::size_t>(a)];
        auto [it, inserted] = local.emplace(node, static_cast<int>(local.size()));
        if (inserted) {
          const auto& x = out.mesh.nodes[static_cast<std::size_t>(node)];
          out.interface.node_xy.push_back({x[0], x[1]});
          out.interface.node_dofs.push_back({as.dof(node, 0), as.dof(node, 1), as.dof(node, 2)});
        }
        f[static_cast<std::size_t>(a)] = it->second;
      }
      out.interface.faces.push_back(f);
    }
    for (const auto& d : out.interface.node_dofs) {
      for (int c : d) {
        if (c >= 0) out.model.boundary_dofs.push_back(c);  // clamped DOFs stay fixed
      }
    }
  }
  out.model.validate();
  return out;
}

void LapJointSpec::validate() const {
  lower.validate();
  upper.validate();
  const double top = lower.origin[2] + lower.extents[2];
  if (std::abs(upper.origin[2] - top) > 1e-12 * std::max(1.0, std::abs(top))) {
    throw Error(ErrorCategory::input, "lap joint: upper block must sit on the lower block's top face");
  }
  if (!(washer_radius > 0.0)) throw Error(ErrorCategory::input, "lap joint: washer radius must be positive");
  if (bolt_axial_stiffness < 0.0 || bolt_shear_stiffness < 0.0 || preload < 0.0) {
    throw Error(ErrorCategory::input, "lap joint: bolt stiffness and preload must be non-negative");
  }
}

LapJoint build_lap_joint(const LapJointSpec& spec) {
  spec.validate();
  LapJoint out;
  FixtureModel& fx = out.fixture;
  const BrickMesh lower = brick_mesh(spec.lower);
  const BrickMesh upper = brick_mesh(spec.upper);
  const int nl = lower.node_count();
  const int nu = upper.node_count();

  // Combined mesh: lower nodes first, upper nodes offset by nl.
  fx.mesh.elements = {0, 0, 0};
  fx.mesh.nodes = lower.nodes;
  fx.mesh.nodes.insert(fx.mesh.nodes.end(), upper.nodes.begin(), upper.nodes.end());
  fx.mesh.connectivity = lower.connectivity;
  for (auto c : upper.connectivity) {
    for (int& n : c) n += nl;
    fx.mesh.connectivity.push_back(c);
  }

  std::vector<char> fixed(static_cast<std::size_t>(3 * (nl + nu)), 0);
  fixed = clamped_mask(lower, spec.lower.clamped_faces, 0, fixed);
  fixed = clamped_mask(upper, spec.upper.clamped_faces, nl, fixed);
  Assembler as(nl + nu, fixed);
  as.add_elements(lower, 0, spec.lower.material);
  as.add_elements(upper, nl, spec.upper.material);

  // Overlap rectangle of the two footprints.
  const double x0 = std::max(spec.lower.origin[0], spec.upper.origin[0]);
  const double x1 = std::min(spec.lower.origin[0] + spec.lower.extents[0],
                             spec.upper.origin[0] + spec.upper.extents[0]);
  const double y0 = std::max(spec.lower.origin[1], spec.upper.origin[1]);
  const double y1 = std::min(spec.lower.origin[1] + spec.lower.extents[1],
                             spec.upper.origin[1] + spec.upper.extents[1]);
  if (!(x1 > x0) || !(y1 > y0)) throw Error(ErrorCategory::input, "lap joint: blocks do not overlap");
  const double tol = 1e-9 * std::max({x1 - x0, y1 - y0});

  const auto lower_quads = face_quads(lower, true, x0, x1, y0, y1, tol);
  const auto upper_quads = face_quads(upper, false, x0, x1, y0, y1, tol);
  if (lower_quads.empty() || lower_quads.size() != upper_quads.size()) {
    throw Error(ErrorCategory::input, "lap joint: overlap meshes are not conforming");
  }
  auto key = [&](const std::array<double, 3>& p) {
    return std::make_pair(std::llround(p[0] / tol), std::llround(p[1] / tol));
  };
  std::map<std::pair<long long, long long>, int> lower_at;
  for (const auto& q : lower_quads) {
    for (int n : q) lower_at[key(lower.nodes[static_cast<std::size_t>(n)])] = n;
  }

  // Matched interface nodes: (upper, lower) in upper-face order.
  std::map<int, int> match;  // upper node -> lower node
  std::map<int, int> local;  // upper node -> interface node index
  for (const auto& q : upper_quads) {
    std::array<int, 4> f{};
    for (int a = 0; a < 4; ++a) {
      const int un = q[static_cast<std::size_t>(a)];
      const auto it = lower_at.find(key(upper.nodes[static_cast<std::size_t>(un)]));
      if (it == lower_at.end()) {
        std::ostringstream msg;
        msg << "lap joint: overlap meshes are not conforming (upper node " << un
            << " has no partner on the lower face)";
        throw Error(ErrorCategory::input, msg.str());
      }
      match[un] = it->second;
      auto [li, inserted] = local.emplace(un, static_cast<int>(local.size()));
      if (inserted) {
        const auto& x = upper.nodes[static_cast<std::size_t>(un)];
        fx.interface.node_xy.push_back({x[0], x[1]});
      }
      f[static_cast<std::size_t>(a)] = li->second;
    }
    fx.interface.faces.push_back(f);
  }
  if (match.size() != lower_at.size()) {
    throw Error(ErrorCategory::input, "lap joint: overlap meshes are not conforming");
  }

  // Bolt: springs between washer nodes of the upper top and lower bottom faces.
  auto washer_nodes = [&](const BrickMesh& mesh, Face f) {
    std::vector<int> out_nodes;
    for (int n : mesh.nodes_on_face(f)) {
      const auto& x = mesh.nodes[static_cast<std::size_t>(n)];
      if (std::hypot(x[0] - spec.bolt_center.x, x[1] - spec.bolt_center.y) <= spec.washer_radius + tol) {
        out_nodes.push_back(n);
      }
    }
    return out_nodes;
  };
  const std::vector<int> head = washer_nodes(upper, Face::z_max);
  const std::vector<int> nut = washer_nodes(lower, Face::z_min);
  if (head.empty() || head.size() != nut.size()) {
    throw Error(ErrorCategory::input, "lap joint: washer footprint must contain matching nodes on both blocks");
  }
  std::map<std::pair<long long, long long>, int> nut_at;
  for (int n : nut) nut_at[key(lower.nodes[static_cast<std::size_t>(n)])] = n;
  const double share = 1.0 / static_cast<double>(head.size());
  for (int h : head) {
    const auto it = nut_at.find(key(upper.nodes[static_cast<std::size_t>(h)]));
    if (it == nut_at.end()) throw Error(ErrorCategory::input, "lap joint: washer nodes do not line up");
    as.add_spring(nl + h, it->second, 0, spec.bolt_shear_stiffness * share);
    as.add_spring(nl + h, it->second, 1, spec.bolt_shear_stiffness * share);
    as.add_spring(nl + h, it->second, 2, spec.bolt_axial_stiffness * share);
  }

  FeModel full = as.finish();
  Vec preload = Vec::Zero(full.size());
  for (int h : head) {
    const int d = as.dof(nl + h, 2);
    if (d < 0) throw Error(ErrorCategory::input, "lap joint: washer nodes must not be clamped");
    preload(d) -= spec.preload * share;
  }
  for (int n : nut) {
    const int d = as.dof(n, 2);
    if (d < 0) throw Error(ErrorCategory::input, "lap joint: washer nodes must not be clamped");
    preload(d) += spec.preload / static_cast<double>(nut.size());
  }
  full.loads["preload"] = preload;
  out.applied_preload = spec.preload;

  // Pairs in interface-node order, directions x, y, z.
  std::vector<int> upper_of(local.size());
  for (const auto& [un, li] : local) upper_of[static_cast<std::size_t>(li)] = un;
  for (int un : upper_of) {
    std::array<int, 3> rel{};
    for (int c = 0; c < 3; ++c) {
      const int a = as.dof(nl + un, c);
      const int b = as.dof(match[un], c);
      if (a < 0 || b < 0) throw Error(ErrorCategory::input, "lap joint: interface nodes must not be clamped");
      out.matched_pairs.emplace_back(a, b);
      rel[static_cast<std::size_t>(c)] = a;
    }
    fx.interface.node_dofs.push_back(rel);
  }
  full.validate();
  fx.model = relative_transform(full, out.matched_pairs);

  const int sensor = nearest_node(upper, spec.sensor);
  for (int c = 0; c < 3; ++c) {
    const int d = as.dof(nl + sensor, c);
    if (d >= 0) fx.sensor_dofs.push_back(d);
  }
  return out;
}

}  // namespace jointbe
