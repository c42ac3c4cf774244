#pragma once

#include <array>
#include <optional>
#include <utility>
#include <vector>

#include "jointbe/rom.hpp"
#include "jointbe/types.hpp"

namespace jointbe {

struct Material {
  double youngs_modulus = 0.0;  // [Pa]
  double poisson_ratio = 0.0;
  double density = 0.0;  // [kg/m^3]

  void validate() const;
};

enum class Face { x_min, x_max, y_min, y_max, z_min, z_max };

struct BrickMeshSpec {
  std::array<double, 3> origin{0.0, 0.0, 0.0};
  std::array<double, 3> extents{1.0, 1.0, 1.0};
  std::array<int, 3> elements{1, 1, 1};
  Material material;
  std::vector<Face> clamped_faces;     // all three DOFs fixed
  std::optional<Face> interface_face;  // z faces only; its nodes become boundary DOFs

  void validate() const;
};

/// Structured mesh of 8-node bricks. Node (i, j, k) has ID
/// (k * (ey + 1) + j) * (ex + 1) + i.
struct BrickMesh {
  std::array<int, 3> elements{};
  std::vector<std::array<double, 3>> nodes;
  std::vector<std::array<int, 8>> connectivity;

  int node_count() const { return static_cast<int>(nodes.size()); }
  int node_id(int i, int j, int k) const {
    return (k * (elements[1] + 1) + j) * (elements[0] + 1) + i;
  }
  std::vector<int> nodes_on_face(Face f) const;
};

BrickMesh brick_mesh(const BrickMeshSpec& spec);

/// Element stiffness (with condensed incompatible bending modes) and consistent
/// mass. Node order follows the usual (-,-,-), (+,-,-), (+,+,-), (-,+,-) bottom
/// then top convention; DOFs are node-major (x, y, z).
struct ElementMatrices {
  Eigen::Matrix<double, 24, 24> stiffness;
  Eigen::Matrix<double, 24, 24> mass;
};
ElementMatrices hexahedron_matrices(const std::array<std::array<double, 3>, 8>& coords,
                                    const Material& material);

/// Flat interface patch in the xy plane made of axis-aligned bilinear quads.
/// node_dofs gives the model coordinate of each node's (x, y, z) displacement
/// (for a lap joint these are the relative coordinates); -1 marks a clamped DOF.
struct InterfaceMesh {
  std::vector<Point2> node_xy;
  std::vector<std::array<int, 3>> node_dofs;
  std::vector<std::array<int, 4>> faces;  // counterclockwise, first at (x_min, y_min)

  /// Tributary area of each node (integral of its shape function).
  std::vector<double> node_areas() const;
};

struct FixtureModel {
  FeModel model;
  BrickMesh mesh;  // combined node numbering (lap joint: lower block first)
  InterfaceMesh interface;
  std::vector<int> sensor_dofs;  // physical nodal DOFs whose norm is the response amplitude
};

FixtureModel build_brick_model(const BrickMeshSpec& spec);

struct LapJointSpec {
  BrickMeshSpec lower;  // its z_max face carries the interface
  BrickMeshSpec upper;  // its z_min face must coincide with lower's z_max plane
  Point2 bolt_center;
  double washer_radius = 0.0;
  double bolt_axial_stiffness = 0.0;  // [N/m], shared over the washer nodes
  double bolt_shear_stiffness = 0.0;
  double preload = 0.0;  // [N]
  std::array<double, 3> sensor{0.0, 0.0, 0.0};

  void validate() const;
};

/// Two bricks overlapping in a conforming patch. The returned model is already
/// in relative interface coordinates (boundary = relative DOFs) and carries the
/// load pattern "preload": equal and opposite forces of magnitude `preload` on
/// the washer nodes of the upper top face and the lower bottom face. Bolt
/// springs tie those two node sets.
struct LapJoint {
  FixtureModel fixture;
  std::vector<std::pair<int, int>> matched_pairs;  // in the untransformed numbering
  double applied_preload = 0.0;
};

LapJoint build_lap_joint(const LapJointSpec& spec);

}  // namespace jointbe
