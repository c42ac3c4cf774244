#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "jointbe/halfspace.hpp"
#include "jointbe/minifem.hpp"
#include "jointbe/rom.hpp"
#include "jointbe/types.hpp"

namespace jointbe {

/// W_b: reduced boundary coordinates x contact-force components (3 per point,
/// normal first). W_b^T q_b is the FE part of the relative interface
/// displacement at each point, W_b lambda the generalized contact force.
struct CouplingMap {
  Mat w_b;
  std::vector<int> point_index;    // grid-point IDs (node indices in node mode)
  std::vector<int> face_of_point;  // interface face holding each point, -1 in node mode
  bool node_based = false;

  int point_count() const { return static_cast<int>(point_index.size()); }
};

/// Evaluates the bilinear shape functions of the interface face containing each
/// BE point. Points on a shared edge go to the lowest-index face. Throws
/// Error(input) for a point outside every face (1e-9 m tolerance).
CouplingMap build_coupling(const ReducedModel& rom, const InterfaceMesh& mesh,
                           std::span<const Point2> points, std::span<const int> ids);

/// Node-based mode: the interface nodes themselves are the contact points and
/// W_b is the identity between their DOFs and the force components.
CouplingMap node_coupling(const ReducedModel& rom, const InterfaceMesh& mesh);

/// Shape-function weights of a point inside the quad with the given corners
/// (counterclockwise); throws if the point lies outside.
std::array<double, 4> bilinear_weights(const std::array<Point2, 4>& corners, Point2 p);

/// Static condensation to the contact points:
///   g = C* lambda + g_ex,  C* = C + W_b^T Kbb^-1 W_b,  g_ex = sum_k s_k u_k - h.
/// Each named load pattern u_k is the gap change per unit load scale.
struct CondensedSystem {
  Mat c_star;
  Mat c_be;       // BE part C alone
  Vec heights;    // 3C layout, normal entries = h_j
  std::map<std::string, Vec> patterns;
  std::vector<int> point_index;
  std::vector<Point2> positions;
  std::vector<double> areas;  // per point, for pressures
  bool rigid = false;

  // Kept for reconstructing q_b; empty in rigid mode.
  Mat w_b;
  Eigen::LLT<Mat> kbb;

  int point_count() const { return static_cast<int>(point_index.size()); }
  /// Gap change per unit scale of a reduced load vector (boundary part used).
  Vec pattern_for(const Vec& reduced_load) const;
  /// q_b = Kbb^-1 (W_b lambda + f_b).
  Vec boundary_displacement(const Vec& lambda, const Vec& f_b) const;
  /// True when C* has no coupling between normal, t1 and t2 components.
  bool direction_separable() const;
};

struct CondenseOptions {
  /// Treat the structure as rigid (Kbb^-1 -> 0): C* = C, and the load patterns
  /// are rigid relative motions "approach", "slide_x", "slide_y".
  bool rigid = false;
};

/// `heights` holds h_j of every coupled point (same order as the coupling).
CondensedSystem condense_static(const ReducedModel& rom, const CouplingMap& coupling,
                                const ComplianceMatrix& compliance, std::span<const double> heights,
                                std::span<const Point2> positions, std::span<const double> areas,
                                const CondenseOptions& options = {});

/// Rigid structure without any FE model.
CondensedSystem condense_rigid(const ComplianceMatrix& compliance, std::span<const double> heights,
                               std::span<const Point2> positions, double element_area);

}  // namespace jointbe
