#pragma once

#include <span>
#include <vector>

#include "jointbe/types.hpp"

namespace jointbe {

struct ElasticHalfSpace {
  double youngs_modulus = 0.0;  // [Pa]
  double poisson_ratio = 0.0;

  /// Throws Error(input) unless E > 0 and 0 <= nu < 0.5.
  void validate() const;
};

/// Diagonal 3x3 influence block, normal entry first.
struct InfluenceBlock {
  double c_zz = 0.0;  // [m/N]
  double c_xx = 0.0;
  double c_yy = 0.0;
};

/// Closed-form Boussinesq-Cerruti influence coefficients of a uniformly loaded
/// rectangular element of half widths (half_dx, half_dy) on the surface
/// displacement at separation (dx_bar, dy_bar) = (x_l - x_j, y_l - y_j).
///
/// The result is the compliance of a pair of identical isotropic half spaces
/// (composite modulus E / (2 (1 - nu^2))) per unit element force, i.e. it already
/// includes the 1 / (2 dx * 2 dy) area prefactor.
InfluenceBlock influence_coefficients(double dx_bar, double dy_bar, double half_dx,
                                      double half_dy, const ElasticHalfSpace& hs);

/// Dense symmetric BE compliance over a retained set of grid points.
///
/// Entry (3j + a, 3l + b) is the displacement of point j in direction a per unit
/// force at point l in direction b, directions ordered (normal, t1 = x, t2 = y).
struct ComplianceMatrix {
  Mat entries;
  std::vector<int> point_index;  // retained grid-point IDs, in row order

  int point_count() const { return static_cast<int>(point_index.size()); }
  double max_asymmetry() const;
  /// Cholesky factorization succeeds.
  bool is_positive_definite() const;
};

/// Assembles C = C(1) + C(2) over the given points, which must lie on a common
/// lattice with pitches (pitch_x, pitch_y) = (2 dx, 2 dy). Each half space
/// contributes its own (1 - nu^2) / E share of the closed form; only identical
/// isotropic pairs are supported.
ComplianceMatrix assemble_compliance(std::span<const Point2> points, std::span<const int> ids,
                                     double pitch_x, double pitch_y,
                                     const ElasticHalfSpace& hs1, const ElasticHalfSpace& hs2);

}  // namespace jointbe
