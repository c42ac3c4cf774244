#include "jointbe/halfspace.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "jointbe/error.hpp"

namespace jointbe {

void ElasticHalfSpace::validate() const {
  if (!(youngs_modulus > 0.0) || !std::isfinite(youngs_modulus)) {
    throw Error(ErrorCategory::input, "half space: Young's modulus must be positive");
  }
  if (!(poisson_ratio >= 0.0 && poisson_ratio < 0.5)) {
    throw Error(ErrorCategory::input, "half space: Poisson ratio must lie in [0, 0.5)");
  }
}

namespace {

// b + sqrt(a^2 + b^2) without cancellation for b << 0.
double shifted_hypot(double b, double a) {
  const double h = std::hypot(a, b);
  return b >= 0.0 ? b + h : (a * a) / (h - b);
}

// ln[(b1 + sqrt(a^2 + b1^2)) / (b2 + sqrt(a^2 + b2^2))]
double log_ratio(double a, double b1, double b2) {
  return std::log(shifted_hypot(b1, a) / shifted_hypot(b2, a));
}

}  // namespace

InfluenceBlock influence_coefficients(double dx_bar, double dy_bar, double half_dx,
                                      double half_dy, const ElasticHalfSpace& hs) {
  const double nu = hs.poisson_ratio;
  const double xp = dx_bar + half_dx;
  const double xm = dx_bar - half_dx;
  const double yp = dy_bar + half_dy;
  const double ym = dy_bar - half_dy;

  // x-weighted and y-weighted halves of the rectangle integral.
  const double x_terms = xp * log_ratio(xp, yp, ym) + xm * log_ratio(xm, ym, yp);
  const double y_terms = yp * log_ratio(yp, xp, xm) + ym * log_ratio(ym, xm, xp);

  const double area = (2.0 * half_dx) * (2.0 * half_dy);
  const double pre = 2.0 * (1.0 - nu * nu) / (area * std::numbers::pi * hs.youngs_modulus);

  InfluenceBlock b;
  b.c_zz = pre * (x_terms + y_terms);
  b.c_xx = pre * (x_terms + y_terms / (1.0 - nu));
  b.c_yy = pre * (x_terms / (1.0 - nu) + y_terms);
  return b;
}

double ComplianceMatrix::max_asymmetry() const {
  const double scale = entries.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  return (entries - entries.transpose()).cwiseAbs().maxCoeff() / scale;
}

bool ComplianceMatrix::is_positive_definite() const {
  Eigen::LLT<Mat> llt(entries);
  return llt.info() == Eigen::Success;
}

ComplianceMatrix assemble_compliance(std::span<const Point2> points, std::span<const int> ids,
                                     double pitch_x, double pitch_y,
                                     const ElasticHalfSpace& hs1, const ElasticHalfSpace& hs2) {
  hs1.validate();
  hs2.validate();
  if (hs1.youngs_modulus != hs2.youngs_modulus || hs1.poisson_ratio != hs2.poisson_ratio) {
    throw Error(ErrorCategory::input,
                "assemble_compliance: only identical isotropic half-space pairs are supported");
  }
  if (!(pitch_x > 0.0) || !(pitch_y > 0.0)) {
    throw Error(ErrorCategory::input, "assemble_compliance: pitches must be positive");
  }
  if (points.size() != ids.size()) {
    throw Error(ErrorCategory::input, "assemble_compliance: point and ID counts differ");
  }
  const int n = static_cast<int>(points.size());
  ComplianceMatrix c;
  c.point_index.assign(ids.begin(), ids.end());
  c.entries = Mat::Zero(3 * n, 3 * n);
  if (n == 0) return c;

  // Integer lattice coordinates relative to the first point.
  std::vector<long> ix(n), iy(n);
  for (int j = 0; j < n; ++j) {
    const double fx = (points[j].x - points[0].x) / pitch_x;
    const double fy = (points[j].y - points[0].y) / pitch_y;
    const double rx = std::round(fx);
    const double ry = std::round(fy);
    if (std::abs(fx - rx) > 1e-9 * std::max(1.0, std::abs(fx)) ||
        std::abs(fy - ry) > 1e-9 * std::max(1.0, std::abs(fy))) {
      std::ostringstream msg;
      msg << "assemble_compliance: point " << ids[j] << " at (" << points[j].x << ", "
          << points[j].y << ") is not on the grid lattice";
      throw Error(ErrorCategory::input, msg.str());
    }
    ix[j] = static_cast<long>(rx);
    iy[j] = static_cast<long>(ry);
  }
  long span_x = 0, span_y = 0;
  for (int j = 0; j < n; ++j) {
    span_x = std::max(span_x, std::abs(ix[j]));
    span_y = std::max(span_y, std::abs(iy[j]));
  }
  span_x *= 2;
  span_y *= 2;

  // The closed forms are even in both separations, so one table over |offsets|
  // serves every pair and keeps C exactly symmetric.
  const double hx = 0.5 * pitch_x;
  const double hy = 0.5 * pitch_y;
  const long tx = span_x + 1;
  const long ty = span_y + 1;
  std::vector<InfluenceBlock> table(static_cast<std::size_t>(tx * ty));
  std::vector<char> filled(table.size(), 0);
  auto block = [&](long dx, long dy) -> const InfluenceBlock& {
    const std::size_t k = static_cast<std::size_t>(std::abs(dx) * ty + std::abs(dy));
    if (!filled[k]) {
      const InfluenceBlock b1 = influence_coefficients(std::abs(dx) * pitch_x,
                                                       std::abs(dy) * pitch_y, hx, hy, hs1);
      const InfluenceBlock b2 = influence_coefficients(std::abs(dx) * pitch_x,
                                                       std::abs(dy) * pitch_y, hx, hy, hs2);
      table[k] = {0.5 * (b1.c_zz + b2.c_zz), 0.5 * (b1.c_xx + b2.c_xx),
                  0.5 * (b1.c_yy + b2.c_yy)};
      filled[k] = 1;
    }
    return table[k];
  };

  for (int l = 0; l < n; ++l) {
    for (int j = 0; j < n; ++j) {
      const InfluenceBlock& b = block(ix[l] - ix[j], iy[l] - iy[j]);
      c.entries(3 * j + kNormal, 3 * l + kNormal) = b.c_zz;
      c.entries(3 * j + kTangent1, 3 * l + kTangent1) = b.c_xx;
      c.entries(3 * j + kTangent2, 3 * l + kTangent2) = b.c_yy;
    }
  }
  return c;
}

}  // namespace jointbe
