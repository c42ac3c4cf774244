#include "jointbe/topography.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "jointbe/csv.hpp"
#include "jointbe/error.hpp"

namespace jointbe {

void BeGrid::validate() const {
  if (nx < 1 || ny < 1) throw Error(ErrorCategory::input, "grid: nx and ny must be >= 1");
  if (!(pitch_x > 0.0) || !(pitch_y > 0.0)) {
    throw Error(ErrorCategory::input, "grid: pitches must be positive");
  }
}

Point2 BeGrid::position(int id) const {
  return {x0 + ix(id) * pitch_x, y0 + iy(id) * pitch_y};
}

HeightProfile HeightProfile::flat(const BeGrid& grid) {
  grid.validate();
  HeightProfile p;
  p.grid = grid;
  p.heights.assign(static_cast<std::size_t>(grid.size()), 0.0);
  p.excluded.assign(static_cast<std::size_t>(grid.size()), 0);
  return p;
}

double HeightProfile::max_height() const {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < heights.size(); ++i) {
    if (!excluded[i]) m = std::max(m, heights[i]);
  }
  return m;
}

double HeightProfile::min_height() const {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < heights.size(); ++i) {
    if (!excluded[i]) m = std::min(m, heights[i]);
  }
  return m;
}

int HeightProfile::included_count() const {
  return static_cast<int>(std::count(excluded.begin(), excluded.end(), 0));
}

namespace {

// Signed frequency index of DFT bin k for length n.
int signed_bin(int k, int n) { return k <= (n - 1) / 2 ? k : k - n; }

}  // namespace

std::vector<std::complex<double>> roughness_spectrum(const BeGrid& grid,
                                                     const RoughnessSpec& spec) {
  grid.validate();
  if (!(spec.sigma >= 0.0)) throw Error(ErrorCategory::input, "roughness: sigma must be >= 0");
  if (!(spec.lambda_min > 0.0 && spec.lambda_min < spec.lambda_max)) {
    throw Error(ErrorCategory::input, "roughness: need 0 < lambda_min < lambda_max");
  }
  const double nyquist = 2.0 * std::max(grid.pitch_x, grid.pitch_y);
  if (spec.lambda_min < nyquist * (1.0 - 1e-12)) {
    std::ostringstream msg;
    msg << "roughness: wavelength lambda_min = " << spec.lambda_min
        << " m is not resolvable on the grid (needs >= " << nyquist << " m)";
    throw Error(ErrorCategory::input, msg.str());
  }

  const int nx = grid.nx;
  const int ny = grid.ny;
  const double lx = nx * grid.pitch_x;
  const double ly = ny * grid.pitch_y;
  const std::size_t n = static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);

  auto in_band = [&](int kx, int ky) {
    const int mx = signed_bin(kx, nx);
    const int my = signed_bin(ky, ny);
    if (mx == 0 && my == 0) return false;
    const double f = std::hypot(mx / lx, my / ly);
    const double wavelength = 1.0 / f;
    return wavelength >= spec.lambda_min * (1.0 - 1e-12) &&
           wavelength <= spec.lambda_max * (1.0 + 1e-12);
  };

  int band = 0;
  for (int ky = 0; ky < ny; ++ky) {
    for (int kx = 0; kx < nx; ++kx) band += in_band(kx, ky) ? 1 : 0;
  }
  if (band == 0) {
    std::ostringstream msg;
    msg << "roughness: no DFT wavelength of the grid falls into [" << spec.lambda_min << ", "
        << spec.lambda_max << "] m";
    throw Error(ErrorCategory::input, msg.str());
  }

  // Parseval: RMS^2 = sum |H|^2 / n^2, so this magnitude hits sigma on its own.
  const double magnitude = spec.sigma * static_cast<double>(n) / std::sqrt(double(band));

  std::vector<std::complex<double>> spectrum(n, {0.0, 0.0});
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  for (int ky = 0; ky < ny; ++ky) {
    for (int kx = 0; kx < nx; ++kx) {
      const int cx = (nx - kx) % nx;
      const int cy = (ny - ky) % ny;
      const std::size_t k = static_cast<std::size_t>(ky) * nx + kx;
      const std::size_t c = static_cast<std::size_t>(cy) * nx + cx;
      if (c < k) continue;  // partner already drawn
      if (!in_band(kx, ky)) continue;
      const double phi = phase(rng);
      if (c == k) {
        // Self-conjugate bin must be real; keep the magnitude.
        spectrum[k] = {std::cos(phi) >= 0.0 ? magnitude : -magnitude, 0.0};
      } else {
        spectrum[k] = std::polar(magnitude, phi);
        spectrum[c] = std::conj(spectrum[k]);
      }
    }
  }
  return spectrum;
}

HeightProfile synthesize_roughness(const BeGrid& grid, const RoughnessSpec& spec,
                                   RoughnessReport* report) {
  auto spectrum = roughness_spectrum(grid, spec);
  HeightProfile p = HeightProfile::flat(grid);
  const std::size_t n = spectrum.size();
  int band = 0;
  for (const auto& s : spectrum) band += (s != std::complex<double>{}) ? 1 : 0;

  if (spec.sigma > 0.0) {
    std::vector<std::complex<double>> field(n);
    // fftw's 2-D layout is row-major with the last index fastest: (ny, nx).
    fftw_plan plan = fftw_plan_dft_2d(
        grid.ny, grid.nx, reinterpret_cast<fftw_complex*>(spectrum.data()),
        reinterpret_cast<fftw_complex*>(field.data()), FFTW_BACKWARD, FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      p.heights[i] = field[i].real() / static_cast<double>(n);
      mean += p.heights[i];
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (auto& h : p.heights) {
      h -= mean;
      var += h * h;
    }
    var /= static_cast<double>(n);
    const double scale = spec.sigma / std::sqrt(var);
    for (auto& h : p.heights) h *= scale;
    if (report) report->raw_variance = var;
  } else if (report) {
    report->raw_variance = 0.0;
  }
  if (report) report->band_frequencies = band;
  return p;
}

HeightProfile compose_profiles(const HeightProfile& h1, const HeightProfile& h2) {
  if (!(h1.grid == h2.grid) || h1.heights.size() != h2.heights.size()) {
    throw Error(ErrorCategory::input, "compose_profiles: height profiles live on different grids");
  }
  HeightProfile out = h1;
  for (std::size_t i = 0; i < out.heights.size(); ++i) {
    out.excluded[i] = (h1.excluded[i] || h2.excluded[i]) ? 1 : 0;
    out.heights[i] = h1.heights[i] + h2.heights[i];
  }
  const double top = out.max_height();
  if (std::isfinite(top)) {
    for (std::size_t i = 0; i < out.heights.size(); ++i) {
      if (!out.excluded[i]) out.heights[i] -= top;
    }
  }
  return out;
}

std::vector<int> geometric_restriction(const HeightProfile& profile, double depth_cutoff) {
  if (!(depth_cutoff >= 0.0)) {
    throw Error(ErrorCategory::input, "geometric_restriction: depth cutoff must be >= 0");
  }
  const double top = profile.max_height();
  std::vector<int> ids;
  for (int id = 0; id < profile.grid.size(); ++id) {
    if (profile.is_excluded(id)) continue;
    if (profile.heights[static_cast<std::size_t>(id)] >= top - depth_cutoff) ids.push_back(id);
  }
  if (ids.empty()) {
    throw Error(ErrorCategory::input,
                "geometric_restriction: no grid point retained (cutoff too small or all points "
                "excluded)");
  }
  return ids;
}

std::vector<int> restriction_boundary(const HeightProfile& profile,
                                      const std::vector<int>& retained) {
  const BeGrid& g = profile.grid;
  std::vector<std::uint8_t> kept(static_cast<std::size_t>(g.size()), 0);
  for (int id : retained) kept[static_cast<std::size_t>(id)] = 1;
  std::vector<int> boundary;
  for (int id : retained) {
    const int jx = g.ix(id);
    const int jy = g.iy(id);
    const int nb[4][2] = {{jx - 1, jy}, {jx + 1, jy}, {jx, jy - 1}, {jx, jy + 1}};
    for (const auto& q : nb) {
      if (q[0] < 0 || q[0] >= g.nx || q[1] < 0 || q[1] >= g.ny) continue;
      const int other = g.id(q[0], q[1]);
      if (!profile.is_excluded(other) && !kept[static_cast<std::size_t>(other)]) {
        boundary.push_back(id);
        break;
      }
    }
  }
  return boundary;
}

HeightProfile sphere_profile(const BeGrid& grid, Point2 center, double radius) {
  HeightProfile p = HeightProfile::flat(grid);
  for (int id = 0; id < grid.size(); ++id) {
    const Point2 x = grid.position(id);
    const double r2 = (x.x - center.x) * (x.x - center.x) + (x.y - center.y) * (x.y - center.y);
    if (r2 >= radius * radius) {
      p.excluded[static_cast<std::size_t>(id)] = 1;
      continue;
    }
    p.heights[static_cast<std::size_t>(id)] = -(radius - std::sqrt(radius * radius - r2));
  }
  return p;
}

HeightProfile hill_profile(const BeGrid& grid, Point2 center, double height, double width) {
  HeightProfile p = HeightProfile::flat(grid);
  for (int id = 0; id < grid.size(); ++id) {
    const Point2 x = grid.position(id);
    const double r2 = (x.x - center.x) * (x.x - center.x) + (x.y - center.y) * (x.y - center.y);
    p.heights[static_cast<std::size_t>(id)] = height * std::exp(-r2 / (2.0 * width * width));
  }
  return p;
}

void exclude_disk(HeightProfile& profile, Point2 center, double radius) {
  for (int id = 0; id < profile.grid.size(); ++id) {
    const Point2 x = profile.grid.position(id);
    if (std::hypot(x.x - center.x, x.y - center.y) < radius) {
      profile.excluded[static_cast<std::size_t>(id)] = 1;
    }
  }
}

void write_height_csv(const std::filesystem::path& path, const HeightProfile& profile) {
  auto out = csv::open_output(path);
  out << "x,y,h\n";
  for (int id = 0; id < profile.grid.size(); ++id) {
    if (profile.is_excluded(id)) continue;
    const Point2 x = profile.grid.position(id);
    out << csv::sci(x.x) << ',' << csv::sci(x.y) << ','
        << csv::sci(profile.heights[static_cast<std::size_t>(id)]) << '\n';
  }
}

HeightProfile read_height_csv(const std::filesystem::path& path, const BeGrid& grid) {
  grid.validate();
  const auto table = csv::read(path, {"x", "y", "h"});
  HeightProfile p = HeightProfile::flat(grid);
  std::fill(p.excluded.begin(), p.excluded.end(), 1);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const int line = table.line_numbers[r];
    const double x = csv::to_double(table.rows[r][0], path, line);
    const double y = csv::to_double(table.rows[r][1], path, line);
    const double h = csv::to_double(table.rows[r][2], path, line);
    const double fx = (x - grid.x0) / grid.pitch_x;
    const double fy = (y - grid.y0) / grid.pitch_y;
    const long jx = std::lround(fx);
    const long jy = std::lround(fy);
    if (std::abs(fx - jx) > 1e-6 || std::abs(fy - jy) > 1e-6 || jx < 0 || jy < 0 ||
        jx >= grid.nx || jy >= grid.ny) {
      throw Error(ErrorCategory::input,
                  path.string() + ":" + std::to_string(line) + ": point is not on the grid");
    }
    if (!std::isfinite(h)) {
      throw Error(ErrorCategory::input,
                  path.string() + ":" + std::to_string(line) + ": height is not finite");
    }
    const auto id = static_cast<std::size_t>(grid.id(static_cast<int>(jx), static_cast<int>(jy)));
    p.heights[id] = h;
    p.excluded[id] = 0;
  }
  return p;
}

}  // namespace jointbe
