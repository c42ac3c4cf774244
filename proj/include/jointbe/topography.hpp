#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <vector>

#include "jointbe/types.hpp"

namespace jointbe {

/// Regular BE grid; point (jx, jy) has ID jy * nx + jx and sits at
/// (x0 + jx * pitch_x, y0 + jy * pitch_y). Each point owns an element of area
/// pitch_x * pitch_y.
struct BeGrid {
  int nx = 1;
  int ny = 1;
  double pitch_x = 1.0;
  double pitch_y = 1.0;
  double x0 = 0.0;
  double y0 = 0.0;

  void validate() const;
  int size() const { return nx * ny; }
  int id(int jx, int jy) const { return jy * nx + jx; }
  int ix(int id) const { return id % nx; }
  int iy(int id) const { return id / nx; }
  Point2 position(int id) const;
  double element_area() const { return pitch_x * pitch_y; }
  bool operator==(const BeGrid&) const = default;
};

/// Composite height per grid point; excluded points (bore holes, outside the
/// interface) carry an explicit flag and never enter the contact problem.
struct HeightProfile {
  BeGrid grid;
  std::vector<double> heights;
  std::vector<std::uint8_t> excluded;

  static HeightProfile flat(const BeGrid& grid);
  bool is_excluded(int id) const { return excluded[static_cast<std::size_t>(id)] != 0; }
  double max_height() const;
  double min_height() const;
  int included_count() const;
};

struct RoughnessSpec {
  double sigma = 0.0;       // RMS height [m]
  double lambda_min = 0.0;  // [m]
  double lambda_max = 0.0;  // [m]
  std::uint64_t seed = 0;
};

struct RoughnessReport {
  double raw_variance = 0.0;  // variance of the synthesized field before rescaling
  int band_frequencies = 0;   // number of DFT bins inside the band
};

/// Two-sided DFT coefficients (FFT order, x fastest) with constant magnitude
/// inside the wavelength band, zero outside, and seeded random phases subject to
/// Hermitian symmetry.
std::vector<std::complex<double>> roughness_spectrum(const BeGrid& grid,
                                                     const RoughnessSpec& spec);

/// Band-limited synthetic roughness: inverse DFT of roughness_spectrum, rescaled
/// so the RMS about the (zero) mean equals sigma. Deterministic per
/// (seed, grid, spec).
HeightProfile synthesize_roughness(const BeGrid& grid, const RoughnessSpec& spec,
                                   RoughnessReport* report = nullptr);

/// Pointwise sum, excluded if either side is, shifted so the highest point sits
/// at height zero (touching without interference).
HeightProfile compose_profiles(const HeightProfile& h1, const HeightProfile& h2);

/// IDs (row-major) of non-excluded points with h >= max(h) - depth_cutoff.
std::vector<int> geometric_restriction(const HeightProfile& profile, double depth_cutoff);

/// Retained points with a 4-neighbour that is inside the grid, not excluded and
/// not retained: contact there means the restriction was too tight.
std::vector<int> restriction_boundary(const HeightProfile& profile,
                                      const std::vector<int>& retained);

// Form-profile builders used by the bundled cases.
/// Rigid sphere of radius R against a flat: h = -(R - sqrt(R^2 - r^2)).
HeightProfile sphere_profile(const BeGrid& grid, Point2 center, double radius);
/// Smooth hill h = height * exp(-r^2 / (2 width^2)), peak at `center`.
HeightProfile hill_profile(const BeGrid& grid, Point2 center, double height, double width);
/// Marks points within `radius` of `center` as excluded.
void exclude_disk(HeightProfile& profile, Point2 center, double radius);

/// CSV with header `x,y,h`, row-major, excluded points omitted.
void write_height_csv(const std::filesystem::path& path, const HeightProfile& profile);
/// Points absent from the file are excluded.
HeightProfile read_height_csv(const std::filesystem::path& path, const BeGrid& grid);

}  // namespace jointbe
