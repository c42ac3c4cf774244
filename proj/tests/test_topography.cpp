#include "doctest.h"

#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>

#include "jointbe/error.hpp"
#include "jointbe/topography.hpp"

using namespace jointbe;

namespace {

double sample_std(const std::vector<double>& h) {
  double mean = 0;
  for (double v : h) mean += v;
  mean /= double(h.size());
  double var = 0;
  for (double v : h) var += (v - mean) * (v - mean);
  return std::sqrt(var / double(h.size()));
}

// Plain O(n^2) forward DFT, independent of the FFT used by the generator.
std::vector<std::complex<double>> naive_dft(const BeGrid& g, const std::vector<double>& h) {
  std::vector<std::complex<double>> out(h.size());
  for (int ky = 0; ky < g.ny; ++ky) {
    for (int kx = 0; kx < g.nx; ++kx) {
      std::complex<double> s = 0;
      for (int y = 0; y < g.ny; ++y) {
        for (int x = 0; x < g.nx; ++x) {
          const double arg = -2 * std::numbers::pi * (double(kx * x) / g.nx + double(ky * y) / g.ny);
          s += h[std::size_t(y * g.nx + x)] * std::polar(1.0, arg);
        }
      }
      out[std::size_t(ky * g.nx + kx)] = s;
    }
  }
  return out;
}

const BeGrid kGrid{40, 32, 0.25e-3, 0.25e-3, 0.0, 0.0};
const RoughnessSpec kSpec{1e-6, 0.5e-3, 5e-3, 42};

}  // namespace

TEST_CASE("zero sigma gives a flat profile") {
  RoughnessSpec s = kSpec;
  s.sigma = 0;
  const auto p = synthesize_roughness(kGrid, s);
  for (double h : p.heights) CHECK(h == 0.0);
}

TEST_CASE("same seed reproduces the profile bit for bit") {
  const auto a = synthesize_roughness(kGrid, kSpec);
  const auto b = synthesize_roughness(kGrid, kSpec);
  CHECK(a.heights == b.heights);
  RoughnessSpec other = kSpec;
  other.seed = 43;
  CHECK(synthesize_roughness(kGrid, other).heights != a.heights);
}

TEST_CASE("sample std equals sigma and the spectrum vanishes outside the band") {
  const auto p = synthesize_roughness(kGrid, kSpec);
  CHECK(std::abs(sample_std(p.heights) - kSpec.sigma) / kSpec.sigma < 1e-12);

  const auto spec = naive_dft(kGrid, p.heights);
  const double lx = kGrid.nx * kGrid.pitch_x, ly = kGrid.ny * kGrid.pitch_y;
  double in_max = 0, out_max = 0;
  double in_min = 1e300;
  for (int ky = 0; ky < kGrid.ny; ++ky) {
    for (int kx = 0; kx < kGrid.nx; ++kx) {
      const int mx = kx <= (kGrid.nx - 1) / 2 ? kx : kx - kGrid.nx;
      const int my = ky <= (kGrid.ny - 1) / 2 ? ky : ky - kGrid.ny;
      const double f = std::hypot(mx / lx, my / ly);
      const bool in = f > 0 && 1 / f >= kSpec.lambda_min && 1 / f <= kSpec.lambda_max;
      const double mag = std::abs(spec[std::size_t(ky * kGrid.nx + kx)]);
      if (in) {
        in_max = std::max(in_max, mag);
        in_min = std::min(in_min, mag);
      } else {
        out_max = std::max(out_max, mag);
      }
    }
  }
  CHECK(out_max < 1e-12 * in_max);
  // Constant magnitude inside the band.
  CHECK(in_min == doctest::Approx(in_max).epsilon(1e-9));
}

TEST_CASE("raw variance before rescaling is close to sigma^2 over seeds") {
  double sum = 0;
  for (int s = 0; s < 20; ++s) {
    RoughnessSpec spec = kSpec;
    spec.seed = std::uint64_t(1000 + s);
    RoughnessReport report;
    synthesize_roughness(kGrid, spec, &report);
    sum += report.raw_variance;
    CHECK(report.band_frequencies > 0);
  }
  const double mean = sum / 20;
  CHECK(std::abs(mean - kSpec.sigma * kSpec.sigma) < 0.15 * kSpec.sigma * kSpec.sigma);
}

TEST_CASE("unresolvable band names the wavelength") {
  RoughnessSpec s = kSpec;
  s.lambda_min = 0.3e-3;
  try {
    synthesize_roughness(kGrid, s);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("lambda_min") != std::string::npos);
  }
}

TEST_CASE("composition shifts the summit to zero and merges exclusions") {
  HeightProfile a = hill_profile(kGrid, {5e-3, 4e-3}, 12e-6, 2e-3);
  HeightProfile zero = HeightProfile::flat(kGrid);
  exclude_disk(zero, {5e-3, 4e-3}, 1e-3);
  const auto c = compose_profiles(a, zero);
  CHECK(c.max_height() == 0.0);
  CHECK(c.included_count() < kGrid.size());
  double top = -1e300;
  for (int id = 0; id < kGrid.size(); ++id) {
    if (!c.is_excluded(id)) top = std::max(top, a.heights[std::size_t(id)]);
  }
  for (int id = 0; id < kGrid.size(); ++id) {
    if (c.is_excluded(id)) continue;
    CHECK(c.heights[std::size_t(id)] <= 0.0);
    CHECK(c.heights[std::size_t(id)] == a.heights[std::size_t(id)] - top);
  }
  const auto rough = synthesize_roughness(kGrid, kSpec);
  const auto both = compose_profiles(a, rough);
  CHECK(both.max_height() - both.min_height() >= a.max_height() - a.min_height());

  const auto flat = compose_profiles(HeightProfile::flat(kGrid), HeightProfile::flat(kGrid));
  for (double h : flat.heights) CHECK(h == 0.0);

  BeGrid other = kGrid;
  other.nx = 41;
  CHECK_THROWS_AS(compose_profiles(a, HeightProfile::flat(other)), Error);
}

TEST_CASE("geometric restriction is monotone in the cutoff") {
  const auto h = compose_profiles(hill_profile(kGrid, {5e-3, 4e-3}, 12e-6, 2e-3),
                                  HeightProfile::flat(kGrid));
  std::size_t previous = 0;
  for (double cut : {0.0, 1e-6, 3e-6, 6e-6, 1e-3}) {
    const auto ids = geometric_restriction(h, cut);
    CHECK(ids.size() >= previous);
    CHECK(std::is_sorted(ids.begin(), ids.end()));
    previous = ids.size();
  }
  CHECK(geometric_restriction(h, INFINITY).size() == std::size_t(kGrid.size()));
  const auto flat = HeightProfile::flat(kGrid);
  CHECK(geometric_restriction(flat, 1e-9).size() == std::size_t(kGrid.size()));
  CHECK_THROWS_AS(geometric_restriction(h, -1.0), Error);

  const auto ids = geometric_restriction(h, 3e-6);
  const auto boundary = restriction_boundary(h, ids);
  CHECK(!boundary.empty());
  CHECK(boundary.size() < ids.size());
  CHECK(restriction_boundary(h, geometric_restriction(h, INFINITY)).empty());
}

TEST_CASE("height CSV round trip keeps values and exclusions") {
  HeightProfile p = synthesize_roughness(kGrid, kSpec);
  exclude_disk(p, {5e-3, 4e-3}, 1e-3);
  const auto path = std::filesystem::temp_directory_path() / "jointbe_height_roundtrip.csv";
  write_height_csv(path, p);
  const auto q = read_height_csv(path, kGrid);
  CHECK(q.excluded == p.excluded);
  for (int id = 0; id < kGrid.size(); ++id) {
    if (!p.is_excluded(id)) CHECK(q.heights[std::size_t(id)] == p.heights[std::size_t(id)]);
  }
  std::filesystem::remove(path);
}
