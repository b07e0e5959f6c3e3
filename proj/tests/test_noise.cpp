#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "ensemblecast/noise.hpp"
#include "ensemblecast/rng.hpp"

using namespace ecast;

TEST_CASE("gaussian with sigma 0 is the constant mu") {
  const NoiseField f = gaussian_field({4, 4}, 0.3, 0.0, 7);
  for (double v : f.values) CHECK(v == 0.3);
}

TEST_CASE("gaussian sample moments match mu and sigma") {
  const NoiseField f = gaussian_field({64, 64, 64}, 0.0, 0.1, 123);
  const double n = static_cast<double>(f.values.size());
  double sum = 0.0, sum2 = 0.0;
  for (double v : f.values) {
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / n;
  const double std = std::sqrt(sum2 / n - mean * mean);
  CHECK(std::abs(mean) < 4.0 * 0.1 / std::sqrt(n));
  CHECK(std == doctest::Approx(0.1).epsilon(0.05));
}

TEST_CASE("gaussian field is spatially uncorrelated") {
  const NoiseField f = gaussian_field({128, 128}, 0.0, 1.0, 5);
  double sum = 0.0;
  for (double v : f.values) sum += v;
  const double mean = sum / static_cast<double>(f.values.size());
  double num = 0.0, den = 0.0;
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x) {
      const double a = f.at2(y, x) - mean;
      den += a * a;
      if (x + 1 < 128) num += a * (f.at2(y, x + 1) - mean);
    }
  CHECK(std::abs(num / den) < 0.05);
}

TEST_CASE("negative sigma raises NegativeSigma") {
  try {
    gaussian_field({2, 2}, 0.0, -0.1, 0);
    FAIL("expected NegativeSigma");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::negative_sigma);
  }
}

TEST_CASE("perlin value is exactly zero at every lattice corner") {
  const NoiseField f2 = perlin_field2({8, 8}, {2, 2}, {false, false}, 99);
  for (int y = 0; y < 8; y += 4)
    for (int x = 0; x < 8; x += 4) CHECK(f2.at2(y, x) == 0.0);

  const NoiseField f3 = perlin_field3({4, 8, 8}, {2, 2, 2}, {false, false, false}, 99);
  for (int t = 0; t < 4; t += 2)
    for (int y = 0; y < 8; y += 4)
      for (int x = 0; x < 8; x += 4) CHECK(f3.at3(t, y, x) == 0.0);
}

TEST_CASE("tileable time axis is exactly periodic") {
  const std::array<int, 3> res{2, 2, 2};
  const std::array<bool, 3> tileable{true, false, false};
  const PerlinLattice3 lattice(res, tileable, 31);
  const int dt = 2, dy = 4, dx = 4;
  const int period = res[0] * dt;
  for (int t = 0; t < period; ++t)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x)
        CHECK(lattice.sample(t, y, x, dt, dy, dx) ==
              lattice.sample(t + period, y, x, dt, dy, dx));
}

TEST_CASE("tileable spatial axis is exactly periodic in 2D") {
  const PerlinLattice2 lattice({3, 3}, {false, true}, 17);
  const int d = 5;
  for (int y = 0; y <= 3 * d; ++y)
    for (int x = 0; x < 3 * d; ++x)
      CHECK(lattice.sample(y, x, d, d) == lattice.sample(y, x + 3 * d, d, d));
}

TEST_CASE("higher lattice resolution produces more sign changes") {
  const NoiseField coarse = perlin_field3({2, 24, 24}, {2, 3, 3}, {false, false, false}, 8);
  const NoiseField fine = perlin_field3({2, 24, 24}, {2, 12, 12}, {false, false, false}, 8);
  auto sign_changes = [](const NoiseField& f, int row) {
    int n = 0;
    for (int x = 1; x < 24; ++x)
      if ((f.at3(0, row, x) > 0.0) != (f.at3(0, row, x - 1) > 0.0)) ++n;
    return n;
  };
  CHECK(sign_changes(fine, 12) > sign_changes(coarse, 12));
}

TEST_CASE("non-divisible tileable axis raises ResolutionMismatch") {
  try {
    perlin_field2({10, 10}, {3, 3}, {true, false}, 0);
    FAIL("expected ResolutionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::resolution_mismatch);
  }
  // the same shape pads fine when no axis is tileable
  const NoiseField f = perlin_field2({10, 10}, {3, 3}, {false, false}, 0);
  for (double v : f.values) CHECK(std::isfinite(v));
}

TEST_CASE("single octave fractal collapses to plain perlin") {
  FractalPerlinCfg cfg;
  cfg.res = {2, 2};
  cfg.tileable = {false, false};
  cfg.octaves = 1;
  cfg.persistence = 0.7;
  cfg.alpha = 1.0;
  const NoiseField fr = fractal_perlin_field({16, 16}, cfg, 44);
  const NoiseField base = perlin_field2({16, 16}, {2, 2}, {false, false}, 44);
  REQUIRE(fr.values.size() == base.values.size());
  for (std::size_t i = 0; i < fr.values.size(); ++i) CHECK(fr.values[i] == base.values[i]);
}

TEST_CASE("fractal amplitude stays inside the geometric envelope") {
  FractalPerlinCfg cfg;
  cfg.res = {2, 2};
  cfg.tileable = {false, false};
  cfg.octaves = 3;
  cfg.persistence = 0.5;
  cfg.lacunarity = 2;
  cfg.alpha = 0.2;
  const double bound = 0.2 * (1.0 + 0.5 + 0.25);
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const NoiseField f = fractal_perlin_field({16, 16}, cfg, seed);
    for (double v : f.values) worst = std::max(worst, std::abs(v));
  }
  CHECK(worst <= bound);
  CHECK(worst > 0.0);
}

TEST_CASE("fractal preset with a tileable longitude axis generates") {
  FractalPerlinCfg cfg;
  cfg.res = {15, 15};
  cfg.tileable = {false, true};
  cfg.octaves = 3;
  cfg.persistence = 0.5;
  cfg.lacunarity = 2;
  cfg.alpha = 0.2;
  // lon axis must be divisible by 15 * 2^2 = 60; lat axis pads
  const NoiseField f = fractal_perlin_field({45, 60}, cfg, 3);
  CHECK(f.values.size() == 45u * 60u);
  double worst = 0.0;
  for (double v : f.values) {
    CHECK(std::isfinite(v));
    worst = std::max(worst, std::abs(v));
  }
  CHECK(worst <= 0.2 * 1.75);
}

TEST_CASE("fractal is exactly linear in alpha") {
  FractalPerlinCfg unit;
  unit.res = {3, 3};
  unit.octaves = 2;
  unit.persistence = 0.5;
  unit.lacunarity = 2;
  unit.alpha = 1.0;
  FractalPerlinCfg scaled = unit;
  scaled.alpha = 0.37;
  const NoiseField a = fractal_perlin_field({12, 12}, unit, 5);
  const NoiseField b = fractal_perlin_field({12, 12}, scaled, 5);
  for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(b.values[i] == 0.37 * a.values[i]);
}

TEST_CASE("octaves below one raise BadOctaves") {
  FractalPerlinCfg cfg;
  cfg.octaves = 0;
  try {
    fractal_perlin_field({8, 8}, cfg, 0);
    FAIL("expected BadOctaves");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::bad_octaves);
  }
}

TEST_CASE("perlin domain mean tends to zero over many seeds") {
  double acc = 0.0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const NoiseField f = perlin_field2({24, 24}, {3, 3}, {false, false}, seed);
    double s = 0.0;
    for (double v : f.values) s += v;
    acc += s / static_cast<double>(f.values.size());
  }
  CHECK(std::abs(acc / 1000.0) < 0.01);
}

TEST_CASE("perlin steps shrink with lattice density, gaussian steps do not") {
  auto max_step = [](const NoiseField& f) {
    double worst = 0.0;
    for (int y = 0; y < f.shape[0]; ++y)
      for (int x = 1; x < f.shape[1]; ++x)
        worst = std::max(worst, std::abs(f.at2(y, x) - f.at2(y, x - 1)));
    return worst;
  };
  const double kSlope = 3.5;  // empirical bound on the per-lattice-unit slope
  const NoiseField dense = perlin_field2({64, 64}, {4, 4}, {false, false}, 21);
  const NoiseField sparse = perlin_field2({16, 16}, {4, 4}, {false, false}, 21);
  CHECK(max_step(dense) <= kSlope / 16.0);
  CHECK(max_step(sparse) <= kSlope / 4.0);
  const NoiseField white = gaussian_field({64, 64}, 0.0, 1.0, 21);
  CHECK(max_step(white) > kSlope / 16.0);
}

TEST_CASE("noise fields are deterministic in config and seed") {
  const NoiseField a = perlin_field2({12, 12}, {3, 3}, {false, true}, 77);
  const NoiseField b = perlin_field2({12, 12}, {3, 3}, {false, true}, 77);
  const NoiseField c = perlin_field2({12, 12}, {3, 3}, {false, true}, 78);
  CHECK(std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(double)) == 0);
  bool differs = false;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    if (a.values[i] != c.values[i]) differs = true;
  CHECK(differs);
}

namespace {

Field sea_field(GridPtr grid, float value) {
  Field f = make_field(grid, Var::sst);
  for (std::size_t c = 0; c < f.values.size(); ++c)
    if (grid->is_sea(c)) f.values[c] = value;
  return f;
}

}  // namespace

TEST_CASE("perturbing with sigma 0 returns the inputs unchanged") {
  auto grid = std::make_shared<GridSpec>(make_synthetic_grid(6, 6));
  const Field a = sea_field(grid, 290.0f);
  const Field b = sea_field(grid, 291.0f);
  const auto [pa, pb] = perturb_initial_states(a, b, GaussianCfg{0.0, 0.0}, 9);
  for (std::size_t c = 0; c < grid->n_cells(); ++c) {
    if (!grid->is_sea(c)) continue;
    CHECK(pa.values[c] == a.values[c]);
    CHECK(pb.values[c] == b.values[c]);
  }
}

TEST_CASE("perturbation never touches land cells") {
  auto grid = std::make_shared<GridSpec>(make_synthetic_grid(8, 8));
  REQUIRE(grid->n_sea() < grid->n_cells());
  const Field a = sea_field(grid, 290.0f);
  const Field b = sea_field(grid, 291.0f);

  PerlinCfg perlin;
  perlin.res = {2, 2, 2};
  FractalPerlinCfg fractal;
  fractal.res = {2, 2};
  fractal.octaves = 2;
  fractal.alpha = 0.4;
  const NoiseConfig cfgs[] = {GaussianCfg{0.0, 0.5}, NoiseConfig{perlin}, NoiseConfig{fractal}};
  for (const NoiseConfig& cfg : cfgs) {
    const auto [pa, pb] = perturb_initial_states(a, b, cfg, 4);
    for (std::size_t c = 0; c < grid->n_cells(); ++c) {
      if (grid->is_sea(c)) continue;
      CHECK(std::isnan(pa.values[c]));
      CHECK(std::isnan(pb.values[c]));
    }
  }
}

TEST_CASE("gaussian perturbation reproduces the seeded draw") {
  auto grid = std::make_shared<GridSpec>(make_uniform_grid(1, 1, 0.0, 0.0, 0.0, 0.0));
  const Field a = sea_field(grid, 290.0f);
  const Field b = sea_field(grid, 290.0f);
  const std::uint64_t seed = 1234;
  const auto [pa, pb] = perturb_initial_states(a, b, GaussianCfg{0.0, 0.1}, seed);

  Rng rng0(mix_seed(seed, 0));
  Rng rng1(mix_seed(seed, 1));
  CHECK(pa.values[0] == static_cast<float>(290.0f + rng0.normal(0.0, 0.1)));
  CHECK(pb.values[0] == static_cast<float>(290.0f + rng1.normal(0.0, 0.1)));

  const auto [qa, qb] = perturb_initial_states(a, b, GaussianCfg{0.0, 0.1}, seed);
  CHECK(qa.values[0] == pa.values[0]);
  CHECK(qb.values[0] == pb.values[0]);
}

TEST_CASE("a 3D perlin config shares one field across both states") {
  auto grid = std::make_shared<GridSpec>(make_uniform_grid(8, 8, 0.0, 7.0, 0.0, 7.0));
  const Field a = sea_field(grid, 290.0f);
  const Field b = sea_field(grid, 291.0f);
  PerlinCfg cfg;
  cfg.res = {2, 2, 2};
  const std::uint64_t seed = 55;
  const auto [pa, pb] = perturb_initial_states(a, b, cfg, seed);
  const NoiseField noise = perlin_field3({2, 8, 8}, cfg.res, cfg.tileable, seed);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      const std::size_t c = grid->cell(i, j);
      CHECK(pa.values[c] == static_cast<float>(290.0f + noise.at3(0, i, j)));
      CHECK(pb.values[c] == static_cast<float>(291.0f + noise.at3(1, i, j)));
    }
}

TEST_CASE("mismatched grids raise GridMismatch") {
  auto g1 = std::make_shared<GridSpec>(make_uniform_grid(2, 2, 0.0, 1.0, 0.0, 1.0));
  auto g2 = std::make_shared<GridSpec>(make_uniform_grid(2, 2, 0.0, 1.0, 0.0, 2.0));
  const Field a = sea_field(g1, 290.0f);
  const Field b = sea_field(g2, 290.0f);
  try {
    perturb_initial_states(a, b, GaussianCfg{0.0, 0.1}, 0);
    FAIL("expected GridMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::grid_mismatch);
  }
}
