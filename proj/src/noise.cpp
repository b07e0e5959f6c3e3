#include "ensemblecast/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ensemblecast/rng.hpp"

namespace ecast {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Scale factors mapping the theoretical value range onto [-1, 1].
const double kScale2 = std::sqrt(2.0);
const double kScale3 = 2.0 / std::sqrt(3.0);

double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

void check_axis(int shape, int res, bool tileable, int res_final) {
  if (shape < 1) fail(Errc::resolution_mismatch, "shape components must be positive");
  if (res < 1) fail(Errc::resolution_mismatch, "res components must be positive");
  if (tileable && shape % res_final != 0)
    fail(Errc::resolution_mismatch,
         "tileable axis length must be divisible by the lattice resolution");
}

// Cells per lattice cell after padding the axis to the next multiple of res.
int cells_per(int shape, int res) { return (shape + res - 1) / res; }

struct AxisPos {
  std::int64_t i0;
  double frac;
};

AxisPos axis_pos(std::int64_t k, int d, int res, bool tileable) {
  if (k < 0) fail(Errc::invalid_argument, "negative sample index");
  std::int64_t i0 = k / d;
  const double frac = static_cast<double>(k % d) / d;
  if (tileable) {
    i0 %= res;
  } else if (i0 > res || (i0 == res && frac != 0.0)) {
    fail(Errc::invalid_argument, "sample index outside the non-tileable lattice");
  }
  return {i0, frac};
}

}  // namespace

PerlinLattice2::PerlinLattice2(std::array<int, 2> res, std::array<bool, 2> tileable,
                               std::uint64_t seed)
    : res_(res), tileable_(tileable) {
  check_axis(res[0], res[0], false, res[0]);
  check_axis(res[1], res[1], false, res[1]);
  const int ny = res[0] + 1, nx = res[1] + 1;
  gy_.resize(static_cast<std::size_t>(ny) * nx);
  gx_.resize(gy_.size());
  Rng rng(seed);
  for (std::size_t i = 0; i < gy_.size(); ++i) {
    const double theta = kTwoPi * rng.unit();
    gy_[i] = std::cos(theta);
    gx_[i] = std::sin(theta);
  }
  // Tileable axes reuse the opening gradients on the closing edge.
  if (tileable[0])
    for (int j = 0; j < nx; ++j) {
      gy_[static_cast<std::size_t>(res[0]) * nx + j] = gy_[j];
      gx_[static_cast<std::size_t>(res[0]) * nx + j] = gx_[j];
    }
  if (tileable[1])
    for (int i = 0; i < ny; ++i) {
      gy_[static_cast<std::size_t>(i) * nx + res[1]] = gy_[static_cast<std::size_t>(i) * nx];
      gx_[static_cast<std::size_t>(i) * nx + res[1]] = gx_[static_cast<std::size_t>(i) * nx];
    }
}

double PerlinLattice2::sample(std::int64_t ky, std::int64_t kx, int dy, int dx) const {
  const AxisPos y = axis_pos(ky, dy, res_[0], tileable_[0]);
  const AxisPos x = axis_pos(kx, dx, res_[1], tileable_[1]);
  const int nx = res_[1] + 1;
  auto corner = [&](std::int64_t iy, std::int64_t ix, double oy, double ox) {
    const std::size_t g = static_cast<std::size_t>(iy) * nx + static_cast<std::size_t>(ix);
    return gy_[g] * oy + gx_[g] * ox;
  };
  std::int64_t y1 = tileable_[0] ? (y.i0 + 1) % res_[0] : std::min<std::int64_t>(y.i0 + 1, res_[0]);
  std::int64_t x1 = tileable_[1] ? (x.i0 + 1) % res_[1] : std::min<std::int64_t>(x.i0 + 1, res_[1]);
  const double n00 = corner(y.i0, x.i0, y.frac, x.frac);
  const double n01 = corner(y.i0, x1, y.frac, x.frac - 1.0);
  const double n10 = corner(y1, x.i0, y.frac - 1.0, x.frac);
  const double n11 = corner(y1, x1, y.frac - 1.0, x.frac - 1.0);
  const double ty = fade(y.frac), tx = fade(x.frac);
  const double n0 = n00 + tx * (n01 - n00);
  const double n1 = n10 + tx * (n11 - n10);
  return kScale2 * (n0 + ty * (n1 - n0));
}

PerlinLattice3::PerlinLattice3(std::array<int, 3> res, std::array<bool, 3> tileable,
                               std::uint64_t seed)
    : res_(res), tileable_(tileable) {
  for (int a = 0; a < 3; ++a) check_axis(res[a], res[a], false, res[a]);
  const int nt = res[0] + 1, ny = res[1] + 1, nx = res[2] + 1;
  const std::size_t n = static_cast<std::size_t>(nt) * ny * nx;
  gt_.resize(n);
  gy_.resize(n);
  gx_.resize(n);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = 2.0 * rng.unit() - 1.0;
    const double phi = kTwoPi * rng.unit();
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    gt_[i] = z;
    gy_[i] = r * std::cos(phi);
    gx_[i] = r * std::sin(phi);
  }
  auto idx = [ny, nx](int t, int y, int x) {
    return (static_cast<std::size_t>(t) * ny + y) * nx + x;
  };
  auto copy = [&](std::size_t dst, std::size_t src) {
    gt_[dst] = gt_[src];
    gy_[dst] = gy_[src];
    gx_[dst] = gx_[src];
  };
  if (tileable[0])
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) copy(idx(res[0], y, x), idx(0, y, x));
  if (tileable[1])
    for (int t = 0; t < nt; ++t)
      for (int x = 0; x < nx; ++x) copy(idx(t, res[1], x), idx(t, 0, x));
  if (tileable[2])
    for (int t = 0; t < nt; ++t)
      for (int y = 0; y < ny; ++y) copy(idx(t, y, res[2]), idx(t, y, 0));
}

double PerlinLattice3::sample(std::int64_t kt, std::int64_t ky, std::int64_t kx, int dt,
                              int dy, int dx) const {
  const AxisPos t = axis_pos(kt, dt, res_[0], tileable_[0]);
  const AxisPos y = axis_pos(ky, dy, res_[1], tileable_[1]);
  const AxisPos x = axis_pos(kx, dx, res_[2], tileable_[2]);
  const int ny = res_[1] + 1, nx = res_[2] + 1;
  auto corner = [&](std::int64_t it, std::int64_t iy, std::int64_t ix, double ot, double oy,
                    double ox) {
    const std::size_t g =
        (static_cast<std::size_t>(it) * ny + static_cast<std::size_t>(iy)) * nx +
        static_cast<std::size_t>(ix);
    return gt_[g] * ot + gy_[g] * oy + gx_[g] * ox;
  };
  std::int64_t t1 = tileable_[0] ? (t.i0 + 1) % res_[0] : std::min<std::int64_t>(t.i0 + 1, res_[0]);
  std::int64_t y1 = tileable_[1] ? (y.i0 + 1) % res_[1] : std::min<std::int64_t>(y.i0 + 1, res_[1]);
  std::int64_t x1 = tileable_[2] ? (x.i0 + 1) % res_[2] : std::min<std::int64_t>(x.i0 + 1, res_[2]);
  const double n000 = corner(t.i0, y.i0, x.i0, t.frac, y.frac, x.frac);
  const double n001 = corner(t.i0, y.i0, x1, t.frac, y.frac, x.frac - 1.0);
  const double n010 = corner(t.i0, y1, x.i0, t.frac, y.frac - 1.0, x.frac);
  const double n011 = corner(t.i0, y1, x1, t.frac, y.frac - 1.0, x.frac - 1.0);
  const double n100 = corner(t1, y.i0, x.i0, t.frac - 1.0, y.frac, x.frac);
  const double n101 = corner(t1, y.i0, x1, t.frac - 1.0, y.frac, x.frac - 1.0);
  const double n110 = corner(t1, y1, x.i0, t.frac - 1.0, y.frac - 1.0, x.frac);
  const double n111 = corner(t1, y1, x1, t.frac - 1.0, y.frac - 1.0, x.frac - 1.0);
  const double ft = fade(t.frac), fy = fade(y.frac), fx = fade(x.frac);
  auto lerp = [](double a, double b, double w) { return a + w * (b - a); };
  const double n00 = lerp(n000, n001, fx), n01 = lerp(n010, n011, fx);
  const double n10 = lerp(n100, n101, fx), n11 = lerp(n110, n111, fx);
  const double n0 = lerp(n00, n01, fy), n1 = lerp(n10, n11, fy);
  return kScale3 * lerp(n0, n1, ft);
}

NoiseField gaussian_field(const std::vector<int>& shape, double mu, double sigma,
                          std::uint64_t seed) {
  if (sigma < 0.0) fail(Errc::negative_sigma, "sigma must be >= 0");
  std::size_t n = 1;
  for (int s : shape) {
    if (s < 1) fail(Errc::invalid_argument, "shape components must be positive");
    n *= static_cast<std::size_t>(s);
  }
  NoiseField f;
  f.kind = NoiseKind::gaussian;
  f.seed = seed;
  f.shape = shape;
  f.values.resize(n);
  Rng rng(seed);
  for (double& v : f.values) v = rng.normal(mu, sigma);
  return f;
}

NoiseField perlin_field2(std::array<int, 2> shape, std::array<int, 2> res,
                         std::array<bool, 2> tileable, std::uint64_t seed) {
  for (int a = 0; a < 2; ++a) check_axis(shape[a], res[a], tileable[a], res[a]);
  const int dy = cells_per(shape[0], res[0]);
  const int dx = cells_per(shape[1], res[1]);
  const PerlinLattice2 lattice(res, tileable, seed);
  NoiseField f;
  f.kind = NoiseKind::perlin;
  f.seed = seed;
  f.shape = {shape[0], shape[1]};
  f.values.resize(static_cast<std::size_t>(shape[0]) * shape[1]);
  std::size_t c = 0;
  for (int y = 0; y < shape[0]; ++y)
    for (int x = 0; x < shape[1]; ++x) f.values[c++] = lattice.sample(y, x, dy, dx);
  return f;
}

NoiseField perlin_field3(std::array<int, 3> shape, std::array<int, 3> res,
                         std::array<bool, 3> tileable, std::uint64_t seed) {
  for (int a = 0; a < 3; ++a) check_axis(shape[a], res[a], tileable[a], res[a]);
  const int dt = cells_per(shape[0], res[0]);
  const int dy = cells_per(shape[1], res[1]);
  const int dx = cells_per(shape[2], res[2]);
  const PerlinLattice3 lattice(res, tileable, seed);
  NoiseField f;
  f.kind = NoiseKind::perlin;
  f.seed = seed;
  f.shape = {shape[0], shape[1], shape[2]};
  f.values.resize(static_cast<std::size_t>(shape[0]) * shape[1] * shape[2]);
  std::size_t c = 0;
  for (int t = 0; t < shape[0]; ++t)
    for (int y = 0; y < shape[1]; ++y)
      for (int x = 0; x < shape[2]; ++x) f.values[c++] = lattice.sample(t, y, x, dt, dy, dx);
  return f;
}

NoiseField fractal_perlin_field(std::array<int, 2> shape, const FractalPerlinCfg& cfg,
                                std::uint64_t seed) {
  if (cfg.octaves < 1) fail(Errc::bad_octaves, "octaves must be >= 1");
  if (cfg.lacunarity < 1) fail(Errc::resolution_mismatch, "lacunarity must be a positive integer");
  std::int64_t factor = 1;
  for (int i = 1; i < cfg.octaves; ++i) factor *= cfg.lacunarity;
  std::array<int, 2> res_final;
  for (int a = 0; a < 2; ++a) {
    const std::int64_t rf = static_cast<std::int64_t>(cfg.res[a]) * factor;
    if (rf > 1 << 20) fail(Errc::resolution_mismatch, "final octave resolution overflows");
    res_final[a] = static_cast<int>(rf);
    check_axis(shape[a], cfg.res[a], cfg.tileable[a], res_final[a]);
  }
  const int py = cells_per(shape[0], res_final[0]) * res_final[0];
  const int px = cells_per(shape[1], res_final[1]) * res_final[1];

  NoiseField f;
  f.kind = NoiseKind::fractal_perlin;
  f.seed = seed;
  f.shape = {shape[0], shape[1]};
  f.values.assign(static_cast<std::size_t>(shape[0]) * shape[1], 0.0);

  double amp = 1.0;
  std::array<int, 2> res = cfg.res;
  for (int oct = 0; oct < cfg.octaves; ++oct) {
    const std::uint64_t sub_seed = oct == 0 ? seed : mix_seed(seed, static_cast<std::uint64_t>(oct));
    const PerlinLattice2 lattice(res, cfg.tileable, sub_seed);
    const int dy = py / res[0], dx = px / res[1];
    std::size_t c = 0;
    for (int y = 0; y < shape[0]; ++y)
      for (int x = 0; x < shape[1]; ++x) f.values[c++] += amp * lattice.sample(y, x, dy, dx);
    amp *= cfg.persistence;
    res[0] *= cfg.lacunarity;
    res[1] *= cfg.lacunarity;
  }
  for (double& v : f.values) v *= cfg.alpha;
  return f;
}

std::pair<Field, Field> perturb_initial_states(const Field& x_prev, const Field& x_curr,
                                               const NoiseConfig& cfg, std::uint64_t seed) {
  if (!x_prev.grid || !x_curr.grid || !x_prev.grid->same_as(*x_curr.grid))
    fail(Errc::grid_mismatch, "initial states must share a grid");
  const GridSpec& g = *x_prev.grid;
  const int n_lat = g.n_lat(), n_lon = g.n_lon();

  std::pair<Field, Field> out{x_prev, x_curr};
  Field* states[2] = {&out.first, &out.second};

  auto apply2 = [&](Field& f, const NoiseField& noise) {
    for (int i = 0; i < n_lat; ++i)
      for (int j = 0; j < n_lon; ++j) {
        const std::size_t c = g.cell(i, j);
        if (g.is_sea(c)) f.values[c] = static_cast<float>(f.values[c] + noise.at2(i, j));
      }
  };

  if (const auto* gauss = std::get_if<GaussianCfg>(&cfg)) {
    for (int s = 0; s < 2; ++s) {
      const NoiseField noise = gaussian_field({n_lat, n_lon}, gauss->mu, gauss->sigma,
                                              mix_seed(seed, static_cast<std::uint64_t>(s)));
      apply2(*states[s], noise);
    }
  } else if (const auto* perlin = std::get_if<PerlinCfg>(&cfg)) {
    std::array<int, 3> shape = perlin->shape;
    if (shape[0] == 0) shape[0] = 2;
    if (shape[1] == 0) shape[1] = n_lat;
    if (shape[2] == 0) shape[2] = n_lon;
    if (shape[0] != 2 || shape[1] != n_lat || shape[2] != n_lon)
      fail(Errc::shape_mismatch, "3D noise shape must be (2, n_lat, n_lon)");
    const NoiseField noise = perlin_field3(shape, perlin->res, perlin->tileable, seed);
    for (int s = 0; s < 2; ++s)
      for (int i = 0; i < n_lat; ++i)
        for (int j = 0; j < n_lon; ++j) {
          const std::size_t c = g.cell(i, j);
          if (g.is_sea(c))
            states[s]->values[c] = static_cast<float>(states[s]->values[c] + noise.at3(s, i, j));
        }
  } else {
    const auto& fr = std::get<FractalPerlinCfg>(cfg);
    FractalPerlinCfg local = fr;
    if (local.shape[0] == 0) local.shape[0] = n_lat;
    if (local.shape[1] == 0) local.shape[1] = n_lon;
    if (local.shape[0] != n_lat || local.shape[1] != n_lon)
      fail(Errc::shape_mismatch, "2D noise shape must be (n_lat, n_lon)");
    for (int s = 0; s < 2; ++s) {
      const NoiseField noise = fractal_perlin_field(local.shape, local,
                                                    mix_seed(seed, static_cast<std::uint64_t>(s)));
      apply2(*states[s], noise);
    }
  }
  return out;
}

}  // namespace ecast
