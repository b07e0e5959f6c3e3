#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <variant>
#include <vector>

#include "ensemblecast/grid.hpp"

namespace ecast {

struct GaussianCfg {
  double mu = 0.0;
  double sigma = 0.0;
};

/// Axis order is (t, y, x); shape components of 0 are derived from the grid
/// at application time (t=2, y=n_lat, x=n_lon).
struct PerlinCfg {
  std::array<int, 3> shape{0, 0, 0};
  std::array<int, 3> res{1, 1, 1};
  std::array<bool, 3> tileable{false, false, false};
};

struct FractalPerlinCfg {
  std::array<int, 2> shape{0, 0};
  std::array<int, 2> res{1, 1};
  std::array<bool, 2> tileable{false, false};
  int octaves = 1;
  double persistence = 0.5;
  int lacunarity = 2;
  double alpha = 1.0;
};

using NoiseConfig = std::variant<GaussianCfg, PerlinCfg, FractalPerlinCfg>;

enum class NoiseKind { gaussian, perlin, fractal_perlin };

struct NoiseField {
  NoiseKind kind = NoiseKind::gaussian;
  std::uint64_t seed = 0;
  std::vector<int> shape;
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
  double at2(int y, int x) const noexcept {
    return values[static_cast<std::size_t>(y) * shape[1] + x];
  }
  double at3(int t, int y, int x) const noexcept {
    return values[(static_cast<std::size_t>(t) * shape[1] + y) * shape[2] + x];
  }
};

/// Gradient lattice over res_y x res_x cells; gradients are unit vectors,
/// tileable axes wrap their gradient index. sample() evaluates at lattice
/// coordinate (ky/dy, kx/dx) so periodicity tests can compare bit-exactly.
class PerlinLattice2 {
 public:
  PerlinLattice2(std::array<int, 2> res, std::array<bool, 2> tileable, std::uint64_t seed);
  double sample(std::int64_t ky, std::int64_t kx, int dy, int dx) const;
  const std::array<int, 2>& res() const noexcept { return res_; }

 private:
  std::array<int, 2> res_;
  std::array<bool, 2> tileable_;
  std::vector<double> gx_, gy_;  // (res_y+1) x (res_x+1)
};

class PerlinLattice3 {
 public:
  PerlinLattice3(std::array<int, 3> res, std::array<bool, 3> tileable, std::uint64_t seed);
  double sample(std::int64_t kt, std::int64_t ky, std::int64_t kx, int dt, int dy,
                int dx) const;
  const std::array<int, 3>& res() const noexcept { return res_; }

 private:
  std::array<int, 3> res_;
  std::array<bool, 3> tileable_;
  std::vector<double> gt_, gy_, gx_;  // (res_t+1) x (res_y+1) x (res_x+1)
};

NoiseField gaussian_field(const std::vector<int>& shape, double mu, double sigma,
                          std::uint64_t seed);
NoiseField perlin_field2(std::array<int, 2> shape, std::array<int, 2> res,
                         std::array<bool, 2> tileable, std::uint64_t seed);
NoiseField perlin_field3(std::array<int, 3> shape, std::array<int, 3> res,
                         std::array<bool, 3> tileable, std::uint64_t seed);
NoiseField fractal_perlin_field(std::array<int, 2> shape, const FractalPerlinCfg& cfg,
                                std::uint64_t seed);

/// Adds seeded noise to the two initial SST states on sea cells only.
/// Gaussian and fractal Perlin draw independently per state (sub-seeds 0, 1);
/// a 3D Perlin config generates one (2, n_lat, n_lon) field shared by both.
std::pair<Field, Field> perturb_initial_states(const Field& x_prev, const Field& x_curr,
                                               const NoiseConfig& cfg, std::uint64_t seed);

}  // namespace ecast
