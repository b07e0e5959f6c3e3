#include "ensemblecast/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace ecast {
namespace {

MeshLevel make_level(const GridSpec& grid, int res) {
  MeshLevel lvl;
  lvl.res = res;
  lvl.lat.reserve(static_cast<std::size_t>(res) * res);
  lvl.lon.reserve(lvl.lat.capacity());
  const double lat0 = grid.lats.front(), lat1 = grid.lats.back();
  const double lon0 = grid.lons.front(), lon1 = grid.lons.back();
  for (int i = 0; i < res; ++i)
    for (int j = 0; j < res; ++j) {
      lvl.lat.push_back(lat0 + (lat1 - lat0) * i / (res - 1));
      lvl.lon.push_back(lon0 + (lon1 - lon0) * j / (res - 1));
    }
  for (int i = 0; i < res; ++i)
    for (int j = 0; j < res; ++j)
      for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj) {
          if (di == 0 && dj == 0) continue;
          const int ni = i + di, nj = j + dj;
          if (ni < 0 || ni >= res || nj < 0 || nj >= res) continue;
          lvl.intra.push_back({i * res + j, ni * res + nj});
        }
  return lvl;
}

int nearest_node(const MeshLevel& lvl, double lat, double lon) {
  double best = std::numeric_limits<double>::infinity();
  int best_n = 0;
  for (int n = 0; n < lvl.n_nodes(); ++n) {
    const double dlat = lvl.lat[n] - lat, dlon = lvl.lon[n] - lon;
    const double d2 = dlat * dlat + dlon * dlon;
    if (d2 < best) {
      best = d2;
      best_n = n;
    }
  }
  return best_n;
}

std::vector<int> nearest_nodes(const MeshLevel& lvl, double lat, double lon, int k) {
  std::vector<std::pair<double, int>> dist;
  dist.reserve(lvl.n_nodes());
  for (int n = 0; n < lvl.n_nodes(); ++n) {
    const double dlat = lvl.lat[n] - lat, dlon = lvl.lon[n] - lon;
    dist.emplace_back(dlat * dlat + dlon * dlon, n);
  }
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), dist.size());
  std::partial_sort(dist.begin(), dist.begin() + take, dist.end());
  std::vector<int> out(take);
  for (std::size_t i = 0; i < take; ++i) out[i] = dist[i].second;
  return out;
}

}  // namespace

HierMesh build_hier_mesh(const GridSpec& grid, const std::vector<int>& level_res) {
  grid.validate();
  if (level_res.empty()) fail(Errc::bad_level_spec, "at least one level is required");
  for (std::size_t i = 0; i < level_res.size(); ++i) {
    if (level_res[i] < 2) fail(Errc::bad_level_spec, "level resolution must be >= 2");
    if (i > 0 && level_res[i] >= level_res[i - 1])
      fail(Errc::bad_level_spec, "level resolutions must be strictly decreasing");
  }

  HierMesh mesh;
  for (int res : level_res) mesh.levels.push_back(make_level(grid, res));

  for (std::size_t l = 0; l + 1 < mesh.levels.size(); ++l) {
    const MeshLevel& fine = mesh.levels[l];
    const MeshLevel& coarse = mesh.levels[l + 1];
    std::vector<Edge> up, down;
    up.reserve(fine.lat.size());
    for (int f = 0; f < fine.n_nodes(); ++f) {
      const int c = nearest_node(coarse, fine.lat[f], fine.lon[f]);
      up.push_back({f, c});
      down.push_back({c, f});
    }
    mesh.up_edges.push_back(std::move(up));
    mesh.down_edges.push_back(std::move(down));
  }

  auto [g2m, m2g] = connect_grid_mesh(grid, mesh);
  mesh.g2m = std::move(g2m);
  mesh.m2g = std::move(m2g);
  return mesh;
}

std::pair<std::vector<Edge>, std::vector<Edge>> connect_grid_mesh(const GridSpec& grid,
                                                                  const HierMesh& mesh) {
  const MeshLevel& finest = mesh.levels.front();
  std::vector<Edge> g2m, m2g;
  for (int i = 0; i < grid.n_lat(); ++i)
    for (int j = 0; j < grid.n_lon(); ++j) {
      const std::size_t c = grid.cell(i, j);
      if (!grid.is_sea(c)) continue;
      const auto nodes = nearest_nodes(finest, grid.lats[i], grid.lons[j], 4);
      for (int n : nodes) {
        g2m.push_back({static_cast<int>(c), n});
        m2g.push_back({n, static_cast<int>(c)});
      }
    }
  return {std::move(g2m), std::move(m2g)};
}

void dump_edges_csv(const HierMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(Errc::invalid_argument, "cannot open for writing: " + path.string());
  out << "kind,src,dst\n";
  for (std::size_t l = 0; l < mesh.levels.size(); ++l)
    for (const Edge& e : mesh.levels[l].intra)
      out << "intra" << l << ',' << e.src << ',' << e.dst << '\n';
  for (std::size_t l = 0; l < mesh.up_edges.size(); ++l) {
    for (const Edge& e : mesh.up_edges[l]) out << "up" << l << ',' << e.src << ',' << e.dst << '\n';
    for (const Edge& e : mesh.down_edges[l])
      out << "down" << l << ',' << e.src << ',' << e.dst << '\n';
  }
  for (const Edge& e : mesh.g2m) out << "g2m," << e.src << ',' << e.dst << '\n';
  for (const Edge& e : mesh.m2g) out << "m2g," << e.src << ',' << e.dst << '\n';
}

}  // namespace ecast
