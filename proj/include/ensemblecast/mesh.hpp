#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "ensemblecast/grid.hpp"

namespace ecast {

struct Edge {
  int src = 0;
  int dst = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Uniform res x res node lattice spanning the grid bounding box.
/// Node index is row-major (lat, lon); intra edges are the directed 8-NN pairs.
struct MeshLevel {
  int res = 0;
  std::vector<double> lat, lon;  // per node
  std::vector<Edge> intra;

  int n_nodes() const noexcept { return static_cast<int>(lat.size()); }
};

/// levels[0] is the finest lattice. up_edges[i] runs level i -> i+1 (each fine
/// node to its nearest coarse node); down_edges[i] is the reverse. g2m/m2g
/// connect sea grid cells with their 4 nearest finest-level nodes.
struct HierMesh {
  std::vector<MeshLevel> levels;
  std::vector<std::vector<Edge>> up_edges;
  std::vector<std::vector<Edge>> down_edges;
  std::vector<Edge> g2m;
  std::vector<Edge> m2g;
};

HierMesh build_hier_mesh(const GridSpec& grid, const std::vector<int>& level_res);

std::pair<std::vector<Edge>, std::vector<Edge>> connect_grid_mesh(const GridSpec& grid,
                                                                  const HierMesh& mesh);

void dump_edges_csv(const HierMesh& mesh, const std::filesystem::path& path);

}  // namespace ecast
