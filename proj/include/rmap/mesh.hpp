#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rmap/types.hpp"

namespace rmap {

// Nodal mesh with linear elements: segments in 1D, bilinear quads in 2D.
// Plain-text format (see read_mesh):
//
//   rmap-mesh 1
//   dim 2
//   nodes <N>
//   <x> [y]          one line per node
//   elements <E> <line|quad>
//   <i0> <i1> [...]  zero-based connectivity, quads counter-clockwise
struct Mesh {
  int dim = 0;
  Matrix nodes;           // N x dim
  Eigen::MatrixXi elements;  // E x nodes_per_element

  Eigen::Index num_nodes() const { return nodes.rows(); }
  Eigen::Index num_elements() const { return elements.rows(); }
};

Mesh make_interval_mesh(int n_elements, double x0 = 0.0, double x1 = 1.0);
Mesh make_unit_square_mesh(int nx, int ny);

void write_mesh(const Mesh& mesh, const std::string& path);
Mesh read_mesh(const std::string& path);

// Boundary edges of a 2D quad mesh as (a, b) node pairs, each appearing in
// exactly one element.
std::vector<std::pair<int, int>> boundary_edges(const Mesh& mesh);

int nearest_node(const Mesh& mesh, const Vector& point);

}  // namespace rmap
