#include "rmap/mesh.hpp"

#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace rmap {

Mesh make_interval_mesh(int n_elements, double x0, double x1) {
  if (n_elements < 1) throw std::invalid_argument("interval mesh needs >= 1 element");
  Mesh m;
  m.dim = 1;
  m.nodes.resize(n_elements + 1, 1);
  for (int i = 0; i <= n_elements; ++i)
    m.nodes(i, 0) = x0 + (x1 - x0) * static_cast<double>(i) / n_elements;
  m.elements.resize(n_elements, 2);
  for (int e = 0; e < n_elements; ++e) {
    m.elements(e, 0) = e;
    m.elements(e, 1) = e + 1;
  }
  return m;
}

Mesh make_unit_square_mesh(int nx, int ny) {
  if (nx < 1 || ny < 1) throw std::invalid_argument("square mesh needs >= 1 element per side");
  Mesh m;
  m.dim = 2;
  const int nnx = nx + 1, nny = ny + 1;
  m.nodes.resize(nnx * nny, 2);
  for (int j = 0; j < nny; ++j)
    for (int i = 0; i < nnx; ++i) {
      int n = j * nnx + i;
      m.nodes(n, 0) = static_cast<double>(i) / nx;
      m.nodes(n, 1) = static_cast<double>(j) / ny;
    }
  m.elements.resize(nx * ny, 4);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      int e = j * nx + i;
      int n0 = j * nnx + i;
      m.elements(e, 0) = n0;
      m.elements(e, 1) = n0 + 1;
      m.elements(e, 2) = n0 + 1 + nnx;
      m.elements(e, 3) = n0 + nnx;
    }
  return m;
}

void write_mesh(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open mesh file for writing: " + path);
  out.precision(17);
  out << "rmap-mesh 1\n";
  out << "dim " << mesh.dim << "\n";
  out << "nodes " << mesh.num_nodes() << "\n";
  for (Eigen::Index i = 0; i < mesh.num_nodes(); ++i) {
    for (int d = 0; d < mesh.dim; ++d) out << (d ? " " : "") << mesh.nodes(i, d);
    out << "\n";
  }
  out << "elements " << mesh.num_elements() << " "
      << (mesh.dim == 1 ? "line" : "quad") << "\n";
  for (Eigen::Index e = 0; e < mesh.num_elements(); ++e) {
    for (int a = 0; a < mesh.elements.cols(); ++a)
      out << (a ? " " : "") << mesh.elements(e, a);
    out << "\n";
  }
  if (!out) throw std::runtime_error("failed writing mesh file: " + path);
}

Mesh read_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mesh file: " + path);
  auto fail = [&](const std::string& why) -> void {
    throw std::runtime_error("malformed mesh file " + path + ": " + why);
  };

  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "rmap-mesh" || version != 1) fail("bad header");

  std::string key;
  Mesh m;
  in >> key >> m.dim;
  if (key != "dim" || (m.dim != 1 && m.dim != 2)) fail("bad dim");

  Eigen::Index n = 0;
  in >> key >> n;
  if (key != "nodes" || n < 1) fail("bad node count");
  m.nodes.resize(n, m.dim);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int d = 0; d < m.dim; ++d)
      if (!(in >> m.nodes(i, d))) fail("truncated node list");

  Eigen::Index e = 0;
  std::string kind;
  in >> key >> e >> kind;
  if (key != "elements" || e < 1) fail("bad element count");
  int npe = (kind == "line") ? 2 : (kind == "quad") ? 4 : 0;
  if (npe == 0) fail("unknown element kind '" + kind + "'");
  if ((m.dim == 1) != (npe == 2)) fail("element kind does not match dim");
  m.elements.resize(e, npe);
  for (Eigen::Index k = 0; k < e; ++k)
    for (int a = 0; a < npe; ++a) {
      if (!(in >> m.elements(k, a))) fail("truncated element list");
      if (m.elements(k, a) < 0 || m.elements(k, a) >= n) fail("node index out of range");
    }
  return m;
}

std::vector<std::pair<int, int>> boundary_edges(const Mesh& mesh) {
  if (mesh.dim != 2) throw std::invalid_argument("boundary_edges: 2D mesh required");
  struct EdgeUse {
    int count = 0;
    std::pair<int, int> oriented;  // as first seen in element order
  };
  std::map<std::pair<int, int>, EdgeUse> uses;
  for (Eigen::Index e = 0; e < mesh.num_elements(); ++e)
    for (int a = 0; a < 4; ++a) {
      int u = mesh.elements(e, a), v = mesh.elements(e, (a + 1) % 4);
      EdgeUse& use = uses[std::minmax(u, v)];
      if (use.count++ == 0) use.oriented = {u, v};
    }
  std::vector<std::pair<int, int>> edges;
  for (const auto& [key, use] : uses)
    if (use.count == 1) edges.push_back(use.oriented);
  return edges;
}

int nearest_node(const Mesh& mesh, const Vector& point) {
  if (point.size() != mesh.dim) throw std::invalid_argument("nearest_node: point/mesh dim mismatch");
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < mesh.num_nodes(); ++i) {
    double d = (mesh.nodes.row(i).transpose() - point).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

}  // namespace rmap
