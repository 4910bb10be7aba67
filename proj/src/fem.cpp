#include "rmap/fem.hpp"

#include <array>

#include <Eigen/LU>
#include <cmath>
#include <vector>

namespace rmap {

namespace {

constexpr double kGauss = 0.57735026918962576451;  // 1/sqrt(3)

struct QuadPoint {
  double xi, eta, weight;
};

// 2x2 rule on [-1,1]^2 (weights 1) and 2-point rule on [-1,1].
const std::array<QuadPoint, 4> kQuad2d = {{{-kGauss, -kGauss, 1.0},
                                           {kGauss, -kGauss, 1.0},
                                           {kGauss, kGauss, 1.0},
                                           {-kGauss, kGauss, 1.0}}};
const std::array<QuadPoint, 2> kQuad1d = {{{-kGauss, 0.0, 1.0}, {kGauss, 0.0, 1.0}}};

void shape_quad(double xi, double eta, std::array<double, 4>& phi,
                std::array<double, 4>& dphi_dxi, std::array<double, 4>& dphi_deta) {
  const double xs[4] = {-1, 1, 1, -1};
  const double ys[4] = {-1, -1, 1, 1};
  for (int a = 0; a < 4; ++a) {
    phi[a] = 0.25 * (1 + xs[a] * xi) * (1 + ys[a] * eta);
    dphi_dxi[a] = 0.25 * xs[a] * (1 + ys[a] * eta);
    dphi_deta[a] = 0.25 * ys[a] * (1 + xs[a] * xi);
  }
}

// Per-quadrature-point callback: nodal basis values, physical gradients and
// the integration weight (gauss weight times |det J|).
template <class F>
void for_each_quad_point(const Mesh& mesh, Eigen::Index e, F&& f) {
  if (mesh.dim == 1) {
    int n0 = mesh.elements(e, 0), n1 = mesh.elements(e, 1);
    double x0 = mesh.nodes(n0, 0), x1 = mesh.nodes(n1, 0);
    double h = x1 - x0;
    for (const auto& q : kQuad1d) {
      std::array<double, 4> phi = {0.5 * (1 - q.xi), 0.5 * (1 + q.xi), 0, 0};
      Matrix grad(2, 1);
      grad(0, 0) = -1.0 / h;
      grad(1, 0) = 1.0 / h;
      Vector x(1);
      x[0] = x0 + 0.5 * (1 + q.xi) * h;
      f(phi, grad, q.weight * std::abs(h) * 0.5, x);
    }
    return;
  }
  std::array<double, 4> phi, dxi, deta;
  for (const auto& q : kQuad2d) {
    shape_quad(q.xi, q.eta, phi, dxi, deta);
    Eigen::Matrix2d jac = Eigen::Matrix2d::Zero();
    Vector x = Vector::Zero(2);
    for (int a = 0; a < 4; ++a) {
      int n = mesh.elements(e, a);
      jac(0, 0) += dxi[a] * mesh.nodes(n, 0);
      jac(0, 1) += dxi[a] * mesh.nodes(n, 1);
      jac(1, 0) += deta[a] * mesh.nodes(n, 0);
      jac(1, 1) += deta[a] * mesh.nodes(n, 1);
      x[0] += phi[a] * mesh.nodes(n, 0);
      x[1] += phi[a] * mesh.nodes(n, 1);
    }
    double det = jac.determinant();
    Eigen::Matrix2d inv_t = jac.inverse().transpose();
    Matrix grad(4, 2);
    for (int a = 0; a < 4; ++a) {
      Eigen::Vector2d ref(dxi[a], deta[a]);
      grad.row(a) = (inv_t * ref).transpose();
    }
    f(phi, grad, q.weight * std::abs(det), x);
  }
}

int nodes_per_element(const Mesh& mesh) { return mesh.dim == 1 ? 2 : 4; }

template <class Kernel>
SpMat assemble_matrix(const Mesh& mesh, Kernel&& kernel) {
  const int npe = nodes_per_element(mesh);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(mesh.num_elements() * npe * npe);
  for (Eigen::Index e = 0; e < mesh.num_elements(); ++e) {
    Eigen::Matrix4d local = Eigen::Matrix4d::Zero();
    for_each_quad_point(mesh, e,
                        [&](const std::array<double, 4>& phi, const Matrix& grad,
                            double w, const Vector& x) {
                          kernel(e, phi, grad, w, x, local);
                        });
    for (int a = 0; a < npe; ++a)
      for (int b = 0; b < npe; ++b)
        trips.emplace_back(mesh.elements(e, a), mesh.elements(e, b), local(a, b));
  }
  SpMat m(mesh.num_nodes(), mesh.num_nodes());
  m.setFromTriplets(trips.begin(), trips.end());
  m.makeCompressed();
  return m;
}

}  // namespace

SpMat assemble_mass(const Mesh& mesh) {
  const int npe = nodes_per_element(mesh);
  return assemble_matrix(mesh, [npe](Eigen::Index, const std::array<double, 4>& phi,
                                     const Matrix&, double w, const Vector&,
                                     Eigen::Matrix4d& local) {
    for (int a = 0; a < npe; ++a)
      for (int b = 0; b < npe; ++b) local(a, b) += w * phi[a] * phi[b];
  });
}

SpMat assemble_lumped_mass(const Mesh& mesh) {
  SpMat consistent = assemble_mass(mesh);
  Vector row_sums = consistent * Vector::Ones(consistent.rows());
  SpMat lumped(consistent.rows(), consistent.cols());
  std::vector<Eigen::Triplet<double>> trips;
  for (Eigen::Index i = 0; i < row_sums.size(); ++i)
    trips.emplace_back(i, i, row_sums[i]);
  lumped.setFromTriplets(trips.begin(), trips.end());
  return lumped;
}

SpMat assemble_stiffness(const Mesh& mesh) {
  const int npe = nodes_per_element(mesh);
  return assemble_matrix(mesh, [npe](Eigen::Index, const std::array<double, 4>&,
                                     const Matrix& grad, double w, const Vector&,
                                     Eigen::Matrix4d& local) {
    for (int a = 0; a < npe; ++a)
      for (int b = 0; b < npe; ++b)
        local(a, b) += w * grad.row(a).dot(grad.row(b));
  });
}

SpMat assemble_weighted_mass(const Mesh& mesh, const Vector& c,
                             const std::function<double(double)>& w_of_c) {
  if (c.size() != mesh.num_nodes())
    throw std::invalid_argument("assemble_weighted_mass: field size mismatch");
  const int npe = nodes_per_element(mesh);
  return assemble_matrix(mesh, [&](Eigen::Index e, const std::array<double, 4>& phi,
                                   const Matrix&, double w, const Vector&,
                                   Eigen::Matrix4d& local) {
    double cq = 0;
    for (int a = 0; a < npe; ++a) cq += phi[a] * c[mesh.elements(e, a)];
    double coeff = w * w_of_c(cq);
    for (int a = 0; a < npe; ++a)
      for (int b = 0; b < npe; ++b) local(a, b) += coeff * phi[a] * phi[b];
  });
}

Vector weighted_triple_product(const Mesh& mesh, const Vector& c,
                               const std::function<double(double)>& w_of_c,
                               const Vector& a_field, const Vector& b_field) {
  if (c.size() != mesh.num_nodes() || a_field.size() != mesh.num_nodes() ||
      b_field.size() != mesh.num_nodes())
    throw std::invalid_argument("weighted_triple_product: field size mismatch");
  const int npe = nodes_per_element(mesh);
  Vector t = Vector::Zero(mesh.num_nodes());
  for (Eigen::Index e = 0; e < mesh.num_elements(); ++e)
    for_each_quad_point(mesh, e,
                        [&](const std::array<double, 4>& phi, const Matrix&, double w,
                            const Vector&) {
                          double cq = 0, aq = 0, bq = 0;
                          for (int a = 0; a < npe; ++a) {
                            int n = mesh.elements(e, a);
                            cq += phi[a] * c[n];
                            aq += phi[a] * a_field[n];
                            bq += phi[a] * b_field[n];
                          }
                          double coeff = w * w_of_c(cq) * aq * bq;
                          for (int a = 0; a < npe; ++a)
                            t[mesh.elements(e, a)] += coeff * phi[a];
                        });
  return t;
}

Vector weighted_quad_product(const Mesh& mesh, const Vector& c,
                             const std::function<double(double)>& w_of_c,
                             const Vector& v_field, const Vector& a_field,
                             const Vector& b_field) {
  if (c.size() != mesh.num_nodes() || v_field.size() != mesh.num_nodes() ||
      a_field.size() != mesh.num_nodes() || b_field.size() != mesh.num_nodes())
    throw std::invalid_argument("weighted_quad_product: field size mismatch");
  const int npe = nodes_per_element(mesh);
  Vector t = Vector::Zero(mesh.num_nodes());
  for (Eigen::Index e = 0; e < mesh.num_elements(); ++e)
    for_each_quad_point(mesh, e,
                        [&](const std::array<double, 4>& phi, const Matrix&, double w,
                            const Vector&) {
                          double cq = 0, vq = 0, aq = 0, bq = 0;
                          for (int a = 0; a < npe; ++a) {
                            int n = mesh.elements(e, a);
                            cq += phi[a] * c[n];
                            vq += phi[a] * v_field[n];
                            aq += phi[a] * a_field[n];
                            bq += phi[a] * b_field[n];
                          }
                          double coeff = w * w_of_c(cq) * vq * aq * bq;
                          for (int a = 0; a < npe; ++a)
                            t[mesh.elements(e, a)] += coeff * phi[a];
                        });
  return t;
}

Vector boundary_flux_load(const Mesh& mesh,
                          const std::function<bool(const Vector&)>& on_edge,
                          const std::function<double(const Vector&)>& flux) {
  if (mesh.dim != 2) throw std::invalid_argument("boundary_flux_load: 2D mesh required");
  Vector f = Vector::Zero(mesh.num_nodes());
  for (const auto& [n0, n1] : boundary_edges(mesh)) {
    Vector x0 = mesh.nodes.row(n0).transpose();
    Vector x1 = mesh.nodes.row(n1).transpose();
    Vector mid = 0.5 * (x0 + x1);
    if (!on_edge(mid)) continue;
    double len = (x1 - x0).norm();
    for (const auto& q : kQuad1d) {
      double phi0 = 0.5 * (1 - q.xi), phi1 = 0.5 * (1 + q.xi);
      Vector x = phi0 * x0 + phi1 * x1;
      double coeff = q.weight * 0.5 * len * flux(x);
      f[n0] += coeff * phi0;
      f[n1] += coeff * phi1;
    }
  }
  return f;
}

double l2_error(const Mesh& mesh, const Vector& nodal,
                const std::function<double(const Vector&)>& exact) {
  if (nodal.size() != mesh.num_nodes())
    throw std::invalid_argument("l2_error: field size mismatch");
  const int npe = nodes_per_element(mesh);
  double acc = 0;
  for (Eigen::Index e = 0; e < mesh.num_elements(); ++e)
    for_each_quad_point(mesh, e,
                        [&](const std::array<double, 4>& phi, const Matrix&, double w,
                            const Vector& x) {
                          double uq = 0;
                          for (int a = 0; a < npe; ++a)
                            uq += phi[a] * nodal[mesh.elements(e, a)];
                          double diff = uq - exact(x);
                          acc += w * diff * diff;
                        });
  return std::sqrt(acc);
}

Vector domain_load(const Mesh& mesh, const std::function<double(const Vector&)>& g) {
  const int npe = nodes_per_element(mesh);
  Vector f = Vector::Zero(mesh.num_nodes());
  for (Eigen::Index e = 0; e < mesh.num_elements(); ++e)
    for_each_quad_point(mesh, e,
                        [&](const std::array<double, 4>& phi, const Matrix&, double w,
                            const Vector& x) {
                          double gq = g(x);
                          for (int a = 0; a < npe; ++a)
                            f[mesh.elements(e, a)] += w * gq * phi[a];
                        });
  return f;
}

}  // namespace rmap
