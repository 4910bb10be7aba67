#pragma once

#include <functional>

#include "rmap/mesh.hpp"
#include "rmap/types.hpp"

namespace rmap {

// Linear Lagrange assembly on interval/quad meshes. All element integrals use
// Gauss quadrature (2 points per direction), exact for the mass and stiffness
// integrands on affine elements.

SpMat assemble_mass(const Mesh& mesh);
SpMat assemble_lumped_mass(const Mesh& mesh);  // row-sum lumping, diagonal
SpMat assemble_stiffness(const Mesh& mesh);

// Mass matrix weighted by w(c(x)) with c nodal: entries int w(c) phi_a phi_b.
SpMat assemble_weighted_mass(const Mesh& mesh, const Vector& c,
                             const std::function<double(double)>& w);

// t_i = int w(c(x)) a(x) b(x) phi_i(x) dx with c, a, b nodal fields. This is
// the trilinear kernel behind the Helmholtz gradient and Hessian terms.
Vector weighted_triple_product(const Mesh& mesh, const Vector& c,
                               const std::function<double(double)>& w,
                               const Vector& a, const Vector& b);

// s_i = int w(c(x)) v(x) a(x) b(x) phi_i(x) dx; the c-directional derivative
// kernel of weighted_triple_product, all four fields nodal.
Vector weighted_quad_product(const Mesh& mesh, const Vector& c,
                             const std::function<double(double)>& w,
                             const Vector& v, const Vector& a, const Vector& b);

// f_a = int_boundary flux(x) phi_a ds over edges selected by the predicate
// (called with the edge midpoint).
Vector boundary_flux_load(const Mesh& mesh,
                          const std::function<bool(const Vector&)>& on_edge,
                          const std::function<double(const Vector&)>& flux);

// Quadrature L2 norm of the error between a nodal field and a reference.
double l2_error(const Mesh& mesh, const Vector& nodal,
                const std::function<double(const Vector&)>& exact);

// Load vector f_a = int g(x) phi_a dx for a pointwise source g.
Vector domain_load(const Mesh& mesh, const std::function<double(const Vector&)>& g);

}  // namespace rmap
