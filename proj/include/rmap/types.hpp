#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace rmap {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;

// Tallies of linearized PDE solves (or their closed-form equivalents on
// cheap problems). Monotone; cloned problems start from zero and are summed
// by the callers that own the clones.
struct Counters {
  long forward = 0;
  long adjoint = 0;
  long incremental_forward = 0;
  long incremental_adjoint = 0;

  long total() const { return forward + adjoint + incremental_forward + incremental_adjoint; }

  Counters& operator+=(const Counters& o) {
    forward += o.forward;
    adjoint += o.adjoint;
    incremental_forward += o.incremental_forward;
    incremental_adjoint += o.incremental_adjoint;
    return *this;
  }

  Counters operator-(const Counters& o) const {
    return {forward - o.forward, adjoint - o.adjoint,
            incremental_forward - o.incremental_forward,
            incremental_adjoint - o.incremental_adjoint};
  }
};

// Thrown when a state/adjoint system cannot be solved reliably. Carries the
// offending parameter so callers can log or exclude the sample.
class SolveFailure : public std::runtime_error {
 public:
  SolveFailure(const std::string& what, Vector u_at)
      : std::runtime_error(what), u(std::move(u_at)) {}
  Vector u;
};

}  // namespace rmap
