#pragma once

#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "qdsq/model.hpp"

namespace qdsq {

// Structural sparsity of the packed right-hand side Jacobian for a given bin count, with a
// column colouring for compressed finite differences. Entries that the state never uses
// (matrix diagonals, the d_pdp diagonal that mirrors d_exc) are marked inactive.
struct JacobianPattern {
    int bins = 0;
    std::vector<char> inactive;
    Eigen::SparseMatrix<double> pattern;   // column-major, inactive diagonal set to 1
    std::vector<std::vector<int>> colour_groups;
};

// Cached per bin count; safe to call from several threads.
const JacobianPattern& jacobian_pattern(int bins);

// Finite-difference Jacobian of the packed rhs at y (inactive rows replaced by identity).
Eigen::SparseMatrix<double> numerical_jacobian(const Eigen::VectorXd& y, const Eigen::VectorXd& f, const Dynamics& d,
                                               const JacobianPattern& pat);

struct NewtonResult {
    Eigen::VectorXd y;
    double residual = 0;   // |f| / (gamma_c |y|)
    int iterations = 0;
    bool converged = false;
};

// Newton iteration for rhs(y) = 0 starting near a stable fixed point. Gives up when the
// accumulated change exceeds max_rel_change |y0| or a damped step fails to reduce the residual.
NewtonResult newton_polish(const Eigen::VectorXd& y0, const Dynamics& d, double tol, int max_iter = 20,
                           double max_rel_change = 0.25);

// |f| / (gamma_c |y|), the steady-state residual used throughout.
double steady_residual(const Eigen::VectorXd& y, const Eigen::VectorXd& f, const Dynamics& d);

}  // namespace qdsq
