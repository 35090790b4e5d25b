#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace engage {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

/// minimize 1/2 x'Px + q'x  subject to  l <= Ax <= u.
/// P is symmetric positive semidefinite and must be given in full (both triangles).
/// Infinite bounds are expressed with +-infinity.
struct QpProblem {
    SparseMatrix P;
    Eigen::VectorXd q;
    SparseMatrix A;
    Eigen::VectorXd l;
    Eigen::VectorXd u;
};

struct QpSettings {
    double rho = 0.1;
    double sigma = 1e-6;
    double relaxation = 1.6;
    double eps_abs = 1e-6;
    double eps_rel = 1e-6;
    int max_iter = 20000;
    int check_interval = 10;
    bool adaptive_rho = true;
    /// Refine the converged ADMM point by solving the KKT system of its active set.
    bool polish = true;
    int polish_rounds = 25;
};

struct QpResult {
    Eigen::VectorXd x;
    Eigen::VectorXd y;  // constraint multipliers, sign convention Px + q + A'y = 0
    double objective = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    int iterations = 0;
    bool polished = false;
};

/// Operator-splitting solver (ADMM) with a final active-set polish.
/// Throws ConvergenceError when the tolerances are not met within max_iter.
QpResult solve_qp(const QpProblem& problem, const QpSettings& settings = {});

}  // namespace engage
