#include "engage/qp.hpp"

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "engage/errors.hpp"

namespace engage {
namespace {

using Eigen::VectorXd;

double inf_norm(const VectorXd& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

struct Residuals {
    double primal = 0.0;
    double dual = 0.0;
    double primal_scale = 0.0;
    double dual_scale = 0.0;
};

Residuals residuals(const QpProblem& p, const VectorXd& x, const VectorXd& z, const VectorXd& y) {
    const VectorXd Ax = p.A * x;
    const VectorXd Px = p.P * x;
    const VectorXd Aty = p.A.transpose() * y;
    Residuals r;
    r.primal = inf_norm(Ax - z);
    r.dual = inf_norm(Px + p.q + Aty);
    r.primal_scale = std::max(inf_norm(Ax), inf_norm(z));
    r.dual_scale = std::max({inf_norm(Px), inf_norm(Aty), inf_norm(p.q)});
    return r;
}

bool converged(const Residuals& r, double eps_abs, double eps_rel) {
    return r.primal <= eps_abs + eps_rel * r.primal_scale && r.dual <= eps_abs + eps_rel * r.dual_scale;
}

double objective(const QpProblem& p, const VectorXd& x) { return 0.5 * x.dot(p.P * x) + p.q.dot(x); }

VectorXd project(const VectorXd& v, const VectorXd& l, const VectorXd& u) { return v.cwiseMax(l).cwiseMin(u); }

class KktSolver {
public:
    KktSolver(const QpProblem& p, double sigma) {
        AtA_ = SparseMatrix(p.A.transpose() * p.A);
        base_ = p.P;
        for (Eigen::Index i = 0; i < base_.rows(); ++i) base_.coeffRef(i, i) += sigma;
        base_.makeCompressed();
    }

    void factor(double rho) {
        SparseMatrix K = base_ + rho * AtA_;
        if (!analysed_) {
            solver_.analyzePattern(K);
            analysed_ = true;
        }
        solver_.factorize(K);
        if (solver_.info() != Eigen::Success) throw Error("QP: KKT factorization failed");
    }

    VectorXd solve(const VectorXd& rhs) const { return solver_.solve(rhs); }

private:
    SparseMatrix AtA_;
    SparseMatrix base_;
    Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> solver_;
    bool analysed_ = false;
};

enum class Bound : signed char { none, lower, upper };

// Solves the equality-constrained problem with the rows in `active` fixed at their bounds.
bool solve_active(const QpProblem& p, const std::vector<Bound>& active, VectorXd& x, VectorXd& y) {
    const Eigen::Index n = p.P.rows();
    const Eigen::Index m = p.A.rows();
    std::vector<Eigen::Index> row_of(static_cast<std::size_t>(m), -1);
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < m; ++i) {
        if (active[static_cast<std::size_t>(i)] == Bound::none) continue;
        row_of[static_cast<std::size_t>(i)] = static_cast<Eigen::Index>(rows.size());
        rows.push_back(i);
    }
    const auto na = static_cast<Eigen::Index>(rows.size());

    const double delta = 1e-9;
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(p.P.nonZeros() + 2 * p.A.nonZeros() + n + na));
    for (Eigen::Index c = 0; c < p.P.outerSize(); ++c) {
        for (SparseMatrix::InnerIterator it(p.P, c); it; ++it) trips.emplace_back(it.row(), it.col(), it.value());
    }
    for (Eigen::Index c = 0; c < p.A.outerSize(); ++c) {
        for (SparseMatrix::InnerIterator it(p.A, c); it; ++it) {
            const auto k = row_of[static_cast<std::size_t>(it.row())];
            if (k < 0) continue;
            trips.emplace_back(n + k, c, it.value());
            trips.emplace_back(c, n + k, it.value());
        }
    }
    SparseMatrix K0(n + na, n + na);
    K0.setFromTriplets(trips.begin(), trips.end());
    for (Eigen::Index i = 0; i < n; ++i) trips.emplace_back(i, i, delta);
    for (Eigen::Index k = 0; k < na; ++k) trips.emplace_back(n + k, n + k, -delta);
    SparseMatrix K(n + na, n + na);
    K.setFromTriplets(trips.begin(), trips.end());

    Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt(K);
    if (ldlt.info() != Eigen::Success) return false;

    VectorXd rhs(n + na);
    rhs.head(n) = -p.q;
    for (Eigen::Index k = 0; k < na; ++k) {
        const auto i = rows[static_cast<std::size_t>(k)];
        rhs[n + k] = active[static_cast<std::size_t>(i)] == Bound::lower ? p.l[i] : p.u[i];
    }
    // Iterative refinement removes the regularization bias.
    VectorXd sol = ldlt.solve(rhs);
    for (int it = 0; it < 5; ++it) sol += ldlt.solve(rhs - K0 * sol);
    if (!sol.allFinite()) return false;

    x = sol.head(n);
    y = VectorXd::Zero(m);
    for (Eigen::Index k = 0; k < na; ++k) y[rows[static_cast<std::size_t>(k)]] = sol[n + k];
    return true;
}

// Primal-dual active-set iterations seeded with the ADMM iterate. Succeeds when the
// active set stops changing and the resulting point meets the tolerances.
bool polish(const QpProblem& p, const VectorXd& z, const VectorXd& y_admm, double eps_abs, double eps_rel,
            int max_rounds, QpResult& out) {
    const Eigen::Index m = p.A.rows();
    std::vector<Bound> active(static_cast<std::size_t>(m), Bound::none);
    for (Eigen::Index i = 0; i < m; ++i) {
        if (z[i] - p.l[i] < -y_admm[i]) active[static_cast<std::size_t>(i)] = Bound::lower;
        else if (p.u[i] - z[i] < y_admm[i]) active[static_cast<std::size_t>(i)] = Bound::upper;
    }
    VectorXd x;
    VectorXd y;
    for (int iter = 0; iter < max_rounds; ++iter) {
        if (!solve_active(p, active, x, y)) return false;
        const VectorXd Ax = p.A * x;
        // Only flip rows whose multiplier sign or bound violation exceeds the tolerance;
        // weakly active rows may sit on either side.
        const double tol_x = eps_abs + eps_rel * inf_norm(Ax);
        const double tol_y = eps_abs + eps_rel * inf_norm(y);
        bool changed = false;
        for (Eigen::Index i = 0; i < m; ++i) {
            auto& a = active[static_cast<std::size_t>(i)];
            if (a == Bound::lower && y[i] > tol_y) a = Bound::none, changed = true;
            else if (a == Bound::upper && y[i] < -tol_y) a = Bound::none, changed = true;
            else if (a == Bound::none && Ax[i] < p.l[i] - tol_x) a = Bound::lower, changed = true;
            else if (a == Bound::none && Ax[i] > p.u[i] + tol_x) a = Bound::upper, changed = true;
        }
        if (changed) continue;
        const VectorXd zp = project(Ax, p.l, p.u);
        const Residuals r = residuals(p, x, zp, y);
        if (!converged(r, eps_abs, eps_rel)) return false;
        out.x = std::move(x);
        out.y = std::move(y);
        out.primal_residual = r.primal;
        out.dual_residual = r.dual;
        out.polished = true;
        return true;
    }
    return false;
}

// Ruiz equilibration: Ps = c D P D, qs = c D q, As = E A D, bounds scaled by E.
struct Scaling {
    VectorXd D;
    VectorXd E;
    double c = 1.0;
    QpProblem scaled;
};

Scaling equilibrate(const QpProblem& p, int passes = 15) {
    const Eigen::Index n = p.P.rows();
    const Eigen::Index m = p.A.rows();
    Scaling s;
    s.D = VectorXd::Ones(n);
    s.E = VectorXd::Ones(m);
    s.scaled = p;
    auto clamp_norm = [](double v) { return std::clamp(v, 1e-4, 1e4); };
    for (int pass = 0; pass < passes; ++pass) {
        VectorXd col = VectorXd::Zero(n);
        VectorXd row = VectorXd::Zero(m);
        for (Eigen::Index c = 0; c < n; ++c) {
            for (SparseMatrix::InnerIterator it(s.scaled.P, c); it; ++it) col[c] = std::max(col[c], std::abs(it.value()));
            for (SparseMatrix::InnerIterator it(s.scaled.A, c); it; ++it) {
                col[c] = std::max(col[c], std::abs(it.value()));
                row[it.row()] = std::max(row[it.row()], std::abs(it.value()));
            }
        }
        VectorXd dD(n);
        VectorXd dE(m);
        for (Eigen::Index i = 0; i < n; ++i) dD[i] = 1.0 / std::sqrt(clamp_norm(col[i]));
        for (Eigen::Index i = 0; i < m; ++i) dE[i] = 1.0 / std::sqrt(clamp_norm(row[i]));
        s.scaled.P = dD.asDiagonal() * s.scaled.P * dD.asDiagonal();
        s.scaled.A = dE.asDiagonal() * s.scaled.A * dD.asDiagonal();
        s.scaled.q = dD.cwiseProduct(s.scaled.q);
        s.D = s.D.cwiseProduct(dD);
        s.E = s.E.cwiseProduct(dE);
    }
    double mean_col = 0.0;
    for (Eigen::Index c = 0; c < n; ++c) {
        double v = 0.0;
        for (SparseMatrix::InnerIterator it(s.scaled.P, c); it; ++it) v = std::max(v, std::abs(it.value()));
        mean_col += v / static_cast<double>(std::max<Eigen::Index>(n, 1));
    }
    s.c = 1.0 / clamp_norm(std::max(mean_col, inf_norm(s.scaled.q)));
    s.scaled.P *= s.c;
    s.scaled.q *= s.c;
    s.scaled.l = s.E.cwiseProduct(p.l);
    s.scaled.u = s.E.cwiseProduct(p.u);
    return s;
}

}  // namespace

QpResult solve_qp(const QpProblem& p, const QpSettings& s) {
    const Eigen::Index n = p.P.rows();
    const Eigen::Index m = p.A.rows();
    if (p.P.cols() != n || p.q.size() != n || p.A.cols() != n || p.l.size() != m || p.u.size() != m) {
        throw ValidationError("QP: inconsistent problem dimensions");
    }
    if ((p.l.array() > p.u.array()).any()) throw ValidationError("QP: lower bound exceeds upper bound");

    const Scaling scaling = equilibrate(p);
    const QpProblem& ps = scaling.scaled;
    VectorXd x = VectorXd::Zero(n);
    VectorXd z = project(VectorXd::Zero(m), ps.l, ps.u);
    VectorXd y = VectorXd::Zero(m);
    double rho = s.rho;
    KktSolver kkt(ps, s.sigma);
    kkt.factor(rho);

    QpResult result;
    Residuals r;
    for (int k = 1; k <= s.max_iter; ++k) {
        const VectorXd rhs = s.sigma * x - ps.q + ps.A.transpose() * (rho * z - y);
        const VectorXd xt = kkt.solve(rhs);
        const VectorXd zt = ps.A * xt;
        x = s.relaxation * xt + (1.0 - s.relaxation) * x;
        const VectorXd zr = s.relaxation * zt + (1.0 - s.relaxation) * z;
        const VectorXd z_new = project(zr + y / rho, ps.l, ps.u);
        y += rho * (zr - z_new);
        z = z_new;

        if (k % s.check_interval != 0 && k != s.max_iter) continue;
        // Convergence is judged on the unscaled problem.
        const VectorXd xu = scaling.D.cwiseProduct(x);
        const VectorXd zu = z.cwiseQuotient(scaling.E);
        const VectorXd yu = scaling.E.cwiseProduct(y) / scaling.c;
        r = residuals(p, xu, zu, yu);
        result.iterations = k;

        if (converged(r, s.eps_abs, s.eps_rel)) {
            result.x = xu;
            result.y = yu;
            result.primal_residual = r.primal;
            result.dual_residual = r.dual;
            if (s.polish) {
                QpResult polished = result;
                if (polish(p, zu, yu, s.eps_abs, s.eps_rel, s.polish_rounds, polished)) result = std::move(polished);
            }
            result.objective = objective(p, result.x);
            return result;
        }
        const Residuals rs = residuals(ps, x, z, y);
        if (s.adaptive_rho && rs.primal_scale > 0.0 && rs.dual_scale > 0.0 && rs.dual > 0.0) {
            const double ratio = std::sqrt((rs.primal / rs.primal_scale) / (rs.dual / rs.dual_scale));
            if (ratio > 5.0 || ratio < 0.2) {
                rho = std::clamp(rho * ratio, 1e-6, 1e6);
                kkt.factor(rho);
            }
        }
    }
    throw ConvergenceError("QP: no convergence within " + std::to_string(s.max_iter) + " iterations",
                           std::max(r.primal, r.dual));
}

}  // namespace engage
