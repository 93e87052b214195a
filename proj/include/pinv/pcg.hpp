#pragma once

#include <cmath>

#include <Eigen/Core>

namespace pinv {

struct CgResult {
    int iterations = 0;
    double relative_residual = 0.0;
    bool converged = false;
};

/// Preconditioned conjugate gradient for a symmetric positive definite operator.
///
/// `apply(p, q)` writes q = A p; `precondition(r, z)` writes z ~= A^{-1} r and
/// must itself be symmetric positive definite.  `x` holds the initial guess on
/// entry.  Convergence is declared when ||b - A x|| <= tol * ||b||.
template <typename Apply, typename Precondition>
CgResult pcg(const Apply& apply, const Precondition& precondition,
             const Eigen::VectorXd& b, Eigen::VectorXd& x, double tol, int max_iterations) {
    CgResult result;
    const double b_norm = b.norm();
    if (b_norm == 0.0) {
        x.setZero();
        result.converged = true;
        return result;
    }

    Eigen::VectorXd r(b.size());
    Eigen::VectorXd q(b.size());
    apply(x, q);
    r = b - q;

    Eigen::VectorXd z(b.size());
    precondition(r, z);
    Eigen::VectorXd p = z;
    double rz = r.dot(z);

    result.relative_residual = r.norm() / b_norm;
    while (result.iterations < max_iterations) {
        if (result.relative_residual <= tol) {
            // the recurrence residual drifts from b - Ax; confirm before stopping
            apply(x, q);
            r = b - q;
            result.relative_residual = r.norm() / b_norm;
            if (result.relative_residual <= tol) break;
            precondition(r, z);
            p = z;
            rz = r.dot(z);
        }
        apply(p, q);
        const double alpha = rz / p.dot(q);
        x += alpha * p;
        r -= alpha * q;
        ++result.iterations;
        result.relative_residual = r.norm() / b_norm;

        precondition(r, z);
        const double rz_next = r.dot(z);
        p = z + (rz_next / rz) * p;
        rz = rz_next;
    }
    result.converged = result.relative_residual <= tol;
    return result;
}

}  // namespace pinv
