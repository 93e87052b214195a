#include "pinv/pde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>

#include "pinv/error.hpp"
#include "pinv/pcg.hpp"

namespace pinv {

PotentialField PotentialField::from_values(GridFunction f, double f_min) {
    f.ensure_finite("potential");
    if (f_min < 0.0) throw InvalidArgument("potential floor f_min must be non-negative");
    for (std::size_t node : f.grid().interior_nodes()) {
        if (f[node] < f_min) {
            throw InvalidArgument("potential value " + std::to_string(f[node]) + " below floor " + std::to_string(f_min));
        }
    }
    std::optional<GridFunction> phi;
    if (f.min() > 0.0) phi = f.map([](double v) { return std::log(v); });
    return PotentialField(std::move(f), std::move(phi));
}

PotentialField PotentialField::from_log(const GridFunction& phi) {
    phi.ensure_finite("log-potential");
    GridFunction f = phi.map([](double v) { return std::exp(v); });
    f.ensure_finite("potential");
    return PotentialField(std::move(f), phi);
}

PotentialField PotentialField::constant(const Grid& grid, double value) {
    return from_values(GridFunction(grid, value));
}

const GridFunction& PotentialField::phi() const {
    if (!phi_) throw InvalidArgument("log-potential undefined where f = 0");
    return *phi_;
}

struct SchrodingerSystem::Factor {
    // d = 1: Thomas elimination of the tridiagonal system
    std::vector<double> upper;  // modified super-diagonal c'
    std::vector<double> pivot;  // b_i - e c'_{i-1}
    double off = 0.0;
    // d = 2
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
};

SchrodingerSystem::SchrodingerSystem(PotentialField potential, GridFunction boundary, SolverOptions options)
    : potential_(std::move(potential)), boundary_(std::move(boundary)), options_(options) {
    if (!(boundary_.grid() == potential_.grid())) throw InvalidArgument("boundary data and potential grids differ");
    boundary_.ensure_finite("boundary data");
    const Grid& g = grid();

    Eigen::SparseMatrix<double> lap = laplacian_matrix(g);
    matrix_ = -0.5 * lap;
    const Eigen::VectorXd f_int = potential_.f().interior_vector();
    for (Eigen::Index r = 0; r < f_int.size(); ++r) matrix_.coeffRef(r, r) += f_int[r];
    matrix_.makeCompressed();

    method_ = options_.method;
    if (method_ == SolverOptions::Method::kAuto) {
        method_ = (g.dim() == 1 || g.level() <= 8) ? SolverOptions::Method::kDirect : SolverOptions::Method::kPcg;
    }

    auto factor = std::make_shared<Factor>();
    if (method_ == SolverOptions::Method::kDirect && g.dim() == 1) {
        const double h = g.spacing(0);
        const auto n = static_cast<std::size_t>(f_int.size());
        factor->off = -0.5 / (h * h);
        factor->upper.resize(n);
        factor->pivot.resize(n);
        double prev_upper = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double diag = 1.0 / (h * h) + f_int[static_cast<Eigen::Index>(i)];
            const double piv = diag - (i > 0 ? factor->off * prev_upper : 0.0);
            if (!(piv > 0.0)) throw NumericalError("Schrodinger system is not positive definite");
            factor->pivot[i] = piv;
            prev_upper = factor->off / piv;
            factor->upper[i] = prev_upper;
        }
    } else if (method_ == SolverOptions::Method::kDirect) {
        factor->ldlt.compute(matrix_);
        if (factor->ldlt.info() != Eigen::Success) throw NumericalError("Schrodinger system factorization failed");
    } else {
        // constant-potential operator at the interior mean of f
        Eigen::SparseMatrix<double> pre = -0.5 * lap;
        const double mean_f = f_int.size() > 0 ? f_int.mean() : 0.0;
        for (Eigen::Index r = 0; r < pre.rows(); ++r) pre.coeffRef(r, r) += mean_f;
        factor->ldlt.compute(pre);
        if (factor->ldlt.info() != Eigen::Success) throw NumericalError("preconditioner factorization failed");
    }
    factor_ = std::move(factor);
}

Eigen::VectorXd SchrodingerSystem::solve(const Eigen::VectorXd& rhs, double tol) const {
    const double rhs_norm = rhs.norm();
    if (rhs_norm == 0.0) return Eigen::VectorXd::Zero(rhs.size());

    auto direct = [this](const Eigen::VectorXd& b) -> Eigen::VectorXd {
        if (grid().dim() == 2) return factor_->ldlt.solve(b);
        const auto n = factor_->pivot.size();
        Eigen::VectorXd x(b.size());
        double prev = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto k = static_cast<Eigen::Index>(i);
            prev = (b[k] - (i > 0 ? factor_->off * prev : 0.0)) / factor_->pivot[i];
            x[k] = prev;
        }
        for (std::size_t i = n - 1; i-- > 0;) {
            const auto k = static_cast<Eigen::Index>(i);
            x[k] -= factor_->upper[i] * x[k + 1];
        }
        return x;
    };

    if (method_ == SolverOptions::Method::kDirect) {
        Eigen::VectorXd x = direct(rhs);
        Eigen::VectorXd r = rhs - matrix_ * x;
        double rel = r.norm() / rhs_norm;
        if (rel > tol) {
            x += direct(r);  // one step of iterative refinement
            r = rhs - matrix_ * x;
            rel = r.norm() / rhs_norm;
        }
        if (!(rel <= tol)) throw NumericalError("direct Schrodinger solve missed tolerance", rel);
        return x;
    }

    const auto& ldlt = factor_->ldlt;
    auto apply = [this](const Eigen::VectorXd& p, Eigen::VectorXd& q) { q = matrix_ * p; };
    auto precondition = [&ldlt](const Eigen::VectorXd& r, Eigen::VectorXd& z) { z = ldlt.solve(r); };
    Eigen::VectorXd x = ldlt.solve(rhs);
    const CgResult cg = pcg(apply, precondition, rhs, x, tol, options_.max_iterations);
    if (!cg.converged) {
        throw NumericalError("PCG Schrodinger solve stalled after " + std::to_string(cg.iterations) + " iterations",
                             cg.relative_residual);
    }
    return x;
}

namespace {

void require_grid(const SchrodingerSystem& sys, const GridFunction& a, const char* what) {
    if (!(a.grid() == sys.grid())) throw InvalidArgument(std::string(what) + ": grid mismatch");
}

}  // namespace

GridFunction solve_forward(const SchrodingerSystem& sys, double tol) {
    const Grid& g = sys.grid();
    // A u_int = -(Lap_h/2) applied to the boundary data
    const Eigen::VectorXd rhs = 0.5 * boundary_laplacian_term(sys.boundary());
    GridFunction u = sys.boundary();
    for (std::size_t node : g.interior_nodes()) u[node] = 0.0;
    u.set_interior(sys.solve(rhs, tol));
    u.ensure_finite("solve_forward");

    const GridFunction residual = apply_Sf(sys, u);
    const double u_norm = l2_norm(u);
    const double rel = u_norm > 0.0 ? l2_norm(residual) / u_norm : l2_norm(residual);
    // the residual is measured on the grid field, so allow for the scale of A
    const double scale = sys.matrix().diagonal().cwiseAbs().maxCoeff();
    if (rel > tol * std::max(1.0, scale)) throw NumericalError("solve_forward: residual above tolerance", rel);
    return u;
}

GridFunction apply_Sf(const SchrodingerSystem& sys, const GridFunction& a) {
    require_grid(sys, a, "apply_Sf");
    GridFunction out = discrete_laplacian(a);
    const GridFunction& f = sys.potential().f();
    for (std::size_t node : sys.grid().interior_nodes()) out[node] = 0.5 * out[node] - f[node] * a[node];
    return out;
}

GridFunction solve_green(const SchrodingerSystem& sys, const GridFunction& h, double tol) {
    require_grid(sys, h, "solve_green");
    GridFunction v(sys.grid());
    v.set_interior(sys.solve(-h.interior_vector(), tol));
    return v.ensure_finite("solve_green");
}

GridFunction score(const SchrodingerSystem& sys_at_f, const GridFunction& u_f, const GridFunction& h, double tol) {
    require_grid(sys_at_f, u_f, "score");
    return solve_green(sys_at_f, h * u_f, tol);
}

bool vanishes_near_boundary(const GridFunction& psi, int margin) {
    const Grid& g = psi.grid();
    const int last = g.cells_per_axis();
    for (std::size_t node = 0; node < psi.size(); ++node) {
        const auto ij = g.indices(node);
        bool near = false;
        for (int a = 0; a < g.dim(); ++a) near = near || ij[a] <= margin || ij[a] >= last - margin;
        if (near && psi[node] != 0.0) return false;
    }
    return true;
}

namespace {

GridFunction checked_quotient(const SchrodingerSystem& sys, const GridFunction& u, const GridFunction& psi) {
    require_grid(sys, u, "riesz_representer");
    require_grid(sys, psi, "riesz_representer");
    if (!vanishes_near_boundary(psi)) {
        throw InvalidArgument("riesz_representer: psi must vanish within " + std::to_string(kRieszMargin) +
                              " nodes of the boundary");
    }
    if (!(u.min() > 0.0)) throw InvalidArgument("riesz_representer: u must be positive");
    return psi / u;
}

}  // namespace

GridFunction riesz_representer(const SchrodingerSystem& sys, const GridFunction& u, const GridFunction& psi) {
    const GridFunction q = checked_quotient(sys, u, psi);
    GridFunction out = apply_Sf(sys, apply_Sf(sys, q)) / u;
    out.zero_boundary();
    return out.ensure_finite("riesz_representer");
}

GridFunction riesz_representer_expanded(const SchrodingerSystem& sys, const GridFunction& u,
                                        const GridFunction& psi) {
    const GridFunction q = checked_quotient(sys, u, psi);
    const GridFunction& f = sys.potential().f();
    const GridFunction lap_q = discrete_laplacian(q);
    GridFunction out = 0.25 * discrete_laplacian(lap_q) - 0.5 * discrete_laplacian(f * q) - 0.5 * (f * lap_q) +
                       f * f * q;
    out /= u;
    out.zero_boundary();
    return out.ensure_finite("riesz_representer_expanded");
}

GridFunction invert_pointwise(const GridFunction& u, double floor, double cap) {
    GridFunction out(u.grid());
    if (!u.all_finite() || u.min() < floor) return out;
    const GridFunction lap = discrete_laplacian(u);
    if (sup_norm(lap) > cap) return out;
    for (std::size_t node : u.grid().interior_nodes()) out[node] = lap[node] / (2.0 * u[node]);
    return out;
}

GridFunction mean_exit_time(const Grid& grid) {
    const SchrodingerSystem free(PotentialField::constant(grid, 0.0), GridFunction(grid));
    return solve_green(free, GridFunction(grid, -1.0));
}

InversionLimits default_inversion_limits(double g_min, double sup_budget, const GridFunction& u_ref) {
    const double m_max = mean_exit_time(u_ref.grid()).max();
    return {0.5 * g_min * std::exp(-sup_budget * m_max), 10.0 * sup_norm(discrete_laplacian(u_ref))};
}

GridFunction boundary_field(const Grid& grid, const std::function<double(const Point&)>& g) {
    GridFunction out(grid);
    for (std::size_t node = 0; node < out.size(); ++node) {
        if (grid.is_boundary(node)) out[node] = g(grid.coords(node));
    }
    return out;
}

double boundary_min(const GridFunction& g) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t node = 0; node < g.size(); ++node) {
        if (g.grid().is_boundary(node)) m = std::min(m, g[node]);
    }
    return m;
}

double boundary_max(const GridFunction& g) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t node = 0; node < g.size(); ++node) {
        if (g.grid().is_boundary(node)) m = std::max(m, g[node]);
    }
    return m;
}

}  // namespace pinv
