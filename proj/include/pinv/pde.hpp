#pragma once

#include <memory>
#include <optional>

#include <Eigen/SparseCore>

#include "pinv/grid.hpp"

namespace pinv {

/// Positive potential f together with its logarithm.
class PotentialField {
public:
    /// Rejects any node with f < f_min (f_min >= 0).
    static PotentialField from_values(GridFunction f, double f_min = 0.0);
    static PotentialField from_log(const GridFunction& phi);
    static PotentialField constant(const Grid& grid, double value);

    const GridFunction& f() const { return f_; }
    /// log f; only available when f > 0 everywhere.
    const GridFunction& phi() const;
    const Grid& grid() const { return f_.grid(); }

private:
    PotentialField(GridFunction f, std::optional<GridFunction> phi) : f_(std::move(f)), phi_(std::move(phi)) {}

    GridFunction f_;
    std::optional<GridFunction> phi_;
};

struct SolverOptions {
    enum class Method { kAuto, kDirect, kPcg };
    Method method = Method::kAuto;
    int max_iterations = 5000;
};

/// Interior system for the Schrodinger operator S_f = Lap/2 - f with Dirichlet
/// data eliminated.  Stores A = -(Lap_h/2 - f), which is symmetric positive
/// definite for f >= 0.  Immutable; solves may run concurrently.
class SchrodingerSystem {
public:
    /// `boundary` carries g on boundary nodes; interior values are ignored.
    SchrodingerSystem(PotentialField potential, GridFunction boundary, SolverOptions options = {});

    const Grid& grid() const { return potential_.grid(); }
    const PotentialField& potential() const { return potential_; }
    const GridFunction& boundary() const { return boundary_; }
    const Eigen::SparseMatrix<double>& matrix() const { return matrix_; }
    SolverOptions::Method method() const { return method_; }

    Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return matrix_ * x; }
    /// Solves A x = rhs; throws NumericalError when the relative residual exceeds tol.
    Eigen::VectorXd solve(const Eigen::VectorXd& rhs, double tol) const;

private:
    struct Factor;

    PotentialField potential_;
    GridFunction boundary_;
    SolverOptions options_;
    SolverOptions::Method method_;
    Eigen::SparseMatrix<double> matrix_;
    std::shared_ptr<const Factor> factor_;
};

/// u_f: S_f u = 0 inside, u = g on the boundary.
GridFunction solve_forward(const SchrodingerSystem& sys, double tol = 1e-10);

/// Lap_h a / 2 - f a at interior nodes, zero on the boundary.
GridFunction apply_Sf(const SchrodingerSystem& sys, const GridFunction& a);

/// V_f[h]: S_f v = h inside, v = 0 on the boundary.
GridFunction solve_green(const SchrodingerSystem& sys, const GridFunction& h, double tol = 1e-10);

/// Linearised forward map DG_f[h] = V_f[h u_f].
GridFunction score(const SchrodingerSystem& sys_at_f, const GridFunction& u_f, const GridFunction& h,
                   double tol = 1e-10);

/// Nodes within this many steps of the boundary must carry psi = 0.
inline constexpr int kRieszMargin = 2;

bool vanishes_near_boundary(const GridFunction& psi, int margin = kRieszMargin);

/// Riesz representer of h -> <psi, h> for the LAN inner product:
/// S_f0[S_f0[psi/u]] / u.
GridFunction riesz_representer(const SchrodingerSystem& sys_at_f0, const GridFunction& u_f0,
                               const GridFunction& psi);

/// Same quantity through the expanded pointwise formula
/// (Lap^2 q/4 - Lap(f q)/2 - f Lap q/2 + f^2 q)/u with q = psi/u.
GridFunction riesz_representer_expanded(const SchrodingerSystem& sys_at_f0, const GridFunction& u_f0,
                                        const GridFunction& psi);

/// f = Lap_h u / (2u), or the zero field when min u < floor or sup|Lap_h u| > cap.
GridFunction invert_pointwise(const GridFunction& u, double floor, double cap);

struct InversionLimits {
    double floor = 0.0;
    double cap = 0.0;
};

/// floor = 0.5 g_min exp(-sup_budget * max m), cap = 10 sup|Lap_h u_ref|.
InversionLimits default_inversion_limits(double g_min, double sup_budget, const GridFunction& u_ref);

/// Discrete mean exit time m = V_0[-1] (f = 0).
GridFunction mean_exit_time(const Grid& grid);

/// Constant boundary data helper: g on boundary nodes, 0 inside.
GridFunction boundary_field(const Grid& grid, const std::function<double(const Point&)>& g);

double boundary_min(const GridFunction& g);
double boundary_max(const GridFunction& g);

}  // namespace pinv
