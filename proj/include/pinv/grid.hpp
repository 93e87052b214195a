#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/SparseCore>

namespace pinv {

using Point = std::array<double, 2>;

/// Axis-aligned box O = prod_i (lower_i, upper_i) in one or two dimensions.
/// Every face carries Dirichlet data.
struct Domain {
    int dim = 1;
    Point lower{0.0, 0.0};
    Point upper{1.0, 1.0};

    static Domain unit(int dim);

    void validate() const;
    double length(int axis) const { return upper[axis] - lower[axis]; }
    double volume() const;
    bool contains(const Point& x) const;
    bool operator==(const Domain&) const = default;
};

/// Dyadic node grid with 2^level cells per axis.  Nodes are numbered row-major
/// with the first axis fastest: node = i + (2^level + 1) * j.
class Grid {
public:
    Grid(Domain domain, int level);

    const Domain& domain() const { return domain_; }
    int dim() const { return domain_.dim; }
    int level() const { return level_; }
    int cells_per_axis() const { return 1 << level_; }
    int nodes_per_axis() const { return cells_per_axis() + 1; }
    std::size_t node_count() const;
    std::size_t interior_count() const;

    double spacing(int axis) const { return domain_.length(axis) / cells_per_axis(); }
    double min_spacing() const;
    /// Quadrature weight prod_i h_i attached to every interior node.
    double cell_volume() const;

    std::size_t node(int i, int j = 0) const {
        return static_cast<std::size_t>(i) + static_cast<std::size_t>(nodes_per_axis()) * static_cast<std::size_t>(j);
    }
    std::array<int, 2> indices(std::size_t node) const;
    Point coords(std::size_t node) const;
    bool is_boundary(std::size_t node) const;

    /// Interior nodes in increasing node order; the position in this list is the
    /// node's row in every interior-node linear system.
    std::span<const std::size_t> interior_nodes() const { return tables_->interior; }
    /// Row of `node` in the interior system, or -1 for boundary nodes.
    std::ptrdiff_t interior_row(std::size_t node) const { return tables_->row[node]; }

    Grid refined() const { return Grid(domain_, level_ + 1); }

    bool operator==(const Grid& other) const {
        return level_ == other.level_ && domain_ == other.domain_;
    }

private:
    struct Tables {
        std::vector<std::size_t> interior;
        std::vector<std::ptrdiff_t> row;
    };

    Domain domain_;
    int level_;
    std::shared_ptr<const Tables> tables_;
};

/// Real-valued field sampled on every node of a grid.
class GridFunction {
public:
    explicit GridFunction(Grid grid, double fill = 0.0);
    GridFunction(Grid grid, std::vector<double> values);

    static GridFunction sample(const Grid& grid, const std::function<double(const Point&)>& fn);

    const Grid& grid() const { return grid_; }
    std::size_t size() const { return values_.size(); }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    double operator[](std::size_t node) const { return values_[node]; }
    double& operator[](std::size_t node) { return values_[node]; }

    Eigen::VectorXd interior_vector() const;
    /// Copies `v` onto interior nodes; boundary nodes keep their values.
    void set_interior(const Eigen::VectorXd& v);
    void zero_boundary();

    double min() const;
    double max() const;
    bool all_finite() const;
    /// Throws NumericalError if any value is NaN or infinite.
    const GridFunction& ensure_finite(const char* context) const;

    GridFunction map(const std::function<double(double)>& fn) const;

    GridFunction& operator+=(const GridFunction& other);
    GridFunction& operator-=(const GridFunction& other);
    GridFunction& operator*=(const GridFunction& other);
    GridFunction& operator/=(const GridFunction& other);
    GridFunction& operator*=(double scale);

private:
    void require_same_grid(const GridFunction& other) const;

    Grid grid_;
    std::vector<double> values_;
};

GridFunction operator+(GridFunction a, const GridFunction& b);
GridFunction operator-(GridFunction a, const GridFunction& b);
GridFunction operator*(GridFunction a, const GridFunction& b);
GridFunction operator/(GridFunction a, const GridFunction& b);
GridFunction operator*(double s, GridFunction a);
GridFunction operator*(GridFunction a, double s);

/// Midpoint-rule inner product over interior nodes: (prod h_i) * sum a*b.
double l2_inner(const GridFunction& a, const GridFunction& b);
double l2_norm(const GridFunction& a);
double sup_norm(const GridFunction& a);

/// Values of a field on a finer grid of the same domain at the nodes of `coarse`.
GridFunction restrict_to(const GridFunction& fine, const Grid& coarse);

/// Central second-difference Laplacian at interior nodes; uses the boundary
/// values of `a`, writes zero on boundary nodes.
GridFunction discrete_laplacian(const GridFunction& a);

/// Interior-to-interior Laplacian with zero Dirichlet data eliminated.
Eigen::SparseMatrix<double> laplacian_matrix(const Grid& grid);

/// Contribution of boundary values to the discrete Laplacian at interior rows:
/// discrete_laplacian(a) = L * a_int + boundary_laplacian_term(a).
Eigen::VectorXd boundary_laplacian_term(const GridFunction& a);

/// Surrogate of the dual norm of H^2_0: sup over zero-boundary phi of <phi, a>
/// divided by sqrt(<phi,phi> + <Lap phi, Lap phi>).  The Gram solve runs a
/// preconditioned conjugate gradient; the preconditioner (I - L)^2 is spectrally
/// equivalent to I + L^2 within a factor two.
class H2DualNorm {
public:
    explicit H2DualNorm(const Grid& grid, double tol = 1e-10, int max_iterations = 200);

    double operator()(const GridFunction& a) const;
    const Grid& grid() const { return grid_; }

private:
    struct Factor;

    Grid grid_;
    double tol_;
    int max_iterations_;
    Eigen::SparseMatrix<double> laplacian_;
    std::shared_ptr<const Factor> factor_;
};

double h2_dual_norm(const GridFunction& a, double tol = 1e-10);

}  // namespace pinv
