#include "pinv/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/SparseCholesky>

#include "pinv/error.hpp"
#include "pinv/pcg.hpp"

namespace pinv {

Domain Domain::unit(int dim) {
    Domain d;
    d.dim = dim;
    return d;
}

void Domain::validate() const {
    if (dim != 1 && dim != 2) throw InvalidArgument("domain dimension must be 1 or 2, got " + std::to_string(dim));
    for (int i = 0; i < dim; ++i) {
        if (!(upper[i] > lower[i])) throw InvalidArgument("domain axis " + std::to_string(i) + " is empty");
    }
}

double Domain::volume() const {
    double v = 1.0;
    for (int i = 0; i < dim; ++i) v *= length(i);
    return v;
}

bool Domain::contains(const Point& x) const {
    for (int i = 0; i < dim; ++i) {
        if (x[i] <= lower[i] || x[i] >= upper[i]) return false;
    }
    return true;
}

Grid::Grid(Domain domain, int level) : domain_(domain), level_(level) {
    domain_.validate();
    if (level < 3 || level > 14) throw InvalidArgument("grid level must lie in [3, 14], got " + std::to_string(level));

    auto tables = std::make_shared<Tables>();
    const std::size_t total = node_count();
    tables->row.assign(total, -1);
    tables->interior.reserve(interior_count());
    for (std::size_t k = 0; k < total; ++k) {
        if (!is_boundary(k)) {
            tables->row[k] = static_cast<std::ptrdiff_t>(tables->interior.size());
            tables->interior.push_back(k);
        }
    }
    tables_ = std::move(tables);
}

std::size_t Grid::node_count() const {
    std::size_t n = 1;
    for (int i = 0; i < dim(); ++i) n *= static_cast<std::size_t>(nodes_per_axis());
    return n;
}

std::size_t Grid::interior_count() const {
    std::size_t n = 1;
    for (int i = 0; i < dim(); ++i) n *= static_cast<std::size_t>(cells_per_axis() - 1);
    return n;
}

double Grid::min_spacing() const {
    double h = spacing(0);
    if (dim() == 2) h = std::min(h, spacing(1));
    return h;
}

double Grid::cell_volume() const {
    double v = 1.0;
    for (int i = 0; i < dim(); ++i) v *= spacing(i);
    return v;
}

std::array<int, 2> Grid::indices(std::size_t node) const {
    const auto n = static_cast<std::size_t>(nodes_per_axis());
    if (dim() == 1) return {static_cast<int>(node), 0};
    return {static_cast<int>(node % n), static_cast<int>(node / n)};
}

Point Grid::coords(std::size_t node) const {
    const auto ij = indices(node);
    Point x{0.0, 0.0};
    for (int a = 0; a < dim(); ++a) x[a] = domain_.lower[a] + ij[a] * spacing(a);
    return x;
}

bool Grid::is_boundary(std::size_t node) const {
    const auto ij = indices(node);
    const int last = cells_per_axis();
    for (int a = 0; a < dim(); ++a) {
        if (ij[a] == 0 || ij[a] == last) return true;
    }
    return false;
}

GridFunction::GridFunction(Grid grid, double fill)
    : grid_(std::move(grid)), values_(grid_.node_count(), fill) {}

GridFunction::GridFunction(Grid grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != grid_.node_count()) {
        throw InvalidArgument("grid function has " + std::to_string(values_.size()) + " values, grid has " +
                              std::to_string(grid_.node_count()) + " nodes");
    }
}

GridFunction GridFunction::sample(const Grid& grid, const std::function<double(const Point&)>& fn) {
    GridFunction out(grid);
    for (std::size_t k = 0; k < out.size(); ++k) out.values_[k] = fn(grid.coords(k));
    return out;
}

Eigen::VectorXd GridFunction::interior_vector() const {
    const auto nodes = grid_.interior_nodes();
    Eigen::VectorXd v(static_cast<Eigen::Index>(nodes.size()));
    for (std::size_t r = 0; r < nodes.size(); ++r) v[static_cast<Eigen::Index>(r)] = values_[nodes[r]];
    return v;
}

void GridFunction::set_interior(const Eigen::VectorXd& v) {
    const auto nodes = grid_.interior_nodes();
    if (static_cast<std::size_t>(v.size()) != nodes.size()) throw InvalidArgument("interior vector size mismatch");
    for (std::size_t r = 0; r < nodes.size(); ++r) values_[nodes[r]] = v[static_cast<Eigen::Index>(r)];
}

void GridFunction::zero_boundary() {
    for (std::size_t k = 0; k < values_.size(); ++k) {
        if (grid_.is_boundary(k)) values_[k] = 0.0;
    }
}

double GridFunction::min() const { return *std::min_element(values_.begin(), values_.end()); }
double GridFunction::max() const { return *std::max_element(values_.begin(), values_.end()); }

bool GridFunction::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

const GridFunction& GridFunction::ensure_finite(const char* context) const {
    if (!all_finite()) throw NumericalError(std::string(context) + ": non-finite value in grid function");
    return *this;
}

GridFunction GridFunction::map(const std::function<double(double)>& fn) const {
    GridFunction out(*this);
    for (double& v : out.values_) v = fn(v);
    return out;
}

void GridFunction::require_same_grid(const GridFunction& other) const {
    if (!(grid_ == other.grid_)) throw InvalidArgument("grid functions live on different grids");
}

GridFunction& GridFunction::operator+=(const GridFunction& other) {
    require_same_grid(other);
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += other.values_[k];
    return *this;
}

GridFunction& GridFunction::operator-=(const GridFunction& other) {
    require_same_grid(other);
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= other.values_[k];
    return *this;
}

GridFunction& GridFunction::operator*=(const GridFunction& other) {
    require_same_grid(other);
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] *= other.values_[k];
    return *this;
}

GridFunction& GridFunction::operator/=(const GridFunction& other) {
    require_same_grid(other);
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] /= other.values_[k];
    return *this;
}

GridFunction& GridFunction::operator*=(double scale) {
    for (double& v : values_) v *= scale;
    return *this;
}

GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
GridFunction operator*(GridFunction a, const GridFunction& b) { return a *= b; }
GridFunction operator/(GridFunction a, const GridFunction& b) { return a /= b; }
GridFunction operator*(double s, GridFunction a) { return a *= s; }
GridFunction operator*(GridFunction a, double s) { return a *= s; }

double l2_inner(const GridFunction& a, const GridFunction& b) {
    if (!(a.grid() == b.grid())) throw InvalidArgument("l2_inner: grid mismatch");
    double sum = 0.0;
    for (std::size_t node : a.grid().interior_nodes()) sum += a[node] * b[node];
    return a.grid().cell_volume() * sum;
}

double l2_norm(const GridFunction& a) { return std::sqrt(l2_inner(a, a)); }

double sup_norm(const GridFunction& a) {
    double m = 0.0;
    for (double v : a.values()) m = std::max(m, std::abs(v));
    return m;
}

GridFunction restrict_to(const GridFunction& fine, const Grid& coarse) {
    const Grid& g = fine.grid();
    if (g.dim() != coarse.dim() || g.domain().lower != coarse.domain().lower ||
        g.domain().upper != coarse.domain().upper || g.level() < coarse.level()) {
        throw InvalidArgument("restrict_to: target must be a coarser grid of the same domain");
    }
    const int stride = 1 << (g.level() - coarse.level());
    GridFunction out(coarse);
    for (std::size_t node = 0; node < out.size(); ++node) {
        const auto ij = coarse.indices(node);
        out[node] = fine[g.node(ij[0] * stride, coarse.dim() == 2 ? ij[1] * stride : 0)];
    }
    return out;
}

GridFunction discrete_laplacian(const GridFunction& a) {
    const Grid& g = a.grid();
    GridFunction out(g);
    const int n = g.nodes_per_axis();
    for (std::size_t node : g.interior_nodes()) {
        double lap = 0.0;
        std::size_t stride = 1;
        for (int axis = 0; axis < g.dim(); ++axis) {
            const double inv_h2 = 1.0 / (g.spacing(axis) * g.spacing(axis));
            lap += (a[node + stride] - 2.0 * a[node] + a[node - stride]) * inv_h2;
            stride *= static_cast<std::size_t>(n);
        }
        out[node] = lap;
    }
    return out;
}

Eigen::SparseMatrix<double> laplacian_matrix(const Grid& grid) {
    const auto nodes = grid.interior_nodes();
    const auto rows = static_cast<Eigen::Index>(nodes.size());
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(nodes.size() * (1 + 2 * static_cast<std::size_t>(grid.dim())));
    const auto n = static_cast<std::size_t>(grid.nodes_per_axis());
    for (std::size_t r = 0; r < nodes.size(); ++r) {
        const std::size_t node = nodes[r];
        std::size_t stride = 1;
        double diag = 0.0;
        for (int axis = 0; axis < grid.dim(); ++axis) {
            const double inv_h2 = 1.0 / (grid.spacing(axis) * grid.spacing(axis));
            diag -= 2.0 * inv_h2;
            for (std::size_t nb : {node + stride, node - stride}) {
                const auto col = grid.interior_row(nb);
                if (col >= 0) entries.emplace_back(static_cast<Eigen::Index>(r), col, inv_h2);
            }
            stride *= n;
        }
        entries.emplace_back(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r), diag);
    }
    Eigen::SparseMatrix<double> lap(rows, rows);
    lap.setFromTriplets(entries.begin(), entries.end());
    return lap;
}

Eigen::VectorXd boundary_laplacian_term(const GridFunction& a) {
    const Grid& grid = a.grid();
    const auto nodes = grid.interior_nodes();
    const auto n = static_cast<std::size_t>(grid.nodes_per_axis());
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nodes.size()));
    for (std::size_t r = 0; r < nodes.size(); ++r) {
        std::size_t stride = 1;
        for (int axis = 0; axis < grid.dim(); ++axis) {
            const double inv_h2 = 1.0 / (grid.spacing(axis) * grid.spacing(axis));
            for (std::size_t nb : {nodes[r] + stride, nodes[r] - stride}) {
                if (grid.is_boundary(nb)) out[static_cast<Eigen::Index>(r)] += a[nb] * inv_h2;
            }
            stride *= n;
        }
    }
    return out;
}

struct H2DualNorm::Factor {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> shifted;  // I - L
};

H2DualNorm::H2DualNorm(const Grid& grid, double tol, int max_iterations)
    : grid_(grid), tol_(tol), max_iterations_(max_iterations), laplacian_(laplacian_matrix(grid)) {
    auto factor = std::make_shared<Factor>();
    Eigen::SparseMatrix<double> identity(laplacian_.rows(), laplacian_.cols());
    identity.setIdentity();
    factor->shifted.compute(identity - laplacian_);
    if (factor->shifted.info() != Eigen::Success) throw NumericalError("h2_dual_norm: factorization of I - L failed");
    factor_ = std::move(factor);
}

double H2DualNorm::operator()(const GridFunction& a) const {
    if (!(a.grid() == grid_)) throw InvalidArgument("h2_dual_norm: grid mismatch");
    const Eigen::VectorXd rhs = a.interior_vector();
    if (rhs.squaredNorm() == 0.0) return 0.0;

    const auto& lap = laplacian_;
    auto apply = [&lap](const Eigen::VectorXd& p, Eigen::VectorXd& q) {
        const Eigen::VectorXd lp = lap * p;
        q = p + lap * lp;
    };
    const auto& shifted = factor_->shifted;
    auto precondition = [&shifted](const Eigen::VectorXd& r, Eigen::VectorXd& z) {
        const Eigen::VectorXd once = shifted.solve(r);
        z = shifted.solve(once);
    };

    Eigen::VectorXd z = Eigen::VectorXd::Zero(rhs.size());
    const CgResult cg = pcg(apply, precondition, rhs, z, tol_, max_iterations_);
    if (!cg.converged) {
        throw NumericalError("h2_dual_norm: conjugate gradient stalled after " + std::to_string(cg.iterations) +
                                 " iterations",
                             cg.relative_residual);
    }
    return std::sqrt(std::max(0.0, grid_.cell_volume() * rhs.dot(z)));
}

double h2_dual_norm(const GridFunction& a, double tol) { return H2DualNorm(a.grid(), tol)(a); }

}  // namespace pinv
