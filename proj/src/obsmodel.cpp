#include "pinv/obsmodel.hpp"

#include <cmath>
#include <random>

#include "pinv/error.hpp"

namespace pinv {

GridFunction white_noise(const Grid& grid, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(grid.cell_volume()));
    GridFunction w(grid);
    for (std::size_t node : grid.interior_nodes()) w[node] = normal(rng);
    return w;
}

Observation generate_observation(const SchrodingerSystem& sys_at_f0, double eps, std::uint64_t seed, double tol) {
    if (!(eps >= 0.0) || !std::isfinite(eps)) throw InvalidArgument("noise level eps must be finite and >= 0");
    Observation obs{solve_forward(sys_at_f0, tol), eps, {}};
    if (eps > 0.0) obs.y += eps * white_noise(sys_at_f0.grid(), seed);
    return obs;
}

double log_likelihood(const Observation& obs, const GridFunction& u) {
    if (!(obs.y.grid() == u.grid())) throw InvalidArgument("log_likelihood: grid mismatch");
    if (!(obs.eps > 0.0)) throw InvalidArgument("log_likelihood needs eps > 0");
    const double inv = 1.0 / (obs.eps * obs.eps);
    return inv * (l2_inner(obs.y, u) - 0.5 * l2_inner(u, u));
}

double log_likelihood_of_potential(const Observation& obs, const PotentialField& f, const GridFunction& g, double tol,
                                   SolverOptions options) {
    return log_likelihood(obs, solve_forward(SchrodingerSystem(f, g, options), tol));
}

}  // namespace pinv
