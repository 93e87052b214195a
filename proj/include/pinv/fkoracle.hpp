#pragma once

#include <cstdint>

#include "pinv/grid.hpp"
#include "pinv/pde.hpp"

namespace pinv {

/// How a discretely monitored path detects leaving the domain.
enum class ExitScheme {
    kClip,    // first step outside, exit point clipped onto the boundary
    kBridge,  // additionally kill with the Brownian-bridge crossing probability
};

struct PathConfig {
    double dt = 0.0;  // <= 0 selects (min spacing)^2 / 4
    std::size_t paths = 100000;
    std::size_t max_steps = 10000000;
    std::uint64_t seed = 1;
    ExitScheme exit = ExitScheme::kBridge;
    unsigned threads = 1;

    void validate() const;
    double step(const Grid& grid) const;
};

struct McEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    double mean_exit_time = 0.0;
    std::size_t censored = 0;
};

/// Monte Carlo value of E^x[g(X_tau) exp(-int_0^tau f(X_s) ds)] over Euler
/// paths of standard Brownian motion.  f and g are interpolated multilinearly
/// from their grid values.
McEstimate fk_forward_estimate(const PotentialField& f, const GridFunction& g, const Point& x,
                               const PathConfig& cfg);

/// Monte Carlo value of V_f[h](x), the solution of S_f v = h with zero boundary
/// data.  Paths accumulate w = int_0^tau h(X_t) exp(-int_0^t f) dt, which solves
/// S_f w = -h, so the estimate is -E^x[w].
McEstimate fk_green_estimate(const PotentialField& f, const GridFunction& h, const Point& x,
                             const PathConfig& cfg);

/// Multilinear interpolation of a grid function at a point of the closed domain.
double interpolate(const GridFunction& a, const Point& x);

}  // namespace pinv
