#include "pinv/fkoracle.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "pinv/error.hpp"
#include "pinv/rng.hpp"

namespace pinv {

void PathConfig::validate() const {
    if (paths < 100) throw InvalidArgument("path count must be at least 100");
    if (max_steps == 0) throw InvalidArgument("max_steps must be positive");
    if (!(dt >= 0.0) || !std::isfinite(dt)) throw InvalidArgument("time step must be finite and non-negative");
}

double PathConfig::step(const Grid& grid) const {
    if (dt > 0.0) return dt;
    const double h = grid.min_spacing();
    return 0.25 * h * h;
}

double interpolate(const GridFunction& a, const Point& x) {
    const Grid& g = a.grid();
    const int cells = g.cells_per_axis();
    std::array<int, 2> cell{0, 0};
    std::array<double, 2> w{0.0, 0.0};
    for (int axis = 0; axis < g.dim(); ++axis) {
        const double t = (x[axis] - g.domain().lower[axis]) / g.spacing(axis);
        const int c = std::clamp(static_cast<int>(std::floor(t)), 0, cells - 1);
        cell[axis] = c;
        w[axis] = std::clamp(t - c, 0.0, 1.0);
    }
    if (g.dim() == 1) {
        return (1.0 - w[0]) * a[g.node(cell[0])] + w[0] * a[g.node(cell[0] + 1)];
    }
    const double v00 = a[g.node(cell[0], cell[1])];
    const double v10 = a[g.node(cell[0] + 1, cell[1])];
    const double v01 = a[g.node(cell[0], cell[1] + 1)];
    const double v11 = a[g.node(cell[0] + 1, cell[1] + 1)];
    return (1.0 - w[1]) * ((1.0 - w[0]) * v00 + w[0] * v10) + w[1] * ((1.0 - w[0]) * v01 + w[0] * v11);
}

namespace {

constexpr std::size_t kShardPaths = 1000;

struct ShardSums {
    double sum = 0.0;
    double sum_sq = 0.0;
    double exit_time = 0.0;
    std::size_t count = 0;
    std::size_t censored = 0;
};

enum class Functional { kForward, kGreen };

struct PathOutcome {
    double value = 0.0;
    double time = 0.0;
    bool censored = false;
};

class PathSimulator {
public:
    PathSimulator(const PotentialField& f, const GridFunction& data, const PathConfig& cfg, Functional kind)
        : f_(f.f()), data_(data), cfg_(cfg), kind_(kind), domain_(f.grid().domain()),
          dt_(cfg.step(f.grid())), sqrt_dt_(std::sqrt(dt_)) {}

    PathOutcome run(const Point& start, std::mt19937_64& rng) const {
        std::normal_distribution<double> normal;
        std::uniform_real_distribution<double> uniform;
        const int dim = domain_.dim;
        Point pos = start;
        double integral_f = 0.0;
        double accumulated = 0.0;
        for (std::size_t step = 0; step < cfg_.max_steps; ++step) {
            const double fv = interpolate(f_, pos);
            if (kind_ == Functional::kGreen) accumulated += interpolate(data_, pos) * std::exp(-integral_f) * dt_;
            integral_f += fv * dt_;

            Point next = pos;
            for (int a = 0; a < dim; ++a) next[a] += sqrt_dt_ * normal(rng);

            bool outside = false;
            for (int a = 0; a < dim; ++a) {
                if (next[a] <= domain_.lower[a] || next[a] >= domain_.upper[a]) outside = true;
            }
            if (outside) {
                for (int a = 0; a < dim; ++a) next[a] = std::clamp(next[a], domain_.lower[a], domain_.upper[a]);
                return finish(next, integral_f, accumulated, step + 1);
            }
            if (cfg_.exit == ExitScheme::kBridge) {
                // probability that the Brownian bridge between the two monitored
                // positions touched each face: exp(-2 d0 d1 / dt)
                std::array<double, 4> p{0.0, 0.0, 0.0, 0.0};
                double survive = 1.0;
                bool any = false;
                for (int a = 0; a < dim; ++a) {
                    const double lo0 = pos[a] - domain_.lower[a];
                    const double lo1 = next[a] - domain_.lower[a];
                    const double hi0 = domain_.upper[a] - pos[a];
                    const double hi1 = domain_.upper[a] - next[a];
                    if (lo0 * lo1 < 20.0 * dt_) p[2 * a] = std::exp(-2.0 * lo0 * lo1 / dt_);
                    if (hi0 * hi1 < 20.0 * dt_) p[2 * a + 1] = std::exp(-2.0 * hi0 * hi1 / dt_);
                    survive *= (1.0 - p[2 * a]) * (1.0 - p[2 * a + 1]);
                    any = any || p[2 * a] > 0.0 || p[2 * a + 1] > 0.0;
                }
                if (any && uniform(rng) < 1.0 - survive) {
                    double total = 0.0;
                    for (double q : p) total += q;
                    double pick = uniform(rng) * total;
                    int face = 0;
                    for (; face < 2 * dim - 1; ++face) {
                        if (pick < p[static_cast<std::size_t>(face)]) break;
                        pick -= p[static_cast<std::size_t>(face)];
                    }
                    const int axis = face / 2;
                    next[axis] = (face % 2 == 0) ? domain_.lower[axis] : domain_.upper[axis];
                    return finish(next, integral_f, accumulated, step + 1);
                }
            }
            pos = next;
        }
        return {0.0, static_cast<double>(cfg_.max_steps) * dt_, true};
    }

private:
    PathOutcome finish(const Point& exit, double integral_f, double accumulated, std::size_t steps) const {
        PathOutcome out;
        out.time = static_cast<double>(steps) * dt_;
        out.value = (kind_ == Functional::kForward) ? interpolate(data_, exit) * std::exp(-integral_f) : -accumulated;
        return out;
    }

    const GridFunction& f_;
    const GridFunction& data_;
    const PathConfig& cfg_;
    Functional kind_;
    Domain domain_;
    double dt_;
    double sqrt_dt_;
};

McEstimate estimate(const PotentialField& f, const GridFunction& data, const Point& x, const PathConfig& cfg,
                    Functional kind) {
    cfg.validate();
    if (!(data.grid() == f.grid())) throw InvalidArgument("Feynman-Kac estimate: grid mismatch");
    if (!f.grid().domain().contains(x)) throw InvalidArgument("Feynman-Kac estimate: start point must be interior");

    const PathSimulator sim(f, data, cfg, kind);
    const std::size_t shards = (cfg.paths + kShardPaths - 1) / kShardPaths;
    std::vector<ShardSums> sums(shards);

    auto run_shard = [&](std::size_t s) {
        std::mt19937_64 rng(derive_seed(cfg.seed, s));
        const std::size_t begin = s * kShardPaths;
        const std::size_t end = std::min(cfg.paths, begin + kShardPaths);
        ShardSums acc;
        for (std::size_t p = begin; p < end; ++p) {
            const PathOutcome o = sim.run(x, rng);
            if (o.censored) {
                ++acc.censored;
                continue;
            }
            acc.sum += o.value;
            acc.sum_sq += o.value * o.value;
            acc.exit_time += o.time;
            ++acc.count;
        }
        sums[s] = acc;
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(shards)));
    if (workers == 1) {
        for (std::size_t s = 0; s < shards; ++s) run_shard(s);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t s = next++; s < shards; s = next++) run_shard(s);
            });
        }
        for (auto& t : pool) t.join();
    }

    ShardSums total;
    for (const ShardSums& s : sums) {
        total.sum += s.sum;
        total.sum_sq += s.sum_sq;
        total.exit_time += s.exit_time;
        total.count += s.count;
        total.censored += s.censored;
    }
    if (static_cast<double>(total.censored) > 0.01 * static_cast<double>(cfg.paths)) {
        throw NumericalError("Feynman-Kac estimate: " + std::to_string(total.censored) + " of " +
                             std::to_string(cfg.paths) + " paths hit max_steps");
    }
    McEstimate out;
    const double n = static_cast<double>(total.count);
    out.mean = total.sum / n;
    const double var = std::max(0.0, (total.sum_sq - n * out.mean * out.mean) / (n - 1.0));
    out.stderr_ = std::sqrt(var / n);
    out.mean_exit_time = total.exit_time / n;
    out.censored = total.censored;
    return out;
}

}  // namespace

McEstimate fk_forward_estimate(const PotentialField& f, const GridFunction& g, const Point& x,
                               const PathConfig& cfg) {
    return estimate(f, g, x, cfg, Functional::kForward);
}

McEstimate fk_green_estimate(const PotentialField& f, const GridFunction& h, const Point& x,
                             const PathConfig& cfg) {
    return estimate(f, h, x, cfg, Functional::kGreen);
}

}  // namespace pinv
