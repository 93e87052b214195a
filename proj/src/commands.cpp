#include "pinv/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "json.hpp"
#include "pinv/config.hpp"
#include "pinv/error.hpp"
#include "pinv/io.hpp"
#include "pinv/rng.hpp"
#include "pinv/stats.hpp"
#include "pinv/verify.hpp"

#ifndef PINV_GIT_DESCRIBE
#define PINV_GIT_DESCRIBE "unknown"
#endif

namespace pinv {

using nlohmann::json;

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names{"forward", "oracle", "verify", "sample-prior",
                                                "mcmc",    "bvm",    "coverage", "rates"};
    return names;
}

std::string git_describe() { return PINV_GIT_DESCRIBE; }

namespace {

namespace fs = std::filesystem;

// State shared by one subcommand run.
struct Context {
    ExperimentConfig cfg;
    fs::path out;
    std::ostream& log;
    bool quiet;
    json seeds = json::object();
    json summary = json::object();
    std::vector<std::string> outputs;
    int status = 0;

    void say(const std::string& line) const {
        if (!quiet) log << line << '\n';
    }

    std::string file(const std::string& name) {
        outputs.push_back(name);
        return (out / name).string();
    }

    // experiment, seed, eps prefix of every CSV row
    std::vector<std::string> key(double eps, std::uint64_t seed) const {
        return {cfg.name, std::to_string(seed), csv_number(eps)};
    }
};

std::vector<std::string> with_key(std::vector<std::string> key, const std::vector<std::string>& rest) {
    key.insert(key.end(), rest.begin(), rest.end());
    return key;
}

const std::vector<std::string> kKeyColumns{"experiment", "seed", "eps"};

std::vector<std::string> columns(const std::vector<std::string>& rest) { return with_key(kKeyColumns, rest); }

void write_records(Context& ctx, const std::string& name, const std::vector<Record>& records) {
    CsvWriter csv(ctx.file(name), columns({"rep", "psi_id", "kind", "value"}));
    for (const auto& r : records) {
        csv.row({r.experiment, std::to_string(r.seed), csv_number(r.eps), std::to_string(r.rep), r.psi_id, r.kind,
                 csv_number(r.value)});
    }
}

void cmd_forward(Context& ctx) {
    const WaveletBasis basis = make_basis(ctx.cfg);
    const Grid& grid = basis.grid();
    const SchrodingerSystem sys(PotentialField::from_values(make_truth(ctx.cfg, basis)), make_boundary(ctx.cfg, grid));
    const GridFunction u = solve_forward(sys, ctx.cfg.mcmc.solver_tol);
    write_field(ctx.file("f0.field"), sys.potential().f());
    write_field(ctx.file("u.field"), u);
    CsvWriter csv(ctx.file("forward.csv"), columns({"node", "x", "y", "f", "u"}));
    for (std::size_t n = 0; n < grid.node_count(); ++n) {
        const Point x = grid.coords(n);
        csv.row(with_key(ctx.key(0.0, ctx.cfg.seed), {std::to_string(n), csv_number(x[0]), csv_number(x[1]),
                                                      csv_number(sys.potential().f()[n]), csv_number(u[n])}));
    }
    ctx.summary = {{"u_min", u.min()}, {"u_max", u.max()}, {"u_l2", l2_norm(u)}};
}

void cmd_oracle(Context& ctx) {
    const WaveletBasis basis = make_basis(ctx.cfg);
    const Grid& grid = basis.grid();
    const SchrodingerSystem sys(PotentialField::from_values(make_truth(ctx.cfg, basis)), make_boundary(ctx.cfg, grid));
    const PathConfig paths = make_path_config(ctx.cfg);
    ctx.seeds["paths"] = paths.seed;
    const auto probes = diagonal_probes(grid, ctx.cfg.oracle.probes);
    ctx.say("oracle: " + std::to_string(probes.size()) + " probes x " + std::to_string(paths.paths) + " paths");
    const auto rows = oracle_crosscheck(sys, probes, paths, ctx.cfg.mcmc.solver_tol);
    CsvWriter csv(ctx.file("oracle.csv"),
                  columns({"probe", "x", "y", "solver", "mc_mean", "mc_stderr", "z", "mean_exit_time"}));
    double worst = 0.0;
    std::size_t within = 0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& r = rows[k];
        csv.row(with_key(ctx.key(0.0, paths.seed),
                         {std::to_string(k), csv_number(r.x[0]), csv_number(r.x[1]), csv_number(r.solver),
                          csv_number(r.mc.mean), csv_number(r.mc.stderr_), csv_number(r.z),
                          csv_number(r.mc.mean_exit_time)}));
        worst = std::max(worst, std::abs(r.z));
        within += std::abs(r.z) <= 3.0 ? 1 : 0;
    }
    ctx.summary = {{"max_abs_z", worst}, {"probes_within_3_stderr", within}, {"probes", rows.size()}};
}

void cmd_verify(Context& ctx) {
    ctx.say("verify: invariant suite in d = " + std::to_string(ctx.cfg.dim));
    const auto checks = verify_suite(ctx.cfg.dim, ctx.cfg.seed);
    CsvWriter csv(ctx.file("verify.csv"), columns({"check", "value", "lower", "upper", "passed"}));
    std::size_t failed = 0;
    for (const auto& c : checks) {
        csv.row(with_key(ctx.key(0.0, ctx.cfg.seed), {c.name, csv_number(c.value), csv_number(c.lower),
                                                      csv_number(c.upper), c.passed ? "1" : "0"}));
        if (!c.passed) {
            ++failed;
            ctx.say("  FAILED " + c.name + " = " + csv_number(c.value));
        }
    }
    ctx.summary = {{"checks", checks.size()}, {"failed", failed}};
    if (failed > 0) ctx.status = 1;
}

void cmd_sample_prior(Context& ctx) {
    const WaveletBasis basis = make_basis(ctx.cfg);
    const PriorConfig prior = make_prior(ctx.cfg, ctx.cfg.prior_level.value_or(level_rule(
                                                      ctx.cfg.eps, ctx.cfg.prior_smoothness, ctx.cfg.dim,
                                                      ctx.cfg.grid_level)));
    const double bound = prior_sup_bound(prior, basis);
    CsvWriter csv(ctx.file("prior.csv"), columns({"draw", "level", "sup_phi", "sup_bound", "in_box", "min_f", "max_f"}));
    std::size_t inside = 0;
    for (std::size_t k = 0; k < ctx.cfg.prior_samples; ++k) {
        const std::uint64_t seed = derive_seed(ctx.cfg.seed, k);
        const PriorDraw d = sample_prior(prior, basis, seed);
        const bool in_box = inside_prior_box(d.coefficients, prior);
        inside += in_box ? 1 : 0;
        write_coefficients(ctx.file("prior_draw_" + std::to_string(k) + ".coef"), d.coefficients);
        csv.row(with_key(ctx.key(0.0, seed),
                         {std::to_string(k), std::to_string(prior.max_level),
                          csv_number(sup_norm(basis.synthesize(d.coefficients))), csv_number(bound),
                          in_box ? "1" : "0", csv_number(d.potential.min()), csv_number(d.potential.max())}));
    }
    ctx.summary = {{"draws", ctx.cfg.prior_samples}, {"inside_box", inside}, {"sup_bound", bound}};
}

void cmd_mcmc(Context& ctx) {
    const ExperimentSetup setup = make_setup(ctx.cfg);
    const double eps = ctx.cfg.eps;
    const int level = prior_level(setup, eps);
    PriorConfig prior = setup.prior;
    prior.max_level = level;
    const SchrodingerSystem truth(PotentialField::from_values(setup.f0), setup.boundary, setup.mcmc.solver);
    const std::uint64_t data_seed = derive_seed(ctx.cfg.seed, 0);
    const std::uint64_t chain_seed = derive_seed(ctx.cfg.seed, 1);
    ctx.seeds["data"] = data_seed;
    ctx.seeds["chain"] = chain_seed;
    Observation obs = generate_observation(truth, eps, data_seed, setup.mcmc.solver_tol);
    obs.truth_id = ctx.cfg.name;
    write_observation(ctx.file("observation.obs"), obs);

    ctx.say("mcmc: J = " + std::to_string(level) + ", " + std::to_string(setup.mcmc.iterations) + " iterations");
    const PosteriorRun run = mcmc_run(obs, prior, setup.basis, setup.mcmc, chain_seed, setup.dictionary);
    std::ofstream(ctx.file("chain.ckpt")) << run.checkpoint;
    const GridFunction fbar = posterior_mean(run, setup.basis);
    write_field(ctx.file("posterior_mean.field"), fbar);
    write_coefficients(ctx.file("last_draw.coef"), run.draws.back());

    CsvWriter trace(ctx.file("mcmc.csv"), columns({"draw", "psi_id", "value"}));
    for (std::size_t i = 0; i < run.functionals.size(); ++i) {
        for (std::size_t k = 0; k < run.functionals[i].size(); ++k) {
            trace.row(with_key(ctx.key(eps, chain_seed),
                               {std::to_string(k), run.functional_ids[i], csv_number(run.functionals[i][k])}));
        }
    }
    CsvWriter intervals(ctx.file("intervals.csv"),
                        columns({"psi_id", "center", "radius", "truth", "covered", "ess"}));
    for (std::size_t i = 0; i < setup.dictionary.size(); ++i) {
        const CredibleInterval ci = credible_interval(run, i, setup.beta);
        const double t = l2_inner(setup.f0, setup.dictionary[i].psi);
        intervals.row(with_key(ctx.key(eps, chain_seed),
                               {run.functional_ids[i], csv_number(ci.center), csv_number(ci.radius), csv_number(t),
                                ci.contains(t) ? "1" : "0", csv_number(effective_sample_size(run.functionals[i]))}));
    }
    ctx.summary = {{"level", level},
                   {"acceptance", run.acceptance_rate},
                   {"stored_draws", run.draws.size()},
                   {"error_l2", l2_norm(fbar - setup.f0)}};
}

void cmd_bvm(Context& ctx) {
    ExperimentSetup setup = make_setup(ctx.cfg);
    ctx.say("bvm: one replication at eps = " + csv_number(ctx.cfg.eps));
    const Replication r = run_replication(setup, ctx.cfg.eps, 0);
    ctx.seeds["replication"] = r.seed;
    if (r.failed) throw NumericalError(r.failure);
    write_records(ctx, "bvm.csv", replication_records(setup, {r}));
    json entries = json::array();
    for (const auto& b : r.bvm) {
        entries.push_back({{"psi_id", b.id},
                           {"ks", b.ks},
                           {"ks_band", b.ks_band},
                           {"spread_ratio", b.spread_ratio},
                           {"centering", b.centering}});
    }
    ctx.summary = {{"level", r.level}, {"error_l2", r.error_l2}, {"entries", entries}};
}

void cmd_coverage(Context& ctx) {
    const ExperimentSetup setup = make_setup(ctx.cfg);
    ctx.say("coverage: " + std::to_string(ctx.cfg.replications) + " replications at eps = " +
            csv_number(ctx.cfg.eps));
    std::vector<Record> records;
    const CoverageSummary s = coverage_experiment(setup, ctx.cfg.eps, ctx.cfg.replications, &records);
    write_records(ctx, "records.csv", records);
    CsvWriter csv(ctx.file("coverage.csv"),
                  columns({"psi_id", "coverage", "scaled_radius", "target_radius", "reps", "failures"}));
    for (std::size_t i = 0; i < s.ids.size(); ++i) {
        csv.row(with_key(ctx.key(s.eps, ctx.cfg.seed),
                         {s.ids[i], csv_number(s.coverage[i]), csv_number(s.scaled_radius[i]),
                          csv_number(s.target_radius[i]), std::to_string(s.reps), std::to_string(s.failures)}));
    }
    if (!setup.ball.empty()) {
        csv.row(with_key(ctx.key(s.eps, ctx.cfg.seed),
                         {"ball", csv_number(s.ball_coverage), csv_number(s.ball_scaled_radius), "nan",
                          std::to_string(s.reps), std::to_string(s.failures)}));
    }
    ctx.summary = {{"reps", s.reps}, {"failures", s.failures}, {"coverage", s.coverage},
                   {"scaled_radius", s.scaled_radius}, {"target_radius", s.target_radius}};
}

void cmd_rates(Context& ctx) {
    const ExperimentSetup setup = make_setup(ctx.cfg);
    ctx.say("rates: " + std::to_string(ctx.cfg.eps_list.size()) + " noise levels x " +
            std::to_string(ctx.cfg.replications) + " replications");
    std::vector<Record> records;
    const RateSummary s = rate_experiment(setup, ctx.cfg.eps_list, ctx.cfg.replications, &records);
    write_records(ctx, "records.csv", records);
    CsvWriter csv(ctx.file("rates.csv"),
                  columns({"level", "median_error", "median_spread", "median_ks", "median_ks_band"}));
    json medians = json::array();
    for (const auto& row : s.rows) {
        csv.row(with_key(ctx.key(row.eps, ctx.cfg.seed),
                         {std::to_string(row.level), csv_number(row.median_error), csv_number(row.median_spread),
                          csv_number(row.median_ks), csv_number(row.median_ks_band)}));
        medians.push_back(row.median_error);
    }
    ctx.summary = {{"slope", s.slope}, {"theoretical", s.theoretical}, {"median_error", medians}};
}

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

json error_record(const std::string& kind, const std::string& field, const std::string& message, int code) {
    json j = {{"status", "error"}, {"exit_code", code}, {"kind", kind}, {"message", message}};
    if (!field.empty()) j["field"] = field;
    return j;
}

}  // namespace

int run_command(const std::string& subcommand, const CommandOptions& options, std::ostream& log, std::ostream& err) {
    const auto started = std::chrono::steady_clock::now();
    const std::string started_utc = utc_now();
    fs::path out = options.out ? fs::path(*options.out) : fs::path();

    auto fail = [&](const json& record) {
        err << record.dump() << '\n';
        if (!out.empty()) {
            std::error_code ec;
            fs::create_directories(out, ec);
            std::ofstream(out / "error.json") << record.dump(2) << '\n';
        }
        return record.at("exit_code").get<int>();
    };

    try {
        const auto& names = subcommands();
        if (std::find(names.begin(), names.end(), subcommand) == names.end()) {
            throw ConfigError("subcommand", "unknown subcommand '" + subcommand + "'");
        }
        ExperimentConfig cfg = load_config(options.config_path);
        if (options.seed) cfg.seed = *options.seed;
        if (options.threads) cfg.threads = *options.threads;
        if (options.out) cfg.output = *options.out;
        cfg.validate();
        out = cfg.output;
        fs::create_directories(out);

        Context ctx{cfg, out, log, options.quiet, json::object(), json::object(), {}, 0};
        ctx.seeds["base"] = cfg.seed;
        if (subcommand == "forward") cmd_forward(ctx);
        if (subcommand == "oracle") cmd_oracle(ctx);
        if (subcommand == "verify") cmd_verify(ctx);
        if (subcommand == "sample-prior") cmd_sample_prior(ctx);
        if (subcommand == "mcmc") cmd_mcmc(ctx);
        if (subcommand == "bvm") cmd_bvm(ctx);
        if (subcommand == "coverage") cmd_coverage(ctx);
        if (subcommand == "rates") cmd_rates(ctx);

        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        json manifest = {{"tool", "pinv"},
                         {"format", 1},
                         {"subcommand", subcommand},
                         {"git_describe", git_describe()},
                         {"config", json::parse(config_json(cfg))},
                         {"seeds", ctx.seeds},
                         {"started_utc", started_utc},
                         {"wall_time_seconds", wall},
                         {"outputs", ctx.outputs},
                         {"summary", ctx.summary},
                         {"status", ctx.status == 0 ? "ok" : "checks_failed"}};
        std::ofstream(out / "manifest.json") << manifest.dump(2) << '\n';
        fs::remove(out / "error.json");
        char took[32];
        std::snprintf(took, sizeof took, "%.2f", wall);
        ctx.say(subcommand + ": done in " + took + " s, output in " + out.string());
        return ctx.status;
    } catch (const ConfigError& e) {
        return fail(error_record("config", e.field(), e.what(), 2));
    } catch (const InvalidArgument& e) {
        return fail(error_record("invalid_argument", "", e.what(), 2));
    } catch (const NumericalError& e) {
        json record = error_record("numerical", "", e.what(), 1);
        record["residual"] = e.residual();
        return fail(record);
    } catch (const std::exception& e) {
        return fail(error_record("internal", "", e.what(), 1));
    }
}

}  // namespace pinv
