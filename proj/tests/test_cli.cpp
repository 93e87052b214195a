#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "pinv/commands.hpp"
#include "pinv/config.hpp"
#include "pinv/io.hpp"
#include "pinv/rng.hpp"

using namespace pinv;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("pinv_test_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path write_text(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
    return p;
}

// Small enough to finish in well under a second per subcommand.
const char* kSmall = R"({
  "name": "small",
  "grid_level": 6,
  "eps": 0.05,
  "eps_list": [0.2, 0.1, 0.05],
  "replications": 2,
  "mcmc": {"iterations": 1500, "burn_in_fraction": 0.25},
  "oracle": {"paths": 1500, "probes": 3}
})";

int run(const std::string& sub, const fs::path& config, const fs::path& out, std::string* err_text = nullptr) {
    CommandOptions opts;
    opts.config_path = config.string();
    opts.out = out.string();
    opts.quiet = true;
    std::ostringstream log, err;
    const int code = run_command(sub, opts, log, err);
    if (err_text) *err_text = err.str();
    return code;
}

ConfigError config_error(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e;
    }
    FAIL("no ConfigError for: " << text);
    return ConfigError("", "");
}

}  // namespace

TEST_CASE("empty config gives the documented defaults") {
    const ExperimentConfig cfg = parse_config("{}");
    CHECK(cfg.dim == 1);
    CHECK(cfg.grid_level == 7);
    CHECK(cfg.prior_smoothness == 3);
    CHECK_FALSE(cfg.prior_level.has_value());
    CHECK(cfg.eps == 0.025);
    CHECK(cfg.dictionary.size() == 3);
    CHECK(cfg.mcmc.iterations == 20000);
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("config errors name the offending field") {
    CHECK(config_error(R"({"grid_levl": 6})").field() == "grid_levl");
    CHECK(config_error(R"({"mcmc": {"burn_in": 10}})").field() == "mcmc.burn_in");
    CHECK(config_error(R"({"grid_level": "six"})").field() == "grid_level");
    CHECK(config_error(R"({"dim": 3})").field() == "dim");
    CHECK(config_error(R"({"eps": -1})").field() == "eps");
    CHECK(config_error("{ not json").field() == "<root>");
}

TEST_CASE("dictionary members must vanish near the boundary") {
    const ConfigError e =
        config_error(R"({"dictionary": [{"kind": "poly", "id": "edge", "center": [0.1, 0.5], "half_width": 0.3}]})");
    CHECK(e.field().find("dictionary[0]") == 0);
    CHECK(config_error(R"({"dictionary": [{"id": "a"}, {"id": "a", "tilt": 1}]})").field().find("dictionary") == 0);
}

TEST_CASE("config survives a json round trip and a manifest wrapper") {
    ExperimentConfig cfg = parse_config(kSmall);
    cfg.prior_level = 2;
    cfg.seed = std::numeric_limits<std::uint64_t>::max();
    const std::string text = config_json(cfg);
    CHECK(config_json(parse_config(text)) == text);
    const std::string manifest = R"({"tool": "pinv", "subcommand": "mcmc", "config": )" + text + "}";
    CHECK(config_json(parse_config(manifest)) == text);
}

TEST_CASE("csv numbers round trip exactly") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
        CHECK(std::strtod(csv_number(v).c_str(), nullptr) == v);
    }
    CHECK(csv_number(0.05) == "0.05");
    CHECK(csv_number(std::nan("")) == "nan");
}

TEST_CASE("csv writer rejects malformed rows") {
    const fs::path dir = scratch("csv");
    CsvWriter csv((dir / "t.csv").string(), {"a", "b"});
    csv.row({"1", "2"});
    CHECK_THROWS_AS(csv.row({"1"}), InvalidArgument);
    CHECK_THROWS_AS(csv.row({"1", "2,3"}), InvalidArgument);
    CHECK(csv.rows() == 1);
}

TEST_CASE("binary artifacts round trip bit for bit") {
    const fs::path dir = scratch("io");
    const Grid grid(Domain::unit(2), 4);
    const GridFunction a = GridFunction::sample(grid, [](const Point& x) { return std::sin(7.0 * x[0]) / 3.0 + x[1]; });
    write_field((dir / "a.field").string(), a);
    const GridFunction b = read_field((dir / "a.field").string());
    CHECK(b.grid() == grid);
    CHECK(std::equal(a.values().begin(), a.values().end(), b.values().begin()));

    CoefficientTree c(2, 2);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> normal;
    for (double& v : c.flat()) v = normal(rng);
    write_coefficients((dir / "c.coef").string(), c);
    CHECK(read_coefficients((dir / "c.coef").string()) == c);

    const Observation obs{a, 1.0 / 7.0, "truth-A"};
    write_observation((dir / "y.obs").string(), obs);
    const Observation back = read_observation((dir / "y.obs").string());
    CHECK(back.eps == obs.eps);
    CHECK(back.truth_id == "truth-A");
    CHECK(std::equal(a.values().begin(), a.values().end(), back.y.values().begin()));

    write_text(dir / "bad.field", "pinv-field 2 dim 1\n");
    CHECK_THROWS_AS(read_field((dir / "bad.field").string()), ConfigError);
    CHECK_THROWS_AS(read_field((dir / "missing.field").string()), ConfigError);
}

TEST_CASE("config errors exit 2 with an error record") {
    const fs::path dir = scratch("exit2");
    const fs::path cfg = write_text(dir / "bad.json", R"({"grid_level": 6, "prior": {"smoothness": "x"}})");
    std::string err;
    CHECK(run("forward", cfg, dir / "out", &err) == 2);
    const auto record = nlohmann::json::parse(slurp(dir / "out" / "error.json"));
    CHECK(record["exit_code"] == 2);
    CHECK(record["field"] == "prior.smoothness");
    CHECK(nlohmann::json::parse(err) == record);
    CHECK(run("forward", dir / "absent.json", dir / "out") == 2);
    CHECK(run("plot", cfg, dir / "out") == 2);
}

TEST_CASE("numerical failures exit 1") {
    // paths stopped after ten steps are censored, which the oracle refuses
    const fs::path dir = scratch("exit1");
    const fs::path cfg = write_text(
        dir / "c.json", R"({"grid_level": 6, "oracle": {"paths": 200, "probes": 2, "dt": 1e-6, "max_steps": 10}})");
    std::string err;
    CHECK(run("oracle", cfg, dir / "out", &err) == 1);
    const auto record = nlohmann::json::parse(slurp(dir / "out" / "error.json"));
    CHECK(record["kind"] == "numerical");
    CHECK_FALSE(fs::exists(dir / "out" / "manifest.json"));
}

TEST_CASE("every subcommand writes a manifest and keyed csv tables") {
    const fs::path dir = scratch("all");
    const fs::path cfg = write_text(dir / "small.json", kSmall);
    for (const std::string& sub : {"forward", "oracle", "verify", "sample-prior", "mcmc", "bvm", "rates"}) {
        INFO(sub);
        const fs::path out = dir / sub;
        std::string err;
        REQUIRE_MESSAGE(run(sub, cfg, out, &err) == 0, err);
        const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
        CHECK(manifest["tool"] == "pinv");
        CHECK(manifest["subcommand"] == sub);
        CHECK(manifest["git_describe"].get<std::string>() == git_describe());
        CHECK(manifest["status"] == "ok");
        CHECK(manifest["wall_time_seconds"].get<double>() >= 0.0);
        CHECK(manifest["seeds"]["base"] == 1);
        CHECK_FALSE(fs::exists(out / "error.json"));
        bool any_csv = false;
        for (const auto& name : manifest["outputs"]) {
            const fs::path p = out / name.get<std::string>();
            CHECK(fs::exists(p));
            if (p.extension() != ".csv") continue;
            any_csv = true;
            std::istringstream lines(slurp(p));
            std::string header;
            std::getline(lines, header);
            CHECK(header.rfind("experiment,seed,eps,", 0) == 0);
            std::set<std::string> seen;
            for (std::string line; std::getline(lines, line);) {
                CHECK(line.rfind("small,", 0) == 0);
                CHECK(seen.insert(line).second);
            }
            CHECK_FALSE(seen.empty());
        }
        CHECK(any_csv);
    }
}

TEST_CASE("reruns are byte identical and a manifest reproduces its run") {
    const fs::path dir = scratch("rerun");
    const fs::path cfg = write_text(dir / "small.json", kSmall);
    REQUIRE(run("mcmc", cfg, dir / "a") == 0);
    REQUIRE(run("mcmc", cfg, dir / "b") == 0);
    REQUIRE(run("mcmc", dir / "a" / "manifest.json", dir / "c") == 0);
    for (const char* f : {"mcmc.csv", "intervals.csv", "posterior_mean.field", "observation.obs", "chain.ckpt"}) {
        INFO(f);
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
        CHECK(slurp(dir / "a" / f) == slurp(dir / "c" / f));
    }

    CommandOptions opts;
    opts.config_path = cfg.string();
    opts.out = (dir / "d").string();
    opts.seed = 99;
    opts.threads = 2;
    opts.quiet = true;
    std::ostringstream log, err;
    REQUIRE(run_command("mcmc", opts, log, err) == 0);
    CHECK(log.str().empty());
    CHECK(slurp(dir / "a" / "mcmc.csv") != slurp(dir / "d" / "mcmc.csv"));
    const auto manifest = nlohmann::json::parse(slurp(dir / "d" / "manifest.json"));
    CHECK(manifest["config"]["seed"] == 99);
    CHECK(manifest["seeds"]["chain"] == derive_seed(99, 1));
}

TEST_CASE("the pinv binary parses flags and reports exit codes") {
    const fs::path dir = scratch("binary");
    const fs::path cfg = write_text(dir / "small.json", kSmall);
    const std::string bin = PINV_BINARY;
    auto sh = [](const std::string& cmd) {
        const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
        return WEXITSTATUS(status);
    };
    CHECK(sh(bin + " forward --config " + cfg.string() + " --out " + (dir / "f").string() + " --quiet") == 0);
    CHECK(fs::exists(dir / "f" / "forward.csv"));
    CHECK(sh(bin + " forward --config " + cfg.string() + " --threads 0") == 2);
    CHECK(sh(bin + " forward") == 2);
    CHECK(sh(bin + " --help") == 0);
}
