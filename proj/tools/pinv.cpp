#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "pinv/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"pinv: Bayesian recovery of the potential in a Schrodinger boundary value problem"};
    app.set_version_flag("--version", pinv::git_describe());
    app.require_subcommand(1, 1);

    pinv::CommandOptions opts;
    std::uint64_t seed = 0;
    std::string out;
    unsigned threads = 0;
    for (const auto& name : pinv::subcommands()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", opts.config_path, "experiment JSON")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "override the base seed");
        sub->add_option("--out", out, "output directory");
        sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
        sub->add_flag("--quiet", opts.quiet, "no progress lines");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    auto* sub = app.get_subcommands().front();
    if (sub->count("--seed") > 0) opts.seed = seed;
    if (sub->count("--out") > 0) opts.out = out;
    if (sub->count("--threads") > 0) opts.threads = threads;
    return pinv::run_command(sub->get_name(), opts, std::cerr, std::cerr);
}
