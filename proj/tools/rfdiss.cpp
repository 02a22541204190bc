#include "rfdiss/app.hpp"

#include <CLI11.hpp>

#include <map>

int main(int argc, char** argv)
{
    CLI::App cli{"Simulation and ISS verification for switched delay systems"};
    cli.require_subcommand(1, 1);

    rfdiss::RunOptions opt;
    std::uint64_t seed = 0;
    std::string command;

    const std::map<std::string, std::string> about{
        {"simulate", "integrate one trajectory and write trajectory.csv"},
        {"derive", "estimate the derivative notions of V and write derivatives.csv"},
        {"check", "test the sandwich and dissipation inequalities (and an optional envelope)"},
        {"certify", "build ISS gains and validate the envelope on random trials"},
        {"falsify", "search random scenarios for an envelope violation"},
        {"probe-lipschitz", "estimate local Lipschitz constants of the right-hand side"},
    };
    for (const auto& name : rfdiss::command_names()) {
        auto* sub = cli.add_subcommand(name, about.at(name));
        sub->add_option("--config", opt.config, "experiment config (JSON)")->required();
        sub->add_option("--out", opt.out_dir, "output directory");
        sub->add_option("--seed", seed, "random seed (overrides the config)");
        sub->add_option("--threads", opt.threads, "worker threads for trials")->check(CLI::PositiveNumber);
        sub->add_flag("--quiet", opt.quiet, "suppress the summary on stdout");
        sub->add_flag("--emit-plot-data", opt.emit_plot_data, "also write (t, |x|, envelope) rows");
        sub->callback([&command, name] { command = name; });
    }

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = cli.exit(e);
        return code == 0 ? 0 : rfdiss::kExitConfig;
    }
    for (auto* sub : cli.get_subcommands()) {
        if (sub->get_option("--seed")->count() > 0) {
            opt.seed = seed;
        }
    }
    return rfdiss::run_command(command, opt);
}
