// fjup -- fork-join multipath upload toolkit.
//
// Every subcommand reads a sectioned config file and writes CSVs into the
// output directory.  Exit codes: 0 ok, 2 config error, 3 numeric failure.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fjup/config.hpp"
#include "fjup/experiments.hpp"

namespace {

struct CommonArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
};

void add_common(CLI::App* sub, CommonArgs& args) {
    sub->add_option("--config", args.config, "config file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", args.seed, "override [output] seed");
    sub->add_option("--out", args.out, "override [output] dir");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fork-join multipath upload toolkit"};
    app.require_subcommand(1);

    struct Command {
        const char* name;
        const char* help;
        void (*run)(const fjup::ExperimentConfig&);
    };
    const Command commands[] = {
        {"intermittent-sweep", "mean upload latency over every packet split",
         fjup::cmd_intermittent_sweep},
        {"sync-cost", "replicate-vs-allocate cost over data sizes", fjup::cmd_sync_cost},
        {"nr-trellis", "redundant allocations with latency and regret", fjup::cmd_nr_trellis},
        {"decay-sweep", "waiting-time tail decay rates over packet splits", fjup::cmd_decay_sweep},
        {"stream-experiment", "simulate schedulers under common random numbers",
         fjup::cmd_stream_experiment},
        {"train-mm", "fit a Markov-modulated service model to a trace", fjup::cmd_train_mm},
    };

    CommonArgs args[std::size(commands)];
    for (std::size_t i = 0; i < std::size(commands); ++i) {
        CLI::App* sub = app.add_subcommand(commands[i].name, commands[i].help);
        add_common(sub, args[i]);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    for (std::size_t i = 0; i < std::size(commands); ++i) {
        if (!app.get_subcommands().empty() &&
            app.get_subcommands()[0]->get_name() == commands[i].name) {
            try {
                fjup::ExperimentConfig cfg =
                    fjup::load_experiment_config(args[i].config, args[i].seed, args[i].out);
                commands[i].run(cfg);
                return 0;
            } catch (const std::invalid_argument& e) {
                std::cerr << "fjup: " << e.what() << "\n";
                return 2;
            } catch (const std::exception& e) {
                std::cerr << "fjup: " << e.what() << "\n";
                return 3;
            }
        }
    }
    std::cerr << "fjup: no subcommand\n";
    return 2;
}
