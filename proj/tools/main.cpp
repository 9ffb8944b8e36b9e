#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include <roughbsde/errors.hpp>

#include "experiment.hpp"

namespace {

constexpr int kExitChecksFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct Flags {
    std::string config;
    std::string out = ".";
    std::uint64_t seed = 0;
    bool check = false;
};

void add_flags(CLI::App* app, Flags& f) {
    app->add_option("--config", f.config, "experiment configuration (JSON)")->check(CLI::ExistingFile);
    app->add_option("--out", f.out, "output directory");
    app->add_option("--seed", f.seed, "overrides driver and Monte Carlo seeds");
    app->add_flag("--check", f.check, "run the invariant suite for this command");
}

}  // namespace

int main(int argc, char** argv) {
    using rbsde::cli::Command;

    CLI::App app{"roughbsde: BSDEs and semilinear PDEs driven by rough signals"};
    app.require_subcommand(1);
    Flags flags;
    Command command = Command::rpde_solve;
    bool seed_given = false;

    auto leaf = [&](CLI::App* parent, const std::string& name, const std::string& help, Command c) {
        CLI::App* sub = parent->add_subcommand(name, help);
        add_flags(sub, flags);
        sub->callback([&command, &seed_given, sub, c] {
            command = c;
            seed_given = sub->count("--seed") > 0;
        });
        return sub;
    };

    leaf(&app, "lift", "lift the driver and report signature data", Command::lift);
    CLI::App* flow = app.add_subcommand("flow", "backward flow of the driving vector fields");
    flow->require_subcommand(1);
    leaf(flow, "solve", "tabulate the flow and its derivative family", Command::flow_solve);
    leaf(flow, "check-identities", "verify the inverse-flow derivative identities",
         Command::flow_check_identities);
    CLI::App* transform = app.add_subcommand("transform", "transformed driver");
    transform->require_subcommand(1);
    leaf(transform, "constants", "growth and comparison constants, window length",
         Command::transform_constants);
    CLI::App* rpde = app.add_subcommand("rpde", "finite-difference PDE route");
    rpde->require_subcommand(1);
    leaf(rpde, "solve", "solve on the (t, x) grid", Command::rpde_solve);
    leaf(rpde, "converge", "Wong-Zakai convergence study", Command::rpde_converge);
    CLI::App* bsde = app.add_subcommand("bsde", "Monte Carlo regression route");
    bsde->require_subcommand(1);
    leaf(bsde, "solve", "simulate and solve the BSDE", Command::bsde_solve);
    leaf(bsde, "check-fk", "compare with the finite-difference route", Command::bsde_check_fk);
    leaf(&app, "converge", "Wong-Zakai convergence study", Command::converge);

    CLI11_PARSE(app, argc, argv);

    try {
        rbsde::cli::ExperimentConfig cfg;
        if (!flags.config.empty()) cfg = rbsde::cli::load_config(flags.config);
        rbsde::cli::RunOptions opt;
        opt.command = command;
        opt.out_dir = flags.out;
        opt.check = flags.check;
        if (seed_given) opt.seed = flags.seed;
        const auto result = rbsde::cli::run(cfg, opt);
        std::printf("%s: %s (%s)\n", rbsde::cli::to_string(command).c_str(),
                    result.pass ? "ok" : "checks failed", (opt.out_dir / "report.json").c_str());
        for (const auto& c : result.report.at("checks")) {
            if (!c.at("pass").get<bool>()) {
                std::fprintf(stderr, "failed check %s: value %s, threshold %s\n",
                             c.at("name").get<std::string>().c_str(), c.at("value").dump().c_str(),
                             c.at("threshold").dump().c_str());
            }
        }
        return result.pass ? 0 : kExitChecksFailed;
    } catch (const rbsde::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const rbsde::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumeric;
    }
}
