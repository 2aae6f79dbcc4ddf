#include "epi/epi.h"

#include <CLI11.hpp>

#include <cstdio>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{"age-structured reaction-diffusion epidemic lab"};
    app.require_subcommand(1, 1);

    std::string scenario;
    std::string out_dir;
    std::uint64_t seed = 0;
    int threads = 1;
    for (const char* name : {"simulate", "steady", "stability", "ledger", "sweep"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--scenario", scenario, "scenario file")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "seed for random initial data");
        sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    const bool has_seed = app.get_subcommands().front()->count("--seed") > 0;
    epi_run_options opt{command.c_str(), scenario.c_str(), out_dir.empty() ? nullptr : out_dir.c_str(),
                        seed, has_seed ? 1 : 0, threads};
    const int status = epi_run(&opt);
    if (status != EPI_OK) {
        std::fprintf(stderr, "epi %s: %s: %s\n", command.c_str(), epi_status_string(status), epi_last_error());
    }
    return epi_exit_code(status);
}
