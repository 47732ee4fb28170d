#include "optexec/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Optimal execution under a regime-switching limit order book"};

    optexec::CliOptions options;
    std::string out_dir;
    std::uint64_t seed = 0;
    app.add_option("--command", options.command, "solve | boundary | simulate | oracle-compare | sweep")
        ->required()
        ->check(CLI::IsMember({"solve", "boundary", "simulate", "oracle-compare", "sweep"}));
    app.add_option("--config", options.config_path, "JSON run configuration")->required();
    auto* out_opt = app.add_option("--out", out_dir, "output directory (overrides output.dir)");
    auto* seed_opt = app.add_option("--seed", seed, "master seed (overrides seed)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : optexec::kExitConfig;
    }
    if (*out_opt) options.out_dir = out_dir;
    if (*seed_opt) options.seed = seed;
    return optexec::run(options, std::cout, std::cerr);
}
