#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include <noisy/parallel.hpp>

#include "experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Annealed transfer operators, linear response and control for noisy interval maps"};
    app.require_subcommand(1, 1);

    std::string config;
    std::string out_dir;
    unsigned threads = 0;
    std::uint64_t seed = 0;

    for (const std::string& name : noisy::cli::commands()) {
        CLI::App* sub = app.add_subcommand(name, "run the " + name + " pipeline");
        sub->add_option("--config", config, "experiment JSON file")->required();
        sub->add_option("--out", out_dir, "output directory (overrides the config's \"output\")");
        sub->add_option("--threads", threads, "cap on worker threads (0 = hardware default)");
        sub->add_option("--seed", seed, "single simulation seed (overrides simulate.seeds)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(noisy::cli::ExitCode::ConfigError);
    }

    CLI::App* chosen = app.get_subcommands().front();
    noisy::parallel::set_thread_limit(threads);
    std::optional<std::filesystem::path> out;
    if (chosen->count("--out")) out = out_dir;
    std::optional<std::uint64_t> seed_override;
    if (chosen->count("--seed")) seed_override = seed;
    return noisy::cli::run_guarded(chosen->get_name(), config, out, seed_override, std::cerr);
}
