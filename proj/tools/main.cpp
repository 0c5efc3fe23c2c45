#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "harness.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Integral means spectrum of whole-plane SLE: exponents, PDE checks and Monte Carlo"};
    app.require_subcommand(1);
    std::string config_path;
    wpsle::cli::RunOptions opts;
    std::string out_dir = ".";
    std::string resume;
    std::uint64_t seed = 0;
    unsigned threads = 0;

    for (const auto& [name, cmd] : wpsle::cli::commands()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "key=value config file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "master seed override");
        sub->add_option("--resume", resume, "checkpoint to resume from or read");
        sub->add_option("--threads", threads, "worker count override")->check(CLI::PositiveNumber);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "wpsle: status=error code=ConfigError exit=2 message=" << wpsle::cli::quoted(e.what()) << "\n";
        return wpsle::cli::ConfigFailure;
    }
    const auto* sub = app.get_subcommands().front();
    opts.out_dir = out_dir;
    if (sub->count("--seed")) opts.seed = seed;
    if (sub->count("--resume")) opts.resume = resume;
    if (sub->count("--threads")) opts.threads = threads;

    wpsle::cli::Config cfg;
    try {
        cfg = wpsle::cli::Config::load(config_path);
    } catch (const wpsle::Error& e) {
        std::cerr << "wpsle: status=error code=" << wpsle::to_string(e.code()) << " exit=2 command=" << sub->get_name()
                  << " message=" << wpsle::cli::quoted(e.what()) << "\n";
        return wpsle::cli::ConfigFailure;
    }
    return wpsle::cli::run_command(sub->get_name(), cfg, opts, std::cerr);
}
