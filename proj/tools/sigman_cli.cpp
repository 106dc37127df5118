#include "sigman/config.hpp"
#include "sigman/error.hpp"
#include "sigman/presets.hpp"
#include "sigman/runner.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <iostream>
#include <optional>

int main(int argc, char** argv) {
    CLI::App app{"sigma-n protocol simulator"};
    std::string config_path, preset_name, out_dir;
    std::optional<unsigned> workers;
    std::optional<std::uint64_t> seed;
    bool list = false;

    auto* cfg_opt = app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    auto* preset_opt = app.add_option("--preset", preset_name, "bundled preset name");
    cfg_opt->excludes(preset_opt);
    app.add_option("--out", out_dir, "output directory (overrides output_dir)");
    app.add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "master seed (overrides master_seed)");
    app.add_flag("--list-presets", list, "print preset names and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? sigman::kExitOk : sigman::kExitUsage;
    }

    if (list) {
        for (const auto& n : sigman::preset_names()) std::cout << n << '\n';
        return sigman::kExitOk;
    }
    if (config_path.empty() && preset_name.empty()) {
        std::cerr << "one of --config or --preset is required\n";
        return sigman::kExitUsage;
    }

    sigman::RunConfig config;
    try {
        config = config_path.empty() ? sigman::preset(preset_name) : sigman::parse_config(config_path);
        if (!out_dir.empty()) config.output_dir = out_dir;
        if (workers) config.workers = *workers;
        if (seed) config.master_seed = *seed;
        config.validate();
    } catch (const sigman::ParameterError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return sigman::kExitConfig;
    }

    try {
        const auto report = sigman::run_scenario(config, std::cout);
        fmt::print("wrote {} files to {} ({:.2f} s)\n", report.outputs.size() + 1, config.output_dir,
                   report.wall_time_s);
        return report.exit_code;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << '\n';
        return sigman::kExitRuntime;
    }
}
