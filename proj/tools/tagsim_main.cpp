// tagsim: reproducible experiments for the tag-centralized UWB localization
// and energy-neutrality toolkit. One binary, four subcommands:
//   range     one DS-TWR ranging round        -> measurements.csv
//   locate    Monte-Carlo localization sweep  -> fixes.csv, error_cdf.csv, ...
//   energy    power-path / neutrality study   -> soc_timeline.csv, ledger.json, ...
//   classify  asset-location classification   -> classification_report_n*.json
//
// Exit codes: 0 success, 2 configuration error, 3 runtime error.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tagsim/config.hpp"
#include "tagsim/io_util.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    bool validate_only = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "Scenario configuration file (JSON)")
        ->required();
    cmd->add_option("--out", args.out_dir, "Output directory (created if missing)");
    cmd->add_option("--seed", args.seed, "Override the configured RNG seed");
    cmd->add_flag("--validate-only", args.validate_only,
                  "Validate the configuration and exit without running");
}

int run(const std::string& name, const CommonArgs& args,
        void (*fn)(const tagsim::config::ScenarioConfig&, const std::filesystem::path&)) {
    using tagsim::LogLevel;
    try {
        const tagsim::config::ScenarioConfig cfg =
            tagsim::config::load_config(args.config_path, args.seed);
        if (args.validate_only) {
            std::cout << "config OK\n";
            return 0;
        }
        fn(cfg, args.out_dir);
        tagsim::log_message(LogLevel::Info, name + ": done");
        return 0;
    } catch (const tagsim::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const tagsim::InvalidInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const tagsim::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tag-centralized UWB localization and energy-neutrality toolkit"};
    app.require_subcommand(1);

    CommonArgs range_args, locate_args, energy_args, classify_args;
    CLI::App* range = app.add_subcommand("range", "Run one DS-TWR ranging round");
    add_common(range, range_args);
    CLI::App* locate = app.add_subcommand("locate", "Monte-Carlo localization accuracy sweep");
    add_common(locate, locate_args);
    CLI::App* energy = app.add_subcommand("energy", "Energy-neutrality simulation");
    add_common(energy, energy_args);
    CLI::App* classify = app.add_subcommand("classify", "Asset-location classification");
    add_common(classify, classify_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    if (range->parsed()) return run("range", range_args, tagsim::config::cmd_range);
    if (locate->parsed()) return run("locate", locate_args, tagsim::config::cmd_locate);
    if (energy->parsed()) return run("energy", energy_args, tagsim::config::cmd_energy);
    if (classify->parsed()) return run("classify", classify_args, tagsim::config::cmd_classify);
    return 2;
}
