// levytip: batch driver for the nonlocal Fokker-Planck experiments.
//
//   levytip run <config|preset> [--coarse|--paper] [--output DIR] [--workers N]
//   levytip validate <config|preset>
//   levytip presets list
//   levytip presets show <name>
//   levytip export <snapshot.nfpe> --csv [-o FILE]

#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "levytip/config.hpp"
#include "levytip/experiments.hpp"
#include "levytip/io.hpp"

namespace {

using namespace levytip;
using namespace levytip::cli;

RunConfig resolve(const std::string& source) {
    if (std::filesystem::exists(source)) return load_config(source);
    if (const Preset* preset = find_preset(source)) return preset->config;
    throw ConfigError({"'" + source + "' is neither a readable file nor a preset name (see 'presets list')"});
}

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_pattern("[%H:%M:%S] %^%l%$ %v");

    CLI::App app{"Nonlocal Fokker-Planck solver and tipping experiments for the MeKS network"};
    app.require_subcommand(1);

    std::string source;
    bool coarse = false;
    bool paper = false;
    std::string output;
    int workers = 0;
    auto* run = app.add_subcommand("run", "run an experiment from a config file or preset name");
    run->add_option("config", source, "config file or preset name")->required();
    auto* coarse_flag = run->add_flag("--coarse", coarse, "desk-scale variant (I=25, shortened T)");
    run->add_flag("--paper", paper, "full variant (I=100, T=100)")->excludes(coarse_flag);
    run->add_option("-o,--output", output, "output directory (overrides experiment.output)");
    run->add_option("-w,--workers", workers, "worker threads (overrides LEVYTIP_WORKERS)")->check(CLI::PositiveNumber);

    std::string validate_source;
    auto* validate_cmd = app.add_subcommand("validate", "parse and validate a config without running it");
    validate_cmd->add_option("config", validate_source, "config file or preset name")->required();

    auto* presets_cmd = app.add_subcommand("presets", "figure presets");
    presets_cmd->require_subcommand(1);
    auto* list_cmd = presets_cmd->add_subcommand("list", "list preset names");
    std::string show_name;
    auto* show_cmd = presets_cmd->add_subcommand("show", "print a preset as a config file");
    show_cmd->add_option("name", show_name)->required();

    std::string snapshot_file;
    bool as_csv = false;
    std::string export_output;
    auto* export_cmd = app.add_subcommand("export", "convert a binary snapshot");
    export_cmd->add_option("snapshot", snapshot_file, "snapshot file (.nfpe)")->required()->check(CLI::ExistingFile);
    export_cmd->add_flag("--csv", as_csv, "write i,j,v,w,k,s,P rows")->required();
    export_cmd->add_option("-o,--output", export_output, "output file (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            RunConfig config = resolve(source);
            apply_variant(config, coarse ? Variant::Coarse : paper ? Variant::Paper : Variant::AsWritten);
            RunEnvironment env;
            if (!output.empty()) env.output = output;
            if (workers > 0) env.workers = workers;
            for (int q = 0; q < argc; ++q) env.command_line += (q ? " " : "") + std::string(argv[q]);
            const RunReport report = run_experiment(config, env);
            spdlog::info("{}: {}", report.output.string(), report.summary);
            return report.exit_code;
        }
        if (*validate_cmd) {
            const RunConfig config = resolve(validate_source);
            std::cout << "ok: " << to_string(config.kind) << '\n';
            return 0;
        }
        if (*list_cmd) {
            for (const auto& p : presets()) std::cout << p.name << "\t" << p.description << '\n';
            return 0;
        }
        if (*show_cmd) {
            const Preset* p = find_preset(show_name);
            if (p == nullptr) {
                std::cerr << "unknown preset '" << show_name << "'\n";
                return 2;
            }
            std::cout << serialize_config(p->config);
            return 0;
        }
        if (*export_cmd) {
            const io::Snapshot snap = io::read_snapshot(std::filesystem::path(snapshot_file));
            if (export_output.empty()) {
                io::write_snapshot_csv(std::cout, snap.field, snap.domain);
            } else {
                std::ofstream out(export_output);
                if (!out) throw std::runtime_error("cannot write " + export_output);
                io::write_snapshot_csv(out, snap.field, snap.domain);
            }
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
