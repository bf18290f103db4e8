#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "darkcool/error.hpp"
#include "darkcool/scan.hpp"

namespace {

bool is_config_error(darkcool::ErrorCode code)
{
    using darkcool::ErrorCode;
    return code == ErrorCode::InvalidArgument || code == ErrorCode::UnknownKey || code == ErrorCode::RangeInvalid ||
           code == ErrorCode::AxisLimit || code == ErrorCode::DimensionCap;
}

std::string read_file(const std::string& path)
{
    std::ifstream f(path);
    if (!f) throw darkcool::Error(darkcool::ErrorCode::InvalidArgument, "cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"darkcool: double-dark-state laser cooling simulator"};
    app.require_subcommand(1);

    std::string config_path, out_path, preset;
    int threads = 0;
    unsigned long long seed = 0;
    for (const auto& name : darkcool::command_names()) {
        CLI::App* sub = app.add_subcommand(name, "run the " + name + " operation");
        sub->add_option("--config", config_path, "config file (key = value lines)");
        sub->add_option("--out", out_path, "CSV output path; a .meta.json sidecar is written next to it");
        sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--seed", seed, "master seed");
        sub->add_option("--preset", preset, "figure preset")->check(CLI::IsMember(darkcool::preset_names()));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    const std::string command = app.get_subcommands().front()->get_name();
    auto* sub = app.get_subcommands().front();

    darkcool::ScanConfig cfg;
    try {
        std::string text = config_path.empty() ? std::string() : read_file(config_path);
        if (!preset.empty()) text += "\npreset = " + preset + "\n";
        cfg = darkcool::parse_config(text);
        if (sub->count("--threads")) cfg.threads = threads;
        if (sub->count("--seed")) cfg.seed = seed;
        if (!out_path.empty()) cfg.output = out_path;
        cfg.validate();
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    }

    try {
        const darkcool::RunResult result = darkcool::run_command(command, cfg);
        if (cfg.output.empty())
            darkcool::write_csv(result.table, std::cout);
        else
            darkcool::write_outputs(cfg, command, result, cfg.output);
        for (const auto& note : result.notes) std::cerr << "note: " << note << '\n';
        if (result.points > 0 && result.failed_points == result.points) {
            std::cerr << "all points failed\n";
            return 2;
        }
        return 0;
    } catch (const darkcool::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return is_config_error(e.code()) ? 1 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
