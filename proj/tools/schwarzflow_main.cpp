#include <clocale>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"

#include "schwarzflow/runner.hpp"

namespace {

int run_command(schwarzflow::Command cmd, const std::string& config_path,
                const std::string& out_dir, bool quiet) {
    using namespace schwarzflow;
    try {
        const RunSpec spec = parse_config(config_path, cmd);
        return execute(spec, out_dir, quiet).exit_code;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 64;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    std::setlocale(LC_ALL, "C");

    CLI::App app{"Volume- and area-preserving mean curvature flow of radial graphs in "
                 "Schwarzschild-type spaces"};
    app.set_version_flag("--version", schwarzflow::kToolVersion);
    app.require_subcommand(1);

    struct Args {
        std::string config;
        std::string out;
        bool quiet = false;
    };
    const std::map<std::string, std::pair<schwarzflow::Command, const char*>> commands = {
        {"flow", {schwarzflow::Command::flow, "integrate a flow and record its diagnostics"}},
        {"spectrum",
         {schwarzflow::Command::spectrum, "diagonalize the linearized operator on a surface"}},
        {"geometry", {schwarzflow::Command::geometry, "one-shot geometry report of a surface"}},
        {"sweep",
         {schwarzflow::Command::sweep, "bisect the largest converging mode amplitude"}}};

    std::map<std::string, Args> args;
    for (const auto& [name, info] : commands) {
        CLI::App* sub = app.add_subcommand(name, info.second);
        Args& a = args[name];
        sub->add_option("--config", a.config, "JSON run configuration")->required();
        sub->add_option("--out", a.out, "output directory override");
        sub->add_flag("--quiet", a.quiet, "suppress progress output");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 64;
    }

    for (const auto& [name, info] : commands)
        if (app.got_subcommand(name))
            return run_command(info.first, args[name].config, args[name].out, args[name].quiet);
    return 64;
}
