// kpzlab: experiment harness for the conditional KPZ tail laws.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "kpzcond/errors.hpp"
#include "lab/commands.hpp"
#include "lab/config.hpp"
#include "lab/output.hpp"

namespace {

std::string escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        if (ch == '"' || ch == '\\') out += '\\';
        out += ch == '\n' ? ' ' : ch;
    }
    return out;
}

int report(int code, const std::string& kind, const std::string& message) {
    std::cerr << "{\"schema_version\": " << kpzlab::kSchemaVersion << ", \"error\": {\"kind\": \"" << kind
              << "\", \"exit_code\": " << code << ", \"message\": \"" << escape(message) << "\"}}\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kpzlab: finite-L tail ratios, limit laws and samples of the conditional KPZ field"};
    app.require_subcommand(1, 1);

    std::optional<std::string> config_file;
    kpzlab::FlagValues flags;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_file, "JSON config file; flags override its keys");
        sub->add_option("--grid", flags.grid_file, "JSON file with interior taus, xs, hs");
        sub->add_option("--condition", flags.condition, "initial condition")
            ->check(CLI::IsMember({"step", "flat"}));
        sub->add_option("--L", flags.Ls, "comma-separated L values");
        sub->add_option("--nodes", flags.nodes, "quadrature nodes per contour leg");
        sub->add_option("--radius", flags.radius, "leg truncation radius (0 = automatic)");
        sub->add_option("--z-radius", flags.z_radius, "radius of the z circle (> 1)");
        sub->add_option("--mc-samples", flags.mc_samples, "Monte Carlo samples / number of field samples");
        sub->add_option("--seed", flags.seed, "random seed");
        sub->add_option("--out", flags.out, "output path (stdout when omitted)");
        sub->add_option("--format", flags.format, "output format")->check(CLI::IsMember({"csv", "json"}));
        sub->add_flag("--timing", flags.timing, "add wall_time_ms columns (not reproducible)");
    };

    const std::vector<std::pair<const char*, const char*>> commands = {
        {"tw", "Tracy-Widom CDFs, densities and tail asymptotes on an L grid"},
        {"limit", "limit law of the conditional field: contour and Monte Carlo"},
        {"converge", "finite-L one-point ratio against the limit law over an L sweep"},
        {"smalln", "small multi-index terms of the series: vanishing and suppression"},
        {"sample", "samples of the limit field and its vertex process"},
    };
    for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report(kpzlab::kExitValidation, "usage", e.what());
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        const kpzlab::ExperimentConfig cfg = kpzlab::build_config(command, config_file, flags);
        const kpzlab::CommandOutput out = kpzlab::run_command(cfg);
        kpzlab::emit(out.tables, cfg);
        if (out.exit_code == kpzlab::kExitNotMonotone)
            return report(out.exit_code, "convergence", "abs_gap increases along the sweep beyond est_error slack");
        return out.exit_code;
    } catch (const kpzlab::ConfigError& e) {
        return report(kpzlab::kExitValidation, "validation", e.what());
    } catch (const kpzcond::Error& e) {
        const bool validation = kpzcond::is_validation_error(e.code());
        return report(validation ? kpzlab::kExitValidation : kpzlab::kExitNumerical,
                      validation ? "validation" : "numerical", e.what());
    } catch (const std::exception& e) {
        return report(kpzlab::kExitNumerical, "internal", e.what());
    }
}
