// Command-line front end: run, radial, validate.

#include "chb/chb.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;

chb::Parameters load_checked(const std::string& path) {
    chb::Parameters p = chb::load_config(path);
    const auto report = chb::validate_config(p);
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
    if (!report.ok()) {
        for (const auto& e : report.errors) std::cerr << "error: " << e << '\n';
        throw chb::ConfigError(path + ": invalid configuration");
    }
    return p;
}

int cmd_run(const std::string& config, const std::filesystem::path& out, bool quiet) {
    const auto params = load_checked(config);
    chb::RunOptions opt;
    opt.out_dir = out;
    if (!quiet)
        opt.on_step = [&](std::size_t step, const chb::DiagnosticsRecord& r, const chb::StepReport&) {
            if (step % params.output_every != 0) return;
            std::printf("step %6zu  t %.4f  mass %.10f  energy %.8f  mean_radius %.6f  iters %zu/%zu/%zu\n", step, r.t,
                        r.mass, r.energy, r.mean_radius, r.flow_iters, r.vi_iters, r.nutrient_iters);
            std::fflush(stdout);
        };
    const auto res = chb::run(params, opt);
    std::printf("completed %zu steps, output in %s\n", res.steps, out.string().c_str());
    return 0;
}

int cmd_radial(const std::string& config, const std::filesystem::path& out) {
    const auto params = load_checked(config);
    const auto series = chb::evolve_radius(params.radius, params, params.radial_dt, params.t_end, params.radial_domain,
                                           params.radial_grid);
    std::filesystem::create_directories(out);
    chb::write_radial_csv(series, out / "radial.csv");
    const auto& last = series.samples.back();
    std::printf("%s at t = %.6g with R = %.10g\n", chb::status_name(series.status), last.t, last.R);
    return 0;
}

int cmd_validate(const std::string& config) {
    load_checked(config);
    std::printf("%s: ok\n", config.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cahn-Hilliard-Brinkman tumour growth simulator"};
    app.require_subcommand(1);

    std::string config;
    std::string out;
    bool quiet = false;

    auto* run = app.add_subcommand("run", "time-step a configuration and write fields and diagnostics");
    run->add_option("--config", config, "TOML configuration")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out, "output directory")->required();
    run->add_flag("--quiet", quiet, "no progress lines");

    auto* radial = app.add_subcommand("radial", "sharp-interface radial growth curve as radial.csv");
    radial->add_option("--config", config, "TOML configuration")->required()->check(CLI::ExistingFile);
    radial->add_option("--out", out, "output directory")->required();

    auto* validate = app.add_subcommand("validate", "check a configuration without running it");
    validate->add_option("--config", config, "TOML configuration")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*run) return cmd_run(config, out, quiet);
        if (*radial) return cmd_radial(config, out);
        return cmd_validate(config);
    } catch (const chb::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const chb::SolverError& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return kExitSolver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
