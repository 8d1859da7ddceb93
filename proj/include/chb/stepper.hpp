#pragma once

#include "chb/cahn_hilliard.hpp"
#include "chb/diagnostics.hpp"
#include "chb/flow.hpp"
#include "chb/nutrient.hpp"
#include "chb/params.hpp"
#include "chb/state.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

namespace chb {

inline constexpr Point kDomainLo{-3.0, -3.0};
inline constexpr Point kDomainHi{3.0, 3.0};

/// Interface radius R(theta) of an initial profile.
inline double profile_radius(Profile profile, double theta, double disk_radius = 0.5) {
    using std::cos;
    constexpr double pi = std::numbers::pi;
    switch (profile) {
    case Profile::Disk: return disk_radius;
    case Profile::R: return 0.5 + cos(2.0 * theta) / 40.0;
    case Profile::R1: return 0.5 + cos(6.0 * theta) / 40.0;
    case Profile::R2: return 0.5 + cos(12.0 * theta - pi / 9.0) / 40.0;
    case Profile::R3:
        return 0.5 + 1e-3 * (cos(2.0 * theta) + 1.25 * cos(6.0 * theta - pi / 12.0) + 0.75 * cos(8.0 * theta - pi / 7.0));
    case Profile::R4:
        return 0.5 +
               1e-3 * (cos(12.0 * theta) + 1.25 * cos(7.0 * theta - pi / 12.0) + 0.75 * cos(8.0 * theta - pi / 7.0));
    }
    return disk_radius;
}

/// Diffuse profile across the signed distance d = |x| - R(theta):
/// +1 for d <= -pi eps / 2, -1 for d >= pi eps / 2, -sin(d / eps) between.
inline double diffuse_profile(double d, double epsilon) {
    const double w = 0.5 * std::numbers::pi * epsilon;
    if (d <= -w) return 1.0;
    if (d >= w) return -1.0;
    return -std::sin(d / epsilon);
}

inline double initial_phase_value(const Point& x, Profile profile, double epsilon, double disk_radius = 0.5) {
    const double theta = std::atan2(x.y, x.x);
    return diffuse_profile(std::hypot(x.x, x.y) - profile_radius(profile, theta, disk_radius), epsilon);
}

inline FeFunction initial_phase_field(const Mesh& mesh, Profile profile, double epsilon, double disk_radius = 0.5) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("initial_phase_field: epsilon must be positive");
    return interpolate_nodal([&](const Point& x) { return initial_phase_value(x, profile, epsilon, disk_radius); },
                             mesh);
}

/// t = 0, interpolated phase field, mu = 0, sigma = sigma_B, v = 0, p = 0.
inline State init_state(const Parameters& params, const Mesh& mesh) {
    State s;
    s.phi = initial_phase_field(mesh, params.profile, params.epsilon, params.radius);
    s.mu = FeFunction::p1(mesh);
    s.sigma = FeFunction::p1(mesh, params.sigma_B);
    s.v = FeFunction::p2_vector(mesh);
    s.p = FeFunction::p1(mesh);
    return s;
}

/// Uniform mesh of the configured resolution, band-refined around the
/// initial interface when refine_levels > 0.
inline Mesh build_mesh(const Parameters& params) {
    Mesh mesh = build_uniform_mesh(params.mesh_n, kDomainLo, kDomainHi, params.bc);
    if (params.refine_levels == 0) return mesh;
    const auto phi = initial_phase_field(mesh, params.profile, params.epsilon, params.radius);
    return refine_interface_band(mesh, phi.coeffs, params.refine_levels);
}

struct ValidationReport {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;
    bool ok() const { return errors.empty(); }
};

inline ValidationReport validate_config(const Parameters& p) {
    ValidationReport r;
    const auto need = [&](bool cond, const std::string& msg) {
        if (!cond) r.errors.push_back(msg);
    };
    need(p.epsilon > 0.0, "epsilon must be positive");
    need(p.beta > 0.0, "beta must be positive");
    need(p.D > 0.0, "D must be positive");
    need(p.dt > 0.0, "dt must be positive");
    need(p.t_end >= 0.0, "t_end must be non-negative");
    need(p.P >= 0.0 && p.A >= 0.0 && p.C >= 0.0, "P, A and C must be non-negative");
    need(p.nu >= 0.0 && p.chi >= 0.0 && p.lambda_bulk >= 0.0, "nu, chi and lambda_bulk must be non-negative");
    need(p.eta_minus >= 0.0 && p.eta_plus >= 0.0, "eta_minus and eta_plus must be non-negative");
    need(p.sigma_B >= 0.0, "sigma_B must be non-negative");
    need(p.mobility.m0 > 0.0, "mobility_m0 must be positive");
    need(p.radius > 0.0, "radius must be positive");
    need(p.mesh_n >= 1, "mesh_n must be at least 1");
    need(p.output_every >= 1, "output_every must be at least 1");
    need(p.radius_samples >= 64, "radius_samples must be at least 64");
    need(p.vi_tol > 0.0 && p.gmres_tol > 0.0 && p.cg_tol > 0.0, "solver tolerances must be positive");
    need(p.gmres_restart >= 1 && p.gmres_maxit >= 1 && p.vi_maxit >= 1, "solver iteration limits must be positive");
    need(p.radial_dt > 0.0 && p.radial_domain > 0.0 && p.radial_grid >= 64,
         "radial_dt and radial_domain must be positive and radial_grid at least 64");
    if (p.bc.all_no_slip() && p.alpha != 0.0 && (p.P * p.sigma_B != 0.0 || p.A != 0.0))
        r.errors.push_back("no_slip on every side requires a divergence source that integrates to zero, but alpha (P "
                           "sigma - A) does not vanish");

    if (p.mobility.law == MobilityKind::Law::ScaledConstant && p.rho_S != p.alpha)
        r.warnings.push_back("scaled mobility is meant to be used with rho_S = alpha");
    if (p.mesh_n >= 1 && p.epsilon > 0.0) {
        const double h = (kDomainHi.x - kDomainLo.x) / static_cast<double>(p.mesh_n) /
                         std::pow(2.0, 0.5 * static_cast<double>(p.refine_levels));
        const double across = std::numbers::pi * p.epsilon / h;
        if (across < 4.0) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "interface under-resolved: pi eps / h = %.3g < 4 elements across", across);
            r.warnings.emplace_back(buf);
        }
    }
    return r;
}

/// Reports of the three stages of one advance.
struct StepReport {
    SolveReport flow;
    SolveReport cahn_hilliard;
    SolveReport nutrient;
    /// (B v - g, 1) of the flow solve.
    double divergence_defect = 0.0;
};

struct AdvanceControls {
    /// Skip the flow solve and convect with v = 0.
    bool zero_velocity = false;
};

/// One time step: flow from the old fields, then the Cahn-Hilliard step
/// convected by the new velocity, then the nutrient for the new phase field.
/// Failures are rethrown as SolverError naming the stage.
inline State advance(const State& s, const Parameters& params, const Discretization& disc, StepReport* report = nullptr,
                     AdvanceControls controls = {}) {
    const Mesh& mesh = disc.mesh();
    State n;
    n.t = s.t + params.dt;
    StepReport rep;

    if (controls.zero_velocity) {
        n.v = FeFunction::p2_vector(mesh);
        n.p = FeFunction::p1(mesh);
        rep.flow.converged = true;
    } else {
        const auto eta = viscosity_field(mesh, s.phi, params.eta_minus, params.eta_plus);
        Vector fv = flow_rhs(mesh, s.phi, s.mu, s.sigma, params.chi_phi);
        Vector g = divergence_source(disc.lumped_mass(), s.phi, s.sigma, params.alpha, params.P, params.A);
        const FlowSolution guess{s.v, s.p, {}};
        FlowSolution flow = solve_flow_system(disc, eta, params.lambda_bulk, params.nu, std::move(fv), g,
                                              no_slip_data(mesh), flow_options(params), &guess);
        if (!flow.report.converged)
            throw SolverError("flow stage at t = " + std::to_string(n.t) + ": GMRES did not converge (residual " +
                                  std::to_string(flow.report.final_residual) + ")",
                              flow.report);
        rep.divergence_defect = divergence_identity_defect(disc, flow.v, g);
        n.v = std::move(flow.v);
        n.p = std::move(flow.p);
        rep.flow = std::move(flow.report);
    }

    try {
        auto ch = step_cahn_hilliard(disc, s.phi, s.sigma, n.v, params, params.dt, &s.mu);
        n.phi = std::move(ch.phi);
        n.mu = std::move(ch.mu);
        rep.cahn_hilliard = std::move(ch.report);
    } catch (const SolverError& e) {
        throw SolverError("Cahn-Hilliard stage at t = " + std::to_string(n.t) + ": " + e.what(), e.report());
    }

    auto [sigma, nrep] = solve_nutrient(disc, n.phi, params);
    if (!nrep.converged)
        throw SolverError("nutrient stage at t = " + std::to_string(n.t) + ": CG did not converge (residual " +
                              std::to_string(nrep.final_residual) + ")",
                          nrep);
    n.sigma = std::move(sigma);
    rep.nutrient = std::move(nrep);
    if (report) *report = std::move(rep);
    return n;
}

/// Owns the mesh, its discretization and the current state of one run.
class Simulation {
public:
    explicit Simulation(const Parameters& params) : Simulation(params, build_mesh(params)) {}

    Simulation(const Parameters& params, Mesh mesh)
        : params_(params), disc_(std::make_unique<Discretization>(std::move(mesh))),
          locator_(std::make_unique<PointLocator>(disc_->mesh())), state_(init_state(params_, disc_->mesh())) {}

    const Parameters& params() const { return params_; }
    const Discretization& discretization() const { return *disc_; }
    const Mesh& mesh() const { return disc_->mesh(); }
    const State& state() const { return state_; }
    std::size_t steps_taken() const { return steps_; }
    const StepReport& last_report() const { return last_; }

    const StepReport& step(AdvanceControls controls = {}) {
        state_ = advance(state_, params_, *disc_, &last_, controls);
        ++steps_;
        state_.t = static_cast<double>(steps_) * params_.dt;
        return last_;
    }

    DiagnosticsRecord diagnostics() const {
        IterationCounts it;
        if (steps_ > 0) it = {last_.flow.iterations, last_.cahn_hilliard.iterations, last_.nutrient.iterations};
        return compute_diagnostics(*disc_, *locator_, state_, params_.beta, params_.epsilon, params_.radius_samples, it);
    }

private:
    Parameters params_;
    std::unique_ptr<Discretization> disc_;
    std::unique_ptr<PointLocator> locator_;
    State state_;
    std::size_t steps_ = 0;
    StepReport last_;
};

struct RunOptions {
    /// Directory for fields_NNNNNN.vtk and diagnostics.csv; empty writes
    /// nothing.
    std::filesystem::path out_dir;
    /// Keep the states at output steps in memory.
    bool keep_states = false;
    /// Called after every diagnostics record.
    std::function<void(std::size_t step, const DiagnosticsRecord&, const StepReport&)> on_step;
};

struct RunResult {
    std::vector<DiagnosticsRecord> records;
    std::vector<State> outputs;
    std::vector<std::size_t> output_steps;
    State final_state;
    std::size_t steps = 0;
};

inline std::filesystem::path field_file_name(std::size_t step) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "fields_%06zu.vtk", step);
    return buf;
}

/// Runs [0, t_end] with a diagnostics record per step and field output every
/// output_every steps plus the final step. If a stage fails the last good
/// state and the diagnostics so far are written before the error propagates.
inline RunResult run(const Parameters& params, const RunOptions& opt = {}) {
    const auto check = validate_config(params);
    if (!check.ok()) throw ConfigError(check.errors.front());
    Simulation sim(params);
    RunResult res;
    const bool write = !opt.out_dir.empty();
    if (write) std::filesystem::create_directories(opt.out_dir);
    const std::size_t nsteps = step_count(params);

    const auto output = [&](std::size_t step) {
        if (write) write_vtk(sim.state(), sim.mesh(), opt.out_dir / field_file_name(step));
        if (opt.keep_states) res.outputs.push_back(sim.state());
        res.output_steps.push_back(step);
    };
    const auto flush_csv = [&]() {
        if (write) write_diag_csv(res.records, opt.out_dir / "diagnostics.csv");
    };

    res.records.push_back(sim.diagnostics());
    if (opt.on_step) opt.on_step(0, res.records.back(), sim.last_report());
    output(0);
    for (std::size_t k = 1; k <= nsteps; ++k) {
        try {
            sim.step();
        } catch (...) {
            if (res.output_steps.back() != k - 1) output(k - 1);
            flush_csv();
            throw;
        }
        res.records.push_back(sim.diagnostics());
        if (opt.on_step) opt.on_step(k, res.records.back(), sim.last_report());
        if (k % params.output_every == 0 || k == nsteps) output(k);
    }
    flush_csv();
    res.final_state = sim.state();
    res.steps = nsteps;
    return res;
}

} // namespace chb
