#pragma once

#include "chb/discretization.hpp"
#include "chb/params.hpp"
#include "chb/solvers.hpp"

#include <algorithm>
#include <optional>
#include <stdexcept>

namespace chb {

/// Mobility law value at phi. Below -1 the argument is clamped to -1; above
/// +1 it is not.
inline double mobility_eval(double phi, const MobilityKind& kind, double epsilon) {
    switch (kind.law) {
    case MobilityKind::Law::Constant: return kind.m0;
    case MobilityKind::Law::ScaledConstant:
        if (!(epsilon > 0.0)) throw std::invalid_argument("mobility_eval: epsilon must be positive");
        return epsilon * kind.m0;
    case MobilityKind::Law::OneSidedDegenerate: {
        const double s = 1.0 + std::max(phi, -1.0);
        return kind.m0 * 0.5 * s * s;
    }
    }
    return 0.0;
}

/// Elementwise mobility from the vertex mean of phi, floored.
inline ElementField mobility_field(const Mesh& mesh, const FeFunction& phi, const MobilityKind& kind, double epsilon) {
    ElementField m = element_mean(mesh, phi.coeffs);
    for (double& v : m) v = std::max(mobility_eval(v, kind, epsilon), kMobilityFloor);
    return m;
}

/// Lumped proliferation source 1/2 (rho_S - alpha phi)(P sigma - A)(phi + 1)
/// tested with P1 functions.
inline Vector ch_source(std::span<const double> lumped_mass, const FeFunction& phi, const FeFunction& sigma,
                        double rho_S, double alpha, double P, double A) {
    Vector s(lumped_mass.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double f = phi.coeffs[i];
        s[i] = lumped_mass[i] * 0.5 * (rho_S - alpha * f) * (P * sigma.coeffs[i] - A) * (f + 1.0);
    }
    return s;
}

struct ChStepResult {
    FeFunction phi;
    FeFunction mu;
    SolveReport report;
};

/// The coupled phase-field / chemical-potential system of one time step:
///
///   M/dt phi + K_m mu = M/dt phi_old - (v . grad phi_old, .) + source
///   r = beta eps K phi - M mu - M (beta/eps phi_old + chi_phi sigma_old)
///
/// with r complementary to the obstacle constraint |phi| <= 1. Rows are
/// scaled by dt/M_i and 1/M_i when residuals are measured, so the tolerance
/// is in units of phi and mu.
inline CoupledBlockSystem cahn_hilliard_system(const Discretization& disc, const FeFunction& phi_old,
                                               const FeFunction& sigma_old, const FeFunction& v_new,
                                               const Parameters& params, double dt) {
    const Mesh& mesh = disc.mesh();
    const auto& mass = disc.lumped_mass();
    const std::size_t n = mesh.num_p1();
    CoupledBlockSystem s;
    Vector d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = mass[i] / dt;
    s.a11 = CsrMatrix::diagonal(d);
    s.a12 = disc.p1().stiffness(mobility_field(mesh, phi_old, params.mobility, params.epsilon));
    s.a21 = disc.stiffness().scaled(params.beta * params.epsilon);
    for (std::size_t i = 0; i < n; ++i) d[i] = -mass[i];
    s.a22 = CsrMatrix::diagonal(d);
    const Vector conv = assemble_convection_load(mesh, v_new, phi_old);
    const Vector src = ch_source(mass, phi_old, sigma_old, params.rho_S, params.alpha, params.P, params.A);
    s.f.resize(n);
    s.g.resize(n);
    s.scale1.resize(n);
    s.scale2.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        s.f[i] = mass[i] / dt * phi_old.coeffs[i] - conv[i] + src[i];
        s.g[i] = mass[i] * (params.beta / params.epsilon * phi_old.coeffs[i] + params.chi_phi * sigma_old.coeffs[i]);
        s.scale1[i] = dt / mass[i];
        s.scale2[i] = 1.0 / mass[i];
    }
    return s;
}

/// One time step of the obstacle Cahn-Hilliard variational inequality with
/// the concave part of the potential taken explicitly. `mu_guess` warm
/// starts the chemical potential (the previous mu in a time loop).
/// Throws SolverError if the constrained solve does not converge.
inline ChStepResult step_cahn_hilliard(const Discretization& disc, const FeFunction& phi_old,
                                       const FeFunction& sigma_old, const FeFunction& v_new, const Parameters& params,
                                       double dt, const FeFunction* mu_guess = nullptr) {
    if (!(dt > 0.0)) throw std::invalid_argument("step_cahn_hilliard: dt must be positive");
    const Mesh& mesh = disc.mesh();
    phi_old.require(mesh, "step_cahn_hilliard(phi)");
    sigma_old.require(mesh, "step_cahn_hilliard(sigma)");
    v_new.require(mesh, "step_cahn_hilliard(v)");
    const auto sys = cahn_hilliard_system(disc, phi_old, sigma_old, v_new, params, dt);
    ChStepResult r{phi_old, mu_guess ? *mu_guess : FeFunction::p1(mesh), {}};
    // Gauss-Seidel settles the active set; the active-set pass then solves the
    // equality rows on that set to linear-solver accuracy.
    const auto gs = projected_block_gs(sys, -1.0, 1.0, r.phi.coeffs, r.mu.coeffs, {params.vi_tol, params.vi_maxit});
    ActiveSetOptions opt;
    opt.tol = params.vi_tol;
    opt.gs_fallback_maxit = params.vi_maxit;
    r.report = active_set_block_solve(sys, -1.0, 1.0, r.phi.coeffs, r.mu.coeffs, opt);
    r.report.iterations += gs.iterations;
    if (!r.report.converged)
        throw SolverError("step_cahn_hilliard: variational inequality did not converge (residual " +
                              std::to_string(r.report.final_residual) + ")",
                          r.report);
    return r;
}

inline ChStepResult step_cahn_hilliard(const Mesh& mesh, const FeFunction& phi_old, const FeFunction& sigma_old,
                                       const FeFunction& v_new, const Parameters& params, double dt) {
    const Discretization disc(mesh);
    return step_cahn_hilliard(disc, phi_old, sigma_old, v_new, params, dt);
}

} // namespace chb
