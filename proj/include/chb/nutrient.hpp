#pragma once

#include "chb/discretization.hpp"
#include "chb/params.hpp"
#include "chb/solvers.hpp"

#include <functional>
#include <string>
#include <utility>

namespace chb {

/// Quasi-static nutrient:
///   D (grad sigma, grad xi) + C/2 (sigma (phi + 1), xi)_h = D chi (grad phi, grad xi)
/// with sigma prescribed on the boundary by `boundary_value`. Boundary rows
/// are eliminated so the reduced system stays SPD; solved by CG.
inline std::pair<FeFunction, SolveReport> solve_nutrient(const Discretization& disc, const FeFunction& phi,
                                                         const Parameters& params,
                                                         const std::function<double(const Point&)>& boundary_value) {
    const Mesh& mesh = disc.mesh();
    phi.require(mesh, "solve_nutrient");
    if (!(params.D > 0.0)) throw std::invalid_argument("solve_nutrient: D must be positive");
    if (params.C < 0.0 || params.chi < 0.0) throw std::invalid_argument("solve_nutrient: C and chi must be non-negative");
    const std::size_t n = mesh.num_p1();
    const auto& mass = disc.lumped_mass();
    CsrMatrix k = disc.stiffness().scaled(params.D);
    Vector rhs(n, 0.0);
    if (params.chi != 0.0) {
        const Vector kphi = disc.stiffness() * std::span<const double>(phi.coeffs);
        for (std::size_t i = 0; i < n; ++i) rhs[i] = params.D * params.chi * kphi[i];
    }
    {
        auto vals = k.values();
        const auto ptr = k.row_ptr();
        const auto idx = k.col_idx();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t q = ptr[i]; q < ptr[i + 1]; ++q)
                if (idx[q] == i) vals[q] += 0.5 * params.C * mass[i] * (phi.coeffs[i] + 1.0);
    }
    const auto on_boundary = mesh.boundary_vertex_mask();
    std::vector<std::size_t> dofs;
    Vector vals;
    for (std::size_t i = 0; i < n; ++i)
        if (on_boundary[i]) {
            dofs.push_back(i);
            vals.push_back(boundary_value(mesh.vertices[i]));
        }
    k.eliminate_dofs(dofs, vals, rhs);
    FeFunction sigma = FeFunction::p1(mesh);
    // boundary values as the initial guess
    for (std::size_t q = 0; q < dofs.size(); ++q) sigma.coeffs[dofs[q]] = vals[q];
    auto rep = cg_solve(k, rhs, sigma.coeffs, params.cg_tol, 20 * n + 100);
    for (std::size_t q = 0; q < dofs.size(); ++q) sigma.coeffs[dofs[q]] = vals[q];
    return {std::move(sigma), std::move(rep)};
}

inline std::pair<FeFunction, SolveReport> solve_nutrient(const Discretization& disc, const FeFunction& phi,
                                                         const Parameters& params) {
    const double sb = params.sigma_B;
    return solve_nutrient(disc, phi, params, [sb](const Point&) { return sb; });
}

inline std::pair<FeFunction, SolveReport> solve_nutrient(const Mesh& mesh, const FeFunction& phi,
                                                         const Parameters& params) {
    const Discretization disc(mesh);
    return solve_nutrient(disc, phi, params);
}

} // namespace chb
