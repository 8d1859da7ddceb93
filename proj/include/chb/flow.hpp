#pragma once

#include "chb/discretization.hpp"
#include "chb/params.hpp"
#include "chb/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <vector>

namespace chb {

struct FlowSolution {
    FeFunction v;
    FeFunction p;
    SolveReport report;
};

/// Elementwise viscosity, linear in the clamped vertex mean of phi.
inline ElementField viscosity_field(const Mesh& mesh, const FeFunction& phi, double eta_minus, double eta_plus) {
    phi.require(mesh, "viscosity_field");
    const double em = std::max(eta_minus, kViscosityFloor);
    const double ep = std::max(eta_plus, kViscosityFloor);
    ElementField eta = element_mean(mesh, phi.coeffs);
    for (double& e : eta) {
        const double m = std::clamp(e, -1.0, 1.0);
        e = em * 0.5 * (1.0 - m) + ep * 0.5 * (1.0 + m);
    }
    return eta;
}

/// Capillary and chemotactic forcing ((mu + chi_phi sigma) grad phi, xi) on
/// the P2 vector space.
inline Vector flow_rhs(const Mesh& mesh, const FeFunction& phi, const FeFunction& mu, const FeFunction& sigma,
                       double chi_phi) {
    phi.require(mesh, "flow_rhs(phi)");
    mu.require(mesh, "flow_rhs(mu)");
    sigma.require(mesh, "flow_rhs(sigma)");
    const auto& rule = quad::degree5();
    Vector load(2 * mesh.num_p2(), 0.0);
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        const auto g = element_geometry(mesh, t);
        const auto& tv = mesh.triangles[t];
        Grad gphi{0.0, 0.0};
        std::array<double, 3> w{};
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t c = 0; c < 2; ++c) gphi[c] += phi.coeffs[tv[i]] * g.grad_lambda[i][c];
            w[i] = mu.coeffs[tv[i]] + chi_phi * sigma.coeffs[tv[i]];
        }
        if (gphi[0] == 0.0 && gphi[1] == 0.0) continue;
        const auto dofs = mesh.p2_dofs(t);
        for (std::size_t q = 0; q < rule.weights.size(); ++q) {
            const auto& l = rule.points[q];
            const double wq = rule.weights[q] * g.area * (l[0] * w[0] + l[1] * w[1] + l[2] * w[2]);
            const auto n = p2::values(l);
            for (std::size_t i = 0; i < 6; ++i) {
                load[2 * dofs[i]] += wq * gphi[0] * n[i];
                load[2 * dofs[i] + 1] += wq * gphi[1] * n[i];
            }
        }
    }
    return load;
}

/// Lumped divergence source 1/2 alpha (P sigma - A)(phi + 1), tested with
/// P1 functions.
inline Vector divergence_source(std::span<const double> lumped_mass, const FeFunction& phi, const FeFunction& sigma,
                                double alpha, double P, double A) {
    Vector s(lumped_mass.size());
    for (std::size_t i = 0; i < s.size(); ++i)
        s[i] = lumped_mass[i] * 0.5 * alpha * (P * sigma.coeffs[i] - A) * (phi.coeffs[i] + 1.0);
    return s;
}

inline Vector divergence_source(const Mesh& mesh, const FeFunction& phi, const FeFunction& sigma, double alpha, double P,
                                double A) {
    phi.require(mesh, "divergence_source(phi)");
    sigma.require(mesh, "divergence_source(sigma)");
    return divergence_source(lumped_mass_vector(mesh), phi, sigma, alpha, P, A);
}

/// Outward flux of a P2 velocity through the boundary, Simpson's rule per
/// boundary edge (exact for quadratics).
inline double boundary_outflow(const Mesh& mesh, const FeFunction& v) {
    double flux = 0.0;
    const std::size_t nv = mesh.num_vertices();
    for (const auto& be : mesh.boundary_edges) {
        const Edge& e = mesh.edges[be.edge];
        const Point& a = mesh.vertices[e.a];
        const Point& b = mesh.vertices[e.b];
        const double len = std::hypot(b.x - a.x, b.y - a.y);
        Point n;
        switch (be.side) {
        case Side::Left: n = {-1, 0}; break;
        case Side::Right: n = {1, 0}; break;
        case Side::Bottom: n = {0, -1}; break;
        case Side::Top: n = {0, 1}; break;
        }
        const auto vn = [&](std::size_t node) { return v.coeffs[2 * node] * n.x + v.coeffs[2 * node + 1] * n.y; };
        flux += len / 6.0 * (vn(e.a) + 4.0 * vn(nv + be.edge) + vn(e.b));
    }
    return flux;
}

/// Prescribed velocity values on P2 nodes.
struct VelocityDirichlet {
    std::vector<std::size_t> nodes;
    std::vector<Point> values;
};

inline VelocityDirichlet no_slip_data(const Mesh& mesh) {
    VelocityDirichlet d;
    d.nodes = mesh.p2_nodes_with_tag(BoundaryTag::NoSlip);
    d.values.assign(d.nodes.size(), Point{});
    return d;
}

namespace detail {

inline void project_zero_mean(std::span<double> p, std::span<const double> mass) {
    double s = 0.0, m = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        s += mass[i] * p[i];
        m += mass[i];
    }
    const double c = s / m;
    for (double& x : p) x -= c;
}

} // namespace detail

struct FlowOptions {
    GmresOptions gmres{};
    double inner_tol = 1e-1;
    double pressure_inner_tol = 1e-2;
    std::size_t inner_maxit = 2000;
};

/// Solves the Brinkman/Stokes saddle point problem by flexible GMRES with a
/// block-diagonal preconditioner: inner CG on the velocity block, and for the
/// pressure (2 eta + lambda)-weighted lumped mass inverse plus nu times an
/// inner CG solve with the pressure Laplacian.
inline FlowSolution solve_flow_system(const Discretization& disc, std::span<const double> eta_elem, double lambda_bulk,
                                      double nu, Vector load_v, Vector load_p, const VelocityDirichlet& dirichlet,
                                      const FlowOptions& opt, const FlowSolution* guess = nullptr) {
    const Mesh& mesh = disc.mesh();
    const std::size_t nv = 2 * mesh.num_p2();
    const std::size_t np = mesh.num_p1();
    bool any_positive = false;
    for (double e : eta_elem) any_positive = any_positive || e > 0.0;
    if (!any_positive && nu <= 0.0)
        throw std::domain_error("solve_flow: zero viscosity and zero drag give a singular operator");

    CsrMatrix a = disc.taylor_hood().velocity_operator(eta_elem, lambda_bulk, nu);
    CsrMatrix b = disc.taylor_hood().divergence();

    std::vector<std::size_t> dofs;
    Vector vals;
    std::vector<char> fixed(nv, 0);
    for (std::size_t k = 0; k < dirichlet.nodes.size(); ++k) {
        const std::size_t n = dirichlet.nodes[k];
        dofs.push_back(2 * n);
        vals.push_back(dirichlet.values[k].x);
        dofs.push_back(2 * n + 1);
        vals.push_back(dirichlet.values[k].y);
        fixed[2 * n] = fixed[2 * n + 1] = 1;
    }
    b.eliminate_columns(dofs, vals, load_p);
    a.eliminate_dofs(dofs, vals, load_v);

    // every boundary P2 node prescribed: pressure defined up to a constant
    bool gauge = !mesh.boundary_edges.empty();
    for (const auto& be : mesh.boundary_edges) {
        const Edge& e = mesh.edges[be.edge];
        gauge = gauge && fixed[2 * e.a] && fixed[2 * e.b] && fixed[2 * (mesh.num_vertices() + be.edge)];
    }
    const auto& mass = disc.lumped_mass();
    if (gauge) {
        double total = 0.0;
        for (double s : load_p) total += s;
        if (std::abs(total) > 1e-10) {
            std::ostringstream os;
            os << "solve_flow: with a velocity prescribed on the whole boundary the integrated divergence source "
                  "(1/2 alpha (P sigma - A)(phi + 1), 1)_h must vanish, got "
               << total;
            throw ConfigError(os.str());
        }
    }

    // pressure preconditioner pieces
    Vector weighted_mass(np, 0.0);
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        const double w = disc.p1().geometry(t).area / 3.0 / std::max(2.0 * eta_elem[t] + lambda_bulk, 1e-300);
        for (auto v : mesh.triangles[t]) weighted_mass[v] += w;
    }
    CsrMatrix lap;
    std::vector<std::size_t> lap_fixed;
    if (nu > 0.0) {
        lap = disc.stiffness();
        // stress-free boundary carries the pressure to zero in the Darcy limit
        std::vector<char> on_free(np, 0);
        for (const auto& be : mesh.boundary_edges)
            if (be.tag == BoundaryTag::StressFree) on_free[mesh.edges[be.edge].a] = on_free[mesh.edges[be.edge].b] = 1;
        for (std::size_t i = 0; i < np; ++i)
            if (on_free[i]) lap_fixed.push_back(i);
        Vector dummy(np, 0.0);
        const Vector zeros(lap_fixed.size(), 0.0);
        lap.eliminate_dofs(lap_fixed, zeros, dummy);
    }
    const bool lap_singular = nu > 0.0 && lap_fixed.empty();

    Vector btp(nv);
    const LinearOperator op = [&](std::span<const double> in, std::span<double> out) {
        const auto v = in.subspan(0, nv);
        const auto p = in.subspan(nv, np);
        auto ov = out.subspan(0, nv);
        auto op_ = out.subspan(nv, np);
        a.multiply(v, ov);
        b.multiply_transpose(p, btp);
        for (std::size_t i = 0; i < nv; ++i)
            if (!fixed[i]) ov[i] -= btp[i];
        b.multiply(v, op_);
        if (gauge) {
            // rank-one completion fixes the pressure constant
            double s = 0.0;
            for (std::size_t i = 0; i < np; ++i) s += mass[i] * p[i];
            for (std::size_t i = 0; i < np; ++i) op_[i] += mass[i] * s;
        }
    };
    JacobiPcg velocity_inner(a, opt.inner_tol, opt.inner_maxit);
    std::optional<JacobiPcg> pressure_inner;
    if (nu > 0.0) pressure_inner.emplace(lap, opt.pressure_inner_tol, opt.inner_maxit);
    Vector prhs(np), q(np);
    const LinearOperator pre = [&](std::span<const double> in, std::span<double> out) {
        auto zv = out.subspan(0, nv);
        auto zp = out.subspan(nv, np);
        const auto rv = in.subspan(0, nv);
        const auto rp = in.subspan(nv, np);
        velocity_inner.solve(rv, zv);
        for (std::size_t i = 0; i < np; ++i) zp[i] = rp[i] / weighted_mass[i];
        if (pressure_inner) {
            std::copy(rp.begin(), rp.end(), prhs.begin());
            for (auto i : lap_fixed) prhs[i] = 0.0;
            if (lap_singular) detail::project_zero_mean(prhs, Vector(np, 1.0));
            pressure_inner->solve(prhs, q);
            for (std::size_t i = 0; i < np; ++i) zp[i] += nu * q[i];
        }
    };

    Vector rhs(nv + np);
    std::copy(load_v.begin(), load_v.end(), rhs.begin());
    std::copy(load_p.begin(), load_p.end(), rhs.begin() + static_cast<std::ptrdiff_t>(nv));
    Vector x(nv + np, 0.0);
    if (guess) {
        guess->v.require(mesh, "solve_flow(guess v)");
        guess->p.require(mesh, "solve_flow(guess p)");
        std::copy(guess->v.coeffs.begin(), guess->v.coeffs.end(), x.begin());
        std::copy(guess->p.coeffs.begin(), guess->p.coeffs.end(), x.begin() + static_cast<std::ptrdiff_t>(nv));
    }
    for (std::size_t i = 0; i < nv; ++i)
        if (fixed[i]) x[i] = load_v[i];
    FlowSolution sol{FeFunction::p2_vector(mesh), FeFunction::p1(mesh), {}};
    sol.report = gmres_solve(op, rhs, x, pre, opt.gmres);
    std::copy(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(nv), sol.v.coeffs.begin());
    std::copy(x.begin() + static_cast<std::ptrdiff_t>(nv), x.end(), sol.p.coeffs.begin());
    if (gauge) detail::project_zero_mean(sol.p.coeffs, mass);
    for (std::size_t i = 0; i < nv; ++i)
        if (fixed[i]) sol.v.coeffs[i] = load_v[i];
    return sol;
}

inline FlowOptions flow_options(const Parameters& p) {
    FlowOptions o;
    o.gmres = {p.gmres_tol, p.gmres_restart, p.gmres_maxit};
    return o;
}

/// Solves the discrete flow problem with the previous-step fields. `guess`
/// (typically the previous step's solution) seeds the Krylov iteration.
inline FlowSolution solve_flow(const Discretization& disc, const FeFunction& phi_old, const FeFunction& mu_old,
                               const FeFunction& sigma_old, const Parameters& params,
                               const FlowSolution* guess = nullptr) {
    const Mesh& mesh = disc.mesh();
    const auto eta = viscosity_field(mesh, phi_old, params.eta_minus, params.eta_plus);
    Vector fv = flow_rhs(mesh, phi_old, mu_old, sigma_old, params.chi_phi);
    Vector fp = divergence_source(disc.lumped_mass(), phi_old, sigma_old, params.alpha, params.P, params.A);
    return solve_flow_system(disc, eta, params.lambda_bulk, params.nu, std::move(fv), std::move(fp), no_slip_data(mesh),
                             flow_options(params), guess);
}

inline FlowSolution solve_flow(const Mesh& mesh, const FeFunction& phi_old, const FeFunction& mu_old,
                               const FeFunction& sigma_old, const Parameters& params) {
    const Discretization disc(mesh);
    return solve_flow(disc, phi_old, mu_old, sigma_old, params);
}

/// (B v - g, 1): the divergence equation tested with the constant function.
inline double divergence_identity_defect(const Discretization& disc, const FeFunction& v, std::span<const double> g) {
    const CsrMatrix b = disc.taylor_hood().divergence();
    const Vector bv = b * std::span<const double>(v.coeffs);
    double s = 0.0;
    for (std::size_t i = 0; i < bv.size(); ++i) s += bv[i] - g[i];
    return s;
}

} // namespace chb
