#pragma once

#include "chb/mesh.hpp"
#include "chb/sparse.hpp"

#include <array>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace chb {

enum class Space { P1Scalar, P2Vector };

/// Coefficient vector over one of the discrete spaces. P2Vector storage is
/// interleaved: coeffs[2 * node + component].
struct FeFunction {
    Space space = Space::P1Scalar;
    Vector coeffs;

    static FeFunction p1(const Mesh& m, double value = 0.0) { return {Space::P1Scalar, Vector(m.num_p1(), value)}; }
    static FeFunction p2_vector(const Mesh& m) { return {Space::P2Vector, Vector(2 * m.num_p2(), 0.0)}; }

    std::size_t expected_size(const Mesh& m) const {
        return space == Space::P1Scalar ? m.num_p1() : 2 * m.num_p2();
    }
    bool matches(const Mesh& m) const { return coeffs.size() == expected_size(m); }
    void require(const Mesh& m, const char* what) const {
        if (!matches(m)) throw std::invalid_argument(std::string(what) + ": coefficient count does not match the mesh");
    }
};

/// Per-triangle scalar field.
using ElementField = std::vector<double>;

namespace quad {

/// Degree-5 seven-point rule on triangles; barycentric points, weights sum to 1.
struct Rule {
    std::array<std::array<double, 3>, 7> points;
    std::array<double, 7> weights;
};

inline const Rule& degree5() {
    static const Rule r = [] {
        Rule q{};
        const double a1 = 0.059715871789770, b1 = 0.470142064105115;
        const double a2 = 0.797426985353087, b2 = 0.101286507323456;
        const double w0 = 0.225, w1 = 0.132394152788506, w2 = 0.125939180544827;
        q.points = {{{1.0 / 3, 1.0 / 3, 1.0 / 3},
                     {a1, b1, b1},
                     {b1, a1, b1},
                     {b1, b1, a1},
                     {a2, b2, b2},
                     {b2, a2, b2},
                     {b2, b2, a2}}};
        // the listed abscissae are rounded; close the barycentric sums exactly
        for (auto& p : q.points) p[2] = 1.0 - p[0] - p[1];
        q.weights = {w0, w1, w1, w1, w2, w2, w2};
        return q;
    }();
    return r;
}

} // namespace quad

using Grad = std::array<double, 2>;

/// Area and barycentric gradients of a triangle.
struct ElementGeometry {
    double area = 0.0;
    std::array<Grad, 3> grad_lambda{};
};

inline ElementGeometry element_geometry(const Mesh& m, std::size_t t) {
    const auto& v = m.triangles[t];
    ElementGeometry g;
    g.area = m.signed_area(t);
    const double inv = 1.0 / (2.0 * g.area);
    for (std::size_t i = 0; i < 3; ++i) {
        const Point& pj = m.vertices[v[(i + 1) % 3]];
        const Point& pk = m.vertices[v[(i + 2) % 3]];
        g.grad_lambda[i] = {(pj.y - pk.y) * inv, (pk.x - pj.x) * inv};
    }
    return g;
}

namespace p2 {

/// P2 shape values at barycentric point l. Order: vertices 0..2, then
/// midpoints of the edges opposite vertex 0..2.
inline std::array<double, 6> values(const std::array<double, 3>& l) {
    return {l[0] * (2 * l[0] - 1), l[1] * (2 * l[1] - 1), l[2] * (2 * l[2] - 1),
            4 * l[1] * l[2],       4 * l[2] * l[0],       4 * l[0] * l[1]};
}

inline std::array<Grad, 6> gradients(const std::array<double, 3>& l, const std::array<Grad, 3>& gl) {
    std::array<Grad, 6> g{};
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t c = 0; c < 2; ++c) g[i][c] = (4 * l[i] - 1) * gl[i][c];
    for (std::size_t k = 0; k < 3; ++k) {
        const std::size_t a = (k + 1) % 3, b = (k + 2) % 3;
        for (std::size_t c = 0; c < 2; ++c) g[3 + k][c] = 4 * (l[b] * gl[a][c] + l[a] * gl[b][c]);
    }
    return g;
}

} // namespace p2

/// Nodal interpolation of a pointwise function onto P1.
inline FeFunction interpolate_nodal(const std::function<double(const Point&)>& f, const Mesh& mesh) {
    FeFunction u = FeFunction::p1(mesh);
    for (std::size_t i = 0; i < mesh.num_vertices(); ++i) u.coeffs[i] = f(mesh.vertices[i]);
    return u;
}

/// Nodal interpolation of a vector function onto P2.
inline FeFunction interpolate_p2_vector(const std::function<Point(const Point&)>& f, const Mesh& mesh) {
    FeFunction u = FeFunction::p2_vector(mesh);
    for (std::size_t i = 0; i < mesh.num_p2(); ++i) {
        const Point v = f(mesh.p2_node(i));
        u.coeffs[2 * i] = v.x;
        u.coeffs[2 * i + 1] = v.y;
    }
    return u;
}

/// Diagonal of the lumped mass matrix: one third of the area of each
/// incident triangle.
inline Vector lumped_mass_vector(const Mesh& mesh) {
    Vector d(mesh.num_vertices(), 0.0);
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        const double a = mesh.signed_area(t) / 3.0;
        for (auto v : mesh.triangles[t]) d[v] += a;
    }
    return d;
}

inline CsrMatrix assemble_lumped_mass(const Mesh& mesh) { return CsrMatrix::diagonal(lumped_mass_vector(mesh)); }

/// Mean of vertex values on each triangle.
inline ElementField element_mean(const Mesh& mesh, std::span<const double> p1) {
    ElementField e(mesh.num_triangles());
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        const auto& v = mesh.triangles[t];
        e[t] = (p1[v[0]] + p1[v[1]] + p1[v[2]]) / 3.0;
    }
    return e;
}

/// Sparsity pattern with a per-element scatter map, for repeated assembly of
/// matrices with the same structure.
class ScatterPattern {
public:
    ScatterPattern() = default;

    /// `local_dofs(t)` lists row dofs, `local_cols(t)` column dofs.
    template <class RowFn, class ColFn>
    ScatterPattern(std::size_t rows, std::size_t cols, std::size_t num_elements, std::size_t nr, std::size_t nc,
                   RowFn row_dofs, ColFn col_dofs)
        : nr_(nr), nc_(nc) {
        TripletBuilder tb(rows, cols);
        tb.reserve(num_elements * nr * nc);
        for (std::size_t t = 0; t < num_elements; ++t) {
            const auto r = row_dofs(t);
            const auto c = col_dofs(t);
            for (std::size_t i = 0; i < nr; ++i)
                for (std::size_t j = 0; j < nc; ++j) tb.add(r[i], c[j], 0.0);
        }
        pattern_ = tb.build();
        slots_.resize(num_elements * nr * nc);
        const auto ptr = pattern_.row_ptr();
        const auto idx = pattern_.col_idx();
        for (std::size_t t = 0; t < num_elements; ++t) {
            const auto r = row_dofs(t);
            const auto c = col_dofs(t);
            for (std::size_t i = 0; i < nr; ++i)
                for (std::size_t j = 0; j < nc; ++j) {
                    const auto b = idx.begin() + static_cast<std::ptrdiff_t>(ptr[r[i]]);
                    const auto e = idx.begin() + static_cast<std::ptrdiff_t>(ptr[r[i] + 1]);
                    slots_[(t * nr + i) * nc + j] = static_cast<std::size_t>(std::lower_bound(b, e, c[j]) - idx.begin());
                }
        }
    }

    CsrMatrix zero() const { return pattern_; }

    /// Adds a row-major nr x nc local matrix of element t into `m`.
    void scatter(CsrMatrix& m, std::size_t t, std::span<const double> local, double scale = 1.0) const {
        auto vals = m.values();
        const std::size_t base = t * nr_ * nc_;
        for (std::size_t k = 0; k < nr_ * nc_; ++k) vals[slots_[base + k]] += scale * local[k];
    }

private:
    std::size_t nr_ = 0, nc_ = 0;
    CsrMatrix pattern_;
    std::vector<std::size_t> slots_;
};

/// Precomputed element data for P1 scalar assembly on a fixed mesh.
class P1Assembler {
public:
    explicit P1Assembler(const Mesh& mesh) : mesh_(&mesh) {
        const std::size_t nt = mesh.num_triangles();
        geometry_.reserve(nt);
        unit_stiffness_.resize(nt * 9);
        for (std::size_t t = 0; t < nt; ++t) {
            geometry_.push_back(element_geometry(mesh, t));
            const auto& g = geometry_.back();
            for (std::size_t i = 0; i < 3; ++i)
                for (std::size_t j = 0; j < 3; ++j)
                    unit_stiffness_[t * 9 + i * 3 + j] =
                        g.area * (g.grad_lambda[i][0] * g.grad_lambda[j][0] + g.grad_lambda[i][1] * g.grad_lambda[j][1]);
        }
        pattern_ = ScatterPattern(mesh.num_p1(), mesh.num_p1(), nt, 3, 3, [&](std::size_t t) { return mesh.triangles[t]; },
                                  [&](std::size_t t) { return mesh.triangles[t]; });
        lumped_ = lumped_mass_vector(mesh);
    }

    const Mesh& mesh() const { return *mesh_; }
    const ElementGeometry& geometry(std::size_t t) const { return geometry_[t]; }
    const Vector& lumped_mass() const { return lumped_; }

    /// Stiffness matrix with an elementwise constant non-negative coefficient.
    CsrMatrix stiffness(std::span<const double> coeff) const {
        if (coeff.size() != mesh_->num_triangles())
            throw std::invalid_argument("assemble_stiffness: one coefficient per triangle required");
        CsrMatrix k = pattern_.zero();
        for (std::size_t t = 0; t < coeff.size(); ++t) {
            if (!(coeff[t] >= 0.0)) throw std::invalid_argument("assemble_stiffness: negative coefficient");
            pattern_.scatter(k, t, std::span<const double>(unit_stiffness_).subspan(t * 9, 9), coeff[t]);
        }
        return k;
    }

    CsrMatrix stiffness(double c = 1.0) const { return stiffness(ElementField(mesh_->num_triangles(), c)); }

private:
    const Mesh* mesh_;
    std::vector<ElementGeometry> geometry_;
    Vector unit_stiffness_;
    ScatterPattern pattern_;
    Vector lumped_;
};

inline CsrMatrix assemble_stiffness(const Mesh& mesh, std::span<const double> coeff) {
    return P1Assembler(mesh).stiffness(coeff);
}

/// Taylor-Hood blocks: velocity operator and divergence coupling.
struct TaylorHoodBlocks {
    CsrMatrix a_vv;  // 2 n_p2 x 2 n_p2
    CsrMatrix b_div; // n_p1 x 2 n_p2, entries (chi_k, div(N_i e_c))
};

/// Precomputed local matrices for the Taylor-Hood pair on a fixed mesh.
/// Local velocity dof ordering is 2 * (local P2 node) + component.
class TaylorHoodAssembler {
public:
    explicit TaylorHoodAssembler(const Mesh& mesh) : mesh_(&mesh) {
        const std::size_t nt = mesh.num_triangles();
        const auto& rule = quad::degree5();
        viscous_.resize(nt * 144);
        bulk_.resize(nt * 144);
        mass_.resize(nt * 144);
        div_.resize(nt * 36);
        for (std::size_t t = 0; t < nt; ++t) {
            const auto g = element_geometry(mesh, t);
            for (std::size_t q = 0; q < rule.weights.size(); ++q) {
                const auto& l = rule.points[q];
                const double w = rule.weights[q] * g.area;
                const auto n = p2::values(l);
                const auto dn = p2::gradients(l, g.grad_lambda);
                for (std::size_t i = 0; i < 6; ++i)
                    for (std::size_t c = 0; c < 2; ++c)
                        for (std::size_t j = 0; j < 6; ++j)
                            for (std::size_t d = 0; d < 2; ++d) {
                                const std::size_t row = 2 * i + c, col = 2 * j + d;
                                const std::size_t k = t * 144 + row * 12 + col;
                                // 2 D(N_j e_d) : D(N_i e_c)
                                const double gg = (c == d ? dn[i][0] * dn[j][0] + dn[i][1] * dn[j][1] : 0.0) +
                                                  dn[i][d] * dn[j][c];
                                viscous_[k] += w * gg;
                                bulk_[k] += w * dn[i][c] * dn[j][d];
                                if (c == d) mass_[k] += w * n[i] * n[j];
                            }
                for (std::size_t k = 0; k < 3; ++k)
                    for (std::size_t j = 0; j < 6; ++j)
                        for (std::size_t d = 0; d < 2; ++d) div_[t * 36 + k * 12 + 2 * j + d] += w * l[k] * dn[j][d];
            }
        }
        const auto vel = [&](std::size_t t) {
            const auto n = mesh.p2_dofs(t);
            std::array<std::size_t, 12> r{};
            for (std::size_t i = 0; i < 6; ++i) {
                r[2 * i] = 2 * n[i];
                r[2 * i + 1] = 2 * n[i] + 1;
            }
            return r;
        };
        velocity_pattern_ = ScatterPattern(2 * mesh.num_p2(), 2 * mesh.num_p2(), nt, 12, 12, vel, vel);
        div_pattern_ = ScatterPattern(mesh.num_p1(), 2 * mesh.num_p2(), nt, 3, 12,
                                      [&](std::size_t t) { return mesh.triangles[t]; }, vel);
    }

    const Mesh& mesh() const { return *mesh_; }

    /// 2 (eta D(v), D(w)) + lambda (div v, div w) + nu (v, w), with eta
    /// constant per triangle.
    CsrMatrix velocity_operator(std::span<const double> eta, double lambda_bulk, double nu) const {
        if (eta.size() != mesh_->num_triangles())
            throw std::invalid_argument("assemble_taylor_hood: one viscosity per triangle required");
        CsrMatrix a = velocity_pattern_.zero();
        std::array<double, 144> local{};
        for (std::size_t t = 0; t < eta.size(); ++t) {
            for (std::size_t k = 0; k < 144; ++k)
                local[k] = eta[t] * viscous_[t * 144 + k] + lambda_bulk * bulk_[t * 144 + k] + nu * mass_[t * 144 + k];
            velocity_pattern_.scatter(a, t, local);
        }
        return a;
    }

    /// Consistent P2 vector mass matrix.
    CsrMatrix vector_mass() const {
        CsrMatrix a = velocity_pattern_.zero();
        for (std::size_t t = 0; t < mesh_->num_triangles(); ++t)
            velocity_pattern_.scatter(a, t, std::span<const double>(mass_).subspan(t * 144, 144));
        return a;
    }

    CsrMatrix divergence() const {
        CsrMatrix b = div_pattern_.zero();
        for (std::size_t t = 0; t < mesh_->num_triangles(); ++t)
            div_pattern_.scatter(b, t, std::span<const double>(div_).subspan(t * 36, 36));
        return b;
    }

private:
    const Mesh* mesh_;
    Vector viscous_, bulk_, mass_, div_;
    ScatterPattern velocity_pattern_, div_pattern_;
};

inline TaylorHoodBlocks assemble_taylor_hood(const Mesh& mesh, std::span<const double> eta_elem, double lambda_bulk,
                                             double nu) {
    bool any_positive = false;
    for (double e : eta_elem) any_positive = any_positive || e > 0.0;
    if (!any_positive && nu <= 0.0)
        throw std::domain_error("assemble_taylor_hood: zero viscosity and zero drag give a singular operator");
    const TaylorHoodAssembler th(mesh);
    return {th.velocity_operator(eta_elem, lambda_bulk, nu), th.divergence()};
}

/// Load vector (v . grad(phi_old), chi_k) against P1 test functions.
inline Vector assemble_convection_load(const Mesh& mesh, const FeFunction& v, const FeFunction& phi_old) {
    v.require(mesh, "assemble_convection_load(v)");
    phi_old.require(mesh, "assemble_convection_load(phi)");
    const auto& rule = quad::degree5();
    Vector load(mesh.num_p1(), 0.0);
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        const auto g = element_geometry(mesh, t);
        const auto& tv = mesh.triangles[t];
        Grad gphi{0.0, 0.0};
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t c = 0; c < 2; ++c) gphi[c] += phi_old.coeffs[tv[i]] * g.grad_lambda[i][c];
        if (gphi[0] == 0.0 && gphi[1] == 0.0) continue;
        const auto dofs = mesh.p2_dofs(t);
        for (std::size_t q = 0; q < rule.weights.size(); ++q) {
            const auto& l = rule.points[q];
            const auto n = p2::values(l);
            double vx = 0.0, vy = 0.0;
            for (std::size_t i = 0; i < 6; ++i) {
                vx += n[i] * v.coeffs[2 * dofs[i]];
                vy += n[i] * v.coeffs[2 * dofs[i] + 1];
            }
            const double s = rule.weights[q] * g.area * (vx * gphi[0] + vy * gphi[1]);
            for (std::size_t k = 0; k < 3; ++k) load[tv[k]] += s * l[k];
        }
    }
    return load;
}

/// Evaluates a P2 vector field at barycentric point l of triangle t.
inline Point evaluate_p2_vector(const Mesh& mesh, const FeFunction& v, std::size_t t, const std::array<double, 3>& l) {
    const auto dofs = mesh.p2_dofs(t);
    const auto n = p2::values(l);
    Point r;
    for (std::size_t i = 0; i < 6; ++i) {
        r.x += n[i] * v.coeffs[2 * dofs[i]];
        r.y += n[i] * v.coeffs[2 * dofs[i] + 1];
    }
    return r;
}

/// Lumped L2 inner product (u, w)_h.
inline double lumped_inner(std::span<const double> mass, std::span<const double> u, std::span<const double> w) {
    double s = 0.0;
    for (std::size_t i = 0; i < mass.size(); ++i) s += mass[i] * u[i] * w[i];
    return s;
}

} // namespace chb
