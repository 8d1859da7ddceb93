#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace chb {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

inline Point midpoint(const Point& a, const Point& b) { return {0.5 * (a.x + b.x), 0.5 * (a.y + b.y)}; }

enum class BoundaryTag { StressFree, NoSlip };
enum class Side { Left = 0, Right = 1, Bottom = 2, Top = 3 };

inline const char* side_name(Side s) {
    switch (s) {
    case Side::Left: return "left";
    case Side::Right: return "right";
    case Side::Bottom: return "bottom";
    case Side::Top: return "top";
    }
    return "?";
}

/// Boundary condition per side of the rectangle.
struct BoundarySpec {
    std::array<BoundaryTag, 4> sides{BoundaryTag::StressFree, BoundaryTag::StressFree, BoundaryTag::StressFree,
                                     BoundaryTag::StressFree};

    BoundaryTag operator[](Side s) const { return sides[static_cast<std::size_t>(s)]; }
    BoundaryTag& operator[](Side s) { return sides[static_cast<std::size_t>(s)]; }

    bool all_no_slip() const {
        for (auto t : sides)
            if (t != BoundaryTag::NoSlip) return false;
        return true;
    }
    bool any_no_slip() const {
        for (auto t : sides)
            if (t == BoundaryTag::NoSlip) return true;
        return false;
    }
};

struct Edge {
    std::size_t a = 0; // a < b
    std::size_t b = 0;
};

struct BoundaryEdge {
    std::size_t edge = 0;
    Side side = Side::Left;
    BoundaryTag tag = BoundaryTag::StressFree;
};

using Triangle = std::array<std::size_t, 3>;

/// Conforming triangulation of a rectangle with P1 (vertex) and P2 (vertex +
/// edge midpoint) degrees of freedom.
///
/// Triangles are counter-clockwise. Local vertex 0 is the newest vertex; the
/// edge opposite to it is the refinement edge used by bisection. Local edge k
/// of a triangle is the edge opposite local vertex k.
struct Mesh {
    Point lo;
    Point hi;
    BoundarySpec bc;
    std::vector<Point> vertices;
    std::vector<Triangle> triangles;
    std::vector<Edge> edges;
    std::vector<std::array<std::size_t, 3>> triangle_edges;
    std::vector<BoundaryEdge> boundary_edges;

    std::size_t num_vertices() const { return vertices.size(); }
    std::size_t num_triangles() const { return triangles.size(); }
    std::size_t num_edges() const { return edges.size(); }
    /// P1 scalar dof count.
    std::size_t num_p1() const { return vertices.size(); }
    /// P2 node count (vertices followed by edge midpoints).
    std::size_t num_p2() const { return vertices.size() + edges.size(); }

    Point p2_node(std::size_t i) const {
        if (i < vertices.size()) return vertices[i];
        const Edge& e = edges[i - vertices.size()];
        return midpoint(vertices[e.a], vertices[e.b]);
    }

    /// Local P2 node numbering: 0..2 vertices, 3..5 midpoints of local edges
    /// opposite vertex 0..2.
    std::array<std::size_t, 6> p2_dofs(std::size_t t) const {
        const auto& v = triangles[t];
        const auto& e = triangle_edges[t];
        const std::size_t nv = vertices.size();
        return {v[0], v[1], v[2], nv + e[0], nv + e[1], nv + e[2]};
    }

    double signed_area(std::size_t t) const {
        const auto& v = triangles[t];
        const Point& a = vertices[v[0]];
        const Point& b = vertices[v[1]];
        const Point& c = vertices[v[2]];
        return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
    }

    double domain_area() const { return (hi.x - lo.x) * (hi.y - lo.y); }

    double min_edge_length() const {
        double h = std::numeric_limits<double>::infinity();
        for (const auto& e : edges) {
            const Point& a = vertices[e.a];
            const Point& b = vertices[e.b];
            h = std::min(h, std::hypot(b.x - a.x, b.y - a.y));
        }
        return h;
    }

    double max_edge_length() const {
        double h = 0.0;
        for (const auto& e : edges) {
            const Point& a = vertices[e.a];
            const Point& b = vertices[e.b];
            h = std::max(h, std::hypot(b.x - a.x, b.y - a.y));
        }
        return h;
    }

    /// Boundary side of a point on the rectangle boundary, if any.
    std::optional<Side> side_of(const Point& p) const {
        const double tol = 1e-12 * std::max(hi.x - lo.x, hi.y - lo.y);
        if (std::abs(p.x - lo.x) < tol) return Side::Left;
        if (std::abs(p.x - hi.x) < tol) return Side::Right;
        if (std::abs(p.y - lo.y) < tol) return Side::Bottom;
        if (std::abs(p.y - hi.y) < tol) return Side::Top;
        return std::nullopt;
    }

    /// Vertices lying on the boundary.
    std::vector<char> boundary_vertex_mask() const {
        std::vector<char> m(vertices.size(), 0);
        for (const auto& be : boundary_edges) {
            m[edges[be.edge].a] = 1;
            m[edges[be.edge].b] = 1;
        }
        return m;
    }

    /// P2 nodes on boundary edges carrying the given tag.
    std::vector<std::size_t> p2_nodes_with_tag(BoundaryTag tag) const {
        std::vector<char> m(num_p2(), 0);
        for (const auto& be : boundary_edges) {
            if (be.tag != tag) continue;
            m[edges[be.edge].a] = 1;
            m[edges[be.edge].b] = 1;
            m[vertices.size() + be.edge] = 1;
        }
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < m.size(); ++i)
            if (m[i]) out.push_back(i);
        return out;
    }

    /// Rebuilds edges, triangle-edge incidence and boundary tags from
    /// vertices and triangles.
    void build_topology() {
        edges.clear();
        triangle_edges.assign(triangles.size(), {});
        boundary_edges.clear();
        std::unordered_map<std::uint64_t, std::size_t> index;
        index.reserve(triangles.size() * 2);
        std::vector<int> incidence;
        const auto key = [](std::size_t a, std::size_t b) {
            return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
        };
        for (std::size_t t = 0; t < triangles.size(); ++t) {
            const auto& v = triangles[t];
            for (int k = 0; k < 3; ++k) {
                std::size_t a = v[(k + 1) % 3], b = v[(k + 2) % 3];
                if (a > b) std::swap(a, b);
                auto [it, inserted] = index.try_emplace(key(a, b), edges.size());
                if (inserted) {
                    edges.push_back({a, b});
                    incidence.push_back(0);
                }
                ++incidence[it->second];
                triangle_edges[t][static_cast<std::size_t>(k)] = it->second;
            }
        }
        for (std::size_t e = 0; e < edges.size(); ++e) {
            if (incidence[e] > 2) throw std::logic_error("Mesh: edge shared by more than two triangles");
            if (incidence[e] != 1) continue;
            const Point m = midpoint(vertices[edges[e].a], vertices[edges[e].b]);
            const auto s = side_of(m);
            if (!s) throw std::logic_error("Mesh: boundary edge not on the domain boundary (hanging node?)");
            boundary_edges.push_back({e, *s, bc[*s]});
        }
    }
};

/// Edge-sharing audit plus orientation and area partition checks.
struct MeshAudit {
    bool positive_areas = true;
    bool conforming = true;
    bool boundary_tags_ok = true;
    double area_sum = 0.0;
    std::string message;

    bool ok() const { return positive_areas && conforming && boundary_tags_ok; }
};

inline MeshAudit audit_mesh(const Mesh& mesh) {
    MeshAudit r;
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        const double a = mesh.signed_area(t);
        if (!(a > 0.0)) {
            r.positive_areas = false;
            r.message += "non-positive area in triangle " + std::to_string(t) + "; ";
        }
        r.area_sum += a;
    }
    std::vector<int> incidence(mesh.num_edges(), 0);
    for (const auto& te : mesh.triangle_edges)
        for (auto e : te) ++incidence[e];
    std::vector<char> is_boundary(mesh.num_edges(), 0);
    for (const auto& be : mesh.boundary_edges) {
        is_boundary[be.edge] = 1;
        if (mesh.bc[be.side] != be.tag) r.boundary_tags_ok = false;
    }
    for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
        const int expected = is_boundary[e] ? 1 : 2;
        if (incidence[e] != expected) {
            r.conforming = false;
            r.message += "edge " + std::to_string(e) + " has " + std::to_string(incidence[e]) + " triangles; ";
        }
        if (!is_boundary[e]) {
            const Point m = midpoint(mesh.vertices[mesh.edges[e].a], mesh.vertices[mesh.edges[e].b]);
            const auto s = mesh.side_of(m);
            const bool along_side = s && mesh.side_of(mesh.vertices[mesh.edges[e].a]) == s &&
                                    mesh.side_of(mesh.vertices[mesh.edges[e].b]) == s;
            if (along_side) r.conforming = false;
        }
    }
    // every vertex must be a triangle vertex (no orphans, no hanging nodes)
    std::vector<char> used(mesh.num_vertices(), 0);
    for (const auto& t : mesh.triangles)
        for (auto v : t) used[v] = 1;
    for (char u : used)
        if (!u) {
            r.conforming = false;
            r.message += "orphan vertex; ";
            break;
        }
    return r;
}

/// Uniform n x n grid on [lo, hi], each square split along its
/// lower-left to upper-right diagonal.
inline Mesh build_uniform_mesh(std::size_t n, Point lo, Point hi, BoundarySpec bc = {}) {
    if (n == 0) throw std::invalid_argument("build_uniform_mesh: n must be at least 1");
    if (!(lo.x < hi.x) || !(lo.y < hi.y)) throw std::invalid_argument("build_uniform_mesh: degenerate bounds");
    Mesh m;
    m.lo = lo;
    m.hi = hi;
    m.bc = bc;
    const std::size_t np = n + 1;
    m.vertices.reserve(np * np);
    for (std::size_t j = 0; j < np; ++j)
        for (std::size_t i = 0; i < np; ++i) {
            // exact endpoints, no accumulated drift
            const double x = (i == n) ? hi.x : lo.x + (hi.x - lo.x) * static_cast<double>(i) / static_cast<double>(n);
            const double y = (j == n) ? hi.y : lo.y + (hi.y - lo.y) * static_cast<double>(j) / static_cast<double>(n);
            m.vertices.push_back({x, y});
        }
    m.triangles.reserve(2 * n * n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t ll = j * np + i, lr = ll + 1, ul = ll + np, ur = ul + 1;
            // right-angle vertex first: the hypotenuse is the refinement edge
            m.triangles.push_back({lr, ur, ll});
            m.triangles.push_back({ul, ll, ur});
        }
    m.build_topology();
    return m;
}

/// Nodal values carried through a refinement (linear interpolation at new
/// midpoints).
struct RefinedMesh {
    Mesh mesh;
    std::vector<double> phi;
};

/// Newest-vertex bisection of every triangle that has a vertex value in
/// (-1, 1), repeated `levels` times, with closure so that no hanging nodes
/// remain. Returns the refined mesh together with the interpolated field.
inline RefinedMesh refine_interface_band_with_field(const Mesh& input, std::span<const double> phi_in,
                                                    std::size_t levels) {
    if (phi_in.size() != input.num_vertices())
        throw std::invalid_argument("refine_interface_band: field is not P1 on the mesh");
    RefinedMesh out{input, std::vector<double>(phi_in.begin(), phi_in.end())};
    const auto key = [](std::size_t a, std::size_t b) {
        if (a > b) std::swap(a, b);
        return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
    };
    for (std::size_t level = 0; level < levels; ++level) {
        Mesh& m = out.mesh;
        std::vector<double>& phi = out.phi;
        std::unordered_map<std::uint64_t, char> marked;
        const auto refinement_key = [&](const Triangle& t) { return key(t[1], t[2]); };
        for (const auto& t : m.triangles) {
            bool in_band = false;
            for (auto v : t) in_band = in_band || (phi[v] > -1.0 && phi[v] < 1.0);
            if (in_band) marked[refinement_key(t)] = 1;
        }
        if (marked.empty()) break;
        // closure: a triangle with any marked edge must bisect its refinement edge
        for (bool changed = true; changed;) {
            changed = false;
            for (const auto& t : m.triangles) {
                const bool any = marked.count(key(t[0], t[1])) || marked.count(key(t[1], t[2])) ||
                                 marked.count(key(t[2], t[0]));
                if (any && marked.emplace(refinement_key(t), 1).second) changed = true;
            }
        }
        std::unordered_map<std::uint64_t, std::size_t> mid_vertex;
        std::vector<Triangle> work(m.triangles.rbegin(), m.triangles.rend());
        std::vector<Triangle> result;
        result.reserve(m.triangles.size() * 2);
        while (!work.empty()) {
            const Triangle t = work.back();
            work.pop_back();
            const auto rk = refinement_key(t);
            if (!marked.count(rk)) {
                result.push_back(t);
                continue;
            }
            auto [it, inserted] = mid_vertex.try_emplace(rk, m.vertices.size());
            if (inserted) {
                m.vertices.push_back(midpoint(m.vertices[t[1]], m.vertices[t[2]]));
                phi.push_back(0.5 * (phi[t[1]] + phi[t[2]]));
            }
            const std::size_t mv = it->second;
            // children keep orientation; the new vertex is their newest vertex
            work.push_back({mv, t[2], t[0]});
            work.push_back({mv, t[0], t[1]});
        }
        m.triangles = std::move(result);
        m.build_topology();
    }
    return out;
}

inline Mesh refine_interface_band(const Mesh& mesh, std::span<const double> phi, std::size_t levels) {
    return refine_interface_band_with_field(mesh, phi, levels).mesh;
}

/// Barycentric coordinates of p in triangle t.
inline std::array<double, 3> barycentric(const Mesh& m, std::size_t t, const Point& p) {
    const auto& v = m.triangles[t];
    const Point& a = m.vertices[v[0]];
    const Point& b = m.vertices[v[1]];
    const Point& c = m.vertices[v[2]];
    const double det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
    const double l1 = ((p.x - a.x) * (c.y - a.y) - (c.x - a.x) * (p.y - a.y)) / det;
    const double l2 = ((b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y)) / det;
    return {1.0 - l1 - l2, l1, l2};
}

/// Bucket-grid point location on a mesh.
class PointLocator {
public:
    explicit PointLocator(const Mesh& mesh) : mesh_(&mesh) {
        const std::size_t nt = mesh.num_triangles();
        nb_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(nt) / 2.0)));
        dx_ = (mesh.hi.x - mesh.lo.x) / static_cast<double>(nb_);
        dy_ = (mesh.hi.y - mesh.lo.y) / static_cast<double>(nb_);
        buckets_.assign(nb_ * nb_, {});
        for (std::size_t t = 0; t < nt; ++t) {
            double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
            for (auto v : mesh.triangles[t]) {
                x0 = std::min(x0, mesh.vertices[v].x);
                x1 = std::max(x1, mesh.vertices[v].x);
                y0 = std::min(y0, mesh.vertices[v].y);
                y1 = std::max(y1, mesh.vertices[v].y);
            }
            const auto [i0, j0] = cell({x0, y0});
            const auto [i1, j1] = cell({x1, y1});
            for (std::size_t j = j0; j <= j1; ++j)
                for (std::size_t i = i0; i <= i1; ++i) buckets_[j * nb_ + i].push_back(t);
        }
    }

    /// Containing triangle and barycentric coordinates, if p lies in the mesh.
    std::optional<std::pair<std::size_t, std::array<double, 3>>> locate(const Point& p) const {
        if (p.x < mesh_->lo.x || p.x > mesh_->hi.x || p.y < mesh_->lo.y || p.y > mesh_->hi.y) return std::nullopt;
        const auto [i, j] = cell(p);
        std::optional<std::pair<std::size_t, std::array<double, 3>>> best;
        double best_min = -1e300;
        for (auto t : buckets_[j * nb_ + i]) {
            const auto l = barycentric(*mesh_, t, p);
            const double mn = std::min({l[0], l[1], l[2]});
            if (mn >= -1e-12) return std::make_pair(t, l);
            if (mn > best_min) {
                best_min = mn;
                best = std::make_pair(t, l);
            }
        }
        return best;
    }

    /// P1 interpolant at p.
    std::optional<double> evaluate(std::span<const double> p1, const Point& p) const {
        const auto loc = locate(p);
        if (!loc) return std::nullopt;
        const auto& v = mesh_->triangles[loc->first];
        const auto& l = loc->second;
        return l[0] * p1[v[0]] + l[1] * p1[v[1]] + l[2] * p1[v[2]];
    }

private:
    std::pair<std::size_t, std::size_t> cell(const Point& p) const {
        const auto clampi = [&](double s) {
            const auto k = static_cast<long>(std::floor(s));
            return static_cast<std::size_t>(std::clamp<long>(k, 0, static_cast<long>(nb_) - 1));
        };
        return {clampi((p.x - mesh_->lo.x) / dx_), clampi((p.y - mesh_->lo.y) / dy_)};
    }

    const Mesh* mesh_;
    std::size_t nb_ = 1;
    double dx_ = 1.0, dy_ = 1.0;
    std::vector<std::vector<std::size_t>> buckets_;
};

} // namespace chb
