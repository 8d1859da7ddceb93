#pragma once

#include "chb/discretization.hpp"
#include "chb/radial.hpp"
#include "chb/state.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace chb {

/// Discrete Ginzburg-Landau energy with the obstacle potential,
///   E = beta/eps (1/2 (1 - phi^2), 1)_h + beta eps / 2 phi^T K phi.
/// Nodal values outside [-1, 1] (beyond 1e-12) have infinite energy and are
/// rejected.
inline double energy(const FeFunction& phi, double beta, double epsilon, const Discretization& disc) {
    const Mesh& mesh = disc.mesh();
    phi.require(mesh, "energy");
    for (double f : phi.coeffs)
        if (std::abs(f) > 1.0 + 1e-12) throw std::invalid_argument("energy: phase field outside [-1, 1]");
    const auto& mass = disc.lumped_mass();
    double bulk = 0.0;
    for (std::size_t i = 0; i < mass.size(); ++i) bulk += mass[i] * 0.5 * (1.0 - phi.coeffs[i] * phi.coeffs[i]);
    const Vector kphi = disc.stiffness() * std::span<const double>(phi.coeffs);
    return beta / epsilon * bulk + 0.5 * beta * epsilon * dot(phi.coeffs, kphi);
}

/// `count` angles 2 pi j / count, j = 0 .. count-1.
inline std::vector<double> uniform_angles(std::size_t count) {
    std::vector<double> a(count);
    for (std::size_t j = 0; j < count; ++j)
        a[j] = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(count);
    return a;
}

/// Distance from the origin to the outer edge of the tumour along each ray:
/// the last point where phi passes from positive to non-positive. The P1
/// interpolant is sampled every h/2 (h the shortest mesh edge) with linear
/// interpolation between samples. A ray gives an empty entry when it never
/// leaves the tumour or never meets it, so a hole around the origin does not
/// change the result.
inline std::vector<std::optional<double>> zero_level_radius(const FeFunction& phi, const Mesh& mesh,
                                                            const PointLocator& locator,
                                                            std::span<const double> angles) {
    phi.require(mesh, "zero_level_radius");
    const double step = 0.5 * mesh.min_edge_length();
    std::vector<std::optional<double>> out(angles.size());
    const Point origin{0.0, 0.0};
    const auto f0 = locator.evaluate(phi.coeffs, origin);
    if (!f0) return out;
    for (std::size_t k = 0; k < angles.size(); ++k) {
        const double cx = std::cos(angles[k]), cy = std::sin(angles[k]);
        double s_prev = 0.0, f_prev = *f0;
        bool outside = !(f_prev > 0.0);
        for (std::size_t j = 1;; ++j) {
            const double s = step * static_cast<double>(j);
            const auto f = locator.evaluate(phi.coeffs, {s * cx, s * cy});
            if (!f) break;
            if (f_prev > 0.0 && !(*f > 0.0))
                out[k] = s_prev + (s - s_prev) * f_prev / (f_prev - *f);
            outside = !(*f > 0.0);
            s_prev = s;
            f_prev = *f;
        }
        if (!outside) out[k].reset();
    }
    return out;
}

inline std::vector<std::optional<double>> zero_level_radius(const FeFunction& phi, const Mesh& mesh,
                                                            std::span<const double> angles) {
    const PointLocator locator(mesh);
    return zero_level_radius(phi, mesh, locator, angles);
}

/// Fourier amplitudes a_0 .. a_kmax of r sampled at uniform angles:
/// a_0 = |c_0|, a_k = 2 |c_k| (or |c_k| at the Nyquist index), with
/// c_k = (1/N) sum_j r_j exp(-i k theta_j). For r = r0 + a cos(k theta + phase)
/// this returns a_k = a.
inline std::vector<double> mode_amplitudes(std::span<const double> r, std::size_t kmax = 12) {
    const std::size_t n = r.size();
    if (n < 64) throw std::invalid_argument("mode_amplitudes: need at least 64 samples");
    if (kmax > n / 2) throw std::invalid_argument("mode_amplitudes: kmax beyond the Nyquist index");
    std::vector<double> a(kmax + 1);
    for (std::size_t k = 0; k <= kmax; ++k) {
        std::complex<double> c = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double th = 2.0 * std::numbers::pi * static_cast<double>((k * j) % n) / static_cast<double>(n);
            c += r[j] * std::complex<double>(std::cos(th), -std::sin(th));
        }
        c /= static_cast<double>(n);
        const bool single = k == 0 || 2 * k == n;
        a[k] = (single ? 1.0 : 2.0) * std::abs(c);
    }
    return a;
}

inline constexpr std::size_t kModeCount = 13;

struct DiagnosticsRecord {
    double t = 0.0;
    double mass = 0.0;
    double tumour_area = 0.0;
    double energy = 0.0;
    double phi_min = 0.0;
    double phi_max = 0.0;
    double sigma_min = 0.0;
    double sigma_max = 0.0;
    double v_max = 0.0;
    double mean_radius = 0.0;
    std::array<double, kModeCount> modes{};
    std::size_t flow_iters = 0;
    std::size_t vi_iters = 0;
    std::size_t nutrient_iters = 0;

    bool operator==(const DiagnosticsRecord&) const = default;
};

struct IterationCounts {
    std::size_t flow = 0;
    std::size_t vi = 0;
    std::size_t nutrient = 0;
};

/// Scalar diagnostics of a state. When any ray misses the interface the
/// radius and mode entries are NaN.
inline DiagnosticsRecord compute_diagnostics(const Discretization& disc, const PointLocator& locator, const State& s,
                                             double beta, double epsilon, std::size_t radius_samples,
                                             IterationCounts iters = {}) {
    const Mesh& mesh = disc.mesh();
    const auto& mass = disc.lumped_mass();
    DiagnosticsRecord d;
    d.t = s.t;
    for (std::size_t i = 0; i < mass.size(); ++i) d.mass += mass[i] * s.phi.coeffs[i];
    d.tumour_area = 0.5 * (d.mass + mesh.domain_area());
    d.energy = energy(s.phi, beta, epsilon, disc);
    const auto [pmin, pmax] = std::minmax_element(s.phi.coeffs.begin(), s.phi.coeffs.end());
    d.phi_min = *pmin;
    d.phi_max = *pmax;
    const auto [smin, smax] = std::minmax_element(s.sigma.coeffs.begin(), s.sigma.coeffs.end());
    d.sigma_min = *smin;
    d.sigma_max = *smax;
    for (std::size_t i = 0; i + 1 < s.v.coeffs.size(); i += 2)
        d.v_max = std::max(d.v_max, std::hypot(s.v.coeffs[i], s.v.coeffs[i + 1]));

    const auto angles = uniform_angles(radius_samples);
    const auto radii = zero_level_radius(s.phi, mesh, locator, angles);
    std::vector<double> r;
    r.reserve(radii.size());
    for (const auto& x : radii)
        if (x) r.push_back(*x);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (r.size() == radii.size() && r.size() >= 64) {
        const auto a = mode_amplitudes(r, kModeCount - 1);
        std::copy(a.begin(), a.end(), d.modes.begin());
        d.mean_radius = a[0];
    } else {
        d.mean_radius = nan;
        d.modes.fill(nan);
    }
    d.flow_iters = iters.flow;
    d.vi_iters = iters.vi;
    d.nutrient_iters = iters.nutrient;
    return d;
}

// ---------------------------------------------------------------- CSV

inline std::vector<std::string> diag_csv_columns() {
    std::vector<std::string> c{"t",         "mass",      "tumour_area", "energy", "phi_min",
                               "phi_max",   "sigma_min", "sigma_max",   "v_max",  "mean_radius"};
    for (std::size_t k = 0; k < kModeCount; ++k) c.push_back("a" + std::to_string(k));
    c.insert(c.end(), {"flow_iters", "vi_iters", "nutrient_iters"});
    return c;
}

namespace detail {

/// Shortest decimal form of x that reads back to the same double,
/// independent of the locale.
inline std::string format_double(double x) {
    std::array<char, 40> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), res.ptr);
}

inline double parse_double(const std::string& s) {
    double x = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw std::runtime_error("diagnostics.csv: cannot parse number '" + s + "'");
    return x;
}

inline std::ofstream open_for_writing(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    return out;
}

} // namespace detail

inline std::string diag_csv_row(const DiagnosticsRecord& r) {
    using detail::format_double;
    std::string s;
    for (double x : {r.t, r.mass, r.tumour_area, r.energy, r.phi_min, r.phi_max, r.sigma_min, r.sigma_max, r.v_max,
                     r.mean_radius}) {
        s += format_double(x);
        s += ',';
    }
    for (double a : r.modes) {
        s += format_double(a);
        s += ',';
    }
    s += std::to_string(r.flow_iters) + ',' + std::to_string(r.vi_iters) + ',' + std::to_string(r.nutrient_iters);
    return s;
}

inline std::string diag_csv_header() {
    std::string s;
    for (const auto& c : diag_csv_columns()) s += (s.empty() ? "" : ",") + c;
    return s;
}

inline void write_diag_csv(std::span<const DiagnosticsRecord> records, const std::filesystem::path& path) {
    auto out = detail::open_for_writing(path);
    out << diag_csv_header() << '\n';
    for (const auto& r : records) out << diag_csv_row(r) << '\n';
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline std::vector<DiagnosticsRecord> read_diag_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line) || line != diag_csv_header())
        throw std::runtime_error("'" + path.string() + "': unexpected diagnostics header");
    const std::size_t ncol = diag_csv_columns().size();
    std::vector<DiagnosticsRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
        if (f.size() != ncol) throw std::runtime_error("'" + path.string() + "': wrong column count");
        DiagnosticsRecord r;
        std::size_t c = 0;
        for (double* x : {&r.t, &r.mass, &r.tumour_area, &r.energy, &r.phi_min, &r.phi_max, &r.sigma_min,
                          &r.sigma_max, &r.v_max, &r.mean_radius})
            *x = detail::parse_double(f[c++]);
        for (double& a : r.modes) a = detail::parse_double(f[c++]);
        r.flow_iters = std::stoul(f[c++]);
        r.vi_iters = std::stoul(f[c++]);
        r.nutrient_iters = std::stoul(f[c++]);
        out.push_back(r);
    }
    return out;
}

// ---------------------------------------------------------------- VTK

/// Legacy ASCII VTK of the P1 mesh with point fields phi, mu, sigma, p and
/// the velocity at the vertices.
inline void write_vtk(const State& s, const Mesh& mesh, const std::filesystem::path& path) {
    using detail::format_double;
    for (const FeFunction* f : {&s.phi, &s.mu, &s.sigma, &s.p}) f->require(mesh, "write_vtk");
    s.v.require(mesh, "write_vtk(v)");
    auto out = detail::open_for_writing(path);
    const std::size_t nv = mesh.num_vertices();
    const std::size_t nt = mesh.num_triangles();
    out << "# vtk DataFile Version 3.0\n";
    out << "chb t=" << format_double(s.t) << '\n';
    out << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << nv << " double\n";
    for (const auto& p : mesh.vertices) out << format_double(p.x) << ' ' << format_double(p.y) << " 0\n";
    out << "CELLS " << nt << ' ' << 4 * nt << '\n';
    for (const auto& t : mesh.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    out << "CELL_TYPES " << nt << '\n';
    for (std::size_t t = 0; t < nt; ++t) out << "5\n";
    out << "POINT_DATA " << nv << '\n';
    const auto scalars = [&](const char* name, const FeFunction& f) {
        out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
        for (double x : f.coeffs) out << format_double(x) << '\n';
    };
    scalars("phi", s.phi);
    scalars("mu", s.mu);
    scalars("sigma", s.sigma);
    scalars("p", s.p);
    out << "VECTORS v double\n";
    for (std::size_t i = 0; i < nv; ++i)
        out << format_double(s.v.coeffs[2 * i]) << ' ' << format_double(s.v.coeffs[2 * i + 1]) << " 0\n";
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

// ---------------------------------------------------------------- radial

/// Columns t, R, V, sigma0.
inline void write_radial_csv(const RadialSeries& series, const std::filesystem::path& path) {
    using detail::format_double;
    auto out = detail::open_for_writing(path);
    out << "t,R,V,sigma0\n";
    for (const auto& s : series.samples)
        out << format_double(s.t) << ',' << format_double(s.R) << ',' << format_double(s.V) << ','
            << format_double(s.sigma0) << '\n';
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

} // namespace chb
