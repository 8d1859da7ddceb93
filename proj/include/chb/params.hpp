#pragma once

#include "chb/mesh.hpp"

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace chb {

/// Configuration problems: bad keys, invalid values, incompatible boundary
/// data. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct MobilityKind {
    enum class Law { Constant, ScaledConstant, OneSidedDegenerate };
    Law law = Law::OneSidedDegenerate;
    double m0 = 1.0;

    static MobilityKind constant(double m0) { return {Law::Constant, m0}; }
    static MobilityKind scaled_constant(double m0) { return {Law::ScaledConstant, m0}; }
    static MobilityKind one_sided_degenerate(double m0) { return {Law::OneSidedDegenerate, m0}; }
};

inline const char* mobility_name(MobilityKind::Law law) {
    switch (law) {
    case MobilityKind::Law::Constant: return "constant";
    case MobilityKind::Law::ScaledConstant: return "scaled";
    case MobilityKind::Law::OneSidedDegenerate: return "degenerate";
    }
    return "?";
}

/// Initial interface shapes: a circle of the configured radius, and the
/// perturbed circles r, r1 .. r4 (base radius 1/2).
enum class Profile { Disk, R, R1, R2, R3, R4 };

inline Profile parse_profile(const std::string& s) {
    if (s == "disk") return Profile::Disk;
    if (s == "r") return Profile::R;
    if (s == "r1") return Profile::R1;
    if (s == "r2") return Profile::R2;
    if (s == "r3") return Profile::R3;
    if (s == "r4") return Profile::R4;
    throw ConfigError("unknown initial profile '" + s + "' (expected disk, r, r1, r2, r3 or r4)");
}

inline const char* profile_name(Profile p) {
    switch (p) {
    case Profile::Disk: return "disk";
    case Profile::R: return "r";
    case Profile::R1: return "r1";
    case Profile::R2: return "r2";
    case Profile::R3: return "r3";
    case Profile::R4: return "r4";
    }
    return "?";
}

/// Minimum viscosity; Darcy-like runs use a small positive viscosity instead
/// of zero.
inline constexpr double kViscosityFloor = 1e-7;
/// Minimum mobility, keeps the chemical potential block solvable where the
/// degenerate law vanishes.
inline constexpr double kMobilityFloor = 1e-9;

struct Parameters {
    // physics
    double epsilon = 0.08;
    double beta = 0.1;
    double chi_phi = 5.0;
    double chi = 0.02;
    double D = 1.0;
    double P = 0.1;
    double A = 0.0;
    double C = 2.0;
    double alpha = 0.5;
    double rho_S = 2.0;
    double nu = 100.0;
    double eta_minus = 0.1;
    double eta_plus = 0.1;
    double lambda_bulk = 0.0;
    double sigma_B = 1.0;
    MobilityKind mobility{};
    Profile profile = Profile::R;
    double radius = 0.5; // disk profile only

    // numerics
    double dt = 1e-3;
    double t_end = 0.1;
    double vi_tol = 1e-8;
    std::size_t vi_maxit = 20000;
    double gmres_tol = 1e-9;
    std::size_t gmres_restart = 50;
    std::size_t gmres_maxit = 200;
    double cg_tol = 1e-10;
    double radial_dt = 1e-3;
    std::size_t radial_grid = 2000;
    double radial_domain = 3.0;

    // mesh
    std::size_t mesh_n = 64;
    std::size_t refine_levels = 0;
    BoundarySpec bc{};

    // output
    std::size_t output_every = 10;
    std::size_t radius_samples = 256;
};

/// Number of time steps covering [0, t_end].
inline std::size_t step_count(const Parameters& p) {
    if (p.t_end <= 0.0) return 0;
    const double n = p.t_end / p.dt;
    const double r = std::round(n);
    return static_cast<std::size_t>(std::abs(n - r) < 1e-9 * std::max(1.0, n) ? r : std::ceil(n));
}

} // namespace chb
