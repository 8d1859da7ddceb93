#pragma once

#include "chb/params.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace chb {

/// Radius of the disk with the same logarithmic capacity as a square of the
/// given side length. A radially symmetric problem posed on this disk is the
/// closest one-dimensional stand-in for a problem posed on the square.
inline double square_equivalent_radius(double side) { return 0.59017029950804811 * side; }

/// Radial nutrient profile on a grid over [0, R_dom].
struct RadialProfile {
    std::vector<double> r;
    std::vector<double> sigma;
    /// Max-norm residual of the discrete equations.
    double residual = 0.0;

    /// Piecewise linear evaluation, constant beyond the last node.
    double at(double x) const {
        if (x <= r.front()) return sigma.front();
        if (x >= r.back()) return sigma.back();
        std::size_t lo = 0, hi = r.size() - 1;
        while (hi - lo > 1) {
            const std::size_t mid = (lo + hi) / 2;
            (r[mid] <= x ? lo : hi) = mid;
        }
        const double w = (x - r[lo]) / (r[hi] - r[lo]);
        return (1.0 - w) * sigma[lo] + w * sigma[hi];
    }
};

namespace detail {

/// Nodes 0 = r_0 < ... < r_n = r_dom, uniform on [0, split] and on
/// [split, r_dom] with `split` a node (no split when split <= 0).
inline std::vector<double> radial_grid(double r_dom, std::size_t n, double split) {
    std::vector<double> r;
    r.reserve(n + 1);
    if (split <= 0.0 || split >= r_dom) {
        for (std::size_t i = 0; i <= n; ++i) r.push_back(r_dom * static_cast<double>(i) / static_cast<double>(n));
        return r;
    }
    const auto n_in = static_cast<std::size_t>(
        std::clamp<double>(std::round(static_cast<double>(n) * split / r_dom), 1.0, static_cast<double>(n - 1)));
    const std::size_t n_out = n - n_in;
    for (std::size_t i = 0; i <= n_in; ++i) r.push_back(split * static_cast<double>(i) / static_cast<double>(n_in));
    for (std::size_t i = 1; i <= n_out; ++i)
        r.push_back(split + (r_dom - split) * static_cast<double>(i) / static_cast<double>(n_out));
    return r;
}

} // namespace detail

/// Finite-volume solution of (r sigma')' = r c(r) sigma on (0, R_dom) with
/// sigma'(0) = 0 and sigma(R_dom) = sigma_outer. The reaction coefficient is
/// sampled at the midpoint of each half cell, so a coefficient that jumps at
/// the grid node `split` is integrated exactly.
inline RadialProfile radial_nutrient_profile(const std::function<double(double)>& c, double r_dom, std::size_t n_grid,
                                             double sigma_outer, double split = 0.0) {
    if (!(r_dom > 0.0)) throw std::invalid_argument("radial_nutrient: R_dom must be positive");
    if (n_grid < 64) throw std::invalid_argument("radial_nutrient: need at least 64 grid cells");
    RadialProfile out;
    out.r = detail::radial_grid(r_dom, n_grid, split);
    const auto& r = out.r;
    const std::size_t n = r.size() - 1;

    // rows 0..n-1 unknown, row n Dirichlet
    std::vector<double> lower(n, 0.0), diag(n, 0.0), upper(n, 0.0), rhs(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double rp = 0.5 * (r[i] + r[i + 1]);
        const double fp = rp / (r[i + 1] - r[i]);
        double reaction = 0.5 * c(0.5 * (r[i] + rp)) * (rp * rp - r[i] * r[i]);
        diag[i] += fp;
        upper[i] = -fp;
        if (i > 0) {
            const double rm = 0.5 * (r[i - 1] + r[i]);
            const double fm = rm / (r[i] - r[i - 1]);
            reaction += 0.5 * c(0.5 * (rm + r[i])) * (r[i] * r[i] - rm * rm);
            diag[i] += fm;
            lower[i] = -fm;
        }
        diag[i] += reaction;
    }
    rhs[n - 1] -= upper[n - 1] * sigma_outer;

    // Thomas algorithm
    std::vector<double> cp(n), dp(n);
    cp[0] = upper[0] / diag[0];
    dp[0] = rhs[0] / diag[0];
    for (std::size_t i = 1; i < n; ++i) {
        const double m = diag[i] - lower[i] * cp[i - 1];
        cp[i] = upper[i] / m;
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / m;
    }
    out.sigma.assign(n + 1, sigma_outer);
    out.sigma[n - 1] = dp[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) out.sigma[i] = dp[i] - cp[i] * out.sigma[i + 1];

    for (std::size_t i = 0; i < n; ++i) {
        double a = diag[i] * out.sigma[i] + upper[i] * out.sigma[i + 1];
        if (i > 0) a += lower[i] * out.sigma[i - 1];
        out.residual = std::max(out.residual, std::abs(a) / std::max(1.0, std::abs(diag[i])));
    }
    return out;
}

/// Nutrient for a sharp disk tumour of radius R: consumption C inside, none
/// outside, sigma_B at R_dom.
inline RadialProfile radial_nutrient(double R, const Parameters& params, double r_dom, std::size_t n_grid) {
    if (!(R > 0.0) || !(R < r_dom)) throw std::invalid_argument("radial_nutrient: need 0 < R < R_dom");
    const double cc = params.C / params.D;
    return radial_nutrient_profile([R, cc](double x) { return x < R ? cc : 0.0; }, r_dom, n_grid, params.sigma_B, R);
}

/// Normal velocity of the disk boundary from the divergence law,
/// V = (1/R) int_0^R alpha (P sigma - A) r dr (trapezoidal rule on the grid).
inline double radial_velocity(double R, const RadialProfile& profile, const Parameters& params) {
    if (!(R > 0.0)) throw std::invalid_argument("radial_velocity: R must be positive");
    const auto f = [&](double x, double s) { return params.alpha * (params.P * s - params.A) * x; };
    double integral = 0.0;
    const auto& r = profile.r;
    for (std::size_t i = 0; i + 1 < r.size() && r[i] < R; ++i) {
        const double b = std::min(r[i + 1], R);
        const double sb = (b == r[i + 1]) ? profile.sigma[i + 1] : profile.at(b);
        integral += 0.5 * (b - r[i]) * (f(r[i], profile.sigma[i]) + f(b, sb));
    }
    return integral / R;
}

struct RadialSample {
    double t = 0.0;
    double R = 0.0;
    double V = 0.0;
    double sigma0 = 0.0;
};

struct RadialSeries {
    enum class Status { Completed, Vanished, ReachedBoundary };
    std::vector<RadialSample> samples;
    Status status = Status::Completed;

    /// R at time t by linear interpolation between samples.
    double radius_at(double t) const {
        if (samples.empty()) throw std::out_of_range("RadialSeries: empty");
        if (t <= samples.front().t) return samples.front().R;
        for (std::size_t i = 1; i < samples.size(); ++i)
            if (t <= samples[i].t) {
                const auto& a = samples[i - 1];
                const auto& b = samples[i];
                return a.R + (b.R - a.R) * (t - a.t) / (b.t - a.t);
            }
        return samples.back().R;
    }
};

inline const char* status_name(RadialSeries::Status s) {
    switch (s) {
    case RadialSeries::Status::Completed: return "completed";
    case RadialSeries::Status::Vanished: return "vanished";
    case RadialSeries::Status::ReachedBoundary: return "reached_boundary";
    }
    return "?";
}

/// Integrates R' = V(R) with classical RK4, re-solving the nutrient at every
/// stage. Stops early (with a status) if R leaves (0, R_dom).
inline RadialSeries evolve_radius(double R0, const Parameters& params, double dt_r, double t_end, double r_dom,
                                  std::size_t n_grid) {
    if (!(R0 > 0.0) || !(R0 < r_dom)) throw std::invalid_argument("evolve_radius: need 0 < R0 < R_dom");
    if (!(dt_r > 0.0)) throw std::invalid_argument("evolve_radius: dt must be positive");
    const auto velocity = [&](double R) { return radial_velocity(R, radial_nutrient(R, params, r_dom, n_grid), params); };
    const auto sample = [&](double t, double R) {
        const auto prof = radial_nutrient(R, params, r_dom, n_grid);
        return RadialSample{t, R, radial_velocity(R, prof, params), prof.sigma.front()};
    };
    RadialSeries series;
    double R = R0;
    series.samples.push_back(sample(0.0, R));
    const auto steps = static_cast<std::size_t>(std::max(0.0, std::round(t_end / dt_r)));
    // false (and the status set) once a radius leaves (0, R_dom)
    const auto inside = [&](double x) {
        if (x > 0.0 && x < r_dom) return true;
        series.status = x <= 0.0 ? RadialSeries::Status::Vanished : RadialSeries::Status::ReachedBoundary;
        return false;
    };
    for (std::size_t k = 1; k <= steps; ++k) {
        const double h = (k == steps) ? t_end - dt_r * static_cast<double>(steps - 1) : dt_r;
        const double k1 = series.samples.back().V;
        const double r2 = R + 0.5 * h * k1;
        if (!inside(r2)) break;
        const double k2 = velocity(r2);
        const double r3 = R + 0.5 * h * k2;
        if (!inside(r3)) break;
        const double k3 = velocity(r3);
        const double r4 = R + h * k3;
        if (!inside(r4)) break;
        const double k4 = velocity(r4);
        const double next = R + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!inside(next)) break;
        R = next;
        series.samples.push_back(sample(dt_r * static_cast<double>(k - 1) + h, R));
    }
    return series;
}

} // namespace chb
