#pragma once

#include "chb/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace chb {

struct SolveReport {
    std::size_t iterations = 0;
    double final_residual = 0.0;
    bool converged = false;
    std::size_t active_set_size = 0;
    /// Residual norm at the start of each restart cycle (Krylov solvers).
    std::vector<double> residual_history;
};

/// Thrown when an iterative solve does not reach its tolerance and the
/// caller treats that as fatal.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, SolveReport report) : std::runtime_error(what), report_(std::move(report)) {}
    const SolveReport& report() const { return report_; }

private:
    SolveReport report_;
};

/// y = Op(x)
using LinearOperator = std::function<void(std::span<const double>, std::span<double>)>;

inline LinearOperator as_operator(const CsrMatrix& a) {
    return [&a](std::span<const double> x, std::span<double> y) { a.multiply(x, y); };
}

inline LinearOperator identity_operator() {
    return [](std::span<const double> x, std::span<double> y) { std::copy(x.begin(), x.end(), y.begin()); };
}

/// Jacobi-preconditioned conjugate gradients. Stops when
/// ||A x - b|| <= tol ||b||. `x` is used as the initial guess.
inline SolveReport cg_solve(const CsrMatrix& a, std::span<const double> b, std::span<double> x, double tol,
                            std::size_t maxit) {
    const std::size_t n = b.size();
    if (a.rows() != n || a.cols() != n || x.size() != n) throw std::invalid_argument("cg_solve: dimension mismatch");
    SolveReport rep;
    const double bnorm = norm2(b);
    if (bnorm == 0.0) {
        std::fill(x.begin(), x.end(), 0.0);
        rep.converged = true;
        return rep;
    }
    Vector inv_diag = a.diagonal_entries();
    for (double& d : inv_diag) d = (d > 0.0) ? 1.0 / d : 1.0;

    Vector r(n), z(n), p(n), q(n);
    a.multiply(x, r);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
    double rnorm = norm2(r);
    rep.residual_history.push_back(rnorm);
    for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    p = z;
    double rz = dot(r, z);
    while (rnorm > tol * bnorm && rep.iterations < maxit) {
        a.multiply(p, q);
        const double pq = dot(p, q);
        if (!(pq > 0.0)) break;
        const double alpha = rz / pq;
        axpy(alpha, p, x);
        axpy(-alpha, q, r);
        ++rep.iterations;
        rnorm = norm2(r);
        for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    // recompute the true residual
    a.multiply(x, r);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
    rep.final_residual = norm2(r);
    rep.converged = rep.final_residual <= tol * bnorm;
    return rep;
}

inline std::pair<Vector, SolveReport> cg_solve(const CsrMatrix& a, std::span<const double> b, double tol,
                                               std::size_t maxit) {
    Vector x(b.size(), 0.0);
    auto rep = cg_solve(a, b, x, tol, maxit);
    return {std::move(x), std::move(rep)};
}

/// Jacobi-preconditioned CG from a zero initial guess, for repeated
/// approximate solves with one matrix (inner solves of a preconditioner).
/// Work vectors and the inverse diagonal are kept between calls.
class JacobiPcg {
public:
    JacobiPcg(const CsrMatrix& a, double tol, std::size_t maxit)
        : a_(&a), tol_(tol), maxit_(maxit), inv_diag_(a.diagonal_entries()), r_(a.rows()), z_(a.rows()), p_(a.rows()),
          q_(a.rows()) {
        for (double& d : inv_diag_) d = (d > 0.0) ? 1.0 / d : 1.0;
    }

    /// Approximates x = A^{-1} b; returns the iteration count.
    std::size_t solve(std::span<const double> b, std::span<double> x) {
        const std::size_t n = b.size();
        std::fill(x.begin(), x.end(), 0.0);
        std::copy(b.begin(), b.end(), r_.begin());
        double rr = dot(r_, r_);
        const double stop = tol_ * tol_ * rr;
        for (std::size_t i = 0; i < n; ++i) z_[i] = inv_diag_[i] * r_[i];
        p_ = z_;
        double rz = dot(r_, z_);
        std::size_t it = 0;
        while (rr > stop && it < maxit_) {
            a_->multiply(p_, q_);
            const double pq = dot(p_, q_);
            if (!(pq > 0.0)) break;
            const double alpha = rz / pq;
            rr = 0.0;
            double rz_new = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                x[i] += alpha * p_[i];
                r_[i] -= alpha * q_[i];
                z_[i] = inv_diag_[i] * r_[i];
                rr += r_[i] * r_[i];
                rz_new += r_[i] * z_[i];
            }
            const double beta = rz_new / rz;
            rz = rz_new;
            for (std::size_t i = 0; i < n; ++i) p_[i] = z_[i] + beta * p_[i];
            ++it;
        }
        return it;
    }

private:
    const CsrMatrix* a_;
    double tol_;
    std::size_t maxit_;
    Vector inv_diag_, r_, z_, p_, q_;
};

struct GmresOptions {
    double tol = 1e-9;
    std::size_t restart = 50;
    std::size_t max_restarts = 200;
};

/// Restarted GMRES with right preconditioning in flexible form, so the
/// preconditioner may itself be an inexact inner iteration. With right
/// preconditioning the minimized quantity is the true residual; convergence
/// means ||b - A x|| <= tol ||b||. `x` is the initial guess.
/// `iterations` counts Arnoldi steps.
inline SolveReport gmres_solve(const LinearOperator& a, std::span<const double> b, std::span<double> x,
                               const LinearOperator& precond, const GmresOptions& opt) {
    const std::size_t n = b.size();
    if (x.size() != n) throw std::invalid_argument("gmres_solve: dimension mismatch");
    if (opt.restart == 0) throw std::invalid_argument("gmres_solve: restart must be positive");
    SolveReport rep;
    const double bnorm = norm2(b);
    if (bnorm == 0.0) {
        std::fill(x.begin(), x.end(), 0.0);
        rep.converged = true;
        return rep;
    }
    const std::size_t m = opt.restart;
    std::vector<Vector> v(m + 1, Vector(n)), z(m, Vector(n));
    std::vector<Vector> h(m + 1, Vector(m, 0.0));
    Vector cs(m), sn(m), g(m + 1), w(n), r(n);

    const auto residual = [&]() {
        a(x, w);
        for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - w[i];
        return norm2(r);
    };

    double beta = residual();
    for (std::size_t cycle = 0; cycle < opt.max_restarts; ++cycle) {
        rep.residual_history.push_back(beta);
        if (beta <= opt.tol * bnorm) break;
        for (std::size_t i = 0; i < n; ++i) v[0][i] = r[i] / beta;
        std::fill(g.begin(), g.end(), 0.0);
        g[0] = beta;
        std::size_t k = 0;
        for (; k < m; ++k) {
            precond(v[k], z[k]);
            a(z[k], w);
            const double w_norm = norm2(w);
            for (std::size_t i = 0; i <= k; ++i) {
                h[i][k] = dot(w, v[i]);
                axpy(-h[i][k], v[i], w);
            }
            h[k + 1][k] = norm2(w);
            if (h[k + 1][k] < 0.7 * w_norm) {
                // second Gram-Schmidt pass after severe cancellation
                for (std::size_t i = 0; i <= k; ++i) {
                    const double c = dot(w, v[i]);
                    h[i][k] += c;
                    axpy(-c, v[i], w);
                }
                h[k + 1][k] = norm2(w);
            }
            const bool breakdown = h[k + 1][k] <= 1e-14 * std::abs(h[k][k]) || h[k + 1][k] == 0.0;
            if (!breakdown)
                for (std::size_t i = 0; i < n; ++i) v[k + 1][i] = w[i] / h[k + 1][k];
            for (std::size_t i = 0; i < k; ++i) {
                const double t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            const double d = std::hypot(h[k][k], h[k + 1][k]);
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k] * g[k];
            ++rep.iterations;
            if (std::abs(g[k + 1]) <= opt.tol * bnorm || breakdown) {
                ++k;
                break;
            }
        }
        // back substitution and update x += Z y
        Vector y(k, 0.0);
        for (std::size_t i = k; i-- > 0;) {
            double s = g[i];
            for (std::size_t j = i + 1; j < k; ++j) s -= h[i][j] * y[j];
            y[i] = s / h[i][i];
        }
        const Vector x_prev(x.begin(), x.end());
        for (std::size_t j = 0; j < k; ++j) axpy(y[j], z[j], x);
        const double prev = beta;
        beta = residual();
        if (beta >= prev) {
            // stagnation at rounding level: keep the better iterate
            std::copy(x_prev.begin(), x_prev.end(), x.begin());
            beta = residual();
            break;
        }
    }
    rep.final_residual = beta;
    rep.converged = beta <= opt.tol * bnorm;
    return rep;
}

inline std::pair<Vector, SolveReport> gmres_solve(const LinearOperator& a, std::span<const double> b,
                                                  const LinearOperator& precond, const GmresOptions& opt) {
    Vector x(b.size(), 0.0);
    auto rep = gmres_solve(a, b, x, precond, opt);
    return {std::move(x), std::move(rep)};
}

/// Coupled two-field system with a bound constraint on the first field:
///
///   A11 x + A12 y = f                        (equality at every node)
///   r := A21 x + A22 y - g,  r_i (z - x_i) >= 0 for all z in [lower, upper]
///
/// so r_i = 0 where lower < x_i < upper, r_i <= 0 at x_i = upper and
/// r_i >= 0 at x_i = lower. Residuals are measured after multiplying rows by
/// `scale1` / `scale2` (empty means 1).
struct CoupledBlockSystem {
    CsrMatrix a11, a12, a21, a22;
    Vector f, g;
    Vector scale1, scale2;

    std::size_t size() const { return f.size(); }
};

/// Residual of both rows. Returns the maximum over nodes of the scaled
/// equality residual and the scaled complementarity violation.
struct BlockResidual {
    double equality = 0.0;        // max |scale1 * (A11 x + A12 y - f)|
    double complementarity = 0.0; // interior |r|, sign violations at the bounds
    std::size_t active = 0;

    double max() const { return std::max(equality, complementarity); }
};

inline BlockResidual block_residual(const CoupledBlockSystem& s, std::span<const double> x, std::span<const double> y,
                                    double lower, double upper) {
    const std::size_t n = s.size();
    Vector t1(n), t2(n), r1(n), r2(n);
    s.a11.multiply(x, t1);
    s.a12.multiply(y, t2);
    for (std::size_t i = 0; i < n; ++i) r1[i] = t1[i] + t2[i] - s.f[i];
    s.a21.multiply(x, t1);
    s.a22.multiply(y, t2);
    for (std::size_t i = 0; i < n; ++i) r2[i] = t1[i] + t2[i] - s.g[i];
    BlockResidual out;
    for (std::size_t i = 0; i < n; ++i) {
        const double s1 = s.scale1.empty() ? 1.0 : s.scale1[i];
        const double s2 = s.scale2.empty() ? 1.0 : s.scale2[i];
        out.equality = std::max(out.equality, std::abs(s1 * r1[i]));
        double c;
        if (x[i] >= upper) {
            c = std::max(0.0, s2 * r2[i]);
            ++out.active;
        } else if (x[i] <= lower) {
            c = std::max(0.0, -s2 * r2[i]);
            ++out.active;
        } else {
            c = std::abs(s2 * r2[i]);
        }
        out.complementarity = std::max(out.complementarity, c);
    }
    return out;
}

namespace detail {

/// Off-diagonal row sum sum_{j != i} a_ij v_j and the diagonal a_ii.
inline std::pair<double, double> split_row(const CsrMatrix& a, std::size_t i, std::span<const double> v) {
    const auto ptr = a.row_ptr();
    const auto idx = a.col_idx();
    const auto val = a.values();
    double off = 0.0, diag = 0.0;
    for (std::size_t k = ptr[i]; k < ptr[i + 1]; ++k) {
        if (idx[k] == i)
            diag = val[k];
        else
            off += val[k] * v[idx[k]];
    }
    return {off, diag};
}

/// One block Gauss-Seidel update at node i. `fixed` pins x_i to the given
/// value (active node); otherwise the 2x2 block is solved and x_i projected
/// onto [lower, upper], with y_i then taken from the equality row.
/// Returns the absolute change of x_i.
inline double block_update(const CoupledBlockSystem& s, std::size_t i, std::span<const double> f,
                           std::span<const double> g, std::span<double> x, std::span<double> y, double lower,
                           double upper, bool project, const char* fixed_state = nullptr) {
    const auto [o11, d11] = split_row(s.a11, i, x);
    const auto [o12, d12] = split_row(s.a12, i, y);
    const auto [o21, d21] = split_row(s.a21, i, x);
    const auto [o22, d22] = split_row(s.a22, i, y);
    const double s1 = f[i] - o11 - o12;
    const double s2 = g[i] - o21 - o22;
    const double old = x[i];
    double xi;
    double yi;
    if (fixed_state && *fixed_state) {
        xi = old;
        yi = (s1 - d11 * xi) / d12;
    } else {
        const double det = d11 * d22 - d12 * d21;
        xi = (s1 * d22 - d12 * s2) / det;
        yi = (d11 * s2 - d21 * s1) / det;
        if (project && (xi > upper || xi < lower)) {
            xi = xi > upper ? upper : lower;
            yi = (s1 - d11 * xi) / d12;
        }
    }
    x[i] = xi;
    y[i] = yi;
    return std::abs(xi - old);
}

} // namespace detail

struct BlockGsOptions {
    double tol = 1e-8;
    std::size_t maxit = 20000;
};

/// Projected block Gauss-Seidel: nodes are swept in index order, each 2x2
/// block is solved exactly, x_i is projected onto [lower, upper] and y_i is
/// re-solved from the equality row. Stops when the largest update of x in a
/// sweep and the scaled block residual are both below tol. `x`, `y` hold the
/// initial guess.
inline SolveReport projected_block_gs(const CoupledBlockSystem& s, double lower, double upper, std::span<double> x,
                                      std::span<double> y, const BlockGsOptions& opt) {
    if (!(lower < upper)) throw std::invalid_argument("projected_block_gs: lower must be below upper");
    const std::size_t n = s.size();
    if (x.size() != n || y.size() != n) throw std::invalid_argument("projected_block_gs: dimension mismatch");
    for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(x[i], lower, upper);
    SolveReport rep;
    for (rep.iterations = 0; rep.iterations < opt.maxit;) {
        double max_update = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            max_update = std::max(max_update, detail::block_update(s, i, s.f, s.g, x, y, lower, upper, true));
        ++rep.iterations;
        if (max_update < opt.tol) {
            const auto res = block_residual(s, x, y, lower, upper);
            rep.final_residual = res.max();
            rep.active_set_size = res.active;
            if (res.max() < opt.tol) {
                rep.converged = true;
                return rep;
            }
        }
    }
    const auto res = block_residual(s, x, y, lower, upper);
    rep.final_residual = res.max();
    rep.active_set_size = res.active;
    rep.converged = res.max() < opt.tol;
    return rep;
}

struct ActiveSetOptions {
    double tol = 1e-8;          // scaled residual target
    double linear_tol = 1e-13;  // relative residual of each inner linear solve
    std::size_t warmup_sweeps = 0;
    std::size_t max_active_set_iterations = 60;
    std::size_t gs_fallback_maxit = 20000;
    GmresOptions gmres{1e-13, 60, 40};
};

/// Bound-constrained coupled solve by primal-dual active sets. Each active
/// set iteration solves the linear system with x pinned on the active nodes
/// (GMRES, preconditioned by one forward and one backward block Gauss-Seidel
/// sweep), then moves nodes between the sets by the sign of the bound
/// residual. Projected block Gauss-Seidel warm-starts the first set and is
/// the fallback if the sets cycle.
inline SolveReport active_set_block_solve(const CoupledBlockSystem& s, double lower, double upper, std::span<double> x,
                                          std::span<double> y, const ActiveSetOptions& opt) {
    const std::size_t n = s.size();
    if (x.size() != n || y.size() != n) throw std::invalid_argument("active_set_block_solve: dimension mismatch");
    SolveReport rep;
    for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(x[i], lower, upper);
    for (std::size_t k = 0; k < opt.warmup_sweeps; ++k) {
        for (std::size_t i = 0; i < n; ++i) detail::block_update(s, i, s.f, s.g, x, y, lower, upper, true);
        ++rep.iterations;
    }

    std::vector<char> state(n, 0); // -1 lower, +1 upper, 0 free
    for (std::size_t i = 0; i < n; ++i) state[i] = x[i] >= upper ? 1 : (x[i] <= lower ? -1 : 0);

    Vector t1(n), t2(n), r(2 * n), dz(2 * n);
    // reduced operator on corrections (dx, dy); rows of pinned nodes are dx_i = 0
    const LinearOperator op = [&](std::span<const double> in, std::span<double> out) {
        const auto dx = in.subspan(0, n);
        const auto dy = in.subspan(n, n);
        Vector a(n), b(n);
        s.a11.multiply(dx, a);
        s.a12.multiply(dy, b);
        for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
        s.a21.multiply(dx, a);
        s.a22.multiply(dy, b);
        for (std::size_t i = 0; i < n; ++i) out[n + i] = state[i] ? dx[i] : a[i] + b[i];
    };
    const LinearOperator precond = [&](std::span<const double> in, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        auto dx = out.subspan(0, n);
        auto dy = out.subspan(n, n);
        const auto f = in.subspan(0, n);
        const auto g = in.subspan(n, n);
        const char pinned = 1;
        for (std::size_t i = 0; i < n; ++i)
            detail::block_update(s, i, f, g, dx, dy, lower, upper, false, state[i] ? &pinned : nullptr);
        for (std::size_t i = n; i-- > 0;)
            detail::block_update(s, i, f, g, dx, dy, lower, upper, false, state[i] ? &pinned : nullptr);
    };

    bool settled = false;
    bool local_release = true;
    for (std::size_t it = 0; it < opt.max_active_set_iterations; ++it) {
        for (std::size_t i = 0; i < n; ++i)
            if (state[i]) x[i] = state[i] > 0 ? upper : lower;
        s.a11.multiply(x, t1);
        s.a12.multiply(y, t2);
        for (std::size_t i = 0; i < n; ++i) r[i] = s.f[i] - t1[i] - t2[i];
        s.a21.multiply(x, t1);
        s.a22.multiply(y, t2);
        for (std::size_t i = 0; i < n; ++i) r[n + i] = state[i] ? 0.0 : s.g[i] - t1[i] - t2[i];
        std::fill(dz.begin(), dz.end(), 0.0);
        const auto lin = gmres_solve(op, r, dz, precond, opt.gmres);
        rep.iterations += lin.iterations;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += dz[i];
            y[i] += dz[n + i];
        }
        // bound residual r2 = A21 x + A22 y - g
        s.a21.multiply(x, t1);
        s.a22.multiply(y, t2);
        const auto has_free_neighbour = [&](std::size_t i) {
            const auto ptr = s.a21.row_ptr();
            const auto idx = s.a21.col_idx();
            for (std::size_t q = ptr[i]; q < ptr[i + 1]; ++q)
                if (state[idx[q]] == 0) return true;
            return false;
        };
        std::vector<char> next = state;
        for (std::size_t i = 0; i < n; ++i) {
            const double r2 = t1[i] + t2[i] - s.g[i];
            if (state[i] == 0) {
                if (x[i] > upper) next[i] = 1;
                if (x[i] < lower) next[i] = -1;
            } else if ((state[i] > 0 && r2 > 0.0) || (state[i] < 0 && r2 < 0.0)) {
                // first pass: release only next to the free set
                if (!local_release || has_free_neighbour(i)) next[i] = 0;
            }
        }
        const bool changed = next != state;
        state.swap(next);
        if (!changed) {
            if (!local_release) {
                settled = true;
                break;
            }
            std::vector<double> xc(x.begin(), x.end());
            for (double& v : xc) v = std::clamp(v, lower, upper);
            if (block_residual(s, xc, y, lower, upper).max() <= opt.tol) {
                settled = true;
                break;
            }
            local_release = false;
        }
    }
    if (!settled) {
        BlockGsOptions gs{opt.tol, opt.gs_fallback_maxit};
        auto fb = projected_block_gs(s, lower, upper, x, y, gs);
        rep.iterations += fb.iterations;
    }
    for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(x[i], lower, upper);
    const auto res = block_residual(s, x, y, lower, upper);
    rep.final_residual = res.max();
    rep.active_set_size = res.active;
    rep.converged = res.max() <= opt.tol;
    return rep;
}

} // namespace chb
