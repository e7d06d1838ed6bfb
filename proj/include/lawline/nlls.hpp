#pragma once

// Nonlinear least squares: damped Gauss-Newton (Levenberg-Marquardt) with box
// bounds and deterministic multi-start. The objective is plain unweighted
// least squares on raw values. Identical inputs, including the order of the
// start list, produce bit-identical parameters.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "lawline/errors.hpp"

namespace lawline {

struct ParamBounds {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
};

struct FitOptions {
    int max_iterations = 500;
    double ftol = 1e-10;  // relative sse improvement below this => converged
    double gtol = 1e-12;  // gradient norm below this => converged
};

struct FitDiagnostics {
    int iterations = 0;
    bool converged = false;
    double sse = std::numeric_limits<double>::infinity();
    int n_starts_tried = 0;
    int best_start_index = -1;
};

struct FitResult {
    std::vector<double> params;
    FitDiagnostics diagnostics;
};

namespace detail {

template <class Model, class X>
concept HasJacobian = requires(const Model& m, std::span<const double> p, const X& x,
                               std::span<double> out) {
    m.jacobian(p, x, out);
};

inline void clamp_into(std::span<double> p, std::span<const ParamBounds> bounds) {
    for (std::size_t j = 0; j < p.size(); ++j)
        p[j] = std::min(std::max(p[j], bounds[j].lo), bounds[j].hi);
}

/// Solve (A + lambda*diag(A)) x = b for a small symmetric system by Gaussian
/// elimination with partial pivoting. Returns false when singular.
inline bool solve_damped(std::vector<double> a, std::vector<double> b, double lambda,
                         std::size_t k, std::span<double> x) {
    for (std::size_t j = 0; j < k; ++j) {
        const double d = a[j * k + j];
        a[j * k + j] = d + lambda * std::max(d, 1e-30);
    }
    for (std::size_t col = 0; col < k; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < k; ++r)
            if (std::abs(a[r * k + col]) > std::abs(a[pivot * k + col])) pivot = r;
        if (std::abs(a[pivot * k + col]) < 1e-300) return false;
        if (pivot != col) {
            for (std::size_t c = 0; c < k; ++c) std::swap(a[col * k + c], a[pivot * k + c]);
            std::swap(b[col], b[pivot]);
        }
        for (std::size_t r = col + 1; r < k; ++r) {
            const double f = a[r * k + col] / a[col * k + col];
            for (std::size_t c = col; c < k; ++c) a[r * k + c] -= f * a[col * k + c];
            b[r] -= f * b[col];
        }
    }
    for (std::size_t ri = k; ri-- > 0;) {
        double s = b[ri];
        for (std::size_t c = ri + 1; c < k; ++c) s -= a[ri * k + c] * x[c];
        x[ri] = s / a[ri * k + ri];
    }
    for (std::size_t j = 0; j < k; ++j)
        if (!std::isfinite(x[j])) return false;
    return true;
}

} // namespace detail

/// Central-difference row of the Jacobian: d f(p, x) / d p_j for all j.
/// Evaluation points are clamped into the bounds; at a bound the difference
/// degrades to one-sided.
template <class X, class Model>
void numeric_jacobian_row(const Model& model, std::span<const double> p, const X& x,
                          std::span<const ParamBounds> bounds, std::span<double> out) {
    const std::size_t k = p.size();
    std::vector<double> q(p.begin(), p.end());
    for (std::size_t j = 0; j < k; ++j) {
        const double h = std::max(1e-7 * std::abs(p[j]), 1e-10);
        const double hi = std::min(p[j] + h, bounds[j].hi);
        const double lo = std::max(p[j] - h, bounds[j].lo);
        q[j] = hi;
        const double f_hi = model(std::span<const double>(q), x);
        q[j] = lo;
        const double f_lo = model(std::span<const double>(q), x);
        q[j] = p[j];
        out[j] = hi > lo ? (f_hi - f_lo) / (hi - lo) : 0.0;
    }
}

/// Minimize sum((y_i - model(p, x_i))^2) over every start, projected into the
/// bounds. Returns the best parameter vector; ties on sse break toward the
/// lexicographically smaller vector.
template <class X, class Model>
FitResult nlls_fit(const Model& model, std::span<const X> xs, std::span<const double> ys,
                   std::span<const ParamBounds> bounds,
                   std::span<const std::vector<double>> starts, const FitOptions& opts = {}) {
    const std::size_t m = xs.size();
    if (m != ys.size()) throw ValidationError("nlls_fit: inputs and targets differ in length");
    if (starts.empty()) throw ValidationError("nlls_fit: no starts supplied");
    const std::size_t k = starts.front().size();
    if (k == 0) throw ValidationError("nlls_fit: zero parameters");
    if (bounds.size() != k) throw ValidationError("nlls_fit: bounds/params size mismatch");
    for (const auto& b : bounds)
        if (!(b.lo < b.hi)) throw ValidationError("nlls_fit: degenerate bounds");
    if (m < k + 1)
        throw UnderdeterminedError("nlls_fit: " + std::to_string(m) + " points cannot determine " +
                                   std::to_string(k) + " parameters");

    const auto residuals = [&](std::span<const double> p, std::vector<double>& r) -> double {
        double sse = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double f = model(p, xs[i]);
            if (!std::isfinite(f)) return std::numeric_limits<double>::infinity();
            r[i] = ys[i] - f;
            sse += r[i] * r[i];
        }
        return sse;
    };

    const auto fill_jacobian = [&](std::span<const double> p, std::vector<double>& jac) {
        for (std::size_t i = 0; i < m; ++i) {
            std::span<double> row(jac.data() + i * k, k);
            if constexpr (detail::HasJacobian<Model, X>) {
                model.jacobian(p, xs[i], row);
            } else {
                numeric_jacobian_row(model, p, xs[i], bounds, row);
            }
        }
    };

    FitResult best;
    bool any_start_usable = false;

    std::vector<double> r(m), r_try(m), jac(m * k);
    std::vector<double> jtj(k * k), jtr(k), delta(k), p_try(k);

    for (std::size_t s = 0; s < starts.size(); ++s) {
        if (starts[s].size() != k) throw ValidationError("nlls_fit: start size mismatch");
        std::vector<double> p = starts[s];
        detail::clamp_into(p, bounds);

        double sse = residuals(p, r);
        if (!std::isfinite(sse)) continue;  // this start diverges immediately
        any_start_usable = true;

        double lambda = 1e-3;
        int iters = 0;
        bool converged = false;
        for (; iters < opts.max_iterations; ++iters) {
            fill_jacobian(p, jac);
            bool jac_ok = true;
            for (double v : jac)
                if (!std::isfinite(v)) { jac_ok = false; break; }
            if (!jac_ok) break;

            std::fill(jtj.begin(), jtj.end(), 0.0);
            std::fill(jtr.begin(), jtr.end(), 0.0);
            for (std::size_t i = 0; i < m; ++i) {
                const double* row = jac.data() + i * k;
                for (std::size_t a = 0; a < k; ++a) {
                    jtr[a] += row[a] * r[i];
                    for (std::size_t b = a; b < k; ++b) jtj[a * k + b] += row[a] * row[b];
                }
            }
            for (std::size_t a = 0; a < k; ++a)
                for (std::size_t b = 0; b < a; ++b) jtj[a * k + b] = jtj[b * k + a];

            double grad_norm = 0.0;
            for (std::size_t a = 0; a < k; ++a) grad_norm += jtr[a] * jtr[a];
            grad_norm = std::sqrt(grad_norm);
            if (grad_norm < opts.gtol) {
                converged = true;
                break;
            }

            bool accepted = false;
            for (int attempt = 0; attempt < 40 && lambda < 1e15; ++attempt) {
                if (!detail::solve_damped(jtj, jtr, lambda, k, delta)) {
                    lambda *= 10.0;
                    continue;
                }
                for (std::size_t j = 0; j < k; ++j) p_try[j] = p[j] + delta[j];
                detail::clamp_into(p_try, bounds);
                const double sse_try = residuals(p_try, r_try);
                if (std::isfinite(sse_try) && sse_try < sse) {
                    const double improvement = (sse - sse_try) / std::max(sse, 1e-300);
                    std::copy(p_try.begin(), p_try.end(), p.begin());
                    std::swap(r, r_try);
                    sse = sse_try;
                    lambda = std::max(lambda * 0.3, 1e-12);
                    accepted = true;
                    if (improvement < opts.ftol) converged = true;
                    break;
                }
                lambda *= 10.0;
            }
            if (!accepted) break;  // stalled; bounds block every descent direction
            if (converged) break;
        }

        FitDiagnostics diag;
        diag.iterations = iters;
        diag.converged = converged;
        diag.sse = sse;
        const bool better =
            best.diagnostics.best_start_index < 0 || sse < best.diagnostics.sse ||
            (sse == best.diagnostics.sse &&
             std::lexicographical_compare(p.begin(), p.end(), best.params.begin(),
                                          best.params.end()));
        if (better) {
            best.params = std::move(p);
            best.diagnostics = diag;
            best.diagnostics.best_start_index = static_cast<int>(s);
        }
    }

    if (!any_start_usable)
        throw ConvergenceError("nlls_fit: every start produced non-finite residuals");
    best.diagnostics.n_starts_tried = static_cast<int>(starts.size());
    return best;
}

} // namespace lawline
