#pragma once

// The two scaling-law families and their fitters.
//
//   compute-to-loss:  L(N, D) = E + ((A/N)^(alpha/beta) + B/D)^beta
//   loss-to-loss:     L_y(L_x) = K * (L_x - E_x)^kappa + E_y
//
// Fitting is two-stage: compute-to-loss fits per dataset give the irreducible
// errors E_x, E_y (or the minimum observed loss when the records lack
// variation in N or D), then K and kappa are fitted with the E's held fixed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "lawline/core.hpp"
#include "lawline/errors.hpp"
#include "lawline/ingest.hpp"
#include "lawline/nlls.hpp"

namespace lawline {

// base clamp inside (L_x - E_x)^kappa; keeps the residual differentiable when
// a point sits numerically at or below the shift
inline constexpr double kShiftClamp = 1e-9;
// observed losses may sit this far below a supplied irreducible error before
// the fit refuses them
inline constexpr double kFloorSlack = 1e-6;

inline double compute_to_loss_value(double e, double a, double b, double alpha, double beta,
                                    double n, double d) {
    const double s = std::pow(a / n, alpha / beta) + b / d;
    return e + std::pow(s, beta);
}

struct ComputeToLossLaw {
    std::string eval_dataset;
    ConfigId config;
    LossUnit unit = LossUnit::NatsPerToken;
    double e_irreducible = 0.0;
    double a_coef = 1.0;
    double b_coef = 1.0;
    double alpha = 1.0;
    double beta = 1.0;
    bool fallback_used = false;
    double sse = 0.0;
    int n_points = 0;
    FitDiagnostics diagnostics;

    double predict(double n, double d) const {
        return compute_to_loss_value(e_irreducible, a_coef, b_coef, alpha, beta, n, d);
    }

    std::string id() const { return "c2l/" + config.slug() + "/" + eval_dataset; }
};

struct LossToLossLaw {
    std::string x_dataset;
    std::string y_dataset;
    ConfigId config;
    LossUnit unit = LossUnit::NatsPerToken;
    double k_coef = 1.0;
    double kappa = 1.0;
    double e_x = 0.0;
    double e_y = 0.0;
    double r_squared = 0.0;
    int n_points = 0;
    FitDiagnostics diagnostics;

    std::string id() const { return "l2l/" + config.slug() + "/" + x_dataset + "->" + y_dataset; }
};

/// K * (l_x - E_x)^kappa + E_y, flat at E_y left of the shift.
inline double predict_y(const LossToLossLaw& law, double l_x) {
    const double base = std::max(l_x - law.e_x, 0.0);
    return law.k_coef * std::pow(base, law.kappa) + law.e_y;
}

/// 1 - SS_res/SS_tot with SS_tot about the mean of the observed y values.
inline double r_squared(const LossToLossLaw& law,
                        std::span<const std::pair<double, double>> points) {
    if (points.size() < 2) throw UnderdeterminedError("r_squared: need at least 2 points");
    double mean = 0.0;
    for (const auto& [x, y] : points) mean += y;
    mean /= static_cast<double>(points.size());
    double ss_tot = 0.0, ss_res = 0.0;
    for (const auto& [x, y] : points) {
        ss_tot += (y - mean) * (y - mean);
        const double r = y - predict_y(law, x);
        ss_res += r * r;
    }
    if (ss_tot == 0.0) throw UndefinedVarianceError("r_squared: targets are constant");
    return 1.0 - ss_res / ss_tot;
}

// --- model functors ----------------------------------------------------------

struct NdPoint {
    double n = 1.0;
    double d = 1.0;
};

/// params = {E, A, B, alpha, beta}
struct ComputeToLossModel {
    double operator()(std::span<const double> p, const NdPoint& x) const {
        return compute_to_loss_value(p[0], p[1], p[2], p[3], p[4], x.n, x.d);
    }

    void jacobian(std::span<const double> p, const NdPoint& x, std::span<double> out) const {
        const double a = p[1], b = p[2], alpha = p[3], beta = p[4];
        const double log_an = std::log(a / x.n);
        const double u = std::exp(alpha / beta * log_an);
        const double s = u + b / x.d;
        const double log_s = std::log(s);
        const double s_bm1 = std::exp((beta - 1.0) * log_s);
        const double s_b = s_bm1 * s;
        out[0] = 1.0;
        out[1] = alpha * s_bm1 * u / a;
        out[2] = beta * s_bm1 / x.d;
        out[3] = s_bm1 * u * log_an;
        out[4] = s_b * log_s - (alpha / beta) * s_bm1 * u * log_an;
    }
};

/// params = {K, kappa}; the shifts are fixed inputs from stage 1.
struct ShiftedPowerModel {
    double e_x = 0.0;
    double e_y = 0.0;

    double operator()(std::span<const double> p, const double& l_x) const {
        const double base = std::max(l_x - e_x, kShiftClamp);
        return p[0] * std::pow(base, p[1]) + e_y;
    }

    void jacobian(std::span<const double> p, const double& l_x, std::span<double> out) const {
        const double base = std::max(l_x - e_x, kShiftClamp);
        const double pw = std::pow(base, p[1]);
        out[0] = pw;
        out[1] = p[0] * pw * std::log(base);
    }
};

// --- point extraction --------------------------------------------------------

namespace detail {

inline LossUnit common_unit(const ConfigGroup& g, std::initializer_list<std::string> datasets) {
    std::optional<LossUnit> unit;
    for (const auto& rec : g.records) {
        for (const auto& label : datasets) {
            auto it = rec.losses.find(label);
            if (it == rec.losses.end()) continue;
            if (!unit) unit = it->second.unit;
            else if (*unit != it->second.unit)
                throw ValidationError("mixed loss units for '" + label +
                                      "' within one fit; convert the records first");
        }
    }
    if (!unit) throw MissingDataError("no records carry the requested dataset(s)");
    return *unit;
}

} // namespace detail

// --- stage 1: compute-to-loss --------------------------------------------------

/// Full five-parameter fit. Requires at least 6 records carrying the dataset
/// and variation in both N and D; the latter failing raises
/// NoAxisVariationError so the caller can fall back to the minimum loss.
inline ComputeToLossLaw fit_compute_to_loss(const ConfigGroup& g, const std::string& eval_dataset) {
    std::vector<NdPoint> xs;
    std::vector<double> ys;
    for (const auto& rec : g.records) {
        auto it = rec.losses.find(eval_dataset);
        if (it == rec.losses.end()) continue;
        xs.push_back({static_cast<double>(rec.params_n), static_cast<double>(rec.tokens_d)});
        ys.push_back(it->second.value);
    }
    if (ys.empty())
        throw MissingDataError("fit_compute_to_loss: no records carry '" + eval_dataset + "'");
    const LossUnit unit = detail::common_unit(g, {eval_dataset});
    if (ys.size() < 6)
        throw UnderdeterminedError("fit_compute_to_loss: need >= 6 records with '" + eval_dataset +
                                   "', have " + std::to_string(ys.size()));
    std::set<double> n_values, d_values;
    for (const auto& x : xs) {
        n_values.insert(x.n);
        d_values.insert(x.d);
    }
    if (n_values.size() < 2 || d_values.size() < 2)
        throw NoAxisVariationError(
            "fit_compute_to_loss: records vary in neither N nor D direction; "
            "use estimate_irreducible_fallback");

    const double min_loss = *std::min_element(ys.begin(), ys.end());
    const double max_loss = *std::max_element(ys.begin(), ys.end());
    if (max_loss - min_loss < 1e-12 * std::max(1.0, std::abs(max_loss)))
        throw UnderdeterminedError("fit_compute_to_loss: loss is constant across the grid");

    const std::vector<ParamBounds> bounds = {{0.0, std::max(min_loss, 1e-12)},
                                             {1e-12, 1e12},
                                             {1e-12, 1e12},
                                             {1e-8, 2.0},
                                             {1e-8, 2.0}};

    // extreme points for the log-linear A/B initialization: the N-term
    // dominates at small N / large D, the D-term at small D / large N
    std::size_t i_n = 0, i_d = 0;
    for (std::size_t i = 1; i < xs.size(); ++i) {
        if (xs[i].n < xs[i_n].n || (xs[i].n == xs[i_n].n && xs[i].d > xs[i_n].d)) i_n = i;
        if (xs[i].d < xs[i_d].d || (xs[i].d == xs[i_d].d && xs[i].n > xs[i_d].n)) i_d = i;
    }

    std::vector<std::vector<double>> starts;
    for (double e0 : {0.0, 0.5 * min_loss, 0.9 * min_loss}) {
        for (double a0 : {0.2, 0.35, 0.5}) {
            for (double b0 : {0.2, 0.35, 0.5}) {
                const double r_n = std::max(ys[i_n] - e0, 1e-6);
                const double r_d = std::max(ys[i_d] - e0, 1e-6);
                const double a_init =
                    std::clamp(xs[i_n].n * std::pow(r_n, 1.0 / a0), 1e-12, 1e12);
                const double b_init =
                    std::clamp(xs[i_d].d * std::pow(r_d, 1.0 / b0), 1e-12, 1e12);
                starts.push_back({e0, a_init, b_init, a0, b0});
            }
        }
    }

    FitResult fit = nlls_fit<NdPoint>(ComputeToLossModel{}, std::span<const NdPoint>(xs),
                                      std::span<const double>(ys), bounds, starts);

    ComputeToLossLaw law;
    law.eval_dataset = eval_dataset;
    law.config = g.config;
    law.unit = unit;
    law.e_irreducible = fit.params[0];
    law.a_coef = fit.params[1];
    law.b_coef = fit.params[2];
    law.alpha = fit.params[3];
    law.beta = fit.params[4];
    law.fallback_used = false;
    law.sse = fit.diagnostics.sse;
    law.n_points = static_cast<int>(ys.size());
    law.diagnostics = fit.diagnostics;
    return law;
}

/// Minimum observed loss on the dataset: the irreducible-error estimate when a
/// compute-to-loss law cannot be fitted.
inline double estimate_irreducible_fallback(const ConfigGroup& g, const std::string& eval_dataset) {
    double best = std::numeric_limits<double>::infinity();
    bool found = false;
    for (const auto& rec : g.records) {
        auto it = rec.losses.find(eval_dataset);
        if (it == rec.losses.end()) continue;
        best = std::min(best, it->second.value);
        found = true;
    }
    if (!found)
        throw MissingDataError("estimate_irreducible_fallback: no records carry '" + eval_dataset +
                               "'");
    return best;
}

struct IrreducibleEstimate {
    double value = 0.0;
    bool fallback_used = false;
    std::optional<ComputeToLossLaw> law;  // present when the full fit succeeded
};

/// Stage 1 with the fallback built in: a full compute-to-loss fit where the
/// data supports one, the minimum observed loss otherwise.
inline IrreducibleEstimate estimate_irreducible(const ConfigGroup& g,
                                                const std::string& eval_dataset) {
    try {
        ComputeToLossLaw law = fit_compute_to_loss(g, eval_dataset);
        return {law.e_irreducible, false, std::move(law)};
    } catch (const UnderdeterminedError&) {
        // covers single-axis grids and too-few-record groups alike
        return {estimate_irreducible_fallback(g, eval_dataset), true, std::nullopt};
    }
}

// --- stage 2: loss-to-loss -----------------------------------------------------

/// Fit K, kappa with the irreducible errors held fixed (they are stage-1
/// outputs, never touched here).
inline LossToLossLaw fit_loss_to_loss(const ConfigGroup& g, const std::string& x_dataset,
                                      const std::string& y_dataset, double e_x, double e_y) {
    std::vector<double> lx, ly;
    for (const auto& rec : g.records) {
        auto ix = rec.losses.find(x_dataset);
        auto iy = rec.losses.find(y_dataset);
        if (ix == rec.losses.end() || iy == rec.losses.end()) continue;
        lx.push_back(ix->second.value);
        ly.push_back(iy->second.value);
    }
    if (lx.size() < 3)
        throw UnderdeterminedError("fit_loss_to_loss: need >= 3 records carrying both '" +
                                   x_dataset + "' and '" + y_dataset + "', have " +
                                   std::to_string(lx.size()));
    const LossUnit unit = detail::common_unit(g, {x_dataset, y_dataset});
    const double min_x = *std::min_element(lx.begin(), lx.end());
    const double min_y = *std::min_element(ly.begin(), ly.end());
    if (e_x > min_x + kFloorSlack)
        throw ValidationError("fit_loss_to_loss: e_x exceeds the minimum observed x loss");
    if (e_y > min_y + kFloorSlack)
        throw ValidationError("fit_loss_to_loss: e_y exceeds the minimum observed y loss");

    const ShiftedPowerModel model{e_x, e_y};
    const std::vector<ParamBounds> bounds = {{1e-12, 1e6}, {1e-8, 10.0}};

    // widest point anchors the one-point solve for K
    std::size_t j = 0;
    for (std::size_t i = 1; i < lx.size(); ++i)
        if (lx[i] > lx[j]) j = i;
    const double base_j = std::max(lx[j] - e_x, kShiftClamp);
    std::vector<std::vector<double>> starts;
    for (double kappa0 : {0.5, 1.0, 1.5, 2.0}) {
        const double k0 =
            std::clamp(std::max(ly[j] - e_y, 1e-6) / std::pow(base_j, kappa0), 1e-12, 1e6);
        starts.push_back({k0, kappa0});
    }

    FitResult fit = nlls_fit<double>(model, std::span<const double>(lx),
                                     std::span<const double>(ly), bounds, starts);

    LossToLossLaw law;
    law.x_dataset = x_dataset;
    law.y_dataset = y_dataset;
    law.config = g.config;
    law.unit = unit;
    law.k_coef = fit.params[0];
    law.kappa = fit.params[1];
    law.e_x = e_x;
    law.e_y = e_y;
    law.n_points = static_cast<int>(lx.size());
    law.diagnostics = fit.diagnostics;

    std::vector<std::pair<double, double>> pts(lx.size());
    for (std::size_t i = 0; i < lx.size(); ++i) pts[i] = {lx[i], ly[i]};
    law.r_squared = r_squared(law, pts);
    return law;
}

struct TwoStageFit {
    IrreducibleEstimate x_floor;
    IrreducibleEstimate y_floor;
    LossToLossLaw law;
};

/// The end-to-end procedure: irreducible errors from per-dataset
/// compute-to-loss fits (min-loss fallback where needed), then the shifted
/// power law between the two datasets.
inline TwoStageFit fit_two_stage(const ConfigGroup& g, const std::string& x_dataset,
                                 const std::string& y_dataset) {
    TwoStageFit out;
    out.x_floor = estimate_irreducible(g, x_dataset);
    out.y_floor = estimate_irreducible(g, y_dataset);
    out.law = fit_loss_to_loss(g, x_dataset, y_dataset, out.x_floor.value, out.y_floor.value);
    return out;
}

// --- serialization -------------------------------------------------------------

inline nlohmann::json diagnostics_to_json(const FitDiagnostics& d) {
    return {{"iterations", d.iterations},
            {"converged", d.converged},
            {"sse", d.sse},
            {"n_starts_tried", d.n_starts_tried},
            {"best_start_index", d.best_start_index}};
}

inline FitDiagnostics diagnostics_from_json(const nlohmann::json& j) {
    FitDiagnostics d;
    d.iterations = j.at("iterations").get<int>();
    d.converged = j.at("converged").get<bool>();
    d.sse = j.at("sse").get<double>();
    d.n_starts_tried = j.at("n_starts_tried").get<int>();
    d.best_start_index = j.at("best_start_index").get<int>();
    return d;
}

inline nlohmann::json law_to_json(const ComputeToLossLaw& law) {
    return {{"type", "compute_to_loss"},
            {"config", config_to_json(law.config)},
            {"eval_dataset", law.eval_dataset},
            {"unit", unit_name(law.unit)},
            {"e", law.e_irreducible},
            {"a", law.a_coef},
            {"b", law.b_coef},
            {"alpha", law.alpha},
            {"beta", law.beta},
            {"fallback_used", law.fallback_used},
            {"sse", law.sse},
            {"n_points", law.n_points},
            {"diagnostics", diagnostics_to_json(law.diagnostics)}};
}

inline nlohmann::json law_to_json(const LossToLossLaw& law) {
    return {{"type", "loss_to_loss"},
            {"config", config_to_json(law.config)},
            {"x_dataset", law.x_dataset},
            {"y_dataset", law.y_dataset},
            {"unit", unit_name(law.unit)},
            {"k", law.k_coef},
            {"kappa", law.kappa},
            {"e_x", law.e_x},
            {"e_y", law.e_y},
            {"r_squared", law.r_squared},
            {"n_points", law.n_points},
            {"diagnostics", diagnostics_to_json(law.diagnostics)}};
}

inline ComputeToLossLaw compute_law_from_json(const nlohmann::json& j) {
    if (j.value("type", "") != "compute_to_loss")
        throw ValidationError("expected a compute_to_loss law");
    ComputeToLossLaw law;
    law.config = config_from_json(j.at("config"));
    law.eval_dataset = j.at("eval_dataset").get<std::string>();
    law.unit = parse_unit(j.at("unit").get<std::string>());
    law.e_irreducible = j.at("e").get<double>();
    law.a_coef = j.at("a").get<double>();
    law.b_coef = j.at("b").get<double>();
    law.alpha = j.at("alpha").get<double>();
    law.beta = j.at("beta").get<double>();
    law.fallback_used = j.at("fallback_used").get<bool>();
    law.sse = j.at("sse").get<double>();
    law.n_points = j.at("n_points").get<int>();
    if (j.contains("diagnostics")) law.diagnostics = diagnostics_from_json(j.at("diagnostics"));
    if (law.e_irreducible < 0 || law.a_coef <= 0 || law.b_coef <= 0 || law.alpha <= 0 ||
        law.beta <= 0)
        throw ValidationError("compute_to_loss law violates parameter constraints");
    return law;
}

inline LossToLossLaw l2l_law_from_json(const nlohmann::json& j) {
    if (j.value("type", "") != "loss_to_loss") throw ValidationError("expected a loss_to_loss law");
    LossToLossLaw law;
    law.config = config_from_json(j.at("config"));
    law.x_dataset = j.at("x_dataset").get<std::string>();
    law.y_dataset = j.at("y_dataset").get<std::string>();
    law.unit = parse_unit(j.at("unit").get<std::string>());
    law.k_coef = j.at("k").get<double>();
    law.kappa = j.at("kappa").get<double>();
    law.e_x = j.at("e_x").get<double>();
    law.e_y = j.at("e_y").get<double>();
    law.r_squared = j.at("r_squared").get<double>();
    law.n_points = j.at("n_points").get<int>();
    if (j.contains("diagnostics")) law.diagnostics = diagnostics_from_json(j.at("diagnostics"));
    if (law.k_coef <= 0 || law.kappa <= 0 || law.e_x < 0 || law.e_y < 0)
        throw ValidationError("loss_to_loss law violates parameter constraints");
    return law;
}

} // namespace lawline
