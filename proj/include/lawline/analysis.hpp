#pragma once

// Intervention quantification and law composition. The distance between two
// fitted loss-to-loss curves is the L1 area between them on a fixed interval
// (default [0, 2] in bits-per-byte). Curves are evaluated with the flat
// extension left of their x-floor, so the integrand is defined on the whole
// interval; crossings are isolated by bracketed bisection so the |.| kinks
// never straddle a quadrature panel.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "lawline/errors.hpp"
#include "lawline/laws.hpp"
#include "lawline/parallel.hpp"

namespace lawline {

struct Interval {
    double lo = 0.0;
    double hi = 2.0;
};

namespace detail {

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double fa,
                               double b, double fb, double c, double fc, double whole, double tol,
                               int depth) {
    const double m1 = 0.5 * (a + c);
    const double m2 = 0.5 * (c + b);
    const double fm1 = f(m1);
    const double fm2 = f(m2);
    const double left = (c - a) / 6.0 * (fa + 4.0 * fm1 + fc);
    const double right = (b - c) / 6.0 * (fc + 4.0 * fm2 + fb);
    const double err = left + right - whole;
    if (depth <= 0 || std::abs(err) <= 15.0 * tol) return left + right + err / 15.0;
    return adaptive_simpson(f, a, fa, c, fc, m1, fm1, left, 0.5 * tol, depth - 1) +
           adaptive_simpson(f, c, fc, b, fb, m2, fm2, right, 0.5 * tol, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
    if (b <= a) return 0.0;
    const double c = 0.5 * (a + b);
    const double fa = f(a), fb = f(b), fc = f(c);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
    return adaptive_simpson(f, a, fa, b, fb, c, fc, whole, tol, 60);
}

/// Root of g on [a, b] given g(a), g(b) of opposite sign.
inline double bisect_root(const std::function<double(double)>& g, double a, double b, double ga) {
    for (int i = 0; i < 200; ++i) {
        const double m = 0.5 * (a + b);
        if (m == a || m == b) break;
        const double gm = g(m);
        if (gm == 0.0) return m;
        if ((ga < 0.0) != (gm < 0.0)) b = m;
        else a = m, ga = gm;
    }
    return 0.5 * (a + b);
}

} // namespace detail

/// Integral of |y_a(x) - y_b(x)| over the interval, to ~1e-8 absolute.
inline double area_between(const LossToLossLaw& a, const LossToLossLaw& b,
                           Interval interval = {0.0, 2.0}) {
    if (a.unit != b.unit)
        throw InvalidComparisonError("area_between: laws carry different loss units");
    if (a.x_dataset != b.x_dataset || a.y_dataset != b.y_dataset)
        throw InvalidComparisonError("area_between: laws relate different dataset pairs (" +
                                     a.x_dataset + "->" + a.y_dataset + " vs " + b.x_dataset +
                                     "->" + b.y_dataset + ")");
    if (!(interval.lo < interval.hi))
        throw ValidationError("area_between: interval lo must be < hi");

    const auto diff = [&](double x) { return predict_y(a, x) - predict_y(b, x); };
    const auto abs_diff = [&](double x) { return std::abs(diff(x)); };

    // panel boundaries: interval ends, each curve's floor kink, crossings
    std::vector<double> cuts = {interval.lo, interval.hi};
    for (double e : {a.e_x, b.e_x})
        if (e > interval.lo && e < interval.hi) cuts.push_back(e);
    std::sort(cuts.begin(), cuts.end());

    std::vector<double> breaks;
    for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
        const double lo = cuts[p], hi = cuts[p + 1];
        constexpr int kScan = 256;
        double x_prev = lo;
        double d_prev = diff(lo);
        for (int i = 1; i <= kScan; ++i) {
            const double x = lo + (hi - lo) * i / kScan;
            const double d = diff(x);
            if (d_prev == 0.0) {
                if (d != 0.0) breaks.push_back(x_prev);
            } else if ((d_prev < 0.0) != (d < 0.0) && d != 0.0) {
                breaks.push_back(detail::bisect_root(diff, x_prev, x, d_prev));
            }
            x_prev = x;
            d_prev = d;
        }
    }
    cuts.insert(cuts.end(), breaks.begin(), breaks.end());
    std::sort(cuts.begin(), cuts.end());

    const double width = interval.hi - interval.lo;
    double total = 0.0;
    for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
        const double w = cuts[p + 1] - cuts[p];
        if (w <= 0.0) continue;
        total += detail::integrate(abs_diff, cuts[p], cuts[p + 1],
                                   std::max(1e-8 * w / width, 1e-16));
    }
    return total;
}

/// Pairwise curve distances across configurations: symmetric, zero diagonal.
struct InterventionMatrix {
    std::vector<std::string> labels;
    std::vector<std::vector<double>> areas;
    Interval interval;
    std::string x_dataset;
    std::string y_dataset;
    LossUnit unit = LossUnit::BitsPerByte;
};

inline InterventionMatrix intervention_matrix(
    std::span<const std::pair<std::string, LossToLossLaw>> laws, Interval interval = {0.0, 2.0}) {
    if (laws.size() < 2)
        throw ValidationError("intervention_matrix: need at least 2 laws, have " +
                              std::to_string(laws.size()));
    const auto& ref = laws.front().second;
    for (const auto& [name, law] : laws) {
        if (law.unit != ref.unit)
            throw InvalidComparisonError("intervention_matrix: '" + name +
                                         "' carries a different loss unit");
        if (law.x_dataset != ref.x_dataset || law.y_dataset != ref.y_dataset)
            throw InvalidComparisonError("intervention_matrix: '" + name +
                                         "' relates a different dataset pair");
    }

    const std::size_t n = laws.size();
    InterventionMatrix m;
    m.interval = interval;
    m.x_dataset = ref.x_dataset;
    m.y_dataset = ref.y_dataset;
    m.unit = ref.unit;
    m.labels.reserve(n);
    for (const auto& [name, law] : laws) m.labels.push_back(name);
    m.areas.assign(n, std::vector<double>(n, 0.0));

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    parallel_for(pairs.size(), [&](std::size_t t) {
        const auto [i, j] = pairs[t];
        const double area = area_between(laws[i].second, laws[j].second, interval);
        m.areas[i][j] = area;
        m.areas[j][i] = area;
    });
    return m;
}

/// Composition of a compute-to-loss law with a loss-to-loss law: compute
/// budget -> train loss -> downstream loss.
struct DownstreamForecast {
    std::uint64_t params_n = 0;
    std::uint64_t tokens_d = 0;
    double predicted_train_loss = 0.0;
    double predicted_test_loss = 0.0;
    std::string train_law_id;
    std::string l2l_law_id;
};

inline DownstreamForecast forecast_downstream(const ComputeToLossLaw& train_law,
                                              const LossToLossLaw& l2l, std::uint64_t params_n,
                                              std::uint64_t tokens_d) {
    if (train_law.eval_dataset != l2l.x_dataset)
        throw InvalidCompositionError("forecast_downstream: train law predicts '" +
                                      train_law.eval_dataset + "' but the loss-to-loss law maps '" +
                                      l2l.x_dataset + "'");
    if (train_law.config != l2l.config)
        throw InvalidCompositionError("forecast_downstream: laws come from different configs");
    if (train_law.unit != l2l.unit)
        throw InvalidCompositionError("forecast_downstream: laws carry different loss units");
    if (train_law.fallback_used)
        throw InvalidCompositionError(
            "forecast_downstream: the train law is a min-loss fallback and cannot map (N, D)");
    if (params_n < 1 || tokens_d < 1)
        throw ValidationError("forecast_downstream: N and D must be >= 1");

    DownstreamForecast f;
    f.params_n = params_n;
    f.tokens_d = tokens_d;
    f.predicted_train_loss =
        train_law.predict(static_cast<double>(params_n), static_cast<double>(tokens_d));
    f.predicted_test_loss = predict_y(l2l, f.predicted_train_loss);
    f.train_law_id = train_law.id();
    f.l2l_law_id = l2l.id();
    return f;
}

// --- serialization -------------------------------------------------------------

inline nlohmann::json matrix_to_json(const InterventionMatrix& m) {
    return {{"labels", m.labels},
            {"areas", m.areas},
            {"interval", {m.interval.lo, m.interval.hi}},
            {"x_dataset", m.x_dataset},
            {"y_dataset", m.y_dataset},
            {"unit", unit_name(m.unit)}};
}

inline InterventionMatrix matrix_from_json(const nlohmann::json& j) {
    InterventionMatrix m;
    m.labels = j.at("labels").get<std::vector<std::string>>();
    m.areas = j.at("areas").get<std::vector<std::vector<double>>>();
    m.interval = {j.at("interval").at(0).get<double>(), j.at("interval").at(1).get<double>()};
    m.x_dataset = j.at("x_dataset").get<std::string>();
    m.y_dataset = j.at("y_dataset").get<std::string>();
    m.unit = parse_unit(j.at("unit").get<std::string>());
    return m;
}

inline nlohmann::json forecast_to_json(const DownstreamForecast& f) {
    return {{"params_n", f.params_n},
            {"tokens_d", f.tokens_d},
            {"predicted_train_loss", f.predicted_train_loss},
            {"predicted_test_loss", f.predicted_test_loss},
            {"laws_used", {{"compute_to_loss", f.train_law_id}, {"loss_to_loss", f.l2l_law_id}}}};
}

} // namespace lawline
