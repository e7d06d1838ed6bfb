#pragma once

// Deterministic report assembly: fitted parameters, goodness of fit, the
// intervention matrix, dense curve samples for plotting, and seeded scatter
// subsampling. Fits always use all points; subsampling only thins what is
// drawn.

#include <algorithm>
#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "lawline/analysis.hpp"
#include "lawline/csv.hpp"
#include "lawline/ingest.hpp"
#include "lawline/io_util.hpp"
#include "lawline/laws.hpp"
#include "lawline/rng.hpp"

namespace lawline {

struct ReportOptions {
    Interval interval{0.0, 2.0};
    int curve_samples = 201;
    std::optional<std::size_t> subsample;  // max scatter points drawn per series
    std::uint64_t seed = 0;
};

struct CurveSamples {
    std::string law_id;
    std::vector<std::array<double, 2>> points;
};

struct ScatterSeries {
    std::string name;  // config display name
    std::string x_dataset, y_dataset;
    std::vector<std::array<double, 2>> points;
    std::size_t total_points = 0;  // before subsampling
};

struct Report {
    std::vector<ComputeToLossLaw> compute_laws;
    std::vector<LossToLossLaw> l2l_laws;
    std::optional<InterventionMatrix> matrix;
    std::vector<CurveSamples> curves;
    std::vector<ScatterSeries> scatter;
    std::vector<std::string> notes;
};

namespace detail {

/// Reservoir sample of at most k points, deterministic in (seed, stream).
inline std::vector<std::array<double, 2>> reservoir(
    const std::vector<std::array<double, 2>>& points, std::size_t k, std::uint64_t seed,
    std::uint64_t stream) {
    if (points.size() <= k) return points;
    std::vector<std::array<double, 2>> keep(points.begin(), points.begin() + k);
    auto rng = CounterRng::keyed(seed, stream, 0x5ca77e5);
    for (std::size_t i = k; i < points.size(); ++i) {
        const std::uint64_t j = rng.next_below(i + 1);
        if (j < k) keep[j] = points[i];
    }
    return keep;
}

} // namespace detail

inline Report build_report(std::span<const ConfigGroup> groups,
                           std::span<const ComputeToLossLaw> compute_laws,
                           std::span<const LossToLossLaw> l2l_laws,
                           const std::optional<InterventionMatrix>& matrix,
                           const ReportOptions& options = {}) {
    Report rep;
    rep.compute_laws.assign(compute_laws.begin(), compute_laws.end());
    rep.l2l_laws.assign(l2l_laws.begin(), l2l_laws.end());
    std::sort(rep.compute_laws.begin(), rep.compute_laws.end(),
              [](const auto& a, const auto& b) { return a.id() < b.id(); });
    std::sort(rep.l2l_laws.begin(), rep.l2l_laws.end(),
              [](const auto& a, const auto& b) { return a.id() < b.id(); });
    rep.matrix = matrix;

    for (const auto& law : rep.l2l_laws) {
        CurveSamples c;
        c.law_id = law.id();
        c.points.reserve(options.curve_samples);
        for (int i = 0; i < options.curve_samples; ++i) {
            const double x = options.interval.lo + (options.interval.hi - options.interval.lo) *
                                                       i / (options.curve_samples - 1.0);
            c.points.push_back({x, predict_y(law, x)});
        }
        rep.curves.push_back(std::move(c));
    }

    std::uint64_t stream = 0;
    for (const auto& law : rep.l2l_laws) {
        const auto git = std::find_if(groups.begin(), groups.end(), [&](const ConfigGroup& g) {
            return g.config == law.config;
        });
        if (git == groups.end()) { ++stream; continue; }
        ScatterSeries s;
        s.name = law.config.display();
        s.x_dataset = law.x_dataset;
        s.y_dataset = law.y_dataset;
        for (const auto& rec : git->records) {
            auto ix = rec.losses.find(law.x_dataset);
            auto iy = rec.losses.find(law.y_dataset);
            if (ix == rec.losses.end() || iy == rec.losses.end()) continue;
            s.points.push_back({ix->second.value, iy->second.value});
        }
        s.total_points = s.points.size();
        if (options.subsample)
            s.points = detail::reservoir(s.points, *options.subsample, options.seed, stream);
        rep.scatter.push_back(std::move(s));
        ++stream;
    }

    rep.notes.push_back(
        "curves are extended flat at their y-floor left of the x-floor when sampled or integrated "
        "below e_x");
    rep.notes.push_back("fits use all points; scatter may be subsampled for display only");
    return rep;
}

// --- serialization -------------------------------------------------------------

inline nlohmann::json report_to_json(const Report& rep) {
    nlohmann::json j;
    j["compute_to_loss"] = nlohmann::json::array();
    for (const auto& law : rep.compute_laws) j["compute_to_loss"].push_back(law_to_json(law));
    j["loss_to_loss"] = nlohmann::json::array();
    for (const auto& law : rep.l2l_laws) j["loss_to_loss"].push_back(law_to_json(law));
    j["matrix"] = rep.matrix ? matrix_to_json(*rep.matrix) : nlohmann::json();
    j["curves"] = nlohmann::json::array();
    for (const auto& c : rep.curves)
        j["curves"].push_back({{"law_id", c.law_id}, {"points", c.points}});
    j["scatter"] = nlohmann::json::array();
    for (const auto& s : rep.scatter)
        j["scatter"].push_back({{"name", s.name},
                                {"x_dataset", s.x_dataset},
                                {"y_dataset", s.y_dataset},
                                {"total_points", s.total_points},
                                {"points", s.points}});
    j["notes"] = rep.notes;
    return j;
}

inline std::string matrix_to_csv(const InterventionMatrix& m) {
    csv::Writer w;
    std::vector<std::string> header = {"config"};
    header.insert(header.end(), m.labels.begin(), m.labels.end());
    w.row(header);
    for (std::size_t i = 0; i < m.labels.size(); ++i) {
        std::vector<std::string> row = {m.labels[i]};
        for (double v : m.areas[i]) row.push_back(format_double(v));
        w.row(row);
    }
    return w.str();
}

/// Long-format (a, b, area) rows, convenient for heatmap tooling.
inline std::string matrix_to_pairs_csv(const InterventionMatrix& m) {
    csv::Writer w;
    w.row({"config_a", "config_b", "area"});
    for (std::size_t i = 0; i < m.labels.size(); ++i)
        for (std::size_t j = 0; j < m.labels.size(); ++j)
            w.row({m.labels[i], m.labels[j], format_double(m.areas[i][j])});
    return w.str();
}

inline std::string curve_to_csv(const CurveSamples& c) {
    csv::Writer w;
    w.row({"x", "y"});
    for (const auto& p : c.points) w.row({format_double(p[0]), format_double(p[1])});
    return w.str();
}

} // namespace lawline
