#pragma once

// Synthetic checkpoint records from known ground-truth laws. The generator
// inverts the fitting pipeline: choose law parameters, emit records, fit, and
// compare against what was chosen. Interventions rewrite the spec the way a
// real training change would move the curves.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "lawline/core.hpp"
#include "lawline/errors.hpp"
#include "lawline/ingest.hpp"
#include "lawline/laws.hpp"
#include "lawline/parallel.hpp"
#include "lawline/rng.hpp"

namespace lawline {

struct PowerLawParams {
    double e = 0.0;
    double a = 1.0;
    double b = 1.0;
    double alpha = 0.5;
    double beta = 0.5;

    double value(double n, double d) const { return compute_to_loss_value(e, a, b, alpha, beta, n, d); }
};

struct Coupling {
    double k = 1.0;
    double kappa = 1.0;
    double e_x = 0.0;
    double e_y = 0.0;

    double value(double l_x) const { return k * std::pow(std::max(l_x - e_x, 0.0), kappa) + e_y; }
};

struct WorldSpec {
    ConfigId config;
    std::string x_dataset;
    std::map<std::string, PowerLawParams> compute_laws;  // independently generated datasets
    std::map<std::string, Coupling> couplings;           // y-datasets driven by the x loss
    double noise_sigma = 0.0;
    LossUnit unit = LossUnit::BitsPerByte;
    std::vector<std::uint64_t> params_grid;
    std::vector<std::uint64_t> tokens_grid;
    std::vector<std::int64_t> seeds;
    std::uint64_t eval_token_count = 1'000'000;
    std::uint64_t eval_byte_count = 4'200'000;
};

inline void validate(const WorldSpec& w) {
    validate(w.config);
    if (w.compute_laws.empty()) throw ValidationError("world: no compute-to-loss laws");
    if (!w.compute_laws.count(w.x_dataset))
        throw ValidationError("world: x_dataset '" + w.x_dataset + "' has no compute-to-loss law");
    for (const auto& [label, p] : w.compute_laws) {
        if (p.e < 0 || !(p.a > 0) || p.a > 1e12 || !(p.b > 0) || p.b > 1e12 || !(p.alpha > 0) ||
            p.alpha > 2 || !(p.beta > 0) || p.beta > 2)
            throw ValidationError("world: compute-to-loss parameters for '" + label +
                                  "' out of bounds");
        if (w.couplings.count(label))
            throw ValidationError("world: '" + label + "' is both independent and coupled");
    }
    for (const auto& [label, c] : w.couplings) {
        if (!(c.k > 0) || c.k > 1e6 || !(c.kappa > 0) || c.kappa > 10 || c.e_x < 0 || c.e_y < 0)
            throw ValidationError("world: coupling parameters for '" + label + "' out of bounds");
    }
    if (w.noise_sigma < 0) throw ValidationError("world: noise_sigma must be >= 0");
    if (w.params_grid.empty() || w.tokens_grid.empty() || w.seeds.empty())
        throw ValidationError("world: N/D/seed grids must be non-empty");
    for (auto n : w.params_grid)
        if (n < 1) throw ValidationError("world: params grid entries must be >= 1");
    for (auto d : w.tokens_grid)
        if (d < 1) throw ValidationError("world: tokens grid entries must be >= 1");
    if (w.eval_token_count < 1 || w.eval_byte_count < 1)
        throw ValidationError("world: eval token/byte counts must be >= 1");
}

/// One record per (N, D, seed) grid point. Each grid point draws from its own
/// counter-keyed stream, so parallel and serial runs emit identical records.
/// Coupled losses are derived from the noiseless x loss, then get their own
/// independent noise.
inline RecordSet generate(const WorldSpec& w, std::uint64_t rng_seed) {
    validate(w);
    const std::size_t n_n = w.params_grid.size();
    const std::size_t n_d = w.tokens_grid.size();
    const std::size_t n_s = w.seeds.size();
    const std::size_t total = n_n * n_d * n_s;

    std::vector<std::string> dataset_order;
    for (const auto& [label, p] : w.compute_laws) dataset_order.push_back(label);
    for (const auto& [label, c] : w.couplings) dataset_order.push_back(label);

    RecordSet rs;
    rs.source = "synthetic";
    rs.records.resize(total);

    const PowerLawParams& x_law = w.compute_laws.at(w.x_dataset);
    parallel_for(total, [&](std::size_t flat) {
        const std::size_t i = flat / (n_d * n_s);
        const std::size_t j = (flat / n_s) % n_d;
        const std::size_t s = flat % n_s;
        const double n = static_cast<double>(w.params_grid[i]);
        const double d = static_cast<double>(w.tokens_grid[j]);

        CheckpointRecord rec;
        rec.config = w.config;
        rec.params_n = w.params_grid[i];
        rec.tokens_d = w.tokens_grid[j];
        rec.seed = w.seeds[s];
        rec.step = j;

        const double lx_clean = x_law.value(n, d);
        std::uint64_t ordinal = 0;
        for (const auto& label : dataset_order) {
            double clean;
            const auto cl = w.compute_laws.find(label);
            if (cl != w.compute_laws.end()) clean = cl->second.value(n, d);
            else clean = w.couplings.at(label).value(lx_clean);
            auto rng = CounterRng::keyed(rng_seed, flat, ordinal++);
            const double value = std::max(0.0, clean + w.noise_sigma * rng.next_gaussian());
            LossMeasurement m;
            m.dataset = label;
            m.value = value;
            m.unit = w.unit;
            m.token_count = w.eval_token_count;
            m.byte_count = w.eval_byte_count;
            rec.losses.emplace(label, std::move(m));
        }
        rs.records[flat] = std::move(rec);
    });
    return rs;
}

enum class InterventionKind { DataShift, ArchNoise, TokenizerShift };

inline std::string_view intervention_name(InterventionKind k) {
    switch (k) {
        case InterventionKind::DataShift: return "data_shift";
        case InterventionKind::ArchNoise: return "arch_noise";
        case InterventionKind::TokenizerShift: return "tokenizer_shift";
    }
    return "?";
}

/// Rewrite a world the way a training intervention would.
///   DataShift      — new pretraining distribution: every coupling's y-floor
///                    moves by `magnitude`, putting the models on a new line.
///   ArchNoise      — architecture swap that only adds scatter: noise_sigma
///                    grows by `magnitude`, the underlying line is unchanged.
///   TokenizerShift — retokenization: token counts scale by (1 + magnitude);
///                    nats-per-token laws rescale accordingly, so the
///                    bits-per-byte line is unchanged.
/// magnitude 0 returns the spec unchanged.
inline WorldSpec apply_intervention(const WorldSpec& w, InterventionKind kind, double magnitude) {
    if (magnitude < 0) throw ValidationError("apply_intervention: magnitude must be >= 0");
    WorldSpec out = w;
    if (magnitude == 0.0) return out;
    switch (kind) {
        case InterventionKind::DataShift: {
            for (auto& [label, c] : out.couplings) c.e_y += magnitude;
            out.config.pretrain_data += "+shift";
            break;
        }
        case InterventionKind::ArchNoise: {
            out.noise_sigma += magnitude;
            out.config.architecture += "+variant";
            break;
        }
        case InterventionKind::TokenizerShift: {
            const std::uint64_t old_tok = out.eval_token_count;
            const std::uint64_t new_tok = std::max<std::uint64_t>(
                1, static_cast<std::uint64_t>(std::llround(
                       static_cast<double>(old_tok) * (1.0 + magnitude))));
            out.eval_token_count = new_tok;
            if (out.unit == LossUnit::NatsPerToken) {
                // per-token loss scales inversely with the token count so the
                // total nats on the evaluated text stay put
                const double c = static_cast<double>(old_tok) / static_cast<double>(new_tok);
                for (auto& [label, p] : out.compute_laws) {
                    p.e *= c;
                    p.a *= std::pow(c, 1.0 / p.alpha);
                    p.b *= std::pow(c, 1.0 / p.beta);
                }
                for (auto& [label, cp] : out.couplings) {
                    cp.k *= std::pow(c, 1.0 - cp.kappa);
                    cp.e_x *= c;
                    cp.e_y *= c;
                }
            }
            out.config.tokenizer += "+retok";
            break;
        }
    }
    validate(out);
    return out;
}

/// A plausible stand-in for a real training sweep: nine model sizes up to
/// 420M parameters, token budgets up to 20x the largest size, three seeds.
inline WorldSpec default_world() {
    WorldSpec w;
    w.config = {"webcorpus", "transformer", "bpe50k", {}};
    w.x_dataset = "webcorpus_val";
    w.compute_laws["webcorpus_val"] = {2.0, 2.5e8, 2.5e9, 0.34, 0.28};
    w.couplings["downstream_avg"] = {0.9, 1.15, 2.0, 1.4};
    w.noise_sigma = 0.01;
    w.unit = LossUnit::BitsPerByte;
    w.params_grid = {59'000'000,  72'000'000,  76'000'000,  145'000'000, 158'000'000,
                     172'000'000, 314'000'000, 365'000'000, 420'000'000};
    const double d_lo = std::log(2e8), d_hi = std::log(8.4e9);
    for (int i = 0; i < 20; ++i)
        w.tokens_grid.push_back(static_cast<std::uint64_t>(
            std::llround(std::exp(d_lo + (d_hi - d_lo) * i / 19.0))));
    w.seeds = {1, 2, 3};
    return w;
}

// --- serialization -------------------------------------------------------------

inline nlohmann::json world_to_json(const WorldSpec& w) {
    nlohmann::json laws = nlohmann::json::object();
    for (const auto& [label, p] : w.compute_laws)
        laws[label] = {{"e", p.e}, {"a", p.a}, {"b", p.b}, {"alpha", p.alpha}, {"beta", p.beta}};
    nlohmann::json couplings = nlohmann::json::object();
    for (const auto& [label, c] : w.couplings)
        couplings[label] = {{"k", c.k}, {"kappa", c.kappa}, {"e_x", c.e_x}, {"e_y", c.e_y}};
    return {{"config", config_to_json(w.config)},
            {"x_dataset", w.x_dataset},
            {"compute_laws", std::move(laws)},
            {"couplings", std::move(couplings)},
            {"noise_sigma", w.noise_sigma},
            {"unit", unit_name(w.unit)},
            {"params_grid", w.params_grid},
            {"tokens_grid", w.tokens_grid},
            {"seeds", w.seeds},
            {"eval_token_count", w.eval_token_count},
            {"eval_byte_count", w.eval_byte_count}};
}

inline WorldSpec world_from_json(const nlohmann::json& j) {
    WorldSpec w;
    w.config = config_from_json(j.at("config"));
    w.x_dataset = j.at("x_dataset").get<std::string>();
    for (auto it = j.at("compute_laws").begin(); it != j.at("compute_laws").end(); ++it) {
        PowerLawParams p;
        p.e = it.value().at("e").get<double>();
        p.a = it.value().at("a").get<double>();
        p.b = it.value().at("b").get<double>();
        p.alpha = it.value().at("alpha").get<double>();
        p.beta = it.value().at("beta").get<double>();
        w.compute_laws[it.key()] = p;
    }
    if (j.contains("couplings")) {
        for (auto it = j.at("couplings").begin(); it != j.at("couplings").end(); ++it) {
            Coupling c;
            c.k = it.value().at("k").get<double>();
            c.kappa = it.value().at("kappa").get<double>();
            c.e_x = it.value().at("e_x").get<double>();
            c.e_y = it.value().at("e_y").get<double>();
            w.couplings[it.key()] = c;
        }
    }
    w.noise_sigma = j.value("noise_sigma", 0.0);
    w.unit = parse_unit(j.value("unit", "bits_per_byte"));
    w.params_grid = j.at("params_grid").get<std::vector<std::uint64_t>>();
    w.tokens_grid = j.at("tokens_grid").get<std::vector<std::uint64_t>>();
    w.seeds = j.at("seeds").get<std::vector<std::int64_t>>();
    w.eval_token_count = j.value("eval_token_count", std::uint64_t{1'000'000});
    w.eval_byte_count = j.value("eval_byte_count", std::uint64_t{4'200'000});
    validate(w);
    return w;
}

} // namespace lawline
