#pragma once

// Shared fixtures for the test suites: record builders, the parameter-recovery
// world, and the published per-row averages for the bundled evaluation grid.

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lawline/lawline.hpp"

namespace testutil {

inline lawline::ConfigId config(const std::string& data = "corpus-a",
                                const std::string& arch = "transformer",
                                const std::string& tok = "bpe") {
    return {data, arch, tok, {}};
}

inline lawline::CheckpointRecord record(const lawline::ConfigId& cfg, std::uint64_t n,
                                        std::uint64_t d,
                                        const std::map<std::string, double>& losses,
                                        lawline::LossUnit unit = lawline::LossUnit::NatsPerToken) {
    lawline::CheckpointRecord rec;
    rec.config = cfg;
    rec.params_n = n;
    rec.tokens_d = d;
    for (const auto& [label, value] : losses)
        rec.losses[label] = {label, value, unit, std::nullopt, std::nullopt};
    return rec;
}

inline std::vector<std::uint64_t> log_grid(double lo, double hi, int count) {
    std::vector<std::uint64_t> out;
    for (int i = 0; i < count; ++i)
        out.push_back(static_cast<std::uint64_t>(
            std::llround(std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i /
                                                     (count - 1.0)))));
    return out;
}

/// Ground-truth world used for estimator-recovery checks: the N/D grid spans
/// enough orders of magnitude that the x loss sweeps [~2.06, ~2.95], well away
/// from degenerate plateaus.
inline lawline::WorldSpec recovery_world(double sigma) {
    lawline::WorldSpec w;
    w.config = config();
    w.x_dataset = "val_x";
    w.compute_laws["val_x"] = {2.0, 400.0, 2000.0, 0.34, 0.28};
    w.couplings["test_y"] = {0.8, 1.3, 2.0, 1.5};
    w.noise_sigma = sigma;
    w.unit = lawline::LossUnit::NatsPerToken;
    w.params_grid = log_grid(1e3, 1e7, 9);
    w.tokens_grid = log_grid(4e3, 4e7, 20);
    w.seeds = {1, 2, 3};
    return w;
}

/// World whose losses look like bits-per-byte values, for interval-[0,2]
/// comparisons: floors sit inside the interval.
inline lawline::WorldSpec bpb_world(double sigma) {
    lawline::WorldSpec w;
    w.config = config("corpus-a", "transformer", "bpe");
    w.x_dataset = "val_x";
    w.compute_laws["val_x"] = {0.6, 400.0, 2000.0, 0.34, 0.28};
    w.couplings["test_y"] = {0.9, 1.1, 0.6, 0.9};
    w.noise_sigma = sigma;
    w.unit = lawline::LossUnit::BitsPerByte;
    w.params_grid = log_grid(1e3, 1e7, 9);
    w.tokens_grid = log_grid(4e3, 4e7, 20);
    w.seeds = {1, 2, 3};
    return w;
}

struct GridRow {
    std::string pretrain, arch;
    std::uint64_t params;
    double avg_val, avg_test;
};

/// Published per-row averages for tests/data/mamba_llama_8bt.csv.
inline const std::vector<GridRow>& eval_grid_averages() {
    static const std::vector<GridRow> rows = {
        {"fineweb_edu", "mamba", 421000000, 3.63, 3.88},
        {"fineweb_edu", "llama", 417000000, 3.58, 4.04},
        {"pile_uc", "mamba", 421000000, 3.41, 4.70},
        {"pile_uc", "llama", 417000000, 3.41, 4.68},
        {"c4", "mamba", 421000000, 3.61, 4.75},
        {"c4", "llama", 417000000, 3.58, 4.78},
        {"fineweb_edu", "mamba", 368000000, 3.72, 4.18},
        {"fineweb_edu", "llama", 365000000, 3.67, 4.36},
        {"pile_uc", "mamba", 368000000, 3.49, 4.93},
        {"pile_uc", "llama", 365000000, 3.49, 5.02},
        {"c4", "mamba", 368000000, 3.70, 4.97},
        {"c4", "llama", 365000000, 3.67, 4.92},
    };
    return rows;
}

inline const std::vector<std::string>& validation_sets() {
    static const std::vector<std::string> v = {"c4", "pile_uc", "fineweb_edu", "refinedweb",
                                               "slimpajama"};
    return v;
}

inline const std::vector<std::string>& test_sets() {
    static const std::vector<std::string> v = {"arc_challenge", "arc_easy", "hellaswag", "mmlu",
                                               "piqa"};
    return v;
}

} // namespace testutil
