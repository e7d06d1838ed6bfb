#pragma once

// Domain types shared by every module: configuration identity, loss
// measurements, checkpoint records, unit conversion and loss aggregation.
// All types are immutable value types once built; operations are pure.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lawline/errors.hpp"

namespace lawline {

enum class LossUnit { NatsPerToken, BitsPerByte };

inline constexpr std::string_view unit_name(LossUnit u) {
    return u == LossUnit::NatsPerToken ? "nats_per_token" : "bits_per_byte";
}

inline LossUnit parse_unit(std::string_view s) {
    if (s == "nats_per_token" || s == "nats") return LossUnit::NatsPerToken;
    if (s == "bits_per_byte" || s == "bpb") return LossUnit::BitsPerByte;
    throw ValidationError("unknown loss unit '" + std::string(s) +
                          "' (expected nats_per_token|nats|bits_per_byte|bpb)");
}

/// Identity of one training setup: what was pretrained, with which
/// architecture and tokenizer, plus free-form extras (context length,
/// optimizer, schedule, ...). Equality is over all fields; ordering is
/// lexicographic so grouping is deterministic.
struct ConfigId {
    std::string pretrain_data;
    std::string architecture;
    std::string tokenizer;
    std::map<std::string, std::string> extra;

    auto operator<=>(const ConfigId&) const = default;

    std::string display() const {
        std::ostringstream out;
        out << pretrain_data << '/' << architecture << '/' << tokenizer;
        if (!extra.empty()) {
            out << '{';
            bool first = true;
            for (const auto& [k, v] : extra) {
                if (!first) out << ',';
                out << k << '=' << v;
                first = false;
            }
            out << '}';
        }
        return out.str();
    }

    /// Filesystem-safe variant of display().
    std::string slug() const {
        std::string s = display();
        for (char& c : s) {
            const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                            (c >= '0' && c <= '9') || c == '-' || c == '.';
            if (!ok) c = '_';
        }
        return s;
    }
};

inline void validate(const ConfigId& id) {
    if (id.pretrain_data.empty()) throw ValidationError("config.pretrain_data must be non-empty");
    if (id.architecture.empty()) throw ValidationError("config.architecture must be non-empty");
    if (id.tokenizer.empty()) throw ValidationError("config.tokenizer must be non-empty");
}

/// One loss value on one dataset. Token/byte counts are carried along so the
/// value can later be re-expressed in bits-per-byte; they are taken as given
/// and never recomputed here.
struct LossMeasurement {
    std::string dataset;
    double value = 0.0;
    LossUnit unit = LossUnit::NatsPerToken;
    std::optional<std::uint64_t> token_count;
    std::optional<std::uint64_t> byte_count;
};

inline void validate(const LossMeasurement& m) {
    if (m.dataset.empty()) throw ValidationError("loss measurement needs a dataset label");
    if (!(m.value >= 0.0) || !std::isfinite(m.value))
        throw ValidationError("loss value for '" + m.dataset + "' must be finite and >= 0");
    if (m.token_count && *m.token_count == 0)
        throw ValidationError("token_count for '" + m.dataset + "' must be positive");
    if (m.byte_count && *m.byte_count == 0)
        throw ValidationError("byte_count for '" + m.dataset + "' must be positive");
}

/// One evaluated checkpoint: a training setup, its size (N parameters) and
/// data budget (D tokens), and per-dataset loss measurements. All losses in a
/// record share one unit; mixing is rejected up front to keep provenance
/// auditable.
struct CheckpointRecord {
    ConfigId config;
    std::uint64_t params_n = 0;
    std::uint64_t tokens_d = 0;
    std::optional<std::int64_t> seed;
    std::optional<std::uint64_t> step;
    std::map<std::string, LossMeasurement> losses;
};

inline void validate(const CheckpointRecord& rec) {
    validate(rec.config);
    if (rec.params_n < 1) throw ValidationError("params_n must be >= 1");
    if (rec.tokens_d < 1) throw ValidationError("tokens_d must be >= 1");
    if (rec.losses.empty()) throw ValidationError("record carries no loss measurements");
    const LossUnit unit = rec.losses.begin()->second.unit;
    for (const auto& [label, m] : rec.losses) {
        validate(m);
        if (label != m.dataset)
            throw ValidationError("losses key '" + label + "' does not match measurement dataset '" +
                                  m.dataset + "'");
        if (m.unit != unit)
            throw ValidationError("record mixes loss units ('" + label + "' differs); convert upstream");
    }
}

/// Unit shared by all measurements of a validated record.
inline LossUnit record_unit(const CheckpointRecord& rec) {
    if (rec.losses.empty()) throw ValidationError("record carries no loss measurements");
    return rec.losses.begin()->second.unit;
}

inline constexpr double kLn2 = 0.69314718055994530941723212145818;

/// Convert negative log-likelihood in nats per token to bits per byte:
/// loss * token_count / (byte_count * ln 2).
inline double nll_to_bpb(double loss_nats_per_token, std::uint64_t token_count,
                         std::uint64_t byte_count) {
    if (token_count == 0) throw ValidationError("nll_to_bpb: token_count must be positive");
    if (byte_count == 0) throw ValidationError("nll_to_bpb: byte_count must be positive");
    if (!(loss_nats_per_token >= 0.0) || !std::isfinite(loss_nats_per_token))
        throw ValidationError("nll_to_bpb: loss must be finite and >= 0");
    return loss_nats_per_token * static_cast<double>(token_count) /
           (static_cast<double>(byte_count) * kLn2);
}

/// Inverse of nll_to_bpb.
inline double bpb_to_nll(double bits_per_byte, std::uint64_t token_count, std::uint64_t byte_count) {
    if (token_count == 0) throw ValidationError("bpb_to_nll: token_count must be positive");
    if (byte_count == 0) throw ValidationError("bpb_to_nll: byte_count must be positive");
    if (!(bits_per_byte >= 0.0) || !std::isfinite(bits_per_byte))
        throw ValidationError("bpb_to_nll: loss must be finite and >= 0");
    return bits_per_byte * static_cast<double>(byte_count) * kLn2 /
           static_cast<double>(token_count);
}

/// Re-express a measurement in the requested unit. Requires token and byte
/// counts when an actual conversion is needed.
inline LossMeasurement to_unit(const LossMeasurement& m, LossUnit unit) {
    if (m.unit == unit) return m;
    if (!m.token_count || !m.byte_count)
        throw ValidationError("cannot convert '" + m.dataset +
                              "' to " + std::string(unit_name(unit)) +
                              ": token_count and byte_count required");
    LossMeasurement out = m;
    out.unit = unit;
    out.value = unit == LossUnit::BitsPerByte
                    ? nll_to_bpb(m.value, *m.token_count, *m.byte_count)
                    : bpb_to_nll(m.value, *m.token_count, *m.byte_count);
    return out;
}

inline CheckpointRecord to_unit(const CheckpointRecord& rec, LossUnit unit) {
    CheckpointRecord out = rec;
    for (auto& [label, m] : out.losses) m = to_unit(m, unit);
    return out;
}

/// Arithmetic mean of the selected loss values. All requested datasets must be
/// present; absentees are reported together.
inline double average_loss(const CheckpointRecord& rec, std::span<const std::string> datasets) {
    if (datasets.empty()) throw ValidationError("average_loss: no datasets selected");
    std::vector<std::string> missing;
    double sum = 0.0;
    for (const auto& label : datasets) {
        auto it = rec.losses.find(label);
        if (it == rec.losses.end()) {
            missing.push_back(label);
            continue;
        }
        sum += it->second.value;
    }
    if (!missing.empty()) {
        std::string msg = "average_loss: datasets absent from record:";
        for (const auto& label : missing) msg += " " + label;
        throw MissingDataError(msg);
    }
    return sum / static_cast<double>(datasets.size());
}

inline double average_loss(const CheckpointRecord& rec, const std::vector<std::string>& datasets) {
    return average_loss(rec, std::span<const std::string>(datasets));
}

} // namespace lawline
