#pragma once

// Parse, validate and group checkpoint evaluation records. JSONL is the
// canonical format (one record per line); CSV is a flat convenience view with
// one column per dataset loss and a `#unit=` header directive. Malformed lines
// never abort ingestion; they become line-numbered diagnostics.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "json.hpp"

#include "lawline/core.hpp"
#include "lawline/csv.hpp"
#include "lawline/errors.hpp"
#include "lawline/io_util.hpp"

namespace lawline {

enum class RecordFormat { JsonLines, Csv };

enum class Severity { Warning, Error };

struct Diagnostic {
    Severity severity = Severity::Error;
    std::size_t line = 0;
    std::string message;
};

/// A parsed collection of records plus where it came from and what was wrong
/// with the lines that did not make it.
struct RecordSet {
    std::vector<CheckpointRecord> records;
    std::string source;
    std::vector<Diagnostic> diagnostics;
};

/// All records of one training configuration, in input order.
struct ConfigGroup {
    ConfigId config;
    std::vector<CheckpointRecord> records;
};

// --- JSON codecs -----------------------------------------------------------

inline nlohmann::json config_to_json(const ConfigId& id) {
    nlohmann::json j{{"pretrain_data", id.pretrain_data},
                     {"architecture", id.architecture},
                     {"tokenizer", id.tokenizer}};
    if (!id.extra.empty()) j["extra"] = id.extra;
    return j;
}

inline ConfigId config_from_json(const nlohmann::json& j) {
    ConfigId id;
    id.pretrain_data = j.at("pretrain_data").get<std::string>();
    id.architecture = j.at("architecture").get<std::string>();
    id.tokenizer = j.at("tokenizer").get<std::string>();
    if (j.contains("extra")) id.extra = j.at("extra").get<std::map<std::string, std::string>>();
    validate(id);
    return id;
}

inline nlohmann::json record_to_json(const CheckpointRecord& rec) {
    nlohmann::json losses = nlohmann::json::object();
    for (const auto& [label, m] : rec.losses) {
        nlohmann::json jm{{"value", m.value}, {"unit", unit_name(m.unit)}};
        if (m.token_count) jm["token_count"] = *m.token_count;
        if (m.byte_count) jm["byte_count"] = *m.byte_count;
        losses[label] = std::move(jm);
    }
    nlohmann::json j{{"config", config_to_json(rec.config)},
                     {"params_n", rec.params_n},
                     {"tokens_d", rec.tokens_d},
                     {"losses", std::move(losses)}};
    if (rec.seed) j["seed"] = *rec.seed;
    if (rec.step) j["step"] = *rec.step;
    return j;
}

inline CheckpointRecord record_from_json(const nlohmann::json& j) {
    CheckpointRecord rec;
    rec.config = config_from_json(j.at("config"));
    rec.params_n = j.at("params_n").get<std::uint64_t>();
    rec.tokens_d = j.at("tokens_d").get<std::uint64_t>();
    if (j.contains("seed") && !j.at("seed").is_null()) rec.seed = j.at("seed").get<std::int64_t>();
    if (j.contains("step") && !j.at("step").is_null()) rec.step = j.at("step").get<std::uint64_t>();
    const auto& losses = j.at("losses");
    if (!losses.is_object()) throw ValidationError("losses must be an object");
    for (auto it = losses.begin(); it != losses.end(); ++it) {
        LossMeasurement m;
        m.dataset = it.key();
        m.value = it.value().at("value").get<double>();
        m.unit = parse_unit(it.value().at("unit").get<std::string>());
        if (it.value().contains("token_count") && !it.value().at("token_count").is_null())
            m.token_count = it.value().at("token_count").get<std::uint64_t>();
        if (it.value().contains("byte_count") && !it.value().at("byte_count").is_null())
            m.byte_count = it.value().at("byte_count").get<std::uint64_t>();
        rec.losses.emplace(it.key(), std::move(m));
    }
    validate(rec);
    return rec;
}

// --- parsing -----------------------------------------------------------------

namespace detail {

inline void post_ingest_diagnostics(RecordSet& rs) {
    // duplicate (config, N, D, seed, step) keys are kept but flagged
    std::map<std::tuple<ConfigId, std::uint64_t, std::uint64_t, std::optional<std::int64_t>,
                        std::optional<std::uint64_t>>,
             int>
        seen;
    for (const auto& rec : rs.records) {
        auto key = std::make_tuple(rec.config, rec.params_n, rec.tokens_d, rec.seed, rec.step);
        if (++seen[key] == 2)
            rs.diagnostics.push_back(
                {Severity::Warning, 0,
                 "duplicate records for config " + rec.config.display() + " at N=" +
                     std::to_string(rec.params_n) + " D=" + std::to_string(rec.tokens_d) +
                     " (kept; may be distinct eval shards)"});
    }
    // ragged dataset coverage within a config
    std::map<ConfigId, std::set<std::string>> label_union;
    for (const auto& rec : rs.records)
        for (const auto& [label, m] : rec.losses) label_union[rec.config].insert(label);
    std::set<ConfigId> ragged;
    for (const auto& rec : rs.records) {
        const auto& expect = label_union[rec.config];
        if (rec.losses.size() != expect.size() && !ragged.count(rec.config)) {
            ragged.insert(rec.config);
            rs.diagnostics.push_back({Severity::Warning, 0,
                                      "ragged dataset coverage for config " + rec.config.display()});
        }
    }
}

} // namespace detail

inline RecordSet parse_jsonl(std::string_view text, std::string source) {
    RecordSet rs;
    rs.source = std::move(source);
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, eol == std::string_view::npos ? eol : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (j.is_discarded()) {
            rs.diagnostics.push_back({Severity::Error, line_no, "invalid JSON"});
            continue;
        }
        try {
            rs.records.push_back(record_from_json(j));
        } catch (const nlohmann::json::exception& e) {
            rs.diagnostics.push_back({Severity::Error, line_no, e.what()});
        } catch (const Error& e) {
            rs.diagnostics.push_back({Severity::Error, line_no, e.what()});
        }
    }
    return rs;
}

/// CSV layout: optional `#unit=<unit>` directive line, then a header row with
/// the fixed columns pretrain_data, architecture, tokenizer, params_n,
/// tokens_d, seed, step (seed/step cells may be empty), any number of
/// `extra.<key>` columns, and one column per dataset loss. Empty loss cells
/// mean the dataset was not evaluated for that row.
inline RecordSet parse_csv(std::string_view text, std::string source) {
    RecordSet rs;
    rs.source = std::move(source);
    LossUnit unit = LossUnit::NatsPerToken;
    std::size_t body_start = 0;
    if (text.starts_with("#unit=")) {
        std::size_t eol = text.find('\n');
        std::string_view value = text.substr(6, eol == std::string_view::npos ? eol : eol - 6);
        if (!value.empty() && value.back() == '\r') value.remove_suffix(1);
        try {
            unit = parse_unit(value);
        } catch (const Error& e) {
            rs.diagnostics.push_back({Severity::Error, 1, e.what()});
        }
        body_start = eol == std::string_view::npos ? text.size() : eol + 1;
    } else {
        rs.diagnostics.push_back(
            {Severity::Warning, 1, "no #unit= directive; assuming nats_per_token"});
    }

    auto rows = csv::parse(text.substr(body_start));
    const std::size_t line_offset = body_start == 0 ? 0 : 1;
    if (rows.empty()) return rs;

    static const std::vector<std::string> fixed = {"pretrain_data", "architecture", "tokenizer",
                                                   "params_n",      "tokens_d",     "seed",
                                                   "step"};
    const auto& header = rows.front().fields;
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    for (const auto& name : fixed)
        if (!col.count(name) && name != "seed" && name != "step")
            throw IoError("csv '" + rs.source + "': missing required column '" + name + "'");

    std::vector<std::pair<std::string, std::size_t>> extra_cols;  // key -> column
    std::vector<std::pair<std::string, std::size_t>> loss_cols;   // dataset -> column
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string& name = header[i];
        if (std::find(fixed.begin(), fixed.end(), name) != fixed.end()) continue;
        if (name.starts_with("extra.")) extra_cols.emplace_back(name.substr(6), i);
        else loss_cols.emplace_back(name, i);
    }

    auto cell = [&](const csv::Row& row, const std::string& name) -> std::string_view {
        auto it = col.find(name);
        if (it == col.end() || it->second >= row.fields.size()) return {};
        return row.fields[it->second];
    };

    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const std::size_t line = row.line + line_offset;
        try {
            CheckpointRecord rec;
            rec.config.pretrain_data = cell(row, "pretrain_data");
            rec.config.architecture = cell(row, "architecture");
            rec.config.tokenizer = cell(row, "tokenizer");
            for (const auto& [key, idx] : extra_cols)
                if (idx < row.fields.size() && !row.fields[idx].empty())
                    rec.config.extra[key] = row.fields[idx];
            const auto parse_u64 = [&](std::string_view name, std::string_view s) {
                if (s.empty()) throw ValidationError("missing " + std::string(name));
                std::size_t used = 0;
                const unsigned long long v = std::stoull(std::string(s), &used);
                if (used != s.size()) throw ValidationError("bad " + std::string(name));
                return static_cast<std::uint64_t>(v);
            };
            rec.params_n = parse_u64("params_n", cell(row, "params_n"));
            rec.tokens_d = parse_u64("tokens_d", cell(row, "tokens_d"));
            if (auto s = cell(row, "seed"); !s.empty()) rec.seed = std::stoll(std::string(s));
            if (auto s = cell(row, "step"); !s.empty())
                rec.step = static_cast<std::uint64_t>(std::stoull(std::string(s)));
            for (const auto& [dataset, idx] : loss_cols) {
                if (idx >= row.fields.size() || row.fields[idx].empty()) continue;
                LossMeasurement m;
                m.dataset = dataset;
                m.unit = unit;
                m.value = std::stod(row.fields[idx]);
                rec.losses.emplace(dataset, std::move(m));
            }
            validate(rec);
            rs.records.push_back(std::move(rec));
        } catch (const Error& e) {
            rs.diagnostics.push_back({Severity::Error, line, e.what()});
        } catch (const std::exception& e) {
            rs.diagnostics.push_back({Severity::Error, line, e.what()});
        }
    }
    return rs;
}

inline RecordSet load_records(const std::filesystem::path& path, RecordFormat format) {
    const std::string text = read_file(path);
    RecordSet rs = format == RecordFormat::JsonLines ? parse_jsonl(text, path.string())
                                                     : parse_csv(text, path.string());
    if (rs.records.empty()) {
        std::string detail;
        for (const auto& d : rs.diagnostics)
            if (d.severity == Severity::Error)
                detail += "\n  line " + std::to_string(d.line) + ": " + d.message;
        throw EmptyInputError("no valid records in '" + path.string() + "'" + detail);
    }
    detail::post_ingest_diagnostics(rs);
    return rs;
}

/// Canonical JSONL: one compact record per line, keys sorted, optionals
/// omitted when absent. load -> serialize -> load round-trips byte-identically.
inline std::string to_jsonl(const RecordSet& rs) {
    std::string out;
    for (const auto& rec : rs.records) {
        out += record_to_json(rec).dump();
        out += '\n';
    }
    return out;
}

inline void save_records(const RecordSet& rs, const std::filesystem::path& path) {
    write_file_atomic(path, to_jsonl(rs));
}

// --- grouping and selection --------------------------------------------------

/// Partition by configuration. Group order is lexicographic over the config
/// fields; records keep their input order inside each group.
inline std::vector<ConfigGroup> group_by_config(const RecordSet& rs) {
    std::map<ConfigId, std::vector<CheckpointRecord>> buckets;
    for (const auto& rec : rs.records) buckets[rec.config].push_back(rec);
    std::vector<ConfigGroup> groups;
    groups.reserve(buckets.size());
    for (auto& [config, records] : buckets) groups.push_back({config, std::move(records)});
    return groups;
}

/// Subset of a group's records, order preserved. May return an empty group;
/// the caller decides whether that is an error.
template <class Pred>
ConfigGroup filter_group(const ConfigGroup& g, Pred&& keep) {
    ConfigGroup out;
    out.config = g.config;
    for (const auto& rec : g.records)
        if (keep(rec)) out.records.push_back(rec);
    return out;
}

/// Add a synthetic dataset whose value is the mean of `labels` to every record
/// carrying all of them. Records missing any label are left untouched.
inline RecordSet with_average_dataset(const RecordSet& rs, std::span<const std::string> labels,
                                      const std::string& new_label) {
    if (labels.empty()) throw ValidationError("with_average_dataset: no labels given");
    RecordSet out = rs;
    for (auto& rec : out.records) {
        const bool all_present = std::all_of(labels.begin(), labels.end(), [&](const auto& l) {
            return rec.losses.count(l) > 0;
        });
        if (!all_present) continue;
        LossMeasurement m;
        m.dataset = new_label;
        m.unit = record_unit(rec);
        m.value = average_loss(rec, labels);
        rec.losses[new_label] = std::move(m);
    }
    return out;
}

/// Standard name for the averaged pseudo-dataset.
inline std::string average_label(std::span<const std::string> labels) {
    if (labels.size() == 1) return labels[0];
    std::string name = "avg(";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (i) name += '+';
        name += labels[i];
    }
    name += ')';
    return name;
}

inline RecordSet convert_records(const RecordSet& rs, LossUnit unit) {
    RecordSet out = rs;
    for (auto& rec : out.records) rec = to_unit(rec, unit);
    return out;
}

} // namespace lawline
