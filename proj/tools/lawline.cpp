// lawline: fit compute-to-loss and loss-to-loss scaling laws from checkpoint
// evaluation records, quantify how training interventions shift them, and
// predict downstream loss from compute budgets.
//
// Subcommands: fit, compare, predict, simulate, report.
// Exit codes: 0 success, 1 I/O error, 2 domain/fit error, 3 invalid arguments.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "CLI11.hpp"

#include "lawline/lawline.hpp"

namespace fs = std::filesystem;
using namespace lawline;

namespace {

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

Interval parse_interval(const std::string& s) {
    const auto pos = s.find(':');
    if (pos == std::string::npos)
        throw CLI::ValidationError("--interval", "expected LO:HI, got '" + s + "'");
    try {
        Interval iv{std::stod(s.substr(0, pos)), std::stod(s.substr(pos + 1))};
        if (!(iv.lo < iv.hi)) throw CLI::ValidationError("--interval", "lo must be < hi");
        return iv;
    } catch (const std::invalid_argument&) {
        throw CLI::ValidationError("--interval", "expected LO:HI, got '" + s + "'");
    }
}

std::string sanitize_filename(std::string s) {
    for (char& c : s) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '-' || c == '.';
        if (!ok) c = '_';
    }
    return s;
}

RecordFormat format_for(const fs::path& path, const std::string& flag) {
    if (flag == "jsonl") return RecordFormat::JsonLines;
    if (flag == "csv") return RecordFormat::Csv;
    return path.extension() == ".csv" ? RecordFormat::Csv : RecordFormat::JsonLines;
}

void print_diagnostics(const RecordSet& rs) {
    for (const auto& d : rs.diagnostics) {
        std::cerr << rs.source << ':';
        if (d.line) std::cerr << d.line << ':';
        std::cerr << (d.severity == Severity::Error ? " error: " : " warning: ") << d.message
                  << '\n';
    }
}

struct DatasetSelection {
    std::vector<std::string> x_labels;  // after averaging: exactly the labels to fit
    std::vector<std::string> y_labels;
};

/// Apply --average: multiple x or y labels collapse into one synthetic mean
/// dataset added to the records.
DatasetSelection resolve_selection(RecordSet& rs, std::vector<std::string> xs,
                                   std::vector<std::string> ys, bool average) {
    DatasetSelection sel;
    if (average && xs.size() > 1) {
        const std::string label = average_label(xs);
        rs = with_average_dataset(rs, xs, label);
        sel.x_labels = {label};
    } else {
        sel.x_labels = std::move(xs);
    }
    if (average && ys.size() > 1) {
        const std::string label = average_label(ys);
        rs = with_average_dataset(rs, ys, label);
        sel.y_labels = {label};
    } else {
        sel.y_labels = std::move(ys);
    }
    return sel;
}

struct FitOutcome {
    std::vector<ComputeToLossLaw> compute_laws;  // deduplicated, sorted by id
    std::vector<LossToLossLaw> l2l_laws;
    struct Row {
        std::string config, x, y;
        std::optional<LossToLossLaw> law;
        bool x_fallback = false, y_fallback = false;
        std::string error;
    };
    std::vector<Row> rows;
    bool any_failed = false;
};

/// Shared fitting pipeline for `fit` and `compare --records`: stage-1 floors
/// per (config, dataset), stage-2 laws per (config, x, y). Both stages fan out
/// across worker threads; results land in deterministic slots.
FitOutcome run_fits(const std::vector<ConfigGroup>& groups, const DatasetSelection& sel) {
    FitOutcome out;

    std::vector<std::pair<std::size_t, std::string>> floor_keys;
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        std::set<std::string> labels(sel.x_labels.begin(), sel.x_labels.end());
        labels.insert(sel.y_labels.begin(), sel.y_labels.end());
        for (const auto& l : labels) floor_keys.emplace_back(gi, l);
    }
    std::vector<std::variant<IrreducibleEstimate, std::string>> floors(floor_keys.size());
    parallel_for(floor_keys.size(), [&](std::size_t i) {
        const auto& [gi, label] = floor_keys[i];
        try {
            floors[i] = estimate_irreducible(groups[gi], label);
        } catch (const Error& e) {
            floors[i] = std::string(e.what());
        }
    });
    std::map<std::pair<std::size_t, std::string>, std::size_t> floor_index;
    for (std::size_t i = 0; i < floor_keys.size(); ++i) floor_index[floor_keys[i]] = i;

    struct PairKey {
        std::size_t gi;
        std::string x, y;
    };
    std::vector<PairKey> pair_keys;
    for (std::size_t gi = 0; gi < groups.size(); ++gi)
        for (const auto& x : sel.x_labels)
            for (const auto& y : sel.y_labels) pair_keys.push_back({gi, x, y});
    out.rows.resize(pair_keys.size());
    parallel_for(pair_keys.size(), [&](std::size_t i) {
        const auto& key = pair_keys[i];
        auto& row = out.rows[i];
        row.config = groups[key.gi].config.display();
        row.x = key.x;
        row.y = key.y;
        const auto& fx = floors[floor_index[{key.gi, key.x}]];
        const auto& fy = floors[floor_index[{key.gi, key.y}]];
        if (std::holds_alternative<std::string>(fx)) {
            row.error = std::get<std::string>(fx);
            return;
        }
        if (std::holds_alternative<std::string>(fy)) {
            row.error = std::get<std::string>(fy);
            return;
        }
        const auto& ex = std::get<IrreducibleEstimate>(fx);
        const auto& ey = std::get<IrreducibleEstimate>(fy);
        row.x_fallback = ex.fallback_used;
        row.y_fallback = ey.fallback_used;
        try {
            row.law = fit_loss_to_loss(groups[key.gi], key.x, key.y, ex.value, ey.value);
        } catch (const Error& e) {
            row.error = e.what();
        }
    });

    std::map<std::string, ComputeToLossLaw> c2l_by_id;
    for (const auto& f : floors)
        if (const auto* est = std::get_if<IrreducibleEstimate>(&f); est && est->law)
            c2l_by_id.emplace(est->law->id(), *est->law);
    for (auto& [id, law] : c2l_by_id) out.compute_laws.push_back(law);

    for (const auto& row : out.rows) {
        if (row.law) out.l2l_laws.push_back(*row.law);
        else out.any_failed = true;
    }
    return out;
}

void print_fit_summary(const FitOutcome& out) {
    std::printf("%-40s %-18s %-18s %10s %8s %8s %8s %9s %5s %5s\n", "config", "x_dataset",
                "y_dataset", "K", "kappa", "E_x", "E_y", "R2", "n", "fb");
    for (const auto& row : out.rows) {
        if (row.law) {
            const auto& l = *row.law;
            std::printf("%-40s %-18s %-18s %10.5f %8.4f %8.4f %8.4f %9.4f %5d %s%s\n",
                        row.config.c_str(), row.x.c_str(), row.y.c_str(), l.k_coef, l.kappa,
                        l.e_x, l.e_y, l.r_squared, l.n_points, row.x_fallback ? "x" : "-",
                        row.y_fallback ? "y" : "-");
        } else {
            std::printf("%-40s %-18s %-18s fit failed: %s\n", row.config.c_str(), row.x.c_str(),
                        row.y.c_str(), row.error.c_str());
        }
    }
}

std::string fit_summary_csv(const FitOutcome& out) {
    csv::Writer w;
    w.row({"config", "x_dataset", "y_dataset", "k", "kappa", "e_x", "e_y", "x_fallback",
           "y_fallback", "r_squared", "n_points", "sse", "converged", "error"});
    for (const auto& row : out.rows) {
        if (row.law) {
            const auto& l = *row.law;
            w.row({row.config, row.x, row.y, format_double(l.k_coef), format_double(l.kappa),
                   format_double(l.e_x), format_double(l.e_y), row.x_fallback ? "true" : "false",
                   row.y_fallback ? "true" : "false", format_double(l.r_squared),
                   std::to_string(l.n_points), format_double(l.diagnostics.sse),
                   l.diagnostics.converged ? "true" : "false", ""});
        } else {
            w.row({row.config, row.x, row.y, "", "", "", "", "", "", "", "", "", "", row.error});
        }
    }
    return w.str();
}

/// Unique output file name per law id, deterministic across runs.
class NamePool {
public:
    std::string claim(const std::string& base) {
        std::string name = base;
        int suffix = 2;
        while (!used_.insert(name).second) name = base + "_" + std::to_string(suffix++);
        return name;
    }

private:
    std::set<std::string> used_;
};

void write_laws(const FitOutcome& out, const fs::path& dir) {
    NamePool names;
    for (const auto& law : out.compute_laws) {
        const std::string name = names.claim("c2l_" + sanitize_filename(law.config.slug()) + "_" +
                                             sanitize_filename(law.eval_dataset));
        write_file_atomic(dir / (name + ".json"), law_to_json(law).dump(2) + "\n");
    }
    for (const auto& law : out.l2l_laws) {
        const std::string name =
            names.claim("l2l_" + sanitize_filename(law.config.slug()) + "_" +
                        sanitize_filename(law.x_dataset) + "__" + sanitize_filename(law.y_dataset));
        write_file_atomic(dir / (name + ".json"), law_to_json(law).dump(2) + "\n");
    }
}

RecordSet load_and_prepare(const fs::path& records_path, const std::string& format_flag,
                           const std::string& unit_flag) {
    RecordSet rs = load_records(records_path, format_for(records_path, format_flag));
    print_diagnostics(rs);
    if (!unit_flag.empty()) rs = convert_records(rs, parse_unit(unit_flag));
    return rs;
}

// --- subcommands -----------------------------------------------------------

int cmd_fit(const std::string& records_path, const std::string& format_flag,
            const std::string& unit_flag, std::vector<std::string> xs, std::vector<std::string> ys,
            bool average, const fs::path& out_dir) {
    RecordSet rs = load_and_prepare(records_path, format_flag, unit_flag);
    const DatasetSelection sel = resolve_selection(rs, std::move(xs), std::move(ys), average);
    const auto groups = group_by_config(rs);
    const FitOutcome out = run_fits(groups, sel);

    write_laws(out, out_dir);
    write_file_atomic(out_dir / "fit_summary.csv", fit_summary_csv(out));
    print_fit_summary(out);
    if (out.any_failed) {
        for (const auto& row : out.rows)
            if (!row.law)
                std::cerr << "fit failed for " << row.config << " (" << row.x << " -> " << row.y
                          << "): " << row.error << '\n';
        return 2;
    }
    return 0;
}

int cmd_compare(const std::vector<std::string>& law_files, const std::string& records_path,
                const std::string& format_flag, const std::string& unit_flag,
                std::vector<std::string> xs, std::vector<std::string> ys, bool average,
                Interval interval, const fs::path& out_dir) {
    std::vector<std::pair<std::string, LossToLossLaw>> laws;
    if (!law_files.empty()) {
        for (const auto& file : law_files) {
            const auto j = nlohmann::json::parse(read_file(file));
            laws.emplace_back("", l2l_law_from_json(j));
        }
    } else {
        RecordSet rs = load_and_prepare(records_path, format_flag, unit_flag);
        const DatasetSelection sel = resolve_selection(rs, std::move(xs), std::move(ys), average);
        if (sel.x_labels.size() != 1 || sel.y_labels.size() != 1)
            throw ValidationError("compare: exactly one x and one y dataset after averaging");
        const auto groups = group_by_config(rs);
        const FitOutcome out = run_fits(groups, sel);
        if (out.any_failed) {
            for (const auto& row : out.rows)
                if (!row.law) std::cerr << "fit failed for " << row.config << ": " << row.error << '\n';
            return 2;
        }
        for (const auto& law : out.l2l_laws) laws.emplace_back("", law);
    }
    if (laws.size() < 2) throw ValidationError("compare: need at least 2 configurations");

    NamePool labels;
    for (auto& [name, law] : laws) name = labels.claim(law.config.display());

    const InterventionMatrix m = intervention_matrix(laws, interval);
    write_file_atomic(out_dir / "matrix.csv", matrix_to_csv(m));
    write_file_atomic(out_dir / "matrix_pairs.csv", matrix_to_pairs_csv(m));
    write_file_atomic(out_dir / "matrix.json", matrix_to_json(m).dump(2) + "\n");

    std::printf("area between fitted curves on [%g, %g] (%s)\n", m.interval.lo, m.interval.hi,
                std::string(unit_name(m.unit)).c_str());
    for (std::size_t i = 0; i < m.labels.size(); ++i) {
        std::printf("%-44s", m.labels[i].c_str());
        for (double v : m.areas[i]) std::printf(" %8.4f", v);
        std::printf("\n");
    }
    return 0;
}

int cmd_predict(const std::string& train_law_file, const std::string& l2l_file,
                std::uint64_t params_n, std::uint64_t tokens_d, const fs::path& out_dir) {
    const auto train = compute_law_from_json(nlohmann::json::parse(read_file(train_law_file)));
    const auto l2l = l2l_law_from_json(nlohmann::json::parse(read_file(l2l_file)));
    const DownstreamForecast f = forecast_downstream(train, l2l, params_n, tokens_d);
    const std::string text = forecast_to_json(f).dump(2) + "\n";
    std::fputs(text.c_str(), stdout);
    if (!out_dir.empty()) write_file_atomic(out_dir / "forecast.json", text);
    return 0;
}

int cmd_simulate(const std::string& world_file, std::uint64_t seed, const fs::path& out_dir) {
    const WorldSpec w = world_from_json(nlohmann::json::parse(read_file(world_file)));
    const RecordSet rs = generate(w, seed);
    save_records(rs, out_dir / "records.jsonl");
    std::printf("wrote %zu records to %s\n", rs.records.size(),
                (out_dir / "records.jsonl").string().c_str());
    return 0;
}

int cmd_report(const std::string& records_path, const std::string& format_flag,
               const std::string& unit_flag, const std::vector<std::string>& law_files,
               const std::string& laws_dir, const std::string& matrix_file, Interval interval,
               std::optional<std::size_t> subsample, std::uint64_t seed, const fs::path& out_dir) {
    std::vector<ConfigGroup> groups;
    if (!records_path.empty()) {
        const RecordSet rs = load_and_prepare(records_path, format_flag, unit_flag);
        groups = group_by_config(rs);
    }

    std::vector<std::string> files = law_files;
    if (!laws_dir.empty()) {
        for (const auto& entry : fs::directory_iterator(laws_dir))
            if (entry.path().extension() == ".json") files.push_back(entry.path().string());
        std::sort(files.begin(), files.end());
    }
    std::vector<ComputeToLossLaw> compute_laws;
    std::vector<LossToLossLaw> l2l_laws;
    for (const auto& file : files) {
        const auto j = nlohmann::json::parse(read_file(file));
        const std::string type = j.value("type", "");
        if (type == "compute_to_loss") compute_laws.push_back(compute_law_from_json(j));
        else if (type == "loss_to_loss") l2l_laws.push_back(l2l_law_from_json(j));
        // other json files (summaries, matrices) are ignored here
    }
    std::optional<InterventionMatrix> matrix;
    if (!matrix_file.empty())
        matrix = matrix_from_json(nlohmann::json::parse(read_file(matrix_file)));

    ReportOptions options;
    options.interval = interval;
    options.subsample = subsample;
    options.seed = seed;
    const Report rep = build_report(groups, compute_laws, l2l_laws, matrix, options);

    write_file_atomic(out_dir / "report.json", report_to_json(rep).dump(2) + "\n");
    for (const auto& c : rep.curves)
        write_file_atomic(out_dir / ("curve_" + sanitize_filename(c.law_id) + ".csv"),
                          curve_to_csv(c));
    if (rep.matrix) {
        write_file_atomic(out_dir / "matrix.csv", matrix_to_csv(*rep.matrix));
        write_file_atomic(out_dir / "matrix_pairs.csv", matrix_to_pairs_csv(*rep.matrix));
    }

    // one plot per fitted curve, with that config's observed points behind it
    for (std::size_t i = 0; i < rep.l2l_laws.size(); ++i) {
        const auto& law = rep.l2l_laws[i];
        std::vector<svg::Series> series;
        for (const auto& s : rep.scatter)
            if (s.name == law.config.display() && s.x_dataset == law.x_dataset &&
                s.y_dataset == law.y_dataset)
                series.push_back({s.name + " checkpoints", s.points, false});
        {
            char r2[32];
            std::snprintf(r2, sizeof(r2), "%.4f", law.r_squared);
            series.push_back({"fit R2=" + std::string(r2), rep.curves[i].points, true});
        }
        const std::string unit = std::string(unit_name(law.unit));
        const std::string svg_text =
            svg::render_plot(law.x_dataset + " vs " + law.y_dataset, law.x_dataset + " (" + unit + ")",
                             law.y_dataset + " (" + unit + ")", series);
        write_file_atomic(out_dir / ("plot_" + sanitize_filename(law.id()) + ".svg"), svg_text);
    }
    std::printf("report written to %s (%zu loss-to-loss laws, %zu compute-to-loss laws)\n",
                out_dir.string().c_str(), rep.l2l_laws.size(), rep.compute_laws.size());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "lawline: fit compute-to-loss and loss-to-loss scaling laws from checkpoint\n"
        "evaluation records, compare configurations by the area between fitted curves,\n"
        "and predict downstream loss from compute budgets."};
    app.require_subcommand(1);

    std::string records_path, format_flag, unit_flag, interval_flag = "0:2";
    std::string x_flag, y_flag;
    bool average = true;
    std::string out_dir;
    std::uint64_t seed = 0;

    auto add_records_flags = [&](CLI::App* cmd, bool required) {
        cmd->add_option("--records", records_path, "checkpoint records (JSONL or CSV)")
            ->required(required);
        cmd->add_option("--format", format_flag, "records format: jsonl|csv (default: by extension)")
            ->check(CLI::IsMember({"jsonl", "csv"}));
        cmd->add_option("--unit", unit_flag, "convert losses before fitting: nats|bpb")
            ->check(CLI::IsMember({"nats", "bpb"}));
    };
    auto add_selection_flags = [&](CLI::App* cmd) {
        cmd->add_option("--x-dataset", x_flag, "x-axis dataset label(s), comma-separated")
            ->required();
        cmd->add_option("--y-datasets", y_flag, "y-axis dataset label(s), comma-separated")
            ->required();
        cmd->add_flag("--average,!--no-average", average,
                      "fit on the mean of multi-label selections (default on)");
    };

    auto* fit = app.add_subcommand("fit", "two-stage scaling-law fit per configuration");
    add_records_flags(fit, true);
    add_selection_flags(fit);
    fit->add_option("--out", out_dir, "output directory")->required();

    auto* compare = app.add_subcommand(
        "compare", "pairwise area between fitted loss-to-loss curves across configurations");
    std::vector<std::string> law_files;
    compare->add_option("--laws", law_files, "fitted loss-to-loss law JSON files");
    add_records_flags(compare, false);
    compare->add_option("--x-dataset", x_flag, "x-axis dataset label(s) when fitting from records");
    compare->add_option("--y-datasets", y_flag, "y-axis dataset label(s) when fitting from records");
    compare->add_flag("--average,!--no-average", average, "fit on averaged losses (default on)");
    compare->add_option("--interval", interval_flag, "integration interval LO:HI (default 0:2)");
    compare->add_option("--out", out_dir, "output directory")->required();

    auto* predict = app.add_subcommand("predict", "compose laws into a downstream-loss forecast");
    std::string train_law_file, l2l_law_file;
    std::uint64_t params_n = 0, tokens_d = 0;
    predict->add_option("--train-law", train_law_file, "compute-to-loss law JSON")->required();
    predict->add_option("--l2l-law", l2l_law_file, "loss-to-loss law JSON")->required();
    predict->add_option("-N,--params-n", params_n, "parameter count")->required();
    predict->add_option("-D,--tokens-d", tokens_d, "training tokens")->required();
    predict->add_option("--out", out_dir, "optional output directory for forecast.json");

    auto* simulate = app.add_subcommand("simulate", "generate records from a ground-truth world");
    std::string world_file;
    simulate->add_option("--world", world_file, "world spec JSON")->required();
    simulate->add_option("--seed", seed, "rng seed (default 0)");
    simulate->add_option("--out", out_dir, "output directory")->required();

    auto* report = app.add_subcommand(
        "report", "assemble fitted laws, curve samples, plots, and the intervention matrix");
    std::string laws_dir, matrix_file;
    add_records_flags(report, false);
    report->add_option("--laws", law_files, "law JSON files");
    report->add_option("--laws-dir", laws_dir, "directory of law JSON files");
    report->add_option("--matrix", matrix_file, "intervention matrix JSON to embed");
    report->add_option("--interval", interval_flag, "curve sampling interval LO:HI (default 0:2)");
    std::uint64_t subsample_flag = 0;
    report->add_option("--subsample", subsample_flag,
                       "max scatter points per series (0 = keep all)");
    report->add_option("--seed", seed, "rng seed for scatter subsampling");
    report->add_option("--out", out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 3;
    }

    try {
        if (fit->parsed())
            return cmd_fit(records_path, format_flag, unit_flag, split_list(x_flag),
                           split_list(y_flag), average, out_dir);
        if (compare->parsed())
            return cmd_compare(law_files, records_path, format_flag, unit_flag, split_list(x_flag),
                               split_list(y_flag), average, parse_interval(interval_flag), out_dir);
        if (predict->parsed())
            return cmd_predict(train_law_file, l2l_law_file, params_n, tokens_d, out_dir);
        if (simulate->parsed()) return cmd_simulate(world_file, seed, out_dir);
        if (report->parsed())
            return cmd_report(records_path, format_flag, unit_flag, law_files, laws_dir,
                              matrix_file, parse_interval(interval_flag),
                              subsample_flag ? std::optional<std::size_t>(subsample_flag)
                                             : std::nullopt,
                              seed, out_dir);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
