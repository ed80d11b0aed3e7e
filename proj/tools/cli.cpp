#include "cli.hpp"

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "truthprobe/csv.hpp"
#include "truthprobe/dataset.hpp"
#include "truthprobe/error.hpp"
#include "truthprobe/pipeline.hpp"
#include "truthprobe/question.hpp"

namespace truthprobe::cli {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    return out;
}

void close_checked(std::ofstream& out, const fs::path& path) {
    out.close();
    if (!out) throw Error(ErrorKind::io, "short write on " + path.string());
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::io, "cannot create " + dir + ": " + ec.message());
}

void require_path(const std::string& value, const char* flag) {
    if (value.empty()) throw Error(ErrorKind::invalid_argument, std::string(flag) + " is required");
}

void write_accuracy_rows(std::ostream& out, const std::string& kind, std::size_t layer,
                         const AccuracyReport& rep) {
    csv::write_row(out, {kind, std::to_string(layer), "*", "*", std::to_string(rep.n),
                         std::to_string(rep.correct), format_float(rep.accuracy)});
    for (const auto& c : rep.breakdown) {
        csv::write_row(out, {kind, std::to_string(layer), std::string(to_string(c.condition)),
                             std::string(to_string(c.polarity)), std::to_string(c.n),
                             std::to_string(c.correct), format_float(c.accuracy())});
    }
}

const std::vector<std::string> kAccuracyHeader{"kind", "layer", "condition", "polarity",
                                               "n", "correct", "accuracy"};

}  // namespace

int cmd_expand(const RunConfig& cfg, std::ostream& out) {
    require_path(cfg.battery_path, "--battery");
    require_path(cfg.output_path, "--out");
    const auto bases = read_battery_file(cfg.battery_path);
    const auto records = expand_questions(bases, cfg.entities);
    validate_questions(records);
    auto file = open_out(cfg.output_path);
    write_questions(file, records);
    close_checked(file, cfg.output_path);
    out << "expanded " << bases.size() << " base question(s) into " << records.size()
        << " row(s) -> " << cfg.output_path << '\n';
    return 0;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
    require_path(cfg.dataset_path, "--dataset");
    require_path(cfg.output_path, "--out");
    const auto ds = load_dataset(cfg.dataset_path);

    TrainConfig tc;
    tc.lambda = cfg.lambda;
    tc.ratio = cfg.ratio;
    tc.seed = cfg.seed;
    tc.threshold = cfg.threshold;
    tc.kinds = cfg.kinds;
    tc.threads = cfg.threads;
    const auto bundle = train_all(ds, tc);
    save_bundle(bundle, cfg.output_path);

    // Layer-wise hold-out curve.
    const fs::path sweep_path = fs::path(cfg.output_path) / "sweep.csv";
    auto sweep = open_out(sweep_path);
    csv::write_row(sweep, {"kind", "layer", "accuracy", "status"});
    for (const auto& s : bundle.sweeps) {
        std::size_t ok = 0, ex = 0;
        for (std::size_t layer = 0; layer < bundle.num_layers; ++layer) {
            if (ok < s.per_layer_accuracy.size() && s.per_layer_accuracy[ok].layer == layer) {
                csv::write_row(sweep, {std::string(to_string(s.kind)), std::to_string(layer),
                                       format_float(s.per_layer_accuracy[ok].accuracy),
                                       layer == s.best_layer ? "best" : "ok"});
                ++ok;
            } else if (ex < s.excluded.size() && s.excluded[ex].layer == layer) {
                csv::write_row(sweep, {std::string(to_string(s.kind)), std::to_string(layer), "",
                                       "excluded: " + s.excluded[ex].reason});
                ++ex;
            }
        }
    }
    close_checked(sweep, sweep_path);

    // Per-condition hold-out accuracy of the selected probes.
    const auto kept = filter_known(ds, cfg.threshold);
    const fs::path acc_path = fs::path(cfg.output_path) / "holdout_accuracy.csv";
    auto acc = open_out(acc_path);
    csv::write_row(acc, kAccuracyHeader);
    for (const auto& p : bundle.probes) {
        write_accuracy_rows(acc, std::string(to_string(kind_of(p))), layer_of(p),
                            accuracy(p, kept, bundle.split.holdout_rows));
    }
    close_checked(acc, acc_path);

    for (const auto& w : bundle.warnings) out << "warning: " << w << '\n';
    out << "kept " << bundle.rows_after_filter << "/" << bundle.rows_before_filter
        << " rows after knowledge filter (threshold " << format_float(cfg.threshold) << ")\n";
    for (const auto& s : bundle.sweeps) {
        out << to_string(s.kind) << ": best layer " << s.best_layer << ", hold-out accuracy "
            << format_float(s.best_accuracy);
        if (!s.excluded.empty()) out << " (" << s.excluded.size() << " layer(s) excluded)";
        out << '\n';
    }
    out << "bundle written to " << cfg.output_path << '\n';
    return 0;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out) {
    require_path(cfg.dataset_path, "--dataset");
    require_path(cfg.bundle_path, "--bundle");
    require_path(cfg.output_path, "--out");
    const auto ds = load_dataset(cfg.dataset_path);
    const auto bundle = load_bundle(cfg.bundle_path);
    if (bundle.d != ds.d) {
        throw Error(ErrorKind::dimension, "bundle d = " + std::to_string(bundle.d) +
                                              " but dataset d = " + std::to_string(ds.d));
    }
    ensure_dir(cfg.output_path);

    std::vector<std::vector<double>> preds;
    for (const auto& p : bundle.probes) preds.push_back(predict_all(p, ds));

    const fs::path pred_path = fs::path(cfg.output_path) / "predictions.csv";
    auto pred = open_out(pred_path);
    std::vector<std::string> header{"row", "base_id", "entity", "polarity", "modality",
                                    "condition", "label", "yes_prob", "no_prob"};
    for (const auto& p : bundle.probes) header.emplace_back(to_string(kind_of(p)));
    csv::write_row(pred, header);
    bool all_labeled = ds.n() > 0;
    for (std::size_t i = 0; i < ds.n(); ++i) {
        const auto& s = ds.rows[i];
        all_labeled = all_labeled && s.label.has_value();
        std::vector<std::string> row{std::to_string(i), s.base_id,
                                     std::string(to_string(s.entity)),
                                     std::string(to_string(s.polarity)),
                                     std::string(to_string(s.modality)),
                                     std::string(to_string(s.condition)),
                                     s.label ? std::to_string(static_cast<int>(*s.label)) : "",
                                     format_float(s.yes_prob), format_float(s.no_prob)};
        for (const auto& v : preds) row.push_back(format_float(v[i]));
        csv::write_row(pred, row);
    }
    close_checked(pred, pred_path);
    out << "wrote " << ds.n() << " prediction row(s) -> " << pred_path.string() << '\n';

    if (all_labeled) {
        std::vector<std::size_t> rows(ds.n());
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
        const fs::path acc_path = fs::path(cfg.output_path) / "accuracy.csv";
        auto acc = open_out(acc_path);
        csv::write_row(acc, kAccuracyHeader);
        for (const auto& p : bundle.probes) {
            const auto rep = accuracy(p, ds, rows, cfg.cutoff);
            write_accuracy_rows(acc, std::string(to_string(kind_of(p))), layer_of(p), rep);
            out << to_string(kind_of(p)) << ": accuracy " << format_float(rep.accuracy) << '\n';
        }
        close_checked(acc, acc_path);
    } else {
        out << "dataset has unlabeled rows; accuracy.csv not written\n";
    }
    return 0;
}

int cmd_consistency(const RunConfig& cfg, std::ostream& out) {
    require_path(cfg.dataset_path, "--dataset");
    require_path(cfg.bundle_path, "--bundle");
    require_path(cfg.output_path, "--out");
    const auto ds = load_dataset(cfg.dataset_path);
    const auto bundle = load_bundle(cfg.bundle_path);
    ensure_dir(cfg.output_path);
    const auto rep = consistency(ds, bundle, cfg.condition);
    export_report(rep, (fs::path(cfg.output_path) / "consistency.csv").string(), "csv");
    export_report(rep, (fs::path(cfg.output_path) / "consistency.json").string(), "json");
    for (const auto& n : rep.notices) out << "note: " << n << '\n';
    for (const auto& f : rep.fits) {
        out << to_string(f.entity) << "/" << f.source << ": p_assert = " << format_float(f.intercept)
            << " + " << format_float(f.slope) << " * p_negate (R2 " << format_float(f.r2)
            << ", " << f.n_pairs() << " pairs)\n";
    }
    return 0;
}

int cmd_report(const RunConfig& cfg, std::ostream& out) {
    require_path(cfg.dataset_path, "--dataset");
    require_path(cfg.bundle_path, "--bundle");
    require_path(cfg.output_path, "--out");
    const auto ds = load_dataset(cfg.dataset_path);
    const auto bundle = load_bundle(cfg.bundle_path);
    ensure_dir(cfg.output_path);
    const fs::path root(cfg.output_path);

    const auto cells = summarize(ds, bundle, cfg.group_keys);
    export_report(cells, (root / "summary.csv").string(), "csv");
    export_report(cells, (root / "summary.json").string(), "json");
    out << "summary: " << cells.size() << " cell(s)\n";

    const auto rep = consistency(ds, bundle, cfg.condition);
    export_report(rep, (root / "consistency.csv").string(), "csv");
    export_report(rep, (root / "consistency.json").string(), "json");
    for (const auto& n : rep.notices) out << "note: " << n << '\n';
    out << "consistency: " << rep.fits.size() << " fit(s)\n";

    if (conditions_present(ds).size() >= 2) {
        const auto shift = condition_shift(ds, bundle, cfg.group_keys);
        export_report(shift, (root / "conditions.csv").string(), "csv");
        export_report(shift, (root / "conditions.json").string(), "json");
        out << "conditions: " << shift.size() << " cell(s)\n";
    } else {
        out << "note: single prompt condition; conditions.csv not written\n";
    }
    return 0;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"truthprobe: linear truth probes over residual-stream activations"};
    app.require_subcommand(1);
    RunConfig cfg;
    std::string kinds = "lr,mm,ttpd";
    std::string group_by = "entity,polarity";
    std::string entities = "human,llm,self";
    std::string condition = "default";

    auto add_dataset = [&](CLI::App* sub, bool required) {
        auto* opt = sub->add_option("--dataset", cfg.dataset_path, "Activation dataset directory");
        if (required) opt->required();
    };
    auto add_bundle = [&](CLI::App* sub) {
        sub->add_option("--bundle", cfg.bundle_path, "Probe bundle directory")->required();
    };

    auto* expand = app.add_subcommand("expand", "Expand a battery CSV into question variants");
    expand->add_option("--battery", cfg.battery_path, "Battery CSV")->required();
    expand->add_option("--out", cfg.output_path, "Expanded question CSV")->required();
    expand->add_option("--entities", entities, "Entities to emit")->capture_default_str();

    auto* train = app.add_subcommand("train", "Filter, split, sweep layers, write a probe bundle");
    add_dataset(train, true);
    train->add_option("--out", cfg.output_path, "Bundle directory")->required();
    train->add_option("--lambda", cfg.lambda, "Ridge penalty")
        ->check(CLI::NonNegativeNumber)->capture_default_str();
    train->add_option("--ratio", cfg.ratio, "Training fraction")
        ->check(CLI::Range(0.0, 1.0))->capture_default_str();
    train->add_option("--seed", cfg.seed, "Split seed")->capture_default_str();
    train->add_option("--threshold", cfg.threshold, "Knowledge-filter threshold")
        ->check(CLI::Range(0.0, 1.0))->capture_default_str();
    train->add_option("--kinds", kinds, "Probe kinds (lr,mm,ttpd,ttpd_simple)")
        ->capture_default_str();
    train->add_option("--threads", cfg.threads, "Layer-sweep threads (0 = all cores)");

    auto* eval = app.add_subcommand("eval", "Per-row probe outputs and accuracy");
    add_dataset(eval, true);
    add_bundle(eval);
    eval->add_option("--out", cfg.output_path, "Output directory")->required();
    eval->add_option("--cutoff", cfg.cutoff, "Classification cutoff")
        ->check(CLI::Range(0.0, 1.0))->capture_default_str();

    auto* report = app.add_subcommand("report", "Summary, consistency and condition tables");
    add_dataset(report, true);
    add_bundle(report);
    report->add_option("--out", cfg.output_path, "Output directory")->required();
    report->add_option("--group-by", group_by, "Grouping keys (entity,polarity,modality,condition)")
        ->capture_default_str();
    report->add_option("--condition", condition, "Condition used for consistency pairs")
        ->capture_default_str();

    auto* cons = app.add_subcommand("consistency", "Assertion/negation OLS fits");
    add_dataset(cons, true);
    add_bundle(cons);
    cons->add_option("--out", cfg.output_path, "Output directory")->required();
    cons->add_option("--condition", condition, "Condition used for pairing")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (*train) {
            cfg.kinds.clear();
            for (const auto& k : split_list(kinds)) cfg.kinds.push_back(parse_probe_kind(k));
            if (cfg.ratio <= 0.0 || cfg.ratio >= 1.0) {
                throw Error(ErrorKind::out_of_range, "--ratio must lie strictly between 0 and 1");
            }
        }
        if (*report) cfg.group_keys = parse_group_keys(group_by);
        if (*report || *cons) cfg.condition = parse_condition(condition);
        if (*expand) {
            cfg.entities.clear();
            for (const auto& e : split_list(entities)) cfg.entities.push_back(parse_entity(e));
            return cmd_expand(cfg, out);
        }
        if (*train) return cmd_train(cfg, out);
        if (*eval) return cmd_eval(cfg, out);
        if (*report) return cmd_report(cfg, out);
        if (*cons) return cmd_consistency(cfg, out);
    } catch (const Error& e) {
        err << "error [" << to_string(e.kind()) << "]: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

}  // namespace truthprobe::cli
