#include "truthprobe/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <thread>

#include "truthprobe/error.hpp"

namespace truthprobe {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

std::vector<Answer> labels_of(const ActivationDataset& ds, std::span<const std::size_t> rows) {
    std::vector<Answer> out;
    out.reserve(rows.size());
    for (auto r : rows) {
        const auto& s = ds.rows[r];
        if (!s.label) {
            throw Error(ErrorKind::invalid_argument,
                        "row " + std::to_string(r) + " (" + s.base_id + ") is unlabeled");
        }
        out.push_back(*s.label);
    }
    return out;
}

std::vector<Polarity> polarities_of(const ActivationDataset& ds, std::span<const std::size_t> rows) {
    std::vector<Polarity> out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back(ds.rows[r].polarity);
    return out;
}

void check_probe_fits(const Probe& probe, const ActivationDataset& ds) {
    if (dim_of(probe) != ds.d) {
        throw Error(ErrorKind::dimension, "probe expects d = " + std::to_string(dim_of(probe)) +
                                              ", dataset has d = " + std::to_string(ds.d));
    }
    if (layer_of(probe) >= ds.num_layers()) {
        throw Error(ErrorKind::dimension, "probe layer " + std::to_string(layer_of(probe)) +
                                              " not present (dataset has " +
                                              std::to_string(ds.num_layers()) + " layers)");
    }
}

std::string file_for(ProbeKind kind) { return "probe_" + std::string(to_string(kind)) + ".json"; }

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    out << text << '\n';
    if (!out) throw Error(ErrorKind::io, "short write on " + path.string());
}

}  // namespace

std::vector<double> predict_rows(const Probe& probe, const ActivationDataset& ds,
                                 std::span<const std::size_t> rows) {
    check_probe_fits(probe, ds);
    const auto& layer = ds.layers[layer_of(probe)];
    std::vector<double> out;
    out.reserve(rows.size());
    for (auto r : rows) {
        if (r >= ds.n()) throw Error(ErrorKind::invalid_argument, "row index out of range");
        const float* begin = layer.data() + static_cast<std::ptrdiff_t>(r * ds.d);
        out.push_back(predict(probe, std::span<const float>(begin, ds.d)));
    }
    return out;
}

std::vector<double> predict_all(const Probe& probe, const ActivationDataset& ds) {
    std::vector<std::size_t> rows(ds.n());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return predict_rows(probe, ds, rows);
}

AccuracyReport accuracy(const Probe& probe, const ActivationDataset& ds,
                        std::span<const std::size_t> rows, double cutoff) {
    if (rows.empty()) throw Error(ErrorKind::empty, "accuracy over zero rows");
    const auto labels = labels_of(ds, rows);
    const auto probs = predict_rows(probe, ds, rows);

    AccuracyReport rep;
    std::map<std::pair<PromptCondition, Polarity>, AccuracyCell> cells;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& s = ds.rows[rows[i]];
        const bool hit = (probs[i] >= cutoff) == (labels[i] == Answer::yes);
        auto& cell = cells[{s.condition, s.polarity}];
        cell.condition = s.condition;
        cell.polarity = s.polarity;
        ++cell.n;
        cell.correct += hit;
        rep.correct += hit;
    }
    rep.n = rows.size();
    rep.accuracy = static_cast<double>(rep.correct) / static_cast<double>(rep.n);
    for (auto& [key, cell] : cells) rep.breakdown.push_back(cell);
    return rep;
}

SweepOutcome sweep_layers(const ActivationDataset& ds, ProbeKind kind,
                          const SplitAssignment& split, const SweepOptions& options) {
    if (ds.num_layers() == 0) throw Error(ErrorKind::invalid_argument, "dataset has no layers");
    if (split.train_rows.empty() || split.holdout_rows.empty()) {
        throw Error(ErrorKind::empty, "split has an empty side");
    }
    const auto train_labels = labels_of(ds, split.train_rows);
    labels_of(ds, split.holdout_rows);
    const auto train_pol = polarities_of(ds, split.train_rows);

    const std::size_t L = ds.num_layers();
    std::vector<std::optional<Probe>> probes(L);
    std::vector<double> acc(L, 0.0);
    std::vector<std::string> failure(L);
    std::vector<std::exception_ptr> fatal(L);

    auto work = [&](std::size_t layer) {
        try {
            const auto X = gather(ds, layer, split.train_rows);
            auto probe = fit_probe(kind, X, train_labels, train_pol, options.lambda, layer,
                                   options.optimizer);
            acc[layer] = accuracy(probe, ds, split.holdout_rows).accuracy;
            probes[layer] = std::move(probe);
        } catch (const Error& e) {
            failure[layer] = std::string(to_string(e.kind())) + ": " + e.what();
        } catch (...) {
            fatal[layer] = std::current_exception();
        }
    };

    unsigned threads = options.threads ? options.threads : std::thread::hardware_concurrency();
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(L)));
    if (threads == 1) {
        for (std::size_t k = 0; k < L; ++k) work(k);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t k; (k = next.fetch_add(1)) < L;) work(k);
            });
        }
    }
    for (auto& e : fatal) {
        if (e) std::rethrow_exception(e);
    }

    SweepResult result;
    result.kind = kind;
    std::optional<std::size_t> best;
    for (std::size_t k = 0; k < L; ++k) {
        if (!probes[k]) {
            result.excluded.push_back({k, failure[k]});
            continue;
        }
        result.per_layer_accuracy.push_back({k, acc[k]});
        if (!best || acc[k] > acc[*best]) best = k;
    }
    if (!best) {
        throw Error(ErrorKind::empty, "every layer failed for kind " + std::string(to_string(kind)) +
                                          " (layer 0: " + failure[0] + ")");
    }
    result.best_layer = *best;
    result.best_accuracy = acc[*best];
    return {std::move(result), std::move(*probes[*best])};
}

const Probe* ProbeBundle::find(ProbeKind kind) const {
    for (const auto& p : probes) {
        if (kind_of(p) == kind) return &p;
    }
    return nullptr;
}

ProbeBundle train_all(const ActivationDataset& ds, const TrainConfig& config) {
    if (!(config.lambda >= 0.0)) throw Error(ErrorKind::out_of_range, "lambda must be >= 0");
    if (config.kinds.empty()) throw Error(ErrorKind::invalid_argument, "no probe kinds requested");

    ProbeBundle bundle;
    bundle.model_id = ds.model_id;
    bundle.d = ds.d;
    bundle.num_layers = ds.num_layers();
    bundle.lambda = config.lambda;
    bundle.filter_threshold = config.threshold;
    bundle.rows_before_filter = ds.n();

    const auto present = conditions_present(ds);
    for (auto c : {PromptCondition::force_yes, PromptCondition::force_no}) {
        if (std::find(present.begin(), present.end(), c) == present.end()) {
            bundle.warnings.push_back("no " + std::string(to_string(c)) +
                                      " rows; probes may track outputs rather than truth");
        }
    }

    const auto kept = filter_known(ds, config.threshold);
    bundle.rows_after_filter = kept.n();
    if (kept.n() == 0) {
        throw Error(ErrorKind::empty, "no rows pass the knowledge filter at threshold " +
                                          std::to_string(config.threshold));
    }

    bundle.split = split(kept, config.ratio, config.seed);
    std::set<std::string> holdout_ids;
    for (auto r : bundle.split.holdout_rows) holdout_ids.insert(kept.rows[r].base_id);
    bundle.holdout_base_ids.assign(holdout_ids.begin(), holdout_ids.end());

    SweepOptions sweep_opts{config.lambda, config.optimizer, config.threads};
    std::set<ProbeKind> done;
    for (auto kind : config.kinds) {
        if (!done.insert(kind).second) continue;
        auto outcome = sweep_layers(kept, kind, bundle.split, sweep_opts);
        bundle.sweeps.push_back(std::move(outcome.result));
        bundle.probes.push_back(std::move(outcome.best_probe));
    }
    return bundle;
}

void save_bundle(const ProbeBundle& bundle, const std::string& dir) {
    const fs::path root(dir);
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw Error(ErrorKind::io, "cannot create " + root.string() + ": " + ec.message());

    ordered_json j;
    ordered_json prov;
    prov["model_id"] = bundle.model_id;
    prov["d"] = bundle.d;
    prov["num_layers"] = bundle.num_layers;
    prov["lambda"] = bundle.lambda;
    prov["ratio"] = bundle.split.ratio;
    prov["seed"] = bundle.split.seed;
    prov["threshold"] = bundle.filter_threshold;
    prov["rows_before_filter"] = bundle.rows_before_filter;
    prov["rows_after_filter"] = bundle.rows_after_filter;
    j["provenance"] = prov;

    ordered_json sp;
    sp["train_rows"] = bundle.split.train_rows;
    sp["holdout_rows"] = bundle.split.holdout_rows;
    sp["holdout_base_ids"] = bundle.holdout_base_ids;
    j["split"] = sp;

    j["sweeps"] = ordered_json::array();
    for (const auto& s : bundle.sweeps) {
        ordered_json js;
        js["kind"] = to_string(s.kind);
        js["best_layer"] = s.best_layer;
        js["best_accuracy"] = s.best_accuracy;
        js["layers"] = ordered_json::array();
        for (const auto& la : s.per_layer_accuracy) {
            js["layers"].push_back({{"layer", la.layer}, {"accuracy", la.accuracy}});
        }
        js["excluded"] = ordered_json::array();
        for (const auto& ex : s.excluded) {
            js["excluded"].push_back({{"layer", ex.layer}, {"reason", ex.reason}});
        }
        j["sweeps"].push_back(js);
    }

    j["probes"] = ordered_json::object();
    for (const auto& p : bundle.probes) {
        const auto kind = kind_of(p);
        j["probes"][std::string(to_string(kind))] = file_for(kind);
        save_probe(p, (root / file_for(kind)).string());
    }
    j["warnings"] = bundle.warnings;
    write_text(root / "bundle.json", j.dump(2));
}

ProbeBundle load_bundle(const std::string& dir) {
    const fs::path root(dir);
    std::ifstream in(root / "bundle.json", std::ios::binary);
    if (!in) throw Error(ErrorKind::missing_file, "missing " + (root / "bundle.json").string());
    ordered_json j;
    try {
        j = ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::format, "bundle.json: " + std::string(e.what()));
    }

    ProbeBundle b;
    try {
        const auto& prov = j.at("provenance");
        b.model_id = prov.at("model_id").get<std::string>();
        b.d = prov.at("d").get<std::size_t>();
        b.num_layers = prov.at("num_layers").get<std::size_t>();
        b.lambda = prov.at("lambda").get<double>();
        b.filter_threshold = prov.at("threshold").get<double>();
        b.rows_before_filter = prov.at("rows_before_filter").get<std::size_t>();
        b.rows_after_filter = prov.at("rows_after_filter").get<std::size_t>();
        b.split.ratio = prov.at("ratio").get<double>();
        b.split.seed = prov.at("seed").get<std::uint64_t>();

        const auto& sp = j.at("split");
        b.split.train_rows = sp.at("train_rows").get<std::vector<std::size_t>>();
        b.split.holdout_rows = sp.at("holdout_rows").get<std::vector<std::size_t>>();
        b.holdout_base_ids = sp.at("holdout_base_ids").get<std::vector<std::string>>();

        for (const auto& js : j.at("sweeps")) {
            SweepResult s;
            s.kind = parse_probe_kind(js.at("kind").get<std::string>());
            s.best_layer = js.at("best_layer").get<std::size_t>();
            s.best_accuracy = js.at("best_accuracy").get<double>();
            for (const auto& la : js.at("layers")) {
                s.per_layer_accuracy.push_back({la.at("layer").get<std::size_t>(),
                                                la.at("accuracy").get<double>()});
            }
            for (const auto& ex : js.at("excluded")) {
                s.excluded.push_back({ex.at("layer").get<std::size_t>(),
                                      ex.at("reason").get<std::string>()});
            }
            const auto file = j.at("probes").at(std::string(to_string(s.kind))).get<std::string>();
            b.probes.push_back(load_probe((root / file).string()));
            if (layer_of(b.probes.back()) != s.best_layer) {
                throw Error(ErrorKind::format, "bundle.json: probe layer disagrees with sweep best_layer");
            }
            b.sweeps.push_back(std::move(s));
        }
        b.warnings = j.value("warnings", std::vector<std::string>{});
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::format, "bundle.json: " + std::string(e.what()));
    }
    return b;
}

}  // namespace truthprobe
