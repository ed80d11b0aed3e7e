#include "truthprobe/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>
#include <tuple>

#include "truthprobe/csv.hpp"
#include "truthprobe/error.hpp"

namespace truthprobe {

using ordered_json = nlohmann::ordered_json;

std::string_view to_string(GroupKey k) {
    switch (k) {
        case GroupKey::entity: return "entity";
        case GroupKey::polarity: return "polarity";
        case GroupKey::modality: return "modality";
        case GroupKey::condition: return "condition";
    }
    return "?";
}

GroupKey parse_group_key(std::string_view s) {
    for (auto k : {GroupKey::entity, GroupKey::polarity, GroupKey::modality, GroupKey::condition}) {
        if (to_string(k) == s) return k;
    }
    throw Error(ErrorKind::unknown_enum, "unknown group key '" + std::string(s) + "'");
}

std::vector<GroupKey> parse_group_keys(std::string_view list) {
    std::vector<GroupKey> out;
    while (!list.empty()) {
        const auto comma = list.find(',');
        const auto item = list.substr(0, comma);
        if (!item.empty()) {
            const auto k = parse_group_key(item);
            if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
        }
        if (comma == std::string_view::npos) break;
        list.remove_prefix(comma + 1);
    }
    return out;
}

std::string format_float(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

namespace {

bool has(std::span<const GroupKey> keys, GroupKey k) {
    return std::find(keys.begin(), keys.end(), k) != keys.end();
}

GroupLabel label_for(const ActivationSample& s, std::span<const GroupKey> keys) {
    GroupLabel g;
    if (has(keys, GroupKey::entity)) g.entity = s.entity;
    if (has(keys, GroupKey::polarity)) g.polarity = s.polarity;
    if (has(keys, GroupKey::modality)) g.modality = s.modality;
    if (has(keys, GroupKey::condition)) g.condition = s.condition;
    return g;
}

struct Moments {
    double mean = 0.0;
    double sd = 0.0;
};

Moments moments(std::span<const double> v) {
    Moments m;
    for (double x : v) m.mean += x;
    m.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - m.mean) * (x - m.mean);
        m.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return m;
}

// Per-source values for every dataset row: continuation first.
std::vector<std::pair<std::string, std::vector<double>>> source_values(const ActivationDataset& ds,
                                                                       const ProbeBundle& bundle) {
    std::vector<std::pair<std::string, std::vector<double>>> out;
    std::vector<double> cont;
    cont.reserve(ds.n());
    for (const auto& s : ds.rows) cont.push_back(s.yes_prob);
    out.emplace_back(std::string(kContinuationSource), std::move(cont));
    for (const auto& p : bundle.probes) {
        out.emplace_back(std::string(to_string(kind_of(p))), predict_all(p, ds));
    }
    return out;
}

template <typename T>
std::string opt_name(const std::optional<T>& v) {
    return v ? std::string(to_string(*v)) : std::string(kPooled);
}

template <typename T, typename Parse>
std::optional<T> parse_opt(const std::string& s, Parse parse) {
    if (s == kPooled) return std::nullopt;
    return parse(s);
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path);
    out << text;
    if (!out) throw Error(ErrorKind::io, "short write on " + path);
}

}  // namespace

std::vector<SummaryCell> summarize(const ActivationDataset& ds, const ProbeBundle& bundle,
                                   std::span<const GroupKey> keys) {
    if (ds.n() == 0) throw Error(ErrorKind::empty, "summarize: dataset has no rows, so no groups");
    const auto sources = source_values(ds, bundle);

    std::map<GroupLabel, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < ds.n(); ++i) groups[label_for(ds.rows[i], keys)].push_back(i);

    std::vector<SummaryCell> cells;
    std::vector<double> buf;
    for (const auto& [label, rows] : groups) {
        for (const auto& [name, values] : sources) {
            buf.clear();
            for (auto r : rows) buf.push_back(values[r]);
            const auto m = moments(buf);
            SummaryCell c;
            c.group = label;
            c.source = name;
            c.mean = m.mean;
            c.sd = m.sd;
            c.se = m.sd / std::sqrt(static_cast<double>(rows.size()));
            c.n = rows.size();
            cells.push_back(std::move(c));
        }
    }
    return cells;
}

std::vector<SummaryCell> condition_shift(const ActivationDataset& ds, const ProbeBundle& bundle,
                                         std::span<const GroupKey> keys) {
    if (conditions_present(ds).size() < 2) {
        throw Error(ErrorKind::invalid_argument,
                    "condition comparison needs at least two prompt conditions");
    }
    std::vector<GroupKey> with_condition(keys.begin(), keys.end());
    if (!has(with_condition, GroupKey::condition)) with_condition.push_back(GroupKey::condition);
    return summarize(ds, bundle, with_condition);
}

OlsFit ols_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw Error(ErrorKind::dimension, "ols: x and y lengths differ");
    if (x.size() < 2) throw Error(ErrorKind::invalid_argument, "ols: need at least two points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (!(sxx > 0.0)) throw Error(ErrorKind::invalid_argument, "ols: x has zero variance");

    OlsFit f;
    const auto [ymin, ymax] = std::minmax_element(y.begin(), y.end());
    if (*ymin == *ymax) {
        f.slope = 0.0;
        f.intercept = *ymin;
        f.r2 = 0.0;
        return f;
    }
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        ss_res += r * r;
    }
    f.r2 = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
    return f;
}

ConsistencyReport consistency(const ActivationDataset& ds, const ProbeBundle& bundle,
                              PromptCondition condition) {
    ConsistencyReport rep;
    rep.condition = condition;
    const auto sources = source_values(ds, bundle);

    // (entity, base_id) -> [assert row, negate row]
    std::map<std::pair<Entity, std::string>, std::array<std::optional<std::size_t>, 2>> pairs;
    for (std::size_t i = 0; i < ds.n(); ++i) {
        const auto& s = ds.rows[i];
        if (s.condition != condition) continue;
        pairs[{s.entity, s.base_id}][s.polarity == Polarity::assert_ ? 0 : 1] = i;
    }

    std::map<Entity, std::vector<std::pair<std::string, std::array<std::size_t, 2>>>> matched;
    for (const auto& [key, slot] : pairs) {
        if (slot[0] && slot[1]) {
            matched[key.first].push_back({key.second, {*slot[0], *slot[1]}});
        } else {
            ++rep.unpaired_rows;
        }
    }
    if (rep.unpaired_rows) {
        rep.notices.push_back(std::to_string(rep.unpaired_rows) +
                              " question(s) lack an assert/negate partner and were dropped");
    }

    for (auto entity : kAllEntities) {
        const auto it = matched.find(entity);
        const std::size_t n_pairs = it == matched.end() ? 0 : it->second.size();
        for (const auto& [name, values] : sources) {
            const std::string tag = std::string(to_string(entity)) + "/" + name;
            if (n_pairs == 0) continue;
            if (n_pairs < kMinConsistencyPairs) {
                rep.notices.push_back(tag + ": only " + std::to_string(n_pairs) +
                                      " pair(s), fit skipped");
                continue;
            }
            ConsistencyFit fit;
            fit.entity = entity;
            fit.source = name;
            std::vector<double> xs, ys;
            for (const auto& [base_id, rows] : it->second) {
                fit.base_ids.push_back(base_id);
                fit.points.emplace_back(values[rows[1]], values[rows[0]]);
                xs.push_back(values[rows[1]]);
                ys.push_back(values[rows[0]]);
            }
            try {
                const auto ols = ols_fit(xs, ys);
                fit.slope = ols.slope;
                fit.intercept = ols.intercept;
                fit.r2 = ols.r2;
            } catch (const Error& e) {
                rep.notices.push_back(tag + ": " + e.what() + ", fit skipped");
                continue;
            }
            rep.fits.push_back(std::move(fit));
        }
    }
    return rep;
}

ReportFormat parse_report_format(std::string_view s) {
    if (s == "csv") return ReportFormat::csv;
    if (s == "json") return ReportFormat::json;
    throw Error(ErrorKind::unknown_enum, "unknown report format '" + std::string(s) + "'");
}

void write_summary_csv(std::ostream& out, std::span<const SummaryCell> cells) {
    csv::write_row(out, {"entity", "polarity", "modality", "condition", "source", "mean", "sd",
                         "se", "n"});
    for (const auto& c : cells) {
        csv::write_row(out, {opt_name(c.group.entity), opt_name(c.group.polarity),
                             opt_name(c.group.modality), opt_name(c.group.condition), c.source,
                             format_float(c.mean), format_float(c.sd), format_float(c.se),
                             std::to_string(c.n)});
    }
}

void write_summary_json(std::ostream& out, std::span<const SummaryCell> cells) {
    auto j = ordered_json::array();
    for (const auto& c : cells) {
        ordered_json o;
        o["entity"] = opt_name(c.group.entity);
        o["polarity"] = opt_name(c.group.polarity);
        o["modality"] = opt_name(c.group.modality);
        o["condition"] = opt_name(c.group.condition);
        o["source"] = c.source;
        o["mean"] = c.mean;
        o["sd"] = c.sd;
        o["se"] = c.se;
        o["n"] = c.n;
        j.push_back(std::move(o));
    }
    out << j.dump(2) << '\n';
}

void write_consistency_csv(std::ostream& out, std::span<const ConsistencyFit> fits) {
    csv::write_row(out, {"entity", "source", "slope", "intercept", "r2", "n_pairs"});
    for (const auto& f : fits) {
        csv::write_row(out, {std::string(to_string(f.entity)), f.source, format_float(f.slope),
                             format_float(f.intercept), format_float(f.r2),
                             std::to_string(f.n_pairs())});
    }
}

void write_consistency_json(std::ostream& out, const ConsistencyReport& report) {
    ordered_json j;
    j["condition"] = to_string(report.condition);
    j["unpaired_rows"] = report.unpaired_rows;
    j["notices"] = report.notices;
    j["fits"] = ordered_json::array();
    for (const auto& f : report.fits) {
        ordered_json o;
        o["entity"] = to_string(f.entity);
        o["source"] = f.source;
        o["slope"] = f.slope;
        o["intercept"] = f.intercept;
        o["r2"] = f.r2;
        o["n_pairs"] = f.n_pairs();
        o["points"] = ordered_json::array();
        for (std::size_t i = 0; i < f.points.size(); ++i) {
            o["points"].push_back({{"base_id", f.base_ids[i]},
                                   {"p_negate", f.points[i].first},
                                   {"p_assert", f.points[i].second}});
        }
        j["fits"].push_back(std::move(o));
    }
    out << j.dump(2) << '\n';
}

void export_report(std::span<const SummaryCell> cells, const std::string& path,
                   std::string_view format) {
    const auto fmt = parse_report_format(format);
    std::ostringstream ss;
    if (fmt == ReportFormat::csv) write_summary_csv(ss, cells);
    else write_summary_json(ss, cells);
    write_file(path, ss.str());
}

void export_report(const ConsistencyReport& report, const std::string& path,
                   std::string_view format) {
    const auto fmt = parse_report_format(format);
    std::ostringstream ss;
    if (fmt == ReportFormat::csv) write_consistency_csv(ss, report.fits);
    else write_consistency_json(ss, report);
    write_file(path, ss.str());
}

std::vector<SummaryCell> read_summary_csv(std::istream& in) {
    const auto table = csv::read(in);
    std::vector<SummaryCell> out;
    if (table.header.empty()) return out;
    const std::vector<std::string> expected{"entity", "polarity", "modality", "condition", "source",
                                            "mean",   "sd",       "se",       "n"};
    if (table.header != expected) throw Error(ErrorKind::format, "unexpected summary.csv header");
    for (const auto& rec : table.records) {
        const auto& f = rec.fields;
        try {
            SummaryCell c;
            c.group.entity = parse_opt<Entity>(f[0], parse_entity);
            c.group.polarity = parse_opt<Polarity>(f[1], parse_polarity);
            c.group.modality = parse_opt<Modality>(f[2], parse_modality);
            c.group.condition = parse_opt<PromptCondition>(f[3], parse_condition);
            c.source = f[4];
            c.mean = std::stod(f[5]);
            c.sd = std::stod(f[6]);
            c.se = std::stod(f[7]);
            c.n = std::stoul(f[8]);
            out.push_back(std::move(c));
        } catch (const std::logic_error&) {
            throw Error(ErrorKind::format, "line " + std::to_string(rec.line) + ": bad number");
        }
    }
    return out;
}

}  // namespace truthprobe
