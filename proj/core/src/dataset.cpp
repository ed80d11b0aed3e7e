#include "truthprobe/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <tuple>

#include "truthprobe/error.hpp"

namespace truthprobe {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using json = nlohmann::json;

namespace {

constexpr const char* kManifestName = "manifest.json";

using QuestionKey = std::tuple<std::string, Entity, Polarity>;

QuestionKey question_key(const ActivationSample& s) { return {s.base_id, s.entity, s.polarity}; }

std::string describe(const ActivationSample& s) {
    return s.base_id + "/" + std::string(to_string(s.entity)) + "/" +
           std::string(to_string(s.polarity)) + "/" + std::string(to_string(s.condition));
}

void check_probability(double p, const char* name, std::size_t row) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
        throw Error(ErrorKind::out_of_range, "row " + std::to_string(row) + ": " + name + " = " +
                                                 std::to_string(p) + " outside [0, 1]");
    }
}

void validate_row(const ActivationSample& s, std::size_t i) {
    check_probability(s.yes_prob, "yes_prob", i);
    check_probability(s.no_prob, "no_prob", i);
    if (s.yes_prob + s.no_prob > 1.0 + kProbMassSlack) {
        throw Error(ErrorKind::out_of_range,
                    "row " + std::to_string(i) + ": yes_prob + no_prob exceeds 1");
    }
}

template <typename T>
T require(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) throw Error(ErrorKind::format, where + ": missing key '" + key + "'");
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorKind::format, where + ": key '" + key + "' has the wrong type");
    }
}

std::size_t require_count(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) throw Error(ErrorKind::format, where + ": missing key '" + key + "'");
    if (!it->is_number_integer() || it->get<std::int64_t>() < 0) {
        throw Error(ErrorKind::format, where + ": key '" + key + "' must be a non-negative integer");
    }
    return it->get<std::size_t>();
}

ActivationSample parse_row(const json& r, std::size_t i) {
    const std::string where = "manifest row " + std::to_string(i);
    if (!r.is_object()) throw Error(ErrorKind::format, where + ": not an object");
    ActivationSample s;
    s.base_id = require<std::string>(r, "base_id", where);
    s.entity = parse_entity(require<std::string>(r, "entity", where));
    s.polarity = parse_polarity(require<std::string>(r, "polarity", where));
    s.modality = parse_modality(require<std::string>(r, "modality", where));
    s.condition = parse_condition(require<std::string>(r, "condition", where));
    s.yes_prob = require<double>(r, "yes_prob", where);
    s.no_prob = require<double>(r, "no_prob", where);

    auto label = r.find("label");
    if (label == r.end()) throw Error(ErrorKind::format, where + ": missing key 'label'");
    if (!label->is_null()) {
        if (!label->is_number_integer()) {
            throw Error(ErrorKind::format, where + ": label must be 0, 1 or null");
        }
        const auto v = label->get<std::int64_t>();
        if (v != 0 && v != 1) {
            throw Error(ErrorKind::out_of_range, where + ": label " + std::to_string(v) +
                                                     " is not 0 or 1");
        }
        s.label = v == 1 ? Answer::yes : Answer::no;
    }

    auto reasoning = r.find("reasoning");
    if (reasoning != r.end() && !reasoning->is_null()) {
        if (!reasoning->is_string()) throw Error(ErrorKind::format, where + ": reasoning must be a string");
        s.reasoning = reasoning->get<std::string>();
    }
    return s;
}

ordered_json row_to_json(const ActivationSample& s) {
    ordered_json r;
    r["base_id"] = s.base_id;
    r["entity"] = to_string(s.entity);
    r["polarity"] = to_string(s.polarity);
    r["modality"] = to_string(s.modality);
    r["condition"] = to_string(s.condition);
    r["yes_prob"] = s.yes_prob;
    r["no_prob"] = s.no_prob;
    r["label"] = s.label ? ordered_json(static_cast<int>(*s.label)) : ordered_json(nullptr);
    r["reasoning"] = s.reasoning ? ordered_json(*s.reasoning) : ordered_json(nullptr);
    return r;
}

void read_layer(const fs::path& path, LayerMatrix& out, std::size_t n, std::size_t d) {
    std::error_code ec;
    if (!fs::exists(path, ec)) {
        throw Error(ErrorKind::missing_file, "missing layer file " + path.string());
    }
    const auto bytes = fs::file_size(path, ec);
    const auto expected = static_cast<std::uintmax_t>(n) * d * sizeof(float);
    if (ec || bytes != expected) {
        throw Error(ErrorKind::shape_mismatch,
                    path.string() + ": expected " + std::to_string(expected) + " bytes (" +
                        std::to_string(n) + "x" + std::to_string(d) + " float32), found " +
                        std::to_string(bytes));
    }
    out.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    if (expected == 0) return;
    std::ifstream in(path, std::ios::binary);
    if (!in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(expected))) {
        throw Error(ErrorKind::io, "short read on " + path.string());
    }
    if constexpr (std::endian::native == std::endian::big) {
        auto* words = reinterpret_cast<std::uint32_t*>(out.data());
        for (std::size_t i = 0; i < n * d; ++i) words[i] = __builtin_bswap32(words[i]);
    }
}

void write_layer(const fs::path& path, const LayerMatrix& m) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    const auto bytes = static_cast<std::streamsize>(m.size() * sizeof(float));
    if constexpr (std::endian::native == std::endian::big) {
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            std::uint32_t w;
            std::memcpy(&w, m.data() + i, sizeof w);
            w = __builtin_bswap32(w);
            out.write(reinterpret_cast<const char*>(&w), sizeof w);
        }
    } else if (bytes > 0) {
        out.write(reinterpret_cast<const char*>(m.data()), bytes);
    }
    if (!out) throw Error(ErrorKind::io, "short write on " + path.string());
}

}  // namespace

std::string layer_file_name(std::size_t layer) {
    return "layer_" + std::to_string(layer) + ".f32";
}

bool ActivationDataset::operator==(const ActivationDataset& other) const {
    if (model_id != other.model_id || d != other.d || rows != other.rows ||
        layers.size() != other.layers.size()) {
        return false;
    }
    if (json::parse(manifest_extra) != json::parse(other.manifest_extra)) return false;
    for (std::size_t k = 0; k < layers.size(); ++k) {
        const auto& a = layers[k];
        const auto& b = other.layers[k];
        if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
        // Bitwise, so NaN payloads and signed zeros count.
        if (a.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) != 0) return false;
    }
    return true;
}

void validate(const ActivationDataset& ds) {
    if (ds.d == 0) throw Error(ErrorKind::invalid_argument, "residual width d must be positive");
    if (ds.layers.empty()) throw Error(ErrorKind::invalid_argument, "dataset has no layers");
    const auto n = static_cast<Eigen::Index>(ds.n());
    const auto d = static_cast<Eigen::Index>(ds.d);
    for (std::size_t k = 0; k < ds.layers.size(); ++k) {
        const auto& m = ds.layers[k];
        if (m.rows() != n || m.cols() != d) {
            throw Error(ErrorKind::shape_mismatch,
                        "layer " + std::to_string(k) + " is " + std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()) + ", manifest says " + std::to_string(n) +
                            "x" + std::to_string(d));
        }
        if (!m.allFinite()) {
            throw Error(ErrorKind::non_finite, "layer " + std::to_string(k) +
                                                   " contains non-finite activations");
        }
    }
    std::set<std::tuple<std::string, Entity, Polarity, PromptCondition>> seen;
    for (std::size_t i = 0; i < ds.rows.size(); ++i) {
        const auto& s = ds.rows[i];
        validate_row(s, i);
        if (!seen.emplace(s.base_id, s.entity, s.polarity, s.condition).second) {
            throw Error(ErrorKind::invalid_argument, "row " + std::to_string(i) + ": duplicate " +
                                                         describe(s));
        }
    }
    const auto extra = json::parse(ds.manifest_extra, nullptr, false);
    if (extra.is_discarded() || !extra.is_object()) {
        throw Error(ErrorKind::format, "manifest_extra must be a JSON object");
    }
}

ActivationDataset load_dataset(const std::string& dir) {
    const fs::path root(dir);
    const auto manifest_path = root / kManifestName;
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) throw Error(ErrorKind::missing_file, "missing " + manifest_path.string());

    json manifest;
    try {
        manifest = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::format, manifest_path.string() + ": " + e.what());
    }
    if (!manifest.is_object()) throw Error(ErrorKind::format, "manifest is not a JSON object");

    ActivationDataset ds;
    const std::string where = manifest_path.string();
    ds.model_id = require<std::string>(manifest, "model_id", where);
    ds.d = require_count(manifest, "d", where);
    const auto num_layers = require_count(manifest, "num_layers", where);
    const auto n = require_count(manifest, "n", where);
    const auto rows = manifest.find("rows");
    if (rows == manifest.end() || !rows->is_array()) {
        throw Error(ErrorKind::format, where + ": 'rows' must be an array");
    }
    if (rows->size() != n) {
        throw Error(ErrorKind::shape_mismatch, where + ": n = " + std::to_string(n) + " but " +
                                                   std::to_string(rows->size()) + " rows listed");
    }
    ds.rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) ds.rows.push_back(parse_row((*rows)[i], i));

    json extra = json::object();
    for (auto it = manifest.begin(); it != manifest.end(); ++it) {
        static const std::set<std::string> known{"model_id", "d", "num_layers", "n", "rows"};
        if (!known.contains(it.key())) extra[it.key()] = it.value();
    }
    ds.manifest_extra = extra.dump();

    if (ds.d == 0) throw Error(ErrorKind::invalid_argument, "residual width d must be positive");
    ds.layers.resize(num_layers);
    for (std::size_t k = 0; k < num_layers; ++k) {
        read_layer(root / layer_file_name(k), ds.layers[k], n, ds.d);
    }
    validate(ds);
    return ds;
}

void save_dataset(const ActivationDataset& ds, const std::string& dir) {
    validate(ds);
    const fs::path root(dir);
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw Error(ErrorKind::io, "cannot create " + root.string() + ": " + ec.message());

    ordered_json manifest;
    manifest["model_id"] = ds.model_id;
    manifest["d"] = ds.d;
    manifest["num_layers"] = ds.num_layers();
    manifest["n"] = ds.n();
    manifest["rows"] = ordered_json::array();
    for (const auto& s : ds.rows) manifest["rows"].push_back(row_to_json(s));
    const auto extra = ordered_json::parse(ds.manifest_extra);
    for (auto it = extra.begin(); it != extra.end(); ++it) manifest[it.key()] = it.value();

    const auto manifest_path = root / kManifestName;
    std::ofstream out(manifest_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write " + manifest_path.string());
    out << manifest.dump(2) << '\n';
    if (!out) throw Error(ErrorKind::io, "short write on " + manifest_path.string());

    for (std::size_t k = 0; k < ds.num_layers(); ++k) {
        write_layer(root / layer_file_name(k), ds.layers[k]);
    }
}

ActivationDataset select_rows(const ActivationDataset& ds, std::span<const std::size_t> rows) {
    ActivationDataset out;
    out.model_id = ds.model_id;
    out.d = ds.d;
    out.manifest_extra = ds.manifest_extra;
    out.rows.reserve(rows.size());
    for (auto r : rows) {
        if (r >= ds.n()) throw Error(ErrorKind::invalid_argument, "row index out of range");
        out.rows.push_back(ds.rows[r]);
    }
    out.layers.reserve(ds.num_layers());
    for (const auto& layer : ds.layers) {
        LayerMatrix m(static_cast<Eigen::Index>(rows.size()), layer.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            m.row(static_cast<Eigen::Index>(i)) = layer.row(static_cast<Eigen::Index>(rows[i]));
        }
        out.layers.push_back(std::move(m));
    }
    return out;
}

ActivationDataset filter_known(const ActivationDataset& ds, double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw Error(ErrorKind::out_of_range, "filter threshold must lie in [0, 1]");
    }
    std::map<QuestionKey, std::size_t> default_row;
    for (std::size_t i = 0; i < ds.n(); ++i) {
        const auto& s = ds.rows[i];
        if (!s.label) {
            throw Error(ErrorKind::invalid_argument,
                        "row " + std::to_string(i) + " (" + describe(s) + ") is unlabeled");
        }
        if (s.condition == PromptCondition::default_) default_row.emplace(question_key(s), i);
    }

    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < ds.n(); ++i) {
        const auto& s = ds.rows[i];
        const auto it = default_row.find(question_key(s));
        if (it == default_row.end()) {
            throw Error(ErrorKind::invalid_argument,
                        "row " + std::to_string(i) + " (" + describe(s) +
                            "): question has no default-condition row");
        }
        const auto& ref = ds.rows[it->second];
        const double correct_mass = *ref.label == Answer::yes ? ref.yes_prob : ref.no_prob;
        if (correct_mass >= threshold) keep.push_back(i);
    }
    return select_rows(ds, keep);
}

std::vector<PromptCondition> conditions_present(const ActivationDataset& ds) {
    std::set<PromptCondition> seen;
    for (const auto& s : ds.rows) seen.insert(s.condition);
    return {seen.begin(), seen.end()};
}

Eigen::MatrixXd gather(const ActivationDataset& ds, std::size_t layer,
                       std::span<const std::size_t> rows) {
    if (layer >= ds.num_layers()) {
        throw Error(ErrorKind::invalid_argument, "layer " + std::to_string(layer) +
                                                     " out of range (dataset has " +
                                                     std::to_string(ds.num_layers()) + ")");
    }
    const auto& m = ds.layers[layer];
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= ds.n()) throw Error(ErrorKind::invalid_argument, "row index out of range");
        out.row(static_cast<Eigen::Index>(i)) =
            m.row(static_cast<Eigen::Index>(rows[i])).cast<double>();
    }
    return out;
}

}  // namespace truthprobe
