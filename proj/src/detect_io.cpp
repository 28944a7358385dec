#include "biaslens/detect.hpp"
#include "biaslens/error.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace biaslens {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCategory::io, "cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct Reader {
    std::string_view origin;

    [[noreturn]] void fail(const std::string& where, const std::string& what) const {
        throw Error(ErrorCategory::validation, std::string(origin) + ": " + where + ": " + what);
    }

    json parse(std::string_view text) const {
        try {
            return json::parse(text);
        } catch (const json::exception& e) {
            throw Error(ErrorCategory::format, std::string(origin) + ": " + e.what());
        }
    }

    const json& field(const json& obj, const char* key, const std::string& where) const {
        if (!obj.is_object() || !obj.contains(key)) fail(where + "." + key, "missing");
        return obj.at(key);
    }

    std::string string(const json& obj, const char* key, const std::string& where) const {
        const json& v = field(obj, key, where);
        if (!v.is_string()) fail(where + "." + key, "expected a string");
        return v.get<std::string>();
    }

    std::vector<std::string> words(const json& obj, const char* key, const std::string& where) const {
        const json& v = field(obj, key, where);
        if (!v.is_array()) fail(where + "." + key, "expected an array of strings");
        std::vector<std::string> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_string()) fail(where + "." + key + "[" + std::to_string(i) + "]", "expected a string");
            out.push_back(v[i].get<std::string>());
        }
        return out;
    }
};

std::size_t index_of(const std::vector<std::string>& labels, const std::string& label, const Reader& r,
                     const std::string& where) {
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == label) return i;
    r.fail(where, "unknown label \"" + label + "\"");
}

}  // namespace

GroupGrid parse_grid(std::string_view json_text, std::string_view origin) {
    const Reader r{origin};
    const json doc = r.parse(json_text);
    GroupGrid g;
    const json& rows = r.field(doc, "rows", "$");
    const json& cols = r.field(doc, "cols", "$");
    g.rows = {r.string(rows, "name", "$.rows"), r.words(rows, "labels", "$.rows")};
    g.cols = {r.string(cols, "name", "$.cols"), r.words(cols, "labels", "$.cols")};
    const json& cells = r.field(doc, "cells", "$");
    if (!cells.is_array()) r.fail("$.cells", "expected an array");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const std::string where = "$.cells[" + std::to_string(i) + "]";
        Cell c;
        c.id = r.string(cells[i], "id", where);
        c.row = index_of(g.rows.labels, r.string(cells[i], "row", where), r, where + ".row");
        c.col = index_of(g.cols.labels, r.string(cells[i], "col", where), r, where + ".col");
        c.names = r.words(cells[i], "names", where);
        g.cells.push_back(std::move(c));
    }
    try {
        g.validate();
    } catch (const Error& e) {
        throw Error(ErrorCategory::validation, std::string(origin) + ": " + e.what());
    }
    return g;
}

GroupGrid load_grid(const std::filesystem::path& path) { return parse_grid(read_file(path), path.string()); }

std::string grid_to_json(const GroupGrid& g) {
    ordered_json cells = ordered_json::array();
    for (const Cell& c : g.cells)
        cells.push_back({{"id", c.id}, {"row", g.rows.labels.at(c.row)}, {"col", g.cols.labels.at(c.col)},
                         {"names", c.names}});
    ordered_json doc = {{"rows", {{"name", g.rows.name}, {"labels", g.rows.labels}}},
                        {"cols", {{"name", g.cols.name}, {"labels", g.cols.labels}}},
                        {"cells", std::move(cells)}};
    return doc.dump(2) + "\n";
}

EibdRemoval parse_removal(std::string_view name) {
    if (name == "any-constituent" || name == "any") return EibdRemoval::any_constituent;
    if (name == "all-constituents" || name == "all") return EibdRemoval::all_constituents;
    throw Error(ErrorCategory::parameter, "unknown EIBD removal mode \"" + std::string(name) + "\"");
}

std::string_view removal_name(EibdRemoval removal) {
    return removal == EibdRemoval::any_constituent ? "any-constituent" : "all-constituents";
}

DetectionConfig parse_detection_config(std::string_view json_text, std::string_view origin) {
    const Reader r{origin};
    const json doc = r.parse(json_text);
    DetectionConfig cfg;
    cfg.target_cell = r.string(doc, "target_cell", "$");
    cfg.candidate_pool = r.words(doc, "candidate_pool", "$");
    if (cfg.candidate_pool.empty()) r.fail("$.candidate_pool", "must not be empty");
    const json& t = r.field(doc, "threshold", "$");
    if (!t.is_number() || !std::isfinite(t.get<double>())) r.fail("$.threshold", "expected a finite number");
    cfg.threshold = t.get<double>();
    if (doc.contains("eibd_removal")) {
        try {
            cfg.removal = parse_removal(r.string(doc, "eibd_removal", "$"));
        } catch (const Error& e) {
            r.fail("$.eibd_removal", e.what());
        }
    }
    return cfg;
}

std::string detection_config_to_json(const DetectionConfig& cfg) {
    ordered_json doc = {{"target_cell", cfg.target_cell},
                        {"candidate_pool", cfg.candidate_pool},
                        {"threshold", cfg.threshold},
                        {"eibd_removal", removal_name(cfg.removal)}};
    return doc.dump(2) + "\n";
}

CandidatePool parse_pool(std::string_view json_text, std::string_view origin) {
    const Reader r{origin};
    const json doc = r.parse(json_text);
    CandidatePool pool;
    pool.candidates = r.words(doc, "candidates", "$");
    if (pool.candidates.empty()) r.fail("$.candidates", "must not be empty");
    const std::set<std::string> all(pool.candidates.begin(), pool.candidates.end());
    auto labels = [&](const char* key) -> std::optional<Labels> {
        if (!doc.contains(key)) return std::nullopt;
        Labels out;
        for (const auto& w : pool.candidates) out.emplace(w, false);
        for (const auto& w : r.words(doc, key, "$")) {
            if (!all.contains(w)) r.fail(std::string("$.") + key, "\"" + w + "\" is not a candidate");
            out[w] = true;
        }
        return out;
    };
    pool.ibd_labels = labels("ibd_positives");
    pool.eibd_labels = labels("eibd_positives");
    return pool;
}

CandidatePool load_pool(const std::filesystem::path& path) { return parse_pool(read_file(path), path.string()); }

}  // namespace biaslens
