#pragma once

// JSON and file output for pipeline and subcommand reports. Needs the
// single-header nlohmann/json on the include path.

#include "covflow/pipeline.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>

namespace covflow {

using ojson = nlohmann::ordered_json;

// Non-finite values become null.
inline ojson json_number(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

inline ojson to_json(const NamedValues& v) {
    ojson j = ojson::object();
    for (const auto& [k, x] : v) j[k] = json_number(x);
    return j;
}

inline ojson to_json(const PipelineReport& r) {
    ojson j;
    j["config_hash"] = r.config_hash;
    j["stages"] = ojson::array();
    for (const auto& s : r.stages)
        j["stages"].push_back({{"name", s.name}, {"pass", s.pass}, {"config_hash", r.config_hash}, {"metrics", to_json(s.metrics)}});
    j["pairs"] = ojson::array();
    for (const auto& p : r.pairs)
        j["pairs"].push_back({{"anchor", p.anchor},
                              {"lhs", json_number(p.lhs)},
                              {"rhs", json_number(p.rhs)},
                              {"ratio", json_number(p.ratio())},
                              {"pass", p.pass()}});
    j["defects"] = to_json(r.defects);
    return j;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << text;
    if (!f) throw std::runtime_error("write failed: " + p.string());
}

inline bool wants_csv(const std::string& formats) { return formats == "csv" || formats == "both"; }
inline bool wants_json(const std::string& formats) { return formats == "json" || formats == "both"; }

// monitors.csv, carleman.csv (when the sweep ran) and report.json.
inline void write_pipeline_outputs(const PipelineReport& r, const std::filesystem::path& dir,
                                   const std::string& formats) {
    std::filesystem::create_directories(dir);
    if (wants_csv(formats)) {
        std::ostringstream m;
        write_monitors_csv(m, r.convexity, r.grad_series);
        write_text(dir / "monitors.csv", m.str());
        if (!r.carleman.empty()) {
            std::ostringstream c;
            write_carleman_csv(c, r.carleman);
            write_text(dir / "carleman.csv", c.str());
        }
    }
    if (wants_json(formats)) write_text(dir / "report.json", to_json(r).dump(2) + "\n");
}

}  // namespace covflow
