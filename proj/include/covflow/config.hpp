#pragma once

#include "covflow/carleman.hpp"
#include "covflow/fields.hpp"

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace covflow {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline bool operator==(const ScalarSpec& x, const ScalarSpec& y) {
    return x.kind == y.kind && x.amplitude == y.amplitude && x.width == y.width;
}
inline bool operator==(const PotentialSpec& x, const PotentialSpec& y) {
    return x.kind == y.kind && x.strength == y.strength && x.core_radius == y.core_radius &&
           x.generator == y.generator;
}

struct ExperimentConfig {
    GridSpec grid{2, 8.0, 64};

    // flow
    double a = 0.0, b = 1.0;
    double eps_reg = 1e-3;
    double dt = 2e-4;
    double t_end = 0.05;
    int store_every = 5;
    double u0_width = 1.0;
    double u0_kx = 0.0;

    PotentialSpec potential;
    int quadrature_nodes = 32;

    ScalarSpec V1, V2, F;

    // weights
    double alpha = 1.0, beta = 1.0, gamma = 0.25;
    double convexity_tol = 1e-3;
    double appell_tol = 1e-4;
    double truncation_radius = 0.0;  // 0: chosen from the largest rate in use

    // carleman
    bool carleman_enabled = false;
    rvec carleman_mu{0.25, 0.5, 1.0};
    double carleman_eps = 1.0;
    rvec carleman_R{4.0, 8.0, 16.0};
    Vec3 carleman_v{1.0, 0.0, 0.0};
    int carleman_time_samples = 2001;
    double carleman_cutoff_M = 0.0;  // 0: 0.2 L

    std::string output_directory = "out";
    std::string output_formats = "both";

    bool operator==(const ExperimentConfig&) const = default;

    void validate() const;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline double to_double(const std::string& v, const std::string& where) {
    try {
        std::size_t n = 0;
        const double d = std::stod(v, &n);
        if (trim(v.substr(n)).empty() && std::isfinite(d)) return d;
    } catch (const std::exception&) {
    }
    throw ConfigError(where + ": expected a number, got '" + v + "'");
}

inline int to_int(const std::string& v, const std::string& where) {
    const double d = to_double(v, where);
    if (d != std::floor(d) || std::abs(d) > 2e9) throw ConfigError(where + ": expected an integer, got '" + v + "'");
    return static_cast<int>(d);
}

inline bool to_bool(const std::string& v, const std::string& where) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(where + ": expected true or false, got '" + v + "'");
}

inline rvec to_list(const std::string& v, const std::string& where) {
    rvec out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_double(trim(item), where));
    if (out.empty()) throw ConfigError(where + ": empty list");
    return out;
}

inline ScalarSpec::Kind scalar_kind(const std::string& v, const std::string& where) {
    if (v == "zero") return ScalarSpec::Kind::zero;
    if (v == "constant") return ScalarSpec::Kind::constant;
    if (v == "gaussian") return ScalarSpec::Kind::gaussian;
    throw ConfigError(where + ": unknown scalar kind '" + v + "' (zero, constant, gaussian)");
}

inline std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string fmt_list(const rvec& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
    return s;
}

}  // namespace detail

inline void ExperimentConfig::validate() const {
    try {
        grid.validate();
        potential.validate(grid);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("[grid]/[potential]: ") + e.what());
    }
    if (grid.dim == 3 && grid.points > 96) throw ConfigError("[grid] n_points: 3D grids are limited to 96 points per axis");
    if (!(dt > 0.0)) throw ConfigError("[flow] dt must be positive");
    if (!(t_end > 0.0 && t_end <= 1.0)) throw ConfigError("[flow] t_end must lie in (0, 1]");
    if (store_every < 1) throw ConfigError("[flow] store_every must be >= 1");
    if (!(eps_reg > 0.0)) throw ConfigError("[flow] eps_reg must be positive");
    if (!(a >= 0.0)) throw ConfigError("[flow] a must be >= 0");
    if (a == 0.0 && b == 0.0) throw ConfigError("[flow] a + ib must be nonzero");
    if (!(u0_width > 0.0)) throw ConfigError("[flow] u0_width must be positive");
    if (quadrature_nodes < 2) throw ConfigError("[potential] quadrature_nodes must be >= 2");
    if (V1.amplitude.imag() != 0.0) throw ConfigError("[scalar] V1 must be real");
    for (const ScalarSpec* s : {&V1, &V2, &F}) {
        try {
            s->validate();
        } catch (const std::exception& e) {
            throw ConfigError(std::string("[scalar]: ") + e.what());
        }
    }
    if (!(alpha > 0.0) || !(beta > 0.0)) throw ConfigError("[weights] alpha and beta must be positive");
    if (!(gamma >= 0.0)) throw ConfigError("[weights] gamma must be >= 0");
    if (!(appell_tol > 0.0)) throw ConfigError("[weights] appell_tol must be positive");
    if (truncation_radius < 0.0) throw ConfigError("[weights] truncation_radius must be >= 0");
    if (carleman_time_samples < 3) throw ConfigError("[carleman] time_samples must be >= 3");
    if (!(carleman_eps > 0.0)) throw ConfigError("[carleman] eps must be positive");
    for (double m : carleman_mu)
        if (!(m > 0.0)) throw ConfigError("[carleman] mu entries must be positive");
    for (double r : carleman_R)
        if (!(r >= 2.0)) throw ConfigError("[carleman] R entries must be >= 2");
    double vn = 0.0;
    for (int d = 0; d < grid.dim; ++d) vn += carleman_v[d] * carleman_v[d];
    for (int d = grid.dim; d < 3; ++d)
        if (carleman_v[d] != 0.0) throw ConfigError("[carleman] v has more components than the grid dimension");
    if (std::abs(std::sqrt(vn) - 1.0) > 1e-12) throw ConfigError("[carleman] v must be a unit vector");
    if (carleman_cutoff_M < 0.0 || 2.0 * carleman_cutoff_M > 0.9 * grid.half_width)
        throw ConfigError("[carleman] cutoff_M must satisfy 0 <= 2 M <= 0.9 half_width");
    if (output_formats != "csv" && output_formats != "json" && output_formats != "both")
        throw ConfigError("[output] formats must be csv, json or both");
}

inline ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig c;
    std::string section;
    std::map<std::string, int> seen;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::string at = "line " + std::to_string(lineno);
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(at + ": malformed section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            static const char* known[] = {"grid", "flow", "potential", "scalar", "weights", "carleman", "output"};
            if (std::find(std::begin(known), std::end(known), section) == std::end(known))
                throw ConfigError(at + ": unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(at + ": expected key = value");
        if (section.empty()) throw ConfigError(at + ": key outside of any section");
        const std::string key = detail::trim(line.substr(0, eq)), val = detail::trim(line.substr(eq + 1));
        const std::string where = at + " [" + section + "] " + key;
        if (seen[section + "." + key]++) throw ConfigError(where + ": duplicate key");
        auto D = [&] { return detail::to_double(val, where); };
        auto N = [&] { return detail::to_int(val, where); };
        bool ok = true;
        if (section == "grid") {
            if (key == "dim") c.grid.dim = N();
            else if (key == "n_points") c.grid.points = N();
            else if (key == "half_width") c.grid.half_width = D();
            else ok = false;
        } else if (section == "flow") {
            if (key == "a") c.a = D();
            else if (key == "b") c.b = D();
            else if (key == "eps_reg") c.eps_reg = D();
            else if (key == "dt") c.dt = D();
            else if (key == "t_end") c.t_end = D();
            else if (key == "store_every") c.store_every = N();
            else if (key == "u0_width") c.u0_width = D();
            else if (key == "u0_kx") c.u0_kx = D();
            else ok = false;
        } else if (section == "potential") {
            if (key == "kind") {
                try {
                    c.potential.kind = potential_kind_from_string(val);
                } catch (const std::exception& e) {
                    throw ConfigError(where + ": " + e.what());
                }
                if (c.potential.kind == PotentialKind::custom)
                    throw ConfigError(where + ": custom potentials are only available through the library interface");
            } else if (key == "strength") c.potential.strength = D();
            else if (key == "core_radius") c.potential.core_radius = D();
            else if (key == "generator") {
                if (val != "x1x2") throw ConfigError(where + ": only the generator x1x2 is supported");
                c.potential.generator = val;
            } else if (key == "quadrature_nodes") c.quadrature_nodes = N();
            else ok = false;
        } else if (section == "scalar") {
            if (key == "v1_kind") c.V1.kind = detail::scalar_kind(val, where);
            else if (key == "v1_amplitude") c.V1.amplitude = D();
            else if (key == "v1_width") c.V1.width = D();
            else if (key == "v2_kind") c.V2.kind = detail::scalar_kind(val, where);
            else if (key == "v2_re") c.V2.amplitude.real(D());
            else if (key == "v2_im") c.V2.amplitude.imag(D());
            else if (key == "v2_width") c.V2.width = D();
            else if (key == "f_kind") c.F.kind = detail::scalar_kind(val, where);
            else if (key == "f_re") c.F.amplitude.real(D());
            else if (key == "f_im") c.F.amplitude.imag(D());
            else if (key == "f_width") c.F.width = D();
            else ok = false;
        } else if (section == "weights") {
            if (key == "alpha") c.alpha = D();
            else if (key == "beta") c.beta = D();
            else if (key == "gamma") c.gamma = D();
            else if (key == "convexity_tol") c.convexity_tol = D();
            else if (key == "appell_tol") c.appell_tol = D();
            else if (key == "truncation_radius") c.truncation_radius = D();
            else ok = false;
        } else if (section == "carleman") {
            if (key == "enabled") c.carleman_enabled = detail::to_bool(val, where);
            else if (key == "mu") c.carleman_mu = detail::to_list(val, where);
            else if (key == "eps") c.carleman_eps = D();
            else if (key == "R") c.carleman_R = detail::to_list(val, where);
            else if (key == "v") {
                const rvec v = detail::to_list(val, where);
                if (v.size() > 3) throw ConfigError(where + ": at most 3 components");
                c.carleman_v = {0.0, 0.0, 0.0};
                for (std::size_t i = 0; i < v.size(); ++i) c.carleman_v[i] = v[i];
            } else if (key == "time_samples") c.carleman_time_samples = N();
            else if (key == "cutoff_M") c.carleman_cutoff_M = D();
            else ok = false;
        } else if (section == "output") {
            if (key == "directory") c.output_directory = val;
            else if (key == "formats") c.output_formats = val;
            else ok = false;
        }
        if (!ok) throw ConfigError(where + ": unknown key");
    }
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

inline std::string serialize_config(const ExperimentConfig& c) {
    using detail::fmt;
    std::ostringstream o;
    o << "[grid]\n"
      << "dim = " << c.grid.dim << "\n"
      << "n_points = " << c.grid.points << "\n"
      << "half_width = " << fmt(c.grid.half_width) << "\n\n";
    o << "[flow]\n"
      << "a = " << fmt(c.a) << "\n"
      << "b = " << fmt(c.b) << "\n"
      << "eps_reg = " << fmt(c.eps_reg) << "\n"
      << "dt = " << fmt(c.dt) << "\n"
      << "t_end = " << fmt(c.t_end) << "\n"
      << "store_every = " << c.store_every << "\n"
      << "u0_width = " << fmt(c.u0_width) << "\n"
      << "u0_kx = " << fmt(c.u0_kx) << "\n\n";
    o << "[potential]\n"
      << "kind = " << to_string(c.potential.kind) << "\n"
      << "strength = " << fmt(c.potential.strength) << "\n"
      << "core_radius = " << fmt(c.potential.core_radius) << "\n"
      << "generator = " << c.potential.generator << "\n"
      << "quadrature_nodes = " << c.quadrature_nodes << "\n\n";
    o << "[scalar]\n"
      << "v1_kind = " << to_string(c.V1.kind) << "\n"
      << "v1_amplitude = " << fmt(c.V1.amplitude.real()) << "\n"
      << "v1_width = " << fmt(c.V1.width) << "\n"
      << "v2_kind = " << to_string(c.V2.kind) << "\n"
      << "v2_re = " << fmt(c.V2.amplitude.real()) << "\n"
      << "v2_im = " << fmt(c.V2.amplitude.imag()) << "\n"
      << "v2_width = " << fmt(c.V2.width) << "\n"
      << "f_kind = " << to_string(c.F.kind) << "\n"
      << "f_re = " << fmt(c.F.amplitude.real()) << "\n"
      << "f_im = " << fmt(c.F.amplitude.imag()) << "\n"
      << "f_width = " << fmt(c.F.width) << "\n\n";
    o << "[weights]\n"
      << "alpha = " << fmt(c.alpha) << "\n"
      << "beta = " << fmt(c.beta) << "\n"
      << "gamma = " << fmt(c.gamma) << "\n"
      << "convexity_tol = " << fmt(c.convexity_tol) << "\n"
      << "appell_tol = " << fmt(c.appell_tol) << "\n"
      << "truncation_radius = " << fmt(c.truncation_radius) << "\n\n";
    o << "[carleman]\n"
      << "enabled = " << (c.carleman_enabled ? "true" : "false") << "\n"
      << "mu = " << detail::fmt_list(c.carleman_mu) << "\n"
      << "eps = " << fmt(c.carleman_eps) << "\n"
      << "R = " << detail::fmt_list(c.carleman_R) << "\n"
      << "v = " << detail::fmt_list(rvec(c.carleman_v.begin(), c.carleman_v.begin() + c.grid.dim)) << "\n"
      << "time_samples = " << c.carleman_time_samples << "\n"
      << "cutoff_M = " << fmt(c.carleman_cutoff_M) << "\n\n";
    o << "[output]\n"
      << "directory = " << c.output_directory << "\n"
      << "formats = " << c.output_formats << "\n";
    return o.str();
}

// FNV-1a over the canonical serialization without the [output] section, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& c) {
    std::string text = serialize_config(c);
    text = text.substr(0, text.find("[output]"));
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace covflow
