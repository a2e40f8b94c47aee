#pragma once

// Experiment configuration: sectioned key = value text.
//
//   preset = paper-sec4
//   [physics]  g r Cf
//   [setpoint] H1 U1 H2 U2
//   [boundary] Q0 R1          (four numbers each, row-major)
//   [kernel]   N tol max_iter
//   [sim]      Nx cfl T output_every profile profile_csv controller scheme
//   [output]   dir snapshots
//
// Unspecified keys keep the preset value; everything is validated on parse.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "svbs/bilayer_model.hpp"
#include "svbs/errors.hpp"
#include "svbs/hetero_system.hpp"
#include "svbs/kernel_solver.hpp"
#include "svbs/sim_engine.hpp"

namespace svbs {

struct ExperimentConfig {
    std::string preset = "paper-sec4";
    PhysicalParams physics{9.81, 0.01, 0.05, true};
    SetPoint setpoint{3.0, 1.0, 1.0, 0.95};
    Eigen::Matrix2d Q0 = (Eigen::Matrix2d() << -1.5, 0.01, 0.01, 1.5).finished();
    Eigen::Matrix2d R1 = (Eigen::Matrix2d() << 0.5, 0.1, 0.15, -0.5).finished();
    int kernel_N = 200;
    double kernel_tol = kDefaultKernelTol;
    int kernel_max_iter = kDefaultKernelMaxIter;
    SimConfig sim;
    std::string out_dir = "out";
    bool snapshots = false;

    /// Re-checks every invariant the modules rely on.
    void validate() const {
        physics.validate();
        setpoint.validate(physics);
        if (!Q0.allFinite() || !R1.allFinite()) throw ConfigError("boundary matrices must be finite");
        if (kernel_N < 8) throw ConfigError("kernel.N must be >= 8");
        if (!(kernel_tol > 0.0)) throw ConfigError("kernel.tol must be positive");
        if (kernel_max_iter < 1) throw ConfigError("kernel.max_iter must be >= 1");
        if (sim.grid.Nx < 16) throw ConfigError("sim.Nx must be >= 16");
        sim.validate();
        if (sim.profile.kind == ProfileKind::custom_csv && sim.profile.csv_path.empty())
            throw ConfigError("sim.profile = custom_csv needs sim.profile_csv");
        if (out_dir.empty()) throw ConfigError("output.dir must not be empty");
        const EigenBasis basis = eigenbasis(linearize(setpoint, physics));
        if (basis.rightward.size() != 2 || basis.leftward.size() != 2)
            throw DomainError("set point must have two characteristics in each direction");
    }
};

/// The linearized plant of a configuration.
struct Plant {
    LinearModel model;
    EigenBasis basis;
    HeteroSystem system;
};

inline Plant make_plant(const ExperimentConfig& cfg) {
    Plant p;
    p.model = linearize(cfg.setpoint, cfg.physics);
    p.basis = eigenbasis(p.model);
    p.system = from_bilayer(p.model, p.basis, cfg.Q0, cfg.R1);
    if (auto rep = validate(p.system); !rep) throw DomainError(rep.message);
    return p;
}

inline std::vector<std::string> preset_names() { return {"paper-sec4", "trivial-decoupled"}; }

/// paper-sec4: the operating point of the reference experiment.
/// trivial-decoupled: the same with Cf = 0, i.e. pure transport with
/// boundary reflections.
inline ExperimentConfig preset(const std::string& name) {
    ExperimentConfig cfg;
    cfg.preset = name;
    if (name == "paper-sec4") return cfg;
    if (name == "trivial-decoupled") {
        cfg.physics.Cf = 0.0;
        return cfg;
    }
    throw ConfigError("unknown preset '" + name + "'");
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double parse_number(const std::string& text, const std::string& key) {
    const std::string t = trim(text);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(t, &used);
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + t + "'");
    }
    if (used != t.size() || !std::isfinite(v)) throw ConfigError(key + ": expected a number, got '" + t + "'");
    return v;
}

inline int parse_int(const std::string& text, const std::string& key) {
    const double v = parse_number(text, key);
    if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError(key + ": expected an integer, got '" + trim(text) + "'");
    return static_cast<int>(v);
}

inline bool parse_bool(const std::string& text, const std::string& key) {
    std::string t = trim(text);
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
    if (t == "false" || t == "0" || t == "no" || t == "off") return false;
    throw ConfigError(key + ": expected true/false, got '" + trim(text) + "'");
}

/// Four numbers, row-major; brackets and commas are ignored.
inline Eigen::Matrix2d parse_matrix2(const std::string& text, const std::string& key) {
    std::string t = text;
    for (char& c : t)
        if (c == '[' || c == ']' || c == ',' || c == ';') c = ' ';
    std::istringstream in(t);
    std::vector<double> vals;
    std::string tok;
    while (in >> tok) vals.push_back(parse_number(tok, key));
    if (vals.size() != 4)
        throw ConfigError(key + ": expected 4 numbers (2x2 row-major), got " + std::to_string(vals.size()));
    Eigen::Matrix2d M;
    M << vals[0], vals[1], vals[2], vals[3];
    return M;
}

inline ProfileKind parse_profile(const std::string& text, const std::string& key) {
    const std::string t = trim(text);
    if (t == "section4_default") return ProfileKind::section4_default;
    if (t == "constant_setpoint") return ProfileKind::constant_setpoint;
    if (t == "custom_csv") return ProfileKind::custom_csv;
    throw ConfigError(key + ": unknown profile '" + t + "' (section4_default, constant_setpoint, custom_csv)");
}

inline AdvectionScheme parse_scheme(const std::string& text, const std::string& key) {
    const std::string t = trim(text);
    if (t == "unit_shift") return AdvectionScheme::unit_shift;
    if (t == "upwind") return AdvectionScheme::upwind;
    throw ConfigError(key + ": unknown scheme '" + t + "' (unit_shift, upwind)");
}

inline const char* profile_name(ProfileKind k) {
    switch (k) {
    case ProfileKind::section4_default: return "section4_default";
    case ProfileKind::constant_setpoint: return "constant_setpoint";
    case ProfileKind::custom_csv: return "custom_csv";
    }
    return "?";
}

inline const char* scheme_name(AdvectionScheme s) { return s == AdvectionScheme::upwind ? "upwind" : "unit_shift"; }

}  // namespace detail

/// Parses config text. `preset_override`, when given, replaces any preset
/// named in the text.
inline ExperimentConfig parse_config(const std::string& text,
                                     const std::optional<std::string>& preset_override = std::nullopt) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }

    using Setter = void (*)(ExperimentConfig&, const std::string&, const std::string&);
    static const std::map<std::string, std::map<std::string, Setter>> keys = {
        {"physics",
         {{"g", [](ExperimentConfig& c, const std::string& v, const std::string& k) { c.physics.g = detail::parse_number(v, k); }},
          {"r", [](ExperimentConfig& c, const std::string& v, const std::string& k) { c.physics.r = detail::parse_number(v, k); }},
          {"Cf", [](ExperimentConfig& c, const std::string& v, const std::string& k) { c.physics.Cf = detail::parse_number(v, k); }}}},
        {"setpoint",
         {{"H1", [](ExperimentConfig& c, const std::string& v, const std::string& k) { c.setpoint.H1 = detail::parse_number(v, k); }},
          {"U1", [](ExperimentConfig& c, const std::string& v, const std::string& k) { c.setpoint.U1 = detail::parse_number(v, k); }},
          {"H2", [](ExperimentConfig& c, const std::string& v, const std::string& k) { c.setpoint.H2 = detail::parse_number(v, k); }},
          {"U2", [](ExperimentConfig& c, const std::string& v, const std::string& k) { c.setpoint.U2 = detail::parse_number(v, k); }}}},
        {"boundary",
         {{"Q0", [](ExperimentConfig& c, const std::string& v, const std::string& k) { c.Q0 = detail::parse_matrix2(v, k); }},
          {"R1", [](ExperimentConfig& c, const std::string& v, const std::string& k) { c.R1 = detail::parse_matrix2(v, k); }}}},
        {"kernel",
         {{"N", [](ExperimentConfig& c, const std::string& v, const std::string& k) { c.kernel_N = detail::parse_int(v, k); }},
          {"tol", [](ExperimentConfig& c, const std::string& v, const std::string& k) { c.kernel_tol = detail::parse_number(v, k); }},
          {"max_iter",
           [](ExperimentConfig& c, const std::string& v, const std::string& k) { c.kernel_max_iter = detail::parse_int(v, k); }}}},
        {"sim",
         {{"Nx",
           [](ExperimentConfig& c, const std::string& v, const std::string& k) {
               const int Nx = detail::parse_int(v, k);
               if (Nx < 16) throw ConfigError(k + ": must be >= 16");
               c.sim.grid = SimGrid(Nx);
           }},
          {"cfl", [](ExperimentConfig& c, const std::string& v, const std::string& k) { c.sim.cfl = detail::parse_number(v, k); }},
          {"T", [](ExperimentConfig& c, const std::string& v, const std::string& k) { c.sim.T = detail::parse_number(v, k); }},
          {"output_every",
           [](ExperimentConfig& c, const std::string& v, const std::string& k) { c.sim.output_every = detail::parse_int(v, k); }},
          {"profile",
           [](ExperimentConfig& c, const std::string& v, const std::string& k) { c.sim.profile.kind = detail::parse_profile(v, k); }},
          {"profile_csv",
           [](ExperimentConfig& c, const std::string& v, const std::string&) { c.sim.profile.csv_path = detail::trim(v); }},
          {"controller",
           [](ExperimentConfig& c, const std::string& v, const std::string& k) { c.sim.controller_on = detail::parse_bool(v, k); }},
          {"scheme",
           [](ExperimentConfig& c, const std::string& v, const std::string& k) { c.sim.scheme = detail::parse_scheme(v, k); }}}},
        {"output",
         {{"dir", [](ExperimentConfig& c, const std::string& v, const std::string&) { c.out_dir = detail::trim(v); }},
          {"snapshots",
           [](ExperimentConfig& c, const std::string& v, const std::string& k) { c.snapshots = detail::parse_bool(v, k); }}}},
    };

    std::string preset_name = "paper-sec4";
    for (const auto& [name, node] : tree) {
        if (keys.count(name)) continue;
        if (name == "preset" && node.empty()) {
            preset_name = detail::trim(node.data());
            continue;
        }
        throw ConfigError("unknown " + std::string(node.empty() ? "key" : "section") + " '" + name + "'");
    }
    if (preset_override) preset_name = *preset_override;
    ExperimentConfig cfg = preset(preset_name);

    for (const auto& [section, setters] : keys) {
        const auto it = tree.find(section);
        if (it == tree.not_found()) continue;
        for (const auto& [key, node] : it->second) {
            const std::string full = section + "." + key;
            const auto s = setters.find(key);
            if (s == setters.end()) throw ConfigError("unknown key '" + full + "'");
            if (!node.empty()) throw ConfigError("'" + full + "' must be a value");
            s->second(cfg, node.data(), full);
        }
    }
    cfg.validate();
    return cfg;
}

/// Fully resolved configuration, in a form parse_config accepts.
inline void write_config(std::ostream& os, const ExperimentConfig& c) {
    auto mat = [](const Eigen::Matrix2d& M) {
        std::ostringstream s;
        s << std::setprecision(17) << M(0, 0) << ", " << M(0, 1) << ", " << M(1, 0) << ", " << M(1, 1);
        return s.str();
    };
    os << std::setprecision(17);
    os << "preset = " << c.preset << "\n\n"
       << "[physics]\ng = " << c.physics.g << "\nr = " << c.physics.r << "\nCf = " << c.physics.Cf << "\n\n"
       << "[setpoint]\nH1 = " << c.setpoint.H1 << "\nU1 = " << c.setpoint.U1 << "\nH2 = " << c.setpoint.H2
       << "\nU2 = " << c.setpoint.U2 << "\n\n"
       << "[boundary]\nQ0 = " << mat(c.Q0) << "\nR1 = " << mat(c.R1) << "\n\n"
       << "[kernel]\nN = " << c.kernel_N << "\ntol = " << c.kernel_tol << "\nmax_iter = " << c.kernel_max_iter << "\n\n"
       << "[sim]\nNx = " << c.sim.grid.Nx << "\ncfl = " << c.sim.cfl << "\nT = " << c.sim.T
       << "\noutput_every = " << c.sim.output_every << "\nprofile = " << detail::profile_name(c.sim.profile.kind) << '\n';
    if (!c.sim.profile.csv_path.empty()) os << "profile_csv = " << c.sim.profile.csv_path << '\n';
    os << "controller = " << (c.sim.controller_on ? "true" : "false") << "\nscheme = " << detail::scheme_name(c.sim.scheme)
       << "\n\n"
       << "[output]\ndir = " << c.out_dir << "\nsnapshots = " << (c.snapshots ? "true" : "false") << '\n';
}

}  // namespace svbs
