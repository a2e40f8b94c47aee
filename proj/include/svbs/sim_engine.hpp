#pragma once

// Closed-loop simulation of the heterodirectional system on a cell-centred
// grid.
//
// Two advection schemes are available. With `unit_shift`, constant-speed
// components are advected by whole-cell shifts on a
// per-component clock: the clock advances by lambda dt / dx each step and the
// component moves one cell whenever it completes. This is first-order upwind
// at unit Courant number for every component, with the common dt bounded by
// the fastest speed. `upwind` is the plain first-order upwind update with
// Courant number lambda_i dt / dx per component; space-dependent speeds always
// use it.
// Sources are explicit Euler on the pre-step state; the boundary values are
// taken from the pre-step state as well.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "svbs/bilayer_model.hpp"
#include "svbs/controller.hpp"
#include "svbs/errors.hpp"
#include "svbs/hetero_system.hpp"
#include "svbs/kernel_solver.hpp"
#include "svbs/lyapunov.hpp"
#include "svbs/quadrature.hpp"

namespace svbs {

enum class AdvectionScheme { unit_shift, upwind };

enum class ProfileKind { section4_default, constant_setpoint, custom_csv };

struct InitialProfile {
    ProfileKind kind = ProfileKind::section4_default;
    std::string csv_path;  // custom_csv: columns x,H1,U1,H2,U2 covering [0,1]
};

struct SimConfig {
    SimGrid grid{400};
    double cfl = 0.9;
    double T = 10.0;
    int output_every = 20;
    InitialProfile profile;
    bool controller_on = true;
    bool keep_states = true;
    AdvectionScheme scheme = AdvectionScheme::unit_shift;

    void validate() const {
        if (!(cfl > 0.0 && cfl <= 1.0)) throw ConfigError("SimConfig: cfl must be in (0, 1]");
        if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("SimConfig: T must be positive");
        if (output_every < 1) throw ConfigError("SimConfig: output_every must be >= 1");
    }
};

/// Physical deviation samples (H1, U1, H2, U2) at the cell centres, 4 x Nx.
using PhysicalField = Eigen::Matrix<double, 4, Eigen::Dynamic>;

inline double section4_H2(double x) { return 2.0 + 0.5 * std::exp(-(x - 0.5) * (x - 0.5) / 0.003); }

/// The named initial profiles sampled at the cell centres (absolute values).
inline PhysicalField sample_profile(const InitialProfile& profile, const SimGrid& grid, const SetPoint& sp) {
    const double pi = 3.14159265358979323846;
    PhysicalField W(4, grid.Nx);
    switch (profile.kind) {
    case ProfileKind::section4_default:
        for (int j = 0; j < grid.Nx; ++j) {
            const double x = grid.center(j);
            const double H2 = section4_H2(x), H1 = 6.0 - H2;
            const double s = 3.0 * std::sin(2.0 * pi * x);
            W.col(j) << H1, 10.0 / H1 + s, H2, -10.0 / H2 - s;
        }
        break;
    case ProfileKind::constant_setpoint:
        for (int j = 0; j < grid.Nx; ++j) W.col(j) = sp.vector();
        break;
    case ProfileKind::custom_csv: {
        std::ifstream in(profile.csv_path);
        if (!in) throw ConfigError("cannot open profile file '" + profile.csv_path + "'");
        std::vector<double> xs;
        std::vector<Vec4> rows;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty() || line[0] == '#') continue;
            std::replace(line.begin(), line.end(), ',', ' ');
            std::istringstream ls(line);
            double x;
            Vec4 w;
            if (!(ls >> x >> w(0) >> w(1) >> w(2) >> w(3))) {
                if (xs.empty() && lineno == 1) continue;  // header
                throw ConfigError("profile file line " + std::to_string(lineno) + ": expected x,H1,U1,H2,U2");
            }
            if (!xs.empty() && !(x > xs.back())) throw ConfigError("profile file: x must increase");
            xs.push_back(x);
            rows.push_back(w);
        }
        if (xs.size() < 2 || xs.front() > 0.0 || xs.back() < 1.0)
            throw ConfigError("profile file: samples must cover [0,1]");
        for (int j = 0; j < grid.Nx; ++j) {
            const double x = grid.center(j);
            const auto it = std::upper_bound(xs.begin(), xs.end(), x);
            const std::size_t hi = std::clamp<std::size_t>(static_cast<std::size_t>(it - xs.begin()), 1, xs.size() - 1);
            const double w = (x - xs[hi - 1]) / (xs[hi] - xs[hi - 1]);
            W.col(j) = (1.0 - w) * rows[hi - 1] + w * rows[hi];
        }
        break;
    }
    }
    for (int j = 0; j < grid.Nx; ++j)
        if (!(W(0, j) > 0.0) || !(W(2, j) > 0.0))
            throw DomainError("initial profile has non-positive thickness at x=" + std::to_string(grid.center(j)));
    return W;
}

/// Riemann state of a sampled physical profile: subtract the set point,
/// apply L and split into the rightward / leftward blocks of `basis`.
inline RiemannState riemann_from_physical(const PhysicalField& W, const SetPoint& sp, const EigenBasis& basis) {
    const int Nx = static_cast<int>(W.cols());
    const int n = static_cast<int>(basis.rightward.size()), m = static_cast<int>(basis.leftward.size());
    RiemannState s = RiemannState::zeros(n, m, Nx);
    const Vec4 star = sp.vector();
    for (int j = 0; j < Nx; ++j) {
        const Vec4 xi = to_riemann(Vec4(W.col(j)) - star, basis);
        for (int i = 0; i < n; ++i) s.u(i, j) = xi(basis.rightward[static_cast<std::size_t>(i)]);
        for (int i = 0; i < m; ++i) s.v(i, j) = xi(basis.leftward[static_cast<std::size_t>(i)]);
    }
    s.u_left = s.u.col(0);
    s.v_right = s.v.col(Nx - 1);
    return s;
}

/// Absolute physical state of a Riemann state.
inline PhysicalField physical_state(const RiemannState& s, const SetPoint& sp, const EigenBasis& basis) {
    const int Nx = s.cells();
    PhysicalField W(4, Nx);
    const Vec4 star = sp.vector();
    for (int j = 0; j < Nx; ++j) {
        Vec4 xi = Vec4::Zero();
        for (std::size_t i = 0; i < basis.rightward.size(); ++i) xi(basis.rightward[i]) = s.u(static_cast<Eigen::Index>(i), j);
        for (std::size_t i = 0; i < basis.leftward.size(); ++i) xi(basis.leftward[i]) = s.v(static_cast<Eigen::Index>(i), j);
        W.col(j) = from_riemann(xi, basis) + star;
    }
    return W;
}

inline RiemannState init_state(const SimConfig& cfg, const SetPoint& sp, const EigenBasis& basis) {
    return riemann_from_physical(sample_profile(cfg.profile, cfg.grid, sp), sp, basis);
}

/// Per-component (u then v) values of sqrt(int w^2 dx).
inline Eigen::VectorXd l2_norms(const RiemannState& s) {
    const int n = static_cast<int>(s.u.rows()), m = static_cast<int>(s.v.rows());
    const double dx = 1.0 / std::max(1, s.cells());
    Eigen::VectorXd out(n + m);
    for (int i = 0; i < n; ++i) out(i) = std::sqrt(s.u.row(i).squaredNorm() * dx);
    for (int i = 0; i < m; ++i) out(n + i) = std::sqrt(s.v.row(i).squaredNorm() * dx);
    return out;
}

/// Single-step integrator with coefficients sampled once on the grid.
class Stepper {
public:
    Stepper(const HeteroSystem& sys, const SimGrid& grid, const FeedbackLaw* law,
            AdvectionScheme scheme = AdvectionScheme::unit_shift)
        : sys_(sys), grid_(grid), law_(law), n_(sys.n), m_(sys.m) {
        if (auto rep = validate(sys); !rep) throw DomainError("Stepper: " + rep.message);
        const int Nx = grid.Nx;
        speeds_.resize(n_ + m_, Nx);
        for (int j = 0; j < Nx; ++j) {
            const double x = grid.center(j);
            speeds_.col(j) << sys.speeds_r(x), sys.speeds_l(x);
        }
        shift_ = scheme == AdvectionScheme::unit_shift && sys.constant_speeds();
        constant_sources_ = sys.Sr.is_constant() && sys.Sl.is_constant() && sys.So.is_constant();
        if (constant_sources_) {
            Sr_ = sys.Sr.at(0.0);
            Sl_ = sys.Sl.at(0.0);
            So_ = sys.So.at(0.0);
            has_sources_ = !Sr_.isZero(0.0) || !Sl_.isZero(0.0) || !So_.isZero(0.0);
        } else {
            has_sources_ = true;
        }
        lambda_max_ = std::max(speeds_.maxCoeff(), speed_bounds(sys).lambda_max);
    }

    double lambda_max() const { return lambda_max_; }
    double max_dt(double cfl = 1.0) const { return cfl * grid_.dx() / lambda_max_; }

    /// Boundary traces implied by the current cells.
    void apply_boundary(RiemannState& s) const {
        s.u_left = sys_.Q0 * s.v.col(0);
        Eigen::VectorXd bc = sys_.R1 * s.u.col(grid_.Nx - 1);
        if (law_) bc += (*law_)(s);
        s.v_right = bc;
    }

    Eigen::VectorXd control(const RiemannState& s) const {
        return law_ ? (*law_)(s) : Eigen::VectorXd(Eigen::VectorXd::Zero(m_));
    }

    RiemannState step(const RiemannState& s, double dt) const {
        const int Nx = grid_.Nx;
        if (s.u.rows() != n_ || s.v.rows() != m_ || s.cells() != Nx)
            throw DimensionError("step: state does not match the system/grid");
        const double courant = dt * lambda_max_ / grid_.dx();
        if (!(dt > 0.0) || courant > 1.0 + 1e-12) {
            std::ostringstream os;
            os << "step: CFL violated (Courant number " << courant << " > 1)";
            throw StepError(os.str());
        }
        RiemannState next = s;
        if (next.clock.size() != n_ + m_) next.clock = Eigen::VectorXd::Zero(n_ + m_);
        const Eigen::VectorXd u_ghost = s.u_left.size() == n_ ? s.u_left : Eigen::VectorXd(sys_.Q0 * s.v.col(0));
        Eigen::VectorXd v_ghost = s.v_right;
        if (v_ghost.size() != m_) {
            v_ghost = sys_.R1 * s.u.col(Nx - 1);
            if (law_) v_ghost += (*law_)(s);
        }

        if (has_sources_) {
            if (constant_sources_) {
                next.u += dt * (Sr_ * s.u + Sl_ * s.v);
                next.v += dt * (So_ * s.u);
            } else {
                for (int j = 0; j < Nx; ++j) {
                    const double x = grid_.center(j);
                    next.u.col(j) += dt * (sys_.Sr.at(x) * s.u.col(j) + sys_.Sl.at(x) * s.v.col(j));
                    next.v.col(j) += dt * (sys_.So.at(x) * s.u.col(j));
                }
            }
        }

        const double r = dt / grid_.dx();
        for (int c = 0; c < n_ + m_; ++c) {
            const bool right = c < n_;
            auto row = right ? next.u.row(c) : next.v.row(c - n_);
            const double ghost = right ? u_ghost(c) : v_ghost(c - n_);
            if (shift_) {
                next.clock(c) += speeds_(c, 0) * r;
                if (next.clock(c) >= 1.0 - 1e-9) {
                    next.clock(c) -= 1.0;
                    if (right) {
                        for (int j = Nx - 1; j > 0; --j) row(j) = row(j - 1);
                        row(0) = ghost;
                    } else {
                        for (int j = 0; j < Nx - 1; ++j) row(j) = row(j + 1);
                        row(Nx - 1) = ghost;
                    }
                }
            } else {
                const Eigen::RowVectorXd old = row;
                if (right) {
                    for (int j = 0; j < Nx; ++j) {
                        const double up = j > 0 ? old(j - 1) : ghost, nu = speeds_(c, j) * r;
                        row(j) = (1.0 - nu) * old(j) + nu * up;
                    }
                } else {
                    for (int j = 0; j < Nx; ++j) {
                        const double up = j + 1 < Nx ? old(j + 1) : ghost, nu = speeds_(c, j) * r;
                        row(j) = (1.0 - nu) * old(j) + nu * up;
                    }
                }
            }
        }
        next.t = s.t + dt;
        if (!next.u.allFinite() || !next.v.allFinite()) {
            std::ostringstream os;
            os << "simulation blew up at t=" << next.t;
            throw BlowUpError(os.str(), next.t);
        }
        apply_boundary(next);
        return next;
    }

private:
    const HeteroSystem& sys_;
    SimGrid grid_;
    const FeedbackLaw* law_;
    int n_, m_;
    Eigen::MatrixXd speeds_;
    bool shift_ = true;
    bool constant_sources_ = true;
    bool has_sources_ = false;
    Eigen::MatrixXd Sr_, Sl_, So_;
    double lambda_max_ = 0.0;
};

/// One step with an optional feedback law (none = open loop, U = 0).
inline RiemannState step(const RiemannState& s, const HeteroSystem& sys, const FeedbackLaw* law, double dt,
                         AdvectionScheme scheme = AdvectionScheme::unit_shift) {
    return Stepper(sys, SimGrid(s.cells()), law, scheme).step(s, dt);
}

/// Column names and their order for the trace CSV.
struct TraceLabels {
    std::vector<std::string> norm_names;  // CSV order
    std::vector<int> norm_index;          // index into the (u, v) norm vector
    std::vector<std::string> control_names;
    std::vector<int> control_index;       // index into U

    static TraceLabels generic(int n, int m) {
        TraceLabels t;
        for (int i = 0; i < n; ++i) t.norm_names.push_back("u" + std::to_string(i + 1) + "_norm"), t.norm_index.push_back(i);
        for (int i = 0; i < m; ++i) t.norm_names.push_back("v" + std::to_string(i + 1) + "_norm"), t.norm_index.push_back(n + i);
        for (int i = 0; i < m; ++i) t.control_names.push_back("U" + std::to_string(i + 1)), t.control_index.push_back(i);
        return t;
    }

    /// xi1..xi4 in layer labelling; controls u1 (acting on xi1) and u2 (xi3).
    static TraceLabels bilayer(const EigenBasis& basis) {
        TraceLabels t;
        const int n = static_cast<int>(basis.rightward.size());
        for (int k = 0; k < 4; ++k) {
            t.norm_names.push_back("xi" + std::to_string(k + 1) + "_norm");
            const auto r = std::find(basis.rightward.begin(), basis.rightward.end(), k);
            if (r != basis.rightward.end()) {
                t.norm_index.push_back(static_cast<int>(r - basis.rightward.begin()));
            } else {
                const auto l = std::find(basis.leftward.begin(), basis.leftward.end(), k);
                t.norm_index.push_back(n + static_cast<int>(l - basis.leftward.begin()));
            }
        }
        std::vector<int> left = basis.leftward;
        std::sort(left.begin(), left.end());
        for (std::size_t q = 0; q < left.size(); ++q) {
            t.control_names.push_back("u" + std::to_string(q + 1) + "_ctrl");
            const auto l = std::find(basis.leftward.begin(), basis.leftward.end(), left[q]);
            t.control_index.push_back(static_cast<int>(l - basis.leftward.begin()));
        }
        return t;
    }
};

struct SimTrace {
    std::vector<double> times;
    std::vector<RiemannState> states;       // empty unless keep_states
    std::vector<Eigen::VectorXd> controls;  // U(t), solver order
    std::vector<Eigen::VectorXd> norms;     // per component, u then v
    std::vector<double> total_norm;
    std::vector<double> V;                  // NaN without Lyapunov params
    std::vector<double> beta_right;         // max |beta(t,1)|, NaN without kernels
    std::vector<double> beta_right_bound;   // trapezoid error estimate at x = 1
    double dt = 0.0;
    int steps = 0;
    TraceLabels labels;

    std::size_t size() const { return times.size(); }
};

/// Integrates to cfg.T with a uniform dt <= cfl dx / lambda_max.
///
/// Kernels are required when the controller is on or V is requested.
inline SimTrace run(const HeteroSystem& sys, const KernelSet* kernels, const SimConfig& cfg, RiemannState state,
                    const LyapunovParams* lyap = nullptr, std::optional<TraceLabels> labels = std::nullopt) {
    cfg.validate();
    if (state.cells() != cfg.grid.Nx) throw DimensionError("run: initial state does not match the grid");
    if ((cfg.controller_on || lyap) && !kernels) throw ConfigError("run: kernels required for feedback / Lyapunov");

    std::unique_ptr<FeedbackLaw> law;
    if (cfg.controller_on) law = std::make_unique<FeedbackLaw>(*kernels, sys.R1, cfg.grid);
    std::unique_ptr<TargetTransform> target;
    if (kernels) target = std::make_unique<TargetTransform>(*kernels, cfg.grid);
    const Stepper stepper(sys, cfg.grid, law.get(), cfg.scheme);

    SimTrace trace;
    trace.labels = labels ? *labels : TraceLabels::generic(sys.n, sys.m);
    const double dt_max = stepper.max_dt(cfg.cfl);
    trace.steps = static_cast<int>(std::ceil(cfg.T / dt_max - 1e-9));
    trace.dt = cfg.T / trace.steps;

    if (state.clock.size() != sys.n + sys.m) state.clock = Eigen::VectorXd::Zero(sys.n + sys.m);
    state.t = 0.0;
    stepper.apply_boundary(state);

    auto record = [&](const RiemannState& s) {
        trace.times.push_back(s.t);
        trace.controls.push_back(stepper.control(s));
        const Eigen::VectorXd nr = l2_norms(s);
        trace.norms.push_back(nr);
        trace.total_norm.push_back(nr.norm());
        if (target) {
            const TargetState z = (*target)(s);
            trace.beta_right.push_back(z.beta_right.size() ? z.beta_right.cwiseAbs().maxCoeff() : 0.0);
            trace.beta_right_bound.push_back(z.beta_right_error_bound);
            trace.V.push_back(lyap ? evaluate_V(*lyap, z, sys) : std::numeric_limits<double>::quiet_NaN());
        } else {
            trace.beta_right.push_back(std::numeric_limits<double>::quiet_NaN());
            trace.beta_right_bound.push_back(std::numeric_limits<double>::quiet_NaN());
            trace.V.push_back(std::numeric_limits<double>::quiet_NaN());
        }
        if (cfg.keep_states) trace.states.push_back(s);
    };

    record(state);
    for (int k = 1; k <= trace.steps; ++k) {
        state = stepper.step(state, trace.dt);
        state.t = k * trace.dt;
        if (k % cfg.output_every == 0 || k == trace.steps) record(state);
    }
    return trace;
}

inline void write_trace_csv(std::ostream& os, const SimTrace& trace) {
    os << "t";
    for (const auto& name : trace.labels.norm_names) os << ',' << name;
    os << ",total_norm";
    for (const auto& name : trace.labels.control_names) os << ',' << name;
    os << ",V\n";
    os << std::setprecision(17);
    for (std::size_t k = 0; k < trace.size(); ++k) {
        os << trace.times[k];
        for (int idx : trace.labels.norm_index) os << ',' << trace.norms[k](idx);
        os << ',' << trace.total_norm[k];
        for (int idx : trace.labels.control_index) os << ',' << trace.controls[k](idx);
        os << ',' << trace.V[k] << '\n';
    }
}

/// Long-format snapshots: t, x, component, value. Physical fields are added
/// when a basis and set point are given.
inline void write_snapshots_csv(std::ostream& os, const SimTrace& trace, const EigenBasis* basis = nullptr,
                                const SetPoint* sp = nullptr) {
    os << "t,x,component,value\n" << std::setprecision(17);
    for (const auto& s : trace.states) {
        const int Nx = s.cells();
        const double dx = 1.0 / Nx;
        for (int i = 0; i < s.u.rows(); ++i)
            for (int j = 0; j < Nx; ++j) os << s.t << ',' << (j + 0.5) * dx << ",u" << i + 1 << ',' << s.u(i, j) << '\n';
        for (int i = 0; i < s.v.rows(); ++i)
            for (int j = 0; j < Nx; ++j) os << s.t << ',' << (j + 0.5) * dx << ",v" << i + 1 << ',' << s.v(i, j) << '\n';
        if (basis && sp) {
            const PhysicalField W = physical_state(s, *sp, *basis);
            const char* names[4] = {"H1", "U1", "H2", "U2"};
            for (int q = 0; q < 4; ++q)
                for (int j = 0; j < Nx; ++j) os << s.t << ',' << (j + 0.5) * dx << ',' << names[q] << ',' << W(q, j) << '\n';
        }
    }
}

}  // namespace svbs
