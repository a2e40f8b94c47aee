#pragma once

// Invariant suite over every module for one configuration.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "svbs/bilayer_model.hpp"
#include "svbs/config.hpp"
#include "svbs/controller.hpp"
#include "svbs/errors.hpp"
#include "svbs/hetero_system.hpp"
#include "svbs/kernel_solver.hpp"
#include "svbs/lyapunov.hpp"
#include "svbs/sim_engine.hpp"

namespace svbs {

/// Deliberate corruption applied before the checks run; used to show that
/// the suite notices.
enum class Fault { none, kernel, basis };

inline Fault parse_fault(const std::string& name) {
    if (name.empty() || name == "none") return Fault::none;
    if (name == "kernel") return Fault::kernel;
    if (name == "basis") return Fault::basis;
    throw ConfigError("unknown fault '" + name + "' (none, kernel, basis)");
}

struct Check {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct VerifyReport {
    std::vector<Check> checks;

    bool passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
    }
    int failures() const {
        return static_cast<int>(std::count_if(checks.begin(), checks.end(), [](const Check& c) { return !c.passed; }));
    }
};

struct VerifyOptions {
    Fault fault = Fault::none;
    int random_states = 1000;
    unsigned seed = 20240607u;
    int sim_cells = 100;
    double sim_T = 1.0;
};

namespace detail {

inline std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(3) << v;
    return os.str();
}

inline void add(VerifyReport& rep, std::string name, bool ok, std::string detail) {
    rep.checks.push_back({std::move(name), ok, std::move(detail)});
}

/// Same speeds and boundary matrices, all in-domain couplings removed.
inline HeteroSystem transport_only(const HeteroSystem& sys) {
    HeteroSystem t = sys;
    t.Sr = FieldMatrix::constant(Eigen::MatrixXd::Zero(sys.n, sys.n));
    t.Sl = FieldMatrix::constant(Eigen::MatrixXd::Zero(sys.n, sys.m));
    t.So = FieldMatrix::constant(Eigen::MatrixXd::Zero(sys.m, sys.n));
    return t;
}

inline RiemannState smooth_state(int n, int m, const SimGrid& grid) {
    RiemannState s = RiemannState::zeros(n, m, grid.Nx);
    for (int j = 0; j < grid.Nx; ++j) {
        const double x = grid.center(j);
        for (int i = 0; i < n; ++i) s.u(i, j) = std::sin(3.0 * x + i) + 0.5;
        for (int i = 0; i < m; ++i) s.v(i, j) = std::cos(2.0 * x - i) - 0.25 * x;
    }
    return s;
}

/// Constant-coefficient 2+2 system with every coupling active.
inline HeteroSystem coupled_reference() {
    HeteroSystem sys;
    sys.n = 2;
    sys.m = 2;
    sys.lambda_r = {1.0, 1.5};
    sys.lambda_l = {0.8, 1.3};
    Eigen::MatrixXd Sr(2, 2), Sl(2, 2), So(2, 2);
    Sr << 0.1, -0.2, 0.3, 0.05;
    Sl << 0.4, 0.1, -0.3, 0.2;
    So << 0.5, -0.25, 0.2, 0.3;
    sys.Sr = FieldMatrix::constant(Sr);
    sys.Sl = FieldMatrix::constant(Sl);
    sys.So = FieldMatrix::constant(So);
    sys.Q0.resize(2, 2);
    sys.Q0 << 0.5, 0.2, -0.1, 0.4;
    sys.R1.resize(2, 2);
    sys.R1 << 0.3, -0.2, 0.1, 0.6;
    return sys;
}

inline void inject_kernel_fault(KernelSet& ks) {
    const int N = ks.grid.N;
    const int a = (3 * N) / 5, b = N / 4;
    if (ks.m > 0 && ks.n > 0) ks.G21(ks.m - 1, 0).at(a, b) += 0.1;
}

}  // namespace detail

inline VerifyReport verify(const ExperimentConfig& cfg, const VerifyOptions& opt = {}) {
    using detail::add;
    using detail::fmt;
    VerifyReport rep;
    std::mt19937 rng(opt.seed);
    std::normal_distribution<double> N01;

    Plant plant = make_plant(cfg);
    if (opt.fault == Fault::basis) plant.basis.R(0, 1) += 1e-3;
    const SetPoint& sp = cfg.setpoint;
    const PhysicalParams& pp = cfg.physics;
    const EigenBasis& basis = plant.basis;
    const Mat4& A = plant.model.Astar;

    // characteristic speeds
    {
        const auto speeds = characteristic_speeds(sp, pp);
        double worst = 0.0;
        const double scale = std::pow(std::abs(speeds[3]) + std::sqrt(pp.g * (sp.H1 + sp.H2)), 4);
        for (double l : speeds) worst = std::max(worst, std::abs(characteristic_residual(l, sp, pp)) / scale);
        Vec4 sorted = basis.lambdas;
        std::sort(sorted.data(), sorted.data() + 4);
        double gap = 0.0;
        for (int k = 0; k < 4; ++k) gap = std::max(gap, std::abs(sorted(k) - speeds[static_cast<std::size_t>(k)]));
        add(rep, "speeds.quartic_residual", worst <= 1e-12, "max relative residual " + fmt(worst));
        add(rep, "speeds.match_eigenvalues", gap <= 1e-9 * std::abs(speeds[3]), "max gap " + fmt(gap));
        add(rep, "speeds.two_each_way", basis.rightward.size() == 2 && basis.leftward.size() == 2,
            std::to_string(basis.rightward.size()) + " rightward, " + std::to_string(basis.leftward.size()) + " leftward");
    }

    // eigenvectors
    {
        const double scale = A.cwiseAbs().maxCoeff();
        const double right = (A * basis.R - basis.R * basis.lambdas.asDiagonal()).cwiseAbs().maxCoeff() / scale;
        const double left = (basis.L * A - basis.lambdas.asDiagonal() * basis.L).cwiseAbs().maxCoeff() / scale;
        const double inv = (basis.L * basis.R - Mat4::Identity()).cwiseAbs().maxCoeff();
        add(rep, "eigen.right_residual", right <= 1e-10, fmt(right));
        add(rep, "eigen.left_residual", left <= 1e-10, fmt(left));
        add(rep, "eigen.biorthogonal", inv <= 1e-10, fmt(inv));
    }

    // Riemann round trip
    {
        double worst = 0.0;
        for (int k = 0; k < opt.random_states; ++k) {
            Vec4 U;
            for (int q = 0; q < 4; ++q) U(q) = N01(rng);
            const Vec4 back = from_riemann(to_riemann(U, basis), basis);
            worst = std::max(worst, (back - U).norm() / U.norm());
        }
        add(rep, "riemann.round_trip", worst <= 1e-10, std::to_string(opt.random_states) + " states, max rel " + fmt(worst));
    }

    // Jacobian against central differences of the flux
    {
        const Vec4 W = sp.vector();
        const Mat4 J = jacobian(W, pp);
        Mat4 F;
        for (int q = 0; q < 4; ++q) {
            const double h = 1e-6 * std::max(1.0, std::abs(W(q)));
            Vec4 a = W, b = W;
            a(q) += h;
            b(q) -= h;
            F.col(q) = (flux(a, pp) - flux(b, pp)) / (2.0 * h);
        }
        const double err = (F - J).cwiseAbs().maxCoeff() / J.cwiseAbs().maxCoeff();
        add(rep, "model.jacobian_fd", err <= 1e-7, fmt(err));
    }

    // heterodirectional system
    {
        const ValidationReport v = validate(plant.system);
        add(rep, "system.valid", v.ok, v.ok ? "ok" : v.message);
    }

    // kernels
    KernelSet ks = solve_kernels(plant.system, KernelGrid(cfg.kernel_N), cfg.kernel_tol, cfg.kernel_max_iter);
    if (opt.fault == Fault::kernel) detail::inject_kernel_fault(ks);
    {
        const ResidualReport fine = kernel_residuals(ks, plant.system);
        add(rep, "kernel.diagonal_bc", fine.diagonal_bc <= 1e-12, fmt(fine.diagonal_bc));
        add(rep, "kernel.commutator_bc", fine.commutator_bc <= 1e-12, fmt(fine.commutator_bc));
        add(rep, "kernel.xi_zero_bc", fine.xi_zero_bc <= 10.0 * cfg.kernel_tol, fmt(fine.xi_zero_bc));
        add(rep, "kernel.delta_strictly_lower", fine.delta_upper == 0.0, fmt(fine.delta_upper));

        const KernelSet coarse_ks =
            solve_kernels(plant.system, KernelGrid(std::max(8, cfg.kernel_N / 2)), cfg.kernel_tol, cfg.kernel_max_iter);
        const ResidualReport coarse = kernel_residuals(coarse_ks, plant.system);
        const bool exact = coarse.interior_pde <= 1e-13 && fine.interior_pde <= 1e-13;
        const double ratio = fine.interior_pde > 0.0 ? coarse.interior_pde / fine.interior_pde : 0.0;
        add(rep, "kernel.interior_convergence", exact || ratio >= 1.5,
            "N/2: " + fmt(coarse.interior_pde) + ", N: " + fmt(fine.interior_pde) +
                (exact ? " (exact)" : ", ratio " + fmt(ratio)));
    }

    // kernel convergence where the kernels do not vanish
    {
        const HeteroSystem ref = detail::coupled_reference();
        KernelSet fine_ks = solve_kernels(ref, KernelGrid(80), cfg.kernel_tol, cfg.kernel_max_iter);
        if (opt.fault == Fault::kernel) detail::inject_kernel_fault(fine_ks);
        const double coarse = kernel_residuals(solve_kernels(ref, KernelGrid(40), cfg.kernel_tol, cfg.kernel_max_iter), ref)
                                  .interior_pde;
        const ResidualReport fine = kernel_residuals(fine_ks, ref);
        const double ratio = coarse / fine.interior_pde;
        add(rep, "kernel.reference_convergence", ratio >= 1.5 && fine.diagonal_bc <= 1e-12 && fine.delta_upper == 0.0,
            "coupled reference N=40: " + fmt(coarse) + ", N=80: " + fmt(fine.interior_pde) + ", ratio " + fmt(ratio));
    }

    // Lyapunov parameters
    const LyapunovParams lp = choose_params(plant.system, ks);
    {
        add(rep, "lyapunov.f1_positive", lp.f1 > 0.0, fmt(lp.f1));
        add(rep, "lyapunov.f2_positive", lp.f2 > 0.0, fmt(lp.f2));
        add(rep, "lyapunov.rate_positive", lp.c > 0.0, fmt(lp.c));
        const int Nx = opt.sim_cells;
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (int k = 0; k < opt.random_states; ++k) {
            TargetState z;
            z.eps.resize(plant.system.n, Nx);
            z.beta.resize(plant.system.m, Nx);
            for (int j = 0; j < Nx; ++j) {
                for (int i = 0; i < plant.system.n; ++i) z.eps(i, j) = N01(rng);
                for (int i = 0; i < plant.system.m; ++i) z.beta(i, j) = N01(rng);
            }
            const double V = evaluate_V(lp, z, plant.system), nz = target_norm_squared(z);
            lo = std::min(lo, V / nz);
            hi = std::max(hi, V / nz);
        }
        add(rep, "lyapunov.sandwich", lp.C1 <= lo && hi <= lp.C2,
            "C1 " + fmt(lp.C1) + " <= V/|z|^2 in [" + fmt(lo) + ", " + fmt(hi) + "] <= C2 " + fmt(lp.C2));
    }

    // dead-beat transport oracle
    {
        const HeteroSystem t = detail::transport_only(plant.system);
        const KernelSet tks = solve_kernels(t, KernelGrid(16));
        double lr = std::numeric_limits<double>::infinity(), ll = lr;
        for (const auto& f : t.lambda_r) lr = std::min(lr, f(0.0));
        for (const auto& f : t.lambda_l) ll = std::min(ll, f(0.0));
        SimConfig sc;
        sc.grid = SimGrid(opt.sim_cells);
        sc.T = 1.0 / ll + 1.0 / lr + 0.5;
        sc.output_every = 1;
        sc.keep_states = false;
        const RiemannState s0 = detail::smooth_state(t.n, t.m, sc.grid);
        const SimTrace on = run(t, &tks, sc, s0);
        const double settle = 1.0 / ll + 1.0 / lr;
        double worst = 0.0;
        for (std::size_t k = 0; k < on.size(); ++k)
            if (on.times[k] >= settle + 2.0 * on.dt) worst = std::max(worst, on.total_norm[k]);
        add(rep, "sim.dead_beat", worst <= 1e-8, "max norm after " + fmt(settle) + " + 2dt: " + fmt(worst));
    }

    // closed loop on the plant
    {
        SimConfig sc = cfg.sim;
        sc.grid = SimGrid(opt.sim_cells);
        sc.T = opt.sim_T;
        sc.output_every = 5;
        sc.controller_on = true;
        sc.keep_states = true;
        RiemannState s0 = init_state(sc, sp, plant.basis);
        const SimTrace tr = run(plant.system, &ks, sc, s0, &lp);
        bool finite = true, consistent = true;
        double worst = 0.0;
        for (std::size_t k = 0; k < tr.size(); ++k) {
            finite = finite && std::isfinite(tr.total_norm[k]) && tr.total_norm[k] <= 10.0 * tr.total_norm.front();
            consistent = consistent && tr.beta_right[k] <= 10.0 * tr.beta_right_bound[k];
            worst = std::max(worst, tr.beta_right[k]);
        }
        add(rep, "sim.bounded", finite, "total norm within 10x of initial");
        add(rep, "controller.target_boundary", consistent, "max |beta(t,1)| " + fmt(worst));

        RiemannState s2 = s0;
        s2.u *= 2.0;
        s2.v *= 2.0;
        const SimTrace tr2 = run(plant.system, &ks, sc, s2, nullptr);
        double diff = 0.0, scale = 0.0;
        for (std::size_t k = 0; k < tr.size(); ++k) {
            diff = std::max({diff, (tr2.states[k].u - 2.0 * tr.states[k].u).cwiseAbs().maxCoeff(),
                             (tr2.states[k].v - 2.0 * tr.states[k].v).cwiseAbs().maxCoeff()});
            scale = std::max({scale, tr.states[k].u.cwiseAbs().maxCoeff(), tr.states[k].v.cwiseAbs().maxCoeff()});
        }
        add(rep, "sim.linearity", diff <= 1e-12 * scale, "max deviation " + fmt(diff) + " (scale " + fmt(scale) + ")");
    }
    return rep;
}

inline void write_verify_report(std::ostream& os, const VerifyReport& rep) {
    for (const auto& c : rep.checks) os << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
    os << (rep.passed() ? "verify: all " + std::to_string(rep.checks.size()) + " checks passed"
                        : "verify: " + std::to_string(rep.failures()) + " of " + std::to_string(rep.checks.size()) +
                              " checks failed")
       << '\n';
}

}  // namespace svbs
