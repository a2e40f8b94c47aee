// One PASS/FAIL line per acceptance criterion; exit status 1 on any FAIL.

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "svbs/config.hpp"
#include "svbs/decay.hpp"
#include "svbs/kernel_solver.hpp"
#include "svbs/lyapunov.hpp"
#include "svbs/sim_engine.hpp"
#include "svbs/verify.hpp"

using namespace svbs;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string g(double v, int digits = 4) {
    std::ostringstream os;
    os << std::setprecision(digits) << v;
    return os.str();
}

int failures = 0;

void report(int id, const std::string& title, bool ok, const std::string& detail) {
    if (!ok) ++failures;
    std::cout << (ok ? "PASS" : "FAIL") << " [" << id << "] " << title << ": " << detail << std::endl;
}

template <class F>
void guarded(int id, const std::string& title, F&& body) {
    try {
        body();
    } catch (const std::exception& e) {
        report(id, title, false, std::string("exception: ") + e.what());
    }
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SVBS_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

bool strictly_lower_bitwise(const KernelSet& ks) {
    for (const auto& D : ks.Delta)
        for (int i = 0; i < D.rows(); ++i)
            for (int j = i; j < D.cols(); ++j)
                if (D(i, j) != 0.0 || std::signbit(D(i, j))) return false;
    return true;
}

}  // namespace

int main() {
    const ExperimentConfig sec4 = preset("paper-sec4");

    guarded(1, "characteristic speeds", [&] {
        PhysicalParams p = sec4.physics;
        p.r = 0.0;
        const auto t0 = Clock::now();
        const auto s = characteristic_speeds(sec4.setpoint, p);
        const double us = 1e6 * seconds_since(t0);
        const double expect[4] = {-4.42, -2.18, 4.08, 6.42};
        double worst = 0.0;
        for (int k = 0; k < 4; ++k) worst = std::max(worst, std::abs(s[static_cast<std::size_t>(k)] - expect[k]));
        report(1, "characteristic speeds", worst <= 0.01 && us < 1000.0,
               "{" + g(s[0]) + ", " + g(s[1]) + ", " + g(s[2]) + ", " + g(s[3]) + "}, max deviation " + g(worst, 2) +
                   " (<= 0.01), " + g(us, 3) + " us (< 1 ms)");
    });

    guarded(2, "Riemann round trip", [&] {
        const Plant plant = make_plant(sec4);
        std::mt19937 rng(2);
        std::normal_distribution<double> N01;
        const auto t0 = Clock::now();
        double worst = 0.0;
        for (int k = 0; k < 1000; ++k) {
            Vec4 U;
            for (int q = 0; q < 4; ++q) U(q) = N01(rng) * std::pow(10.0, q - 2);
            const Vec4 back = from_riemann(to_riemann(U, plant.basis), plant.basis);
            worst = std::max(worst, (back - U).norm() / U.norm());
        }
        const double s = seconds_since(t0);
        report(2, "Riemann round trip", worst <= 1e-10 && s < 1.0,
               "1000 states, max relative error " + g(worst, 3) + " (<= 1e-10), " + g(s, 3) + " s");
    });

    guarded(3, "kernel correctness", [&] {
        const auto t0 = Clock::now();
        // (a) zero coupling
        ExperimentConfig triv = preset("trivial-decoupled");
        const Plant tp = make_plant(triv);
        const KernelSet zk = solve_kernels(tp.system, KernelGrid(200));
        bool delta_zero = true;
        for (const auto& D : zk.Delta) delta_zero = delta_zero && D.isZero(0.0);
        const bool a = zk.G21.sup_norm() == 0.0 && zk.G22.sup_norm() == 0.0 && delta_zero;

        // (b) operating point, N = 100 and 200
        const Plant plant = make_plant(sec4);
        const KernelSet k100 = solve_kernels(plant.system, KernelGrid(100));
        const KernelSet k200 = solve_kernels(plant.system, KernelGrid(200));
        const ResidualReport r100 = kernel_residuals(k100, plant.system);
        const ResidualReport r200 = kernel_residuals(k200, plant.system);
        const bool exact = r100.interior_pde == 0.0 && r200.interior_pde == 0.0;
        const bool decreasing = exact || (r200.interior_pde > 0.0 && r100.interior_pde / r200.interior_pde >= 1.5);
        const bool b = r200.diagonal_bc == 0.0 && decreasing;

        // same measurement where the kernels do not vanish
        const HeteroSystem ref = detail::coupled_reference();
        const double c100 = kernel_residuals(solve_kernels(ref, KernelGrid(100)), ref).interior_pde;
        const double c200 = kernel_residuals(solve_kernels(ref, KernelGrid(200)), ref).interior_pde;

        // (c)
        const bool c = strictly_lower_bitwise(k200) && strictly_lower_bitwise(zk);
        const double s = seconds_since(t0);
        report(3, "kernel correctness", a && b && c && s < 120.0,
               std::string("(a) zero kernels and Delta ") + (a ? "exact" : "NOT zero") + "; (b) diagonal BC " +
                   g(r200.diagonal_bc, 2) + ", interior residual N=100 " + g(r100.interior_pde, 3) + ", N=200 " +
                   g(r200.interior_pde, 3) +
                   (exact ? " (kernels vanish identically)" : ", ratio " + g(r100.interior_pde / r200.interior_pde, 3)) +
                   "; coupled reference ratio " + g(c100 / c200, 3) + "; (c) Delta strictly lower " +
                   (c ? "bitwise" : "VIOLATED") + "; " + g(s, 3) + " s");
    });

    // operating-point closed loop, shared by criteria 4, 5, 6, 8, 9
    const Plant plant = make_plant(sec4);
    const auto t_run = Clock::now();
    const KernelSet ks = solve_kernels(plant.system, KernelGrid(sec4.kernel_N));
    const LyapunovParams lp = choose_params(plant.system, ks);
    SimConfig sc = sec4.sim;
    sc.keep_states = true;
    const RiemannState s0 = init_state(sc, sec4.setpoint, plant.basis);
    const SimTrace tr = run(plant.system, &ks, sc, s0, &lp, TraceLabels::bilayer(plant.basis));
    const double run_seconds = seconds_since(t_run);

    guarded(4, "closed-loop decay", [&] {
        const double ratio = tr.total_norm.back() / tr.total_norm.front();
        bool envelopes = true;
        std::string rates;
        for (std::size_t q = 0; q < tr.labels.norm_index.size(); ++q) {
            std::vector<double> y;
            for (const auto& n : tr.norms) y.push_back(n(tr.labels.norm_index[q]));
            const Envelope e = exponential_envelope(tr.times, y);
            bool bounded = e.rate > 0.0;
            for (std::size_t k = 0; k < y.size(); ++k) bounded = bounded && y[k] <= e(tr.times[k]) * (1.0 + 1e-12);
            envelopes = envelopes && bounded;
            rates += (q ? ", " : "") + tr.labels.norm_names[q] + " " + g(e.rate, 3);
        }
        report(4, "closed-loop decay", ratio <= 0.01 && envelopes && run_seconds < 60.0,
               "Nx=400, T=10: final/initial norm " + g(ratio, 3) + " (<= 0.01); envelope rates " + rates + "; " +
                   g(run_seconds, 3) + " s");
    });

    guarded(5, "control-signal decay", [&] {
        const double limits[2] = {7.0, 4.0};  // u1 after 7 s, u2 after 4 s
        bool ok = true;
        std::string detail;
        for (std::size_t q = 0; q < 2; ++q) {
            const int idx = tr.labels.control_index[q];
            double peak = 0.0, late = 0.0, last = 0.0;
            for (const auto& U : tr.controls) peak = std::max(peak, std::abs(U(idx)));
            for (std::size_t k = 0; k < tr.size(); ++k) {
                const double u = std::abs(tr.controls[k](idx));
                if (tr.times[k] >= limits[q]) late = std::max(late, u);
                if (u > 0.05 * peak) last = tr.times[k];
            }
            ok = ok && peak > 0.0 && late <= 0.05 * peak;
            detail += (q ? "; " : "") + tr.labels.control_names[q] + " peak " + g(peak, 3) + ", max for t >= " +
                      g(limits[q], 2) + " is " + g(late, 3) + " (last above 5% at t=" + g(last, 3) + ")";
        }
        report(5, "control-signal decay", ok, detail);
    });

    guarded(6, "target boundary consistency", [&] {
        bool ok = true;
        double worst = 0.0, bound = 0.0;
        for (std::size_t k = 0; k < tr.size(); ++k) {
            ok = ok && tr.beta_right[k] <= 10.0 * tr.beta_right_bound[k];
            worst = std::max(worst, tr.beta_right[k]);
            bound = std::max(bound, tr.beta_right_bound[k]);
        }
        report(6, "target boundary consistency", ok,
               std::to_string(tr.size()) + " output times, max |beta(t,1)| " + g(worst, 3) +
                   ", max trapezoid error bound " + g(bound, 3));
    });

    guarded(7, "dead-beat oracle", [&] {
        const ExperimentConfig triv = preset("trivial-decoupled");
        const Plant tp = make_plant(triv);
        const KernelSet tk = solve_kernels(tp.system, KernelGrid(64));
        double lr = 1e300, ll = 1e300;
        for (const auto& f : tp.system.lambda_r) lr = std::min(lr, f(0.0));
        for (const auto& f : tp.system.lambda_l) ll = std::min(ll, f(0.0));
        const double settle = 1.0 / ll + 1.0 / lr;
        SimConfig c = triv.sim;
        c.T = settle + 0.5;
        c.output_every = 1;
        c.keep_states = false;
        const RiemannState z0 = init_state(c, triv.setpoint, tp.basis);
        const SimTrace on = run(tp.system, &tk, c, z0);
        c.controller_on = false;
        const SimTrace off = run(tp.system, &tk, c, z0);
        const double deadline = settle + 2.0 * on.dt;
        double worst_on = 0.0, off_at = -1.0;
        for (std::size_t k = 0; k < on.size(); ++k)
            if (on.times[k] >= deadline) worst_on = std::max(worst_on, on.total_norm[k]);
        for (std::size_t k = 0; k < off.size(); ++k)
            if (off.times[k] >= deadline) {
                off_at = off.total_norm[k];
                break;
            }
        report(7, "dead-beat oracle", worst_on <= 1e-8 && off_at > 1e-8 && !tp.system.R1.isZero(0.0),
               "deadline 1/l_min + 1/r_min + 2dt = " + g(deadline, 4) + " s; controlled max norm after it " +
                   g(worst_on, 3) + " (<= 1e-8); open loop at deadline " + g(off_at, 3) + " (> 1e-8)");
    });

    guarded(8, "Lyapunov certificate", [&] {
        std::mt19937 rng(8);
        std::normal_distribution<double> N01;
        std::uniform_real_distribution<double> scale(-3.0, 3.0);
        bool sandwich = true;
        double lo = 1e300, hi = 0.0;
        for (int k = 0; k < 1000; ++k) {
            TargetState z;
            z.eps.resize(plant.system.n, 400);
            z.beta.resize(plant.system.m, 400);
            const double a = std::pow(10.0, scale(rng)), b = std::pow(10.0, scale(rng));
            for (int j = 0; j < 400; ++j) {
                for (int i = 0; i < plant.system.n; ++i) z.eps(i, j) = a * N01(rng);
                for (int i = 0; i < plant.system.m; ++i) z.beta(i, j) = b * N01(rng);
            }
            const double V = evaluate_V(lp, z, plant.system), nz = target_norm_squared(z);
            sandwich = sandwich && lp.C1 * nz <= V && V <= lp.C2 * nz;
            lo = std::min(lo, V / nz);
            hi = std::max(hi, V / nz);
        }
        const DecayReport d = certify_decay(lp, tr, ks, plant.system, 0.05);
        report(8, "Lyapunov certificate", sandwich && d.certificate && d.fitted_rate > 0.0,
               "C1=" + g(lp.C1, 3) + " <= V/|z|^2 in [" + g(lo, 3) + ", " + g(hi, 3) + "] <= C2=" + g(lp.C2, 3) +
                   " on 1000 states; c=" + g(lp.c, 3) + ", worst V(t+dt)/(V(t)e^{-c dt}) " + g(d.worst_ratio, 4) +
                   " (<= 1.05) over " + std::to_string(d.samples) + " samples; fitted rate " + g(d.fitted_rate, 3));
    });

    guarded(9, "linearity and determinism", [&] {
        RiemannState s2 = s0;
        s2.u *= 2.0;
        s2.v *= 2.0;
        const SimTrace t2 = run(plant.system, &ks, sc, s2, nullptr, TraceLabels::bilayer(plant.basis));
        double diff = 0.0, scale = 0.0;
        for (std::size_t k = 0; k < tr.size(); ++k) {
            diff = std::max({diff, (t2.states[k].u - 2.0 * tr.states[k].u).cwiseAbs().maxCoeff(),
                             (t2.states[k].v - 2.0 * tr.states[k].v).cwiseAbs().maxCoeff()});
            scale = std::max({scale, tr.states[k].u.cwiseAbs().maxCoeff(), tr.states[k].v.cwiseAbs().maxCoeff()});
        }
        const bool linear = t2.size() == tr.size() && diff <= 1e-12 * scale;

        const fs::path dir = fs::temp_directory_path() / "svbs_acceptance";
        fs::remove_all(dir);
        const int ea = run_cli("simulate --preset paper-sec4 --out " + (dir / "a").string());
        const int eb = run_cli("simulate --preset paper-sec4 --out " + (dir / "b").string());
        const std::string a = slurp(dir / "a" / "trace.csv"), b = slurp(dir / "b" / "trace.csv");
        const bool same = ea == 0 && eb == 0 && !a.empty() && a == b;
        fs::remove_all(dir);
        report(9, "linearity and determinism", linear && same,
               "doubled data: max |x2 - 2 x1| = " + g(diff, 3) + " (scale " + g(scale, 3) + "); two CLI runs: exit " +
                   std::to_string(ea) + "/" + std::to_string(eb) + ", trace.csv " +
                   (same ? "byte-identical (" + std::to_string(a.size()) + " bytes)" : "DIFFERENT"));
    });

    std::cout << (failures ? std::to_string(failures) + " criteria failed" : std::string("all criteria passed"))
              << std::endl;
    return failures ? 1 : 0;
}
