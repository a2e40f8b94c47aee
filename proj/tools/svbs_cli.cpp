// svbs: kernels, closed-loop simulation and verification for the linearized
// two-layer shallow-water boundary control problem.
//
//   svbs <kernels|simulate|verify|report> [--config FILE] [--out DIR]
//        [--preset NAME] [--no-control]
//
// Exit status: 0 ok, 1 invalid input, 2 solver failure, 3 verification failed.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "svbs/config.hpp"
#include "svbs/decay.hpp"
#include "svbs/errors.hpp"
#include "svbs/kernel_solver.hpp"
#include "svbs/lyapunov.hpp"
#include "svbs/report.hpp"
#include "svbs/sim_engine.hpp"
#include "svbs/verify.hpp"

namespace fs = std::filesystem;
using namespace svbs;

namespace {

struct Options {
    std::string config_path;
    std::string out_dir;
    std::string preset_name;
    std::string trace_path;
    std::string fault;
    bool no_control = false;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

ExperimentConfig load(const Options& o) {
    const std::string text = o.config_path.empty() ? std::string() : read_file(o.config_path);
    std::optional<std::string> preset_override;
    if (!o.preset_name.empty()) preset_override = o.preset_name;
    ExperimentConfig cfg = parse_config(text, preset_override);
    if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
    if (o.no_control) cfg.sim.controller_on = false;
    return cfg;
}

fs::path prepare_out(const ExperimentConfig& cfg) {
    const fs::path dir(cfg.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + cfg.out_dir + "': " + ec.message());
    std::ofstream(dir / "config.ini") << [&] {
        std::ostringstream os;
        write_config(os, cfg);
        return os.str();
    }();
    return dir;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p);
    if (!out) throw ConfigError("cannot write '" + p.string() + "'");
    return out;
}

void write_residuals(std::ostream& os, const KernelSet& ks, const ResidualReport& r) {
    os << std::setprecision(6);
    os << "N = " << ks.grid.N << '\n'
       << "kernel_iterations = " << ks.kernel_iterations << '\n'
       << "volterra_iterations = " << ks.volterra_iterations << '\n'
       << "sup|G21| = " << ks.G21.sup_norm() << '\n'
       << "sup|G22| = " << ks.G22.sup_norm() << '\n'
       << "sup|Cr| = " << ks.Cr.sup_norm() << '\n'
       << "sup|Cl| = " << ks.Cl.sup_norm() << '\n'
       << "interior_pde = " << r.interior_pde << " at (x, xi) = (" << r.interior_pde_x << ", " << r.interior_pde_xi
       << ")" << (r.interior_pde_component.empty() ? "" : " in " + r.interior_pde_component) << '\n'
       << "interior_pde_mean = " << r.interior_pde_mean << '\n'
       << "corner_characteristic = " << r.corner_characteristic << '\n'
       << "diagonal_bc = " << r.diagonal_bc << '\n'
       << "commutator_bc = " << r.commutator_bc << '\n'
       << "commutator_defect = " << r.commutator_defect << '\n'
       << "xi_zero_bc = " << r.xi_zero_bc << '\n'
       << "delta_upper = " << r.delta_upper << '\n';
}

int cmd_kernels(const Options& o) {
    const ExperimentConfig cfg = load(o);
    const Plant plant = make_plant(cfg);
    const KernelSet ks = solve_kernels(plant.system, KernelGrid(cfg.kernel_N), cfg.kernel_tol, cfg.kernel_max_iter);
    const ResidualReport r = kernel_residuals(ks, plant.system);
    const fs::path dir = prepare_out(cfg);
    {
        auto out = open_out(dir / "kernels.csv");
        write_kernels_csv(out, ks);
    }
    {
        auto out = open_out(dir / "residuals.txt");
        write_residuals(out, ks, r);
    }
    std::cout << "kernels: N=" << ks.grid.N << ", " << ks.kernel_iterations << " iterations, interior residual "
              << r.interior_pde << " -> " << (dir / "kernels.csv").string() << '\n';
    return kExitOk;
}

int cmd_simulate(const Options& o) {
    const ExperimentConfig cfg = load(o);
    const Plant plant = make_plant(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    const KernelSet ks = solve_kernels(plant.system, KernelGrid(cfg.kernel_N), cfg.kernel_tol, cfg.kernel_max_iter);
    const LyapunovParams lp = choose_params(plant.system, ks);
    SimConfig sc = cfg.sim;
    sc.keep_states = true;
    const RiemannState s0 = init_state(sc, cfg.setpoint, plant.basis);
    const SimTrace tr = run(plant.system, &ks, sc, s0, &lp, TraceLabels::bilayer(plant.basis));
    const DecayReport decay = certify_decay(lp, tr, ks, plant.system);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const fs::path dir = prepare_out(cfg);
    {
        auto out = open_out(dir / "trace.csv");
        write_trace_csv(out, tr);
    }
    {
        auto out = open_out(dir / "lyapunov.txt");
        write_params(out, lp);
    }
    {
        auto out = open_out(dir / "decay_report.txt");
        out << "controller = " << (sc.controller_on ? "on" : "off") << '\n'
            << "Nx = " << sc.grid.Nx << ", dt = " << std::setprecision(10) << tr.dt << ", steps = " << tr.steps << '\n';
        write_decay_report(out, decay);
    }
    if (cfg.snapshots) {
        auto out = open_out(dir / "snapshots.csv");
        write_snapshots_csv(out, tr, &plant.basis, &cfg.setpoint);
    }
    const double n0 = tr.total_norm.front(), nT = tr.total_norm.back();
    std::cout << "simulate: T=" << sc.T << ", " << tr.steps << " steps, final/initial norm " << (n0 > 0 ? nT / n0 : 0.0)
              << ", decay certificate " << (decay.certificate ? "pass" : "fail") << " (" << secs << " s) -> "
              << (dir / "trace.csv").string() << '\n';
    return kExitOk;
}

int cmd_verify(const Options& o) {
    const ExperimentConfig cfg = load(o);
    VerifyOptions vo;
    vo.fault = parse_fault(o.fault);
    const VerifyReport rep = verify(cfg, vo);
    const fs::path dir = prepare_out(cfg);
    {
        auto out = open_out(dir / "verify.txt");
        write_verify_report(out, rep);
    }
    write_verify_report(std::cout, rep);
    return rep.passed() ? kExitOk : kExitVerify;
}

int cmd_report(const Options& o) {
    std::string path = o.trace_path;
    if (path.empty()) {
        const ExperimentConfig cfg = load(o);
        path = (fs::path(cfg.out_dir) / "trace.csv").string();
    }
    const TraceTable t = read_trace_csv(path);
    std::ostringstream os;
    os << "trace = " << path << '\n';
    write_trace_summary(os, t);
    const fs::path report = fs::path(path).parent_path() / "report.txt";
    std::ofstream(report) << os.str();
    std::cout << os.str();
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Backstepping boundary control of the linearized two-layer shallow-water system"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "Config file (sectioned key = value)");
        sub->add_option("--out", o.out_dir, "Output directory (overrides output.dir)");
        sub->add_option("--preset", o.preset_name, "Built-in preset: paper-sec4, trivial-decoupled");
        sub->add_flag("--no-control", o.no_control, "Open loop (U = 0)");
    };
    CLI::App* kernels = app.add_subcommand("kernels", "Solve the kernel equations; write kernels.csv and residuals.txt");
    CLI::App* simulate = app.add_subcommand("simulate", "Closed-loop run; write trace.csv and decay_report.txt");
    CLI::App* verify_cmd = app.add_subcommand("verify", "Run the invariant suite; exit 3 on any failure");
    CLI::App* report = app.add_subcommand("report", "Summarize an existing trace.csv");
    for (auto* sub : {kernels, simulate, verify_cmd, report}) common(sub);
    verify_cmd->add_option("--inject-fault", o.fault)->group("");
    report->add_option("--trace", o.trace_path, "Trace CSV (default: <out>/trace.csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInvalid;
    }

    try {
        if (*kernels) return cmd_kernels(o);
        if (*simulate) return cmd_simulate(o);
        if (*verify_cmd) return cmd_verify(o);
        if (*report) return cmd_report(o);
    } catch (const IterationError& e) {
        std::cerr << "error: " << e.what() << " (after " << e.iterations() << " iterations, last change "
                  << e.last_change() << ")\n";
        return exit_status(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_status(e);
    }
    return kExitInvalid;
}
