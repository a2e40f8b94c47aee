#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "svbs/decay.hpp"
#include "svbs/sim_engine.hpp"

using namespace svbs;
using Catch::Approx;

namespace {

HeteroSystem unit_transport() {
    HeteroSystem sys;
    sys.n = 1;
    sys.m = 1;
    sys.lambda_r = {1.0};
    sys.lambda_l = {1.0};
    sys.Sr = FieldMatrix::constant(Eigen::MatrixXd::Zero(1, 1));
    sys.Sl = FieldMatrix::constant(Eigen::MatrixXd::Zero(1, 1));
    sys.So = FieldMatrix::constant(Eigen::MatrixXd::Zero(1, 1));
    sys.Q0 = Eigen::MatrixXd::Zero(1, 1);
    sys.R1 = Eigen::MatrixXd::Zero(1, 1);
    return sys;
}

RiemannState smooth_state(int n, int m, const SimGrid& grid) {
    RiemannState s = RiemannState::zeros(n, m, grid.Nx);
    for (int j = 0; j < grid.Nx; ++j) {
        const double x = grid.center(j);
        for (int i = 0; i < n; ++i) s.u(i, j) = std::sin(3.14159265358979 * (i + 1) * x) + 0.3 * i;
        for (int i = 0; i < m; ++i) s.v(i, j) = std::cos((i + 2) * x) - 0.2 * x * x;
    }
    return s;
}

std::string temp_path(const std::string& name) { return std::string("svbs_test_") + name; }

}  // namespace

TEST_CASE("l2 norms") {
    RiemannState s = RiemannState::zeros(1, 1, 512);
    s.u.setOnes();
    const Eigen::VectorXd a = l2_norms(s);
    CHECK(a(0) == Approx(1.0).epsilon(1e-14));
    CHECK(a(1) == 0.0);
    const SimGrid g(512);
    for (int j = 0; j < 512; ++j) s.v(0, j) = std::sin(2.0 * 3.14159265358979323846 * g.center(j));
    CHECK(std::abs(l2_norms(s)(1) - std::sqrt(0.5)) <= 1e-4);
}

TEST_CASE("initial profiles") {
    const auto sec = fixtures::sec4();
    CHECK(section4_H2(0.5) == 2.5);
    CHECK(6.0 - section4_H2(0.5) == 3.5);

    SimConfig cfg;
    cfg.grid = SimGrid(200);

    SECTION("set point profile is the zero state") {
        cfg.profile.kind = ProfileKind::constant_setpoint;
        const RiemannState s = init_state(cfg, fixtures::kSec4Point, sec.basis);
        CHECK(s.u.isZero(0.0));
        CHECK(s.v.isZero(0.0));
    }
    SECTION("default profile round trip") {
        const PhysicalField W = sample_profile(cfg.profile, cfg.grid, fixtures::kSec4Point);
        const RiemannState s = init_state(cfg, fixtures::kSec4Point, sec.basis);
        CHECK(s.u.allFinite());
        CHECK(s.v.allFinite());
        CHECK(s.u.cwiseAbs().maxCoeff() > 0.1);
        CHECK(s.v.cwiseAbs().maxCoeff() > 0.1);
        const PhysicalField back = physical_state(s, fixtures::kSec4Point, sec.basis);
        CHECK((back - W).cwiseAbs().maxCoeff() <= 1e-10 * W.cwiseAbs().maxCoeff());
    }
    SECTION("custom csv") {
        const std::string path = temp_path("profile.csv");
        {
            std::ofstream out(path);
            out << "x,H1,U1,H2,U2\n0,3,1,1,0.95\n1,4,1,2,0.95\n";
        }
        cfg.profile = InitialProfile{ProfileKind::custom_csv, path};
        const PhysicalField W = sample_profile(cfg.profile, cfg.grid, fixtures::kSec4Point);
        const double x = cfg.grid.center(37);
        CHECK(W(0, 37) == Approx(3.0 + x).epsilon(1e-14));
        CHECK(W(2, 37) == Approx(1.0 + x).epsilon(1e-14));
        {
            std::ofstream out(path);
            out << "0,3,1,-1,0.95\n1,3,1,1,0.95\n";
        }
        CHECK_THROWS_AS(sample_profile(cfg.profile, cfg.grid, fixtures::kSec4Point), DomainError);
        {
            std::ofstream out(path);
            out << "0.2,3,1,1,0.95\n1,3,1,1,0.95\n";
        }
        CHECK_THROWS_AS(sample_profile(cfg.profile, cfg.grid, fixtures::kSec4Point), ConfigError);
        std::remove(path.c_str());
        CHECK_THROWS_AS(sample_profile(cfg.profile, cfg.grid, fixtures::kSec4Point), ConfigError);
    }
}

TEST_CASE("stepping primitives") {
    const HeteroSystem sys = unit_transport();
    const SimGrid grid(64);
    const RiemannState s0 = smooth_state(1, 1, grid);

    SECTION("unit Courant number transports exactly one cell") {
        const RiemannState s1 = step(s0, sys, nullptr, grid.dx());
        for (int j = 1; j < 64; ++j) CHECK(s1.u(0, j) == s0.u(0, j - 1));
        for (int j = 0; j < 63; ++j) CHECK(s1.v(0, j) == s0.v(0, j + 1));
        CHECK(s1.u(0, 0) == 0.0);
        CHECK(s1.v(0, 63) == 0.0);
        const RiemannState s2 = step(s0, sys, nullptr, grid.dx(), AdvectionScheme::upwind);
        CHECK((s2.u - s1.u).cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("zero stays zero") {
        const RiemannState z = RiemannState::zeros(2, 2, 64);
        const HeteroSystem c = fixtures::coupled_2x2();
        const RiemannState s1 = step(z, c, nullptr, 0.5 * grid.dx() / 1.5);
        CHECK(s1.u.isZero(0.0));
        CHECK(s1.v.isZero(0.0));
    }
    SECTION("CFL violation") {
        CHECK_THROWS_AS(step(s0, sys, nullptr, 1.01 * grid.dx()), StepError);
        CHECK_THROWS_AS(step(s0, sys, nullptr, 0.0), StepError);
    }
    SECTION("blow-up reports the time") {
        HeteroSystem big = sys;
        big.Sr = FieldMatrix::constant(Eigen::MatrixXd::Constant(1, 1, 1e300));
        RiemannState s = s0;
        s.u.setConstant(1e300);
        try {
            step(s, big, nullptr, 0.5 * grid.dx());
            FAIL("expected BlowUpError");
        } catch (const BlowUpError& e) {
            CHECK(e.time() == Approx(0.5 * grid.dx()));
        }
    }
    SECTION("mismatched state") {
        const RiemannState bad = RiemannState::zeros(2, 1, 64);
        CHECK_THROWS_AS(step(bad, sys, nullptr, 0.5 * grid.dx()), DimensionError);
    }
}

TEST_CASE("open boundaries empty the domain") {
    const Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(2, 2);
    const HeteroSystem sys = fixtures::trivial_2x2(Z, Z);
    SimConfig cfg;
    cfg.grid = SimGrid(200);
    cfg.T = 1.5;
    cfg.output_every = 1;
    cfg.controller_on = false;
    cfg.keep_states = false;
    const SimTrace tr = run(sys, nullptr, cfg, smooth_state(2, 2, cfg.grid));
    for (std::size_t k = 0; k < tr.size(); ++k)
        if (tr.times[k] >= 1.0 + tr.dt) CHECK(tr.total_norm[k] <= 1e-12);
}

TEST_CASE("dead-beat settling of the transport system") {
    const HeteroSystem sys = fixtures::trivial_2x2(fixtures::sec4_Q0(), fixtures::sec4_R1());
    const KernelSet ks = solve_kernels(sys, KernelGrid(32));
    SimConfig cfg;
    cfg.grid = SimGrid(200);
    cfg.T = 3.0;
    cfg.output_every = 1;
    cfg.keep_states = false;
    const RiemannState s0 = smooth_state(2, 2, cfg.grid);
    const double settle = 1.0 / 1.25 + 1.0 / 1.0;

    const SimTrace on = run(sys, &ks, cfg, s0);
    double worst = 0.0;
    for (std::size_t k = 0; k < on.size(); ++k)
        if (on.times[k] >= settle + 2.0 * on.dt) worst = std::max(worst, on.total_norm[k]);
    CHECK(worst <= 1e-8);

    cfg.controller_on = false;
    const SimTrace off = run(sys, &ks, cfg, s0);
    double at_settle = 0.0;
    for (std::size_t k = 0; k < off.size(); ++k)
        if (off.times[k] >= settle + 2.0 * off.dt) {
            at_settle = off.total_norm[k];
            break;
        }
    CHECK(at_settle > 1e-8);
}

TEST_CASE("closed loop is linear in the initial data") {
    const HeteroSystem sys = fixtures::coupled_2x2();
    const KernelSet ks = solve_kernels(sys, KernelGrid(40));
    SimConfig cfg;
    cfg.grid = SimGrid(100);
    cfg.T = 2.0;
    cfg.output_every = 10;
    const RiemannState s0 = smooth_state(2, 2, cfg.grid);
    RiemannState s2 = s0;
    s2.u *= 2.0;
    s2.v *= 2.0;
    const SimTrace a = run(sys, &ks, cfg, s0);
    const SimTrace b = run(sys, &ks, cfg, s2);
    REQUIRE(a.size() == b.size());
    double scale = 0.0, diff = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        scale = std::max({scale, a.states[k].u.cwiseAbs().maxCoeff(), a.states[k].v.cwiseAbs().maxCoeff()});
        diff = std::max({diff, (b.states[k].u - 2.0 * a.states[k].u).cwiseAbs().maxCoeff(),
                         (b.states[k].v - 2.0 * a.states[k].v).cwiseAbs().maxCoeff(),
                         (b.controls[k] - 2.0 * a.controls[k]).cwiseAbs().maxCoeff()});
    }
    CHECK(diff <= 1e-12 * scale);
}

TEST_CASE("trace structure and CSV") {
    const auto sec = fixtures::sec4();
    const KernelSet ks = solve_kernels(sec.system, KernelGrid(32));
    SimConfig cfg;
    cfg.grid = SimGrid(64);
    cfg.T = 0.5;
    cfg.output_every = 7;
    const SimTrace tr = run(sec.system, &ks, cfg, init_state(cfg, fixtures::kSec4Point, sec.basis), nullptr,
                            TraceLabels::bilayer(sec.basis));
    REQUIRE(tr.size() >= 3);
    CHECK(tr.times.front() == 0.0);
    CHECK(tr.times.back() == Approx(0.5).epsilon(1e-12));
    CHECK(tr.dt * tr.steps == Approx(0.5).epsilon(1e-12));
    CHECK(tr.dt * Stepper(sec.system, cfg.grid, nullptr).lambda_max() <= cfg.cfl * cfg.grid.dx() * (1 + 1e-12));
    for (std::size_t k = 1; k < tr.size(); ++k) CHECK(tr.times[k] > tr.times[k - 1]);
    for (const auto& nr : tr.norms) CHECK(nr.minCoeff() >= 0.0);

    std::ostringstream a, b;
    write_trace_csv(a, tr);
    write_trace_csv(b, tr);
    CHECK(a.str() == b.str());
    const std::string header = a.str().substr(0, a.str().find('\n'));
    CHECK(header == "t,xi1_norm,xi2_norm,xi3_norm,xi4_norm,total_norm,u1_ctrl,u2_ctrl,V");

    // xi1 is leftward (U1 - c1 < 0) and xi2 rightward
    const TraceLabels lab = TraceLabels::bilayer(sec.basis);
    CHECK(lab.norm_index[0] >= sec.system.n);
    CHECK(lab.norm_index[1] < sec.system.n);

    std::ostringstream snap;
    write_snapshots_csv(snap, tr, &sec.basis, &fixtures::kSec4Point);
    std::istringstream in(snap.str());
    std::string line;
    int rows = -1;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == static_cast<int>(tr.size()) * 64 * 8);
}

TEST_CASE("run argument checks") {
    const HeteroSystem sys = fixtures::coupled_2x2();
    SimConfig cfg;
    cfg.grid = SimGrid(32);
    CHECK_THROWS_AS(run(sys, nullptr, cfg, RiemannState::zeros(2, 2, 32)), ConfigError);
    cfg.controller_on = false;
    CHECK_THROWS_AS(run(sys, nullptr, cfg, RiemannState::zeros(2, 2, 16)), DimensionError);
    cfg.cfl = 1.2;
    CHECK_THROWS_AS(run(sys, nullptr, cfg, RiemannState::zeros(2, 2, 32)), ConfigError);
}

TEST_CASE("operating-point closed loop versus open loop") {
    const auto sec = fixtures::sec4();
    const KernelSet ks = solve_kernels(sec.system, KernelGrid(64));
    SimConfig cfg;
    cfg.grid = SimGrid(100);
    cfg.keep_states = false;
    cfg.output_every = 50;
    const RiemannState s0 = init_state(cfg, fixtures::kSec4Point, sec.basis);
    const SimTrace on = run(sec.system, &ks, cfg, s0);
    cfg.controller_on = false;
    const SimTrace off = run(sec.system, &ks, cfg, s0);
    CHECK(on.total_norm.back() <= 0.01 * on.total_norm.front());
    CHECK(off.total_norm.back() > on.total_norm.back());
    for (const double n : off.total_norm) CHECK(n <= 10.0 * off.total_norm.front());
}

TEST_CASE("grid refinement of the upwind scheme is first order") {
    // the controlled run is exactly zero at T, so the open loop is compared
    const auto sec = fixtures::sec4();
    std::vector<double> finals;
    for (int Nx : {100, 200, 400}) {
        SimConfig cfg;
        cfg.grid = SimGrid(Nx);
        cfg.controller_on = false;
        cfg.keep_states = false;
        cfg.output_every = 1 << 30;
        cfg.scheme = AdvectionScheme::upwind;
        finals.push_back(run(sec.system, nullptr, cfg, init_state(cfg, fixtures::kSec4Point, sec.basis)).total_norm.back());
    }
    const double ratio = (finals[1] - finals[0]) / (finals[2] - finals[1]);
    INFO("final norms " << finals[0] << ' ' << finals[1] << ' ' << finals[2] << ", ratio " << ratio);
    CHECK(ratio >= 1.3);
    CHECK(ratio <= 2.7);
}

TEST_CASE("exponential envelope") {
    std::vector<double> t, y;
    for (int k = 0; k <= 50; ++k) {
        t.push_back(0.1 * k);
        y.push_back(3.0 * std::exp(-0.7 * t.back()) * (1.0 + 0.1 * std::sin(7.0 * k)));
    }
    const Envelope e = exponential_envelope(t, y);
    CHECK(e.rate == Approx(0.7).margin(0.1));
    for (std::size_t k = 0; k < t.size(); ++k) CHECK(y[k] <= e(t[k]) * (1 + 1e-12));

    const Envelope z = exponential_envelope({0.0, 1.0, 2.0}, {1.0, 0.0, 0.0});
    CHECK(z.amplitude == 1.0);
    CHECK_THROWS_AS(exponential_envelope({0.0}, {1.0, 2.0}), DimensionError);
}

TEST_CASE("decay certificate input checks") {
    const HeteroSystem sys = fixtures::coupled_2x2();
    const KernelSet ks = solve_kernels(sys, KernelGrid(16));
    const LyapunovParams p = choose_params(sys, ks);
    SimTrace tr;
    tr.states.push_back(RiemannState::zeros(2, 2, 32));
    CHECK_THROWS_AS(certify_decay(p, tr, ks, sys), DomainError);
}
