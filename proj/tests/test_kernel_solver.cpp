#include <catch_amalgamated.hpp>

#include <sstream>

#include "fixtures.hpp"
#include "svbs/kernel_solver.hpp"

using namespace svbs;
using Catch::Approx;

namespace {

HeteroSystem scalar_system(double so) {
    HeteroSystem sys;
    sys.n = 1;
    sys.m = 1;
    sys.lambda_r = {1.0};
    sys.lambda_l = {1.0};
    sys.Sr = FieldMatrix::constant(Eigen::MatrixXd::Zero(1, 1));
    sys.Sl = FieldMatrix::constant(Eigen::MatrixXd::Zero(1, 1));
    sys.So = FieldMatrix::constant(Eigen::MatrixXd::Constant(1, 1, so));
    sys.Q0 = Eigen::MatrixXd::Constant(1, 1, 0.5);
    sys.R1 = Eigen::MatrixXd::Constant(1, 1, 0.5);
    return sys;
}

bool strictly_lower_bitwise(const KernelSet& ks) {
    for (const auto& D : ks.Delta)
        for (int i = 0; i < D.rows(); ++i)
            for (int j = i; j < D.cols(); ++j)
                if (D(i, j) != 0.0 || std::signbit(D(i, j))) return false;
    return true;
}

}  // namespace

TEST_CASE("kernel grid invariants") {
    CHECK_THROWS_AS(KernelGrid(7), DomainError);
    const KernelGrid g(8);
    CHECK(g.node_count() == 45);
    CHECK(g.h() == 0.125);
}

TEST_CASE("triangular field interpolation reproduces linear functions") {
    TriField f(10);
    for (int a = 0; a <= 10; ++a)
        for (int b = 0; b <= a; ++b) f.at(a, b) = 2.0 * a / 10.0 - 3.0 * b / 10.0 + 1.0;
    for (double x : {0.0, 0.13, 0.5, 0.77, 1.0})
        for (double xi : {0.0, 0.05, 0.4, 0.77}) {
            if (xi > x) continue;
            CHECK(f.interpolate(x, xi) == Approx(2.0 * x - 3.0 * xi + 1.0).margin(1e-12));
        }
    CHECK(f.interpolate_last_row(0.35) == Approx(3.0 - 1.05).margin(1e-12));
}

TEST_CASE("zero coupling yields exactly zero kernels") {
    const HeteroSystem sys = fixtures::trivial_2x2(fixtures::sec4_Q0(), fixtures::sec4_R1());
    const KernelSet ks = solve_kernels(sys, KernelGrid(40));
    CHECK(ks.kernel_iterations == 1);
    CHECK(ks.G21.sup_norm() == 0.0);
    CHECK(ks.G22.sup_norm() == 0.0);
    CHECK(ks.Cr.sup_norm() == 0.0);
    CHECK(ks.Cl.sup_norm() == 0.0);
    for (const auto& D : ks.Delta) CHECK(D.isZero(0.0));
    const ResidualReport rep = kernel_residuals(ks, sys);
    CHECK(rep.interior_pde == 0.0);
    CHECK(rep.diagonal_bc == 0.0);
    CHECK(rep.xi_zero_bc == 0.0);
    CHECK(rep.delta_upper == 0.0);
}

TEST_CASE("scalar diagonal condition") {
    const HeteroSystem sys = scalar_system(2.0);
    const KernelSet ks = solve_kernels(sys, KernelGrid(32));
    for (int a = 0; a <= 32; ++a) CHECK(ks.G21(0, 0).at(a, a) == -1.0);
}

TEST_CASE("no So and no Sl gives zero kernels for any Sr") {
    HeteroSystem sys = fixtures::coupled_2x2();
    sys.So = FieldMatrix::constant(Eigen::MatrixXd::Zero(2, 2));
    sys.Sl = FieldMatrix::constant(Eigen::MatrixXd::Zero(2, 2));
    const KernelSet ks = solve_kernels(sys, KernelGrid(32));
    CHECK(ks.G21.sup_norm() == 0.0);
    CHECK(ks.G22.sup_norm() == 0.0);
}

TEST_CASE("operating-point kernels") {
    const auto s = fixtures::sec4();
    const KernelSet ks = solve_kernels(s.system, KernelGrid(64));
    // So vanishes, so the kernel equations are homogeneous with zero data
    CHECK(ks.G21.sup_norm() == 0.0);
    CHECK(ks.G22.sup_norm() == 0.0);
    CHECK(strictly_lower_bitwise(ks));
    CHECK(ks.volterra_iterations <= 50);
    const ResidualReport rep = kernel_residuals(ks, s.system);
    CHECK(rep.diagonal_bc == 0.0);
    CHECK(rep.interior_pde == 0.0);
}

TEST_CASE("coupled system: boundary conditions and convergence") {
    const HeteroSystem sys = fixtures::coupled_2x2();
    const KernelSet coarse = solve_kernels(sys, KernelGrid(40));
    const KernelSet fine = solve_kernels(sys, KernelGrid(80));

    CHECK(coarse.G21.sup_norm() > 0.05);
    CHECK(coarse.G22.sup_norm() > 0.0);
    CHECK(strictly_lower_bitwise(fine));

    // diagonal Sylvester relation imposed at the nodes
    const Eigen::MatrixXd So = sys.So.at(0.0);
    for (int a = 0; a <= 80; ++a)
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                CHECK(fine.G21(i, j).at(a, a) == -So(i, j) / (sys.lambda_l[static_cast<std::size_t>(i)](0.0) +
                                                              sys.lambda_r[static_cast<std::size_t>(j)](0.0)));

    const ResidualReport rc = kernel_residuals(coarse, sys);
    const ResidualReport rf = kernel_residuals(fine, sys);
    INFO("interior residual N=40: " << rc.interior_pde << ", N=80: " << rf.interior_pde);
    CHECK(rf.diagonal_bc <= 1e-14);
    CHECK(rf.commutator_bc == 0.0);
    CHECK(rf.xi_zero_bc <= kDefaultKernelTol);
    CHECK(rf.delta_upper == 0.0);
    CHECK(rc.interior_pde / rf.interior_pde >= 1.5);

    // Picard contraction
    const auto& ch = fine.kernel_changes;
    REQUIRE(ch.size() >= 3);
    for (std::size_t k = 2; k < ch.size(); ++k) CHECK(ch[k] <= ch[k - 1]);

    // target couplings are resolution-stable
    const double cr_c = coarse.Cr.sup_norm(), cr_f = fine.Cr.sup_norm();
    CHECK(std::abs(cr_c - cr_f) <= 0.05 * cr_f);
    CHECK(fine.volterra_iterations <= 50);
}

TEST_CASE("space-dependent speed path agrees with the straight-line path") {
    HeteroSystem constant = fixtures::coupled_2x2();
    HeteroSystem callable = constant;
    for (auto& f : callable.lambda_r) {
        const double v = f(0.0);
        f = CoefficientField(std::function<double(double)>([v](double) { return v; }));
    }
    for (auto& f : callable.lambda_l) {
        const double v = f(0.0);
        f = CoefficientField(std::function<double(double)>([v](double) { return v; }));
    }
    const KernelSet a = solve_kernels(constant, KernelGrid(32));
    const KernelSet b = solve_kernels(callable, KernelGrid(32));
    CHECK(a.G21.max_abs_difference(b.G21) <= 2e-2 * a.G21.sup_norm());
    CHECK(a.G22.max_abs_difference(b.G22) <= 2e-2 * std::max(a.G22.sup_norm(), 1e-3));
}

TEST_CASE("residual report localizes a perturbed node") {
    const HeteroSystem sys = fixtures::coupled_2x2();
    KernelSet ks = solve_kernels(sys, KernelGrid(40));
    const double base = kernel_residuals(ks, sys).interior_pde;
    ks.G21(0, 1).at(25, 10) += 0.1;
    const ResidualReport rep = kernel_residuals(ks, sys);
    CHECK(rep.interior_pde > 5.0 * base);
    CHECK(std::abs(rep.interior_pde_x - 25.0 / 40.0) <= 1.0 / 40.0 + 1e-12);
    CHECK(std::abs(rep.interior_pde_xi - 10.0 / 40.0) <= 1.0 / 40.0 + 1e-12);
    CHECK(rep.interior_pde_component == "G21_12");
}

TEST_CASE("target couplings") {
    SECTION("no Sl gives zero couplings") {
        HeteroSystem sys = fixtures::coupled_2x2();
        sys.Sl = FieldMatrix::constant(Eigen::MatrixXd::Zero(2, 2));
        const KernelSet ks = solve_kernels(sys, KernelGrid(24));
        CHECK(ks.Cr.sup_norm() == 0.0);
        CHECK(ks.Cl.sup_norm() == 0.0);
    }
    SECTION("G22 = 0 reduces Cr to Sl G21") {
        const HeteroSystem sys = fixtures::coupled_2x2();
        KernelSet ks;
        ks.n = 2;
        ks.m = 2;
        ks.grid = KernelGrid(16);
        ks.G21 = TriFieldMatrix(2, 2, 16);
        ks.G22 = TriFieldMatrix(2, 2, 16);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                for (int a = 0; a <= 16; ++a)
                    for (int b = 0; b <= a; ++b) ks.G21(i, j).at(a, b) = (i + 1) * 0.1 * a - (j + 1) * 0.05 * b;
        solve_C(ks, sys);
        CHECK(ks.Cl.sup_norm() == 0.0);
        const Eigen::MatrixXd Sl = sys.Sl.at(0.0);
        for (int a = 0; a <= 16; ++a)
            for (int b = 0; b <= a; ++b) {
                const Eigen::MatrixXd expect = Sl * ks.G21.node(a, b);
                CHECK((ks.Cr.node(a, b) - expect).cwiseAbs().maxCoeff() == 0.0);
            }
    }
}

TEST_CASE("iteration limit raises with the last change") {
    const HeteroSystem sys = fixtures::coupled_2x2();
    try {
        solve_kernels(sys, KernelGrid(16), 1e-14, 2);
        FAIL("expected IterationError");
    } catch (const IterationError& e) {
        CHECK(e.iterations() == 2);
        CHECK(e.last_change() > 0.0);
    }
}

TEST_CASE("kernel CSV export") {
    const HeteroSystem sys = fixtures::coupled_2x2();
    const KernelSet ks = solve_kernels(sys, KernelGrid(8));
    std::ostringstream os;
    write_kernels_csv(os, ks);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "x,xi,component,value");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 16 * 45 + 4 * 9);
}
