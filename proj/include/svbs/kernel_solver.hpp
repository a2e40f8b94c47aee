#pragma once

// Backstepping kernels on the triangle T = {0 <= xi <= x <= 1}.
//
// G21 (m x n) and G22 (m x m) solve
//   dG21/dxi Lr(xi) - Ll(x) dG21/dx = -G21 Lr'(xi) - G21 Sr(xi) - G22 So(xi)
//   dG22/dxi Ll(xi) + Ll(x) dG22/dx = -G22 Ll'(xi) + G21 Sl(xi)
// with
//   G21(x,x) Lr(x) + Ll(x) G21(x,x) = -So(x)
//   G22_ij(x,x) = 0 for i != j (where data is assigned on the diagonal)
//   G21(x,0) Lr(0) Q0 - G22(x,0) Ll(0) = -Delta(x), Delta strictly lower.
//
// Each scalar component is written as an integral along its characteristic
// and the coupled system is solved by Picard iteration. C^r, C^l of the
// target system follow from two Volterra equations.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "svbs/errors.hpp"
#include "svbs/hetero_system.hpp"

namespace svbs {

/// Uniform lattice {(a h, b h) : 0 <= b <= a <= N}, h = 1/N.
struct KernelGrid {
    int N = 200;

    explicit KernelGrid(int resolution = 200) : N(resolution) {
        if (resolution < 8) throw DomainError("KernelGrid: N must be >= 8");
    }

    double h() const { return 1.0 / N; }
    double coord(int a) const { return static_cast<double>(a) / N; }
    std::size_t node_count() const { return static_cast<std::size_t>(N + 1) * static_cast<std::size_t>(N + 2) / 2; }
};

/// Scalar field sampled on the triangular lattice.
class TriField {
public:
    TriField() = default;
    explicit TriField(int N) : N_(N), data_(static_cast<std::size_t>(N + 1) * static_cast<std::size_t>(N + 2) / 2, 0.0) {}

    int resolution() const { return N_; }

    double& at(int a, int b) { return data_[index(a, b)]; }
    double at(int a, int b) const { return data_[index(a, b)]; }

    const std::vector<double>& values() const { return data_; }

    double sup_norm() const {
        double s = 0.0;
        for (double v : data_) s = std::max(s, std::abs(v));
        return s;
    }

    /// Bilinear interpolation in interior cells, linear on the half-cells
    /// cut by the diagonal. Arguments are clamped into the triangle.
    double interpolate(double x, double xi) const {
        x = std::clamp(x, 0.0, 1.0);
        xi = std::clamp(xi, 0.0, x);
        const double X = x * N_, Y = xi * N_;
        int a = std::min(static_cast<int>(X), N_ - 1);
        int b = std::min(static_cast<int>(Y), a);
        const double fx = X - a;
        double fy = Y - b;
        if (b < a) {
            return (1.0 - fx) * (1.0 - fy) * at(a, b) + fx * (1.0 - fy) * at(a + 1, b) +
                   (1.0 - fx) * fy * at(a, b + 1) + fx * fy * at(a + 1, b + 1);
        }
        fy = std::min(fy, fx);
        return (1.0 - fx) * at(a, a) + (fx - fy) * at(a + 1, a) + fy * at(a + 1, a + 1);
    }

    /// Linear interpolation along the row x = 1.
    double interpolate_last_row(double xi) const {
        const double Y = std::clamp(xi, 0.0, 1.0) * N_;
        const int b = std::min(static_cast<int>(Y), N_ - 1);
        const double f = Y - b;
        return (1.0 - f) * at(N_, b) + f * at(N_, b + 1);
    }

private:
    std::size_t index(int a, int b) const {
        return static_cast<std::size_t>(a) * static_cast<std::size_t>(a + 1) / 2 + static_cast<std::size_t>(b);
    }

    int N_ = 0;
    std::vector<double> data_;
};

/// Row-major block of TriFields.
class TriFieldMatrix {
public:
    TriFieldMatrix() = default;
    TriFieldMatrix(int rows, int cols, int N)
        : rows_(rows), cols_(cols), fields_(static_cast<std::size_t>(rows * cols), TriField(N)) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    TriField& operator()(int i, int j) { return fields_[static_cast<std::size_t>(i * cols_ + j)]; }
    const TriField& operator()(int i, int j) const { return fields_[static_cast<std::size_t>(i * cols_ + j)]; }

    Eigen::MatrixXd node(int a, int b) const {
        Eigen::MatrixXd m(rows_, cols_);
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j) m(i, j) = (*this)(i, j).at(a, b);
        return m;
    }

    Eigen::MatrixXd interpolate(double x, double xi) const {
        Eigen::MatrixXd m(rows_, cols_);
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j) m(i, j) = (*this)(i, j).interpolate(x, xi);
        return m;
    }

    double sup_norm() const {
        double s = 0.0;
        for (const auto& f : fields_) s = std::max(s, f.sup_norm());
        return s;
    }

    double max_abs_difference(const TriFieldMatrix& other) const {
        double s = 0.0;
        for (std::size_t k = 0; k < fields_.size(); ++k) {
            const auto& a = fields_[k].values();
            const auto& b = other.fields_[k].values();
            for (std::size_t q = 0; q < a.size(); ++q) s = std::max(s, std::abs(a[q] - b[q]));
        }
        return s;
    }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<TriField> fields_;
};

struct KernelSet {
    int n = 0;
    int m = 0;
    KernelGrid grid{8};
    TriFieldMatrix G21;  // m x n
    TriFieldMatrix G22;  // m x m
    TriFieldMatrix Cr;   // n x n
    TriFieldMatrix Cl;   // n x m
    std::vector<Eigen::MatrixXd> Delta;  // m x m at each x_a, strictly lower triangular

    int kernel_iterations = 0;
    int volterra_iterations = 0;
    std::vector<double> kernel_changes;    // sup-norm change per Picard sweep
    std::vector<double> volterra_changes;

    /// Full transformation kernel [[0, 0], [G21, G22]] at a lattice node.
    Eigen::MatrixXd transform(int a, int b) const {
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n + m, n + m);
        g.bottomLeftCorner(m, n) = G21.node(a, b);
        g.bottomRightCorner(m, m) = G22.node(a, b);
        return g;
    }
};

inline constexpr double kDefaultKernelTol = 1e-8;
inline constexpr int kDefaultKernelMaxIter = 200;

namespace detail {

/// Coefficients of a HeteroSystem with a fast path for constant data.
class CoefficientCache {
public:
    explicit CoefficientCache(const HeteroSystem& sys) : sys_(sys) {
        constant_ = sys.Sr.is_constant() && sys.Sl.is_constant() && sys.So.is_constant() && sys.constant_speeds();
        if (constant_) {
            Sr_ = sys.Sr.at(0.0);
            Sl_ = sys.Sl.at(0.0);
            So_ = sys.So.at(0.0);
        }
    }

    bool constant() const { return constant_; }
    Eigen::MatrixXd Sr(double x) const { return constant_ ? Sr_ : sys_.Sr.at(x); }
    Eigen::MatrixXd Sl(double x) const { return constant_ ? Sl_ : sys_.Sl.at(x); }
    Eigen::MatrixXd So(double x) const { return constant_ ? So_ : sys_.So.at(x); }
    const Eigen::MatrixXd& Sr(double x, Eigen::MatrixXd& scratch) const { return constant_ ? Sr_ : (scratch = sys_.Sr.at(x)); }
    const Eigen::MatrixXd& Sl(double x, Eigen::MatrixXd& scratch) const { return constant_ ? Sl_ : (scratch = sys_.Sl.at(x)); }
    const Eigen::MatrixXd& So(double x, Eigen::MatrixXd& scratch) const { return constant_ ? So_ : (scratch = sys_.So.at(x)); }
    double lr(int j, double x) const { return sys_.lambda_r[static_cast<std::size_t>(j)](x); }
    double ll(int j, double x) const { return sys_.lambda_l[static_cast<std::size_t>(j)](x); }
    double dlr(int j, double x) const { return sys_.lambda_r[static_cast<std::size_t>(j)].derivative(x); }
    double dll(int j, double x) const { return sys_.lambda_l[static_cast<std::size_t>(j)].derivative(x); }

private:
    const HeteroSystem& sys_;
    bool constant_ = false;
    Eigen::MatrixXd Sr_, Sl_, So_;
};

enum class Edge { diagonal, xi_zero };

struct PathSample {
    double x;
    double xi;
    double ds;
};

struct Path {
    std::vector<PathSample> samples;  // midpoints with step lengths
    double exit_x = 0.0;
    double exit_xi = 0.0;
    Edge edge = Edge::diagonal;
};

/// Characteristic with direction field (dxi/ds, dx/ds) = dir(x, xi), traced
/// until `crossing(x, xi)` becomes negative (edge reported by `edge_of`).
/// Midpoint (RK2) steps of length ~h; the last step is shortened to land on
/// the edge.
template <class Dir, class Crossing, class EdgeOf>
Path trace_path(double x0, double xi0, double h, Dir dir, Crossing crossing, EdgeOf edge_of) {
    Path path;
    double x = x0, xi = xi0;
    const int max_steps = static_cast<int>(8.0 / h) + 16;
    for (int step = 0;; ++step) {
        if (step > max_steps) throw ConfigError("kernel characteristic leaves the triangle without an assigned datum");
        const auto [dxi0, dx0] = dir(x, xi);
        const double speed = std::hypot(dxi0, dx0);
        if (!(speed > 0.0)) throw ConfigError("kernel characteristic has zero speed");
        auto rk2 = [&](double ds) {
            const double xm = x + 0.5 * ds * dx0, xim = xi + 0.5 * ds * dxi0;
            const auto [dxim, dxm] = dir(xm, xim);
            return std::array<double, 4>{x + ds * dxm, xi + ds * dxim, xm, xim};
        };
        double ds = h / speed;
        auto next = rk2(ds);
        const double c0 = crossing(x, xi);
        const double c1 = crossing(next[0], next[1]);
        if (c0 <= 0.0 || c1 < 0.0) {
            // shorten to the crossing; one secant refinement is exact for straight paths
            double theta = c0 <= 0.0 ? 0.0 : c0 / (c0 - c1);
            for (int it = 0; it < 3 && theta > 0.0; ++it) {
                const auto trial = rk2(theta * ds);
                const double ct = crossing(trial[0], trial[1]);
                if (std::abs(ct) < 1e-15) break;
                theta = std::clamp(theta * c0 / (c0 - ct), 0.0, 1.0);
            }
            ds *= theta;
            if (ds > 0.0) {
                next = rk2(ds);
                path.samples.push_back({next[2], next[3], ds});
                x = next[0];
                xi = next[1];
            }
            path.exit_x = x;
            path.exit_xi = xi;
            path.edge = edge_of(x, xi);
            return path;
        }
        path.samples.push_back({next[2], next[3], ds});
        x = next[0];
        xi = next[1];
    }
}

/// Straight characteristic for constant speeds; `steps` midpoint samples.
inline Path straight_path(double x0, double xi0, double dxi, double dx, double s_exit, Edge edge, double h) {
    Path path;
    const double len = s_exit * std::hypot(dxi, dx);
    const int steps = s_exit > 0.0 ? std::max(1, static_cast<int>(std::ceil(len / h - 1e-12))) : 0;
    const double ds = steps > 0 ? s_exit / steps : 0.0;
    path.samples.reserve(static_cast<std::size_t>(steps));
    for (int k = 0; k < steps; ++k) {
        const double s = (k + 0.5) * ds;
        path.samples.push_back({x0 + s * dx, xi0 + s * dxi, ds});
    }
    path.exit_x = x0 + s_exit * dx;
    path.exit_xi = xi0 + s_exit * dxi;
    path.edge = edge;
    return path;
}

}  // namespace detail

/// Second-kind Volterra equations for the target-system couplings:
///   Cl(x,xi) = Sl(x) G22(x,xi) + int_xi^x Cl(x,eta) G22(eta,xi) deta
///   Cr(x,xi) = Sl(x) G21(x,xi) + int_xi^x Cl(x,eta) G21(eta,xi) deta
/// Cl by Picard iteration, Cr by direct evaluation (trapezoid on lattice nodes).
inline void solve_C(KernelSet& kernels, const HeteroSystem& sys, double tol = kDefaultKernelTol,
                    int max_iter = kDefaultKernelMaxIter) {
    const int N = kernels.grid.N, n = sys.n, m = sys.m;
    const double h = kernels.grid.h();
    detail::CoefficientCache coeff(sys);

    std::vector<Eigen::MatrixXd> Sl_at(static_cast<std::size_t>(N + 1));
    for (int a = 0; a <= N; ++a) Sl_at[static_cast<std::size_t>(a)] = coeff.Sl(kernels.grid.coord(a));

    TriFieldMatrix forcing(n, m, N);
    for (int a = 0; a <= N; ++a)
        for (int b = 0; b <= a; ++b) {
            const Eigen::MatrixXd f = Sl_at[static_cast<std::size_t>(a)] * kernels.G22.node(a, b);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < m; ++j) forcing(i, j).at(a, b) = f(i, j);
        }

    TriFieldMatrix Cl = forcing;
    kernels.volterra_changes.clear();
    int iter = 0;
    double change = std::numeric_limits<double>::infinity();
    while (true) {
        ++iter;
        TriFieldMatrix next = forcing;
        for (int a = 0; a <= N; ++a) {
            for (int b = 0; b < a; ++b) {
                for (int i = 0; i < n; ++i) {
                    for (int j = 0; j < m; ++j) {
                        double sum = 0.0;
                        for (int c = b; c <= a; ++c) {
                            const double w = (c == b || c == a) ? 0.5 * h : h;
                            double s = 0.0;
                            for (int k = 0; k < m; ++k) s += Cl(i, k).at(a, c) * kernels.G22(k, j).at(c, b);
                            sum += w * s;
                        }
                        next(i, j).at(a, b) += sum;
                    }
                }
            }
        }
        change = next.max_abs_difference(Cl);
        kernels.volterra_changes.push_back(change);
        Cl = std::move(next);
        if (!std::isfinite(change)) throw IterationError("solve_C: iteration diverged", iter, change);
        if (change < tol) break;
        if (iter >= max_iter) {
            std::ostringstream os;
            os << "solve_C: no convergence after " << iter << " iterations (last change " << change << ")";
            throw IterationError(os.str(), iter, change);
        }
    }

    TriFieldMatrix Cr(n, n, N);
    for (int a = 0; a <= N; ++a) {
        for (int b = 0; b <= a; ++b) {
            Eigen::MatrixXd value = Sl_at[static_cast<std::size_t>(a)] * kernels.G21.node(a, b);
            for (int c = b; c <= a && a > b; ++c) {
                const double w = (c == b || c == a) ? 0.5 * h : h;
                value += w * Cl.node(a, c) * kernels.G21.node(c, b);
            }
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) Cr(i, j).at(a, b) = value(i, j);
        }
    }
    kernels.Cl = std::move(Cl);
    kernels.Cr = std::move(Cr);
    kernels.volterra_iterations = iter;
}

/// Solves the kernel equations, extracts Delta and the target couplings.
inline KernelSet solve_kernels(const HeteroSystem& sys, const KernelGrid& grid, double tol = kDefaultKernelTol,
                               int max_iter = kDefaultKernelMaxIter) {
    if (auto report = validate(sys); !report) throw DomainError("solve_kernels: " + report.message);
    if (!(tol > 0.0)) throw DomainError("solve_kernels: tol must be positive");
    if (max_iter < 1) throw DomainError("solve_kernels: max_iter must be >= 1");

    const int N = grid.N, n = sys.n, m = sys.m;
    const double h = grid.h();
    detail::CoefficientCache coeff(sys);
    const bool straight = sys.constant_speeds();

    KernelSet ks;
    ks.n = n;
    ks.m = m;
    ks.grid = grid;
    ks.G21 = TriFieldMatrix(m, n, N);
    ks.G22 = TriFieldMatrix(m, m, N);

    const Eigen::VectorXd lr0 = sys.speeds_r(0.0), ll0 = sys.speeds_l(0.0);
    const Eigen::MatrixXd Q0 = sys.Q0;

    auto g21_path = [&](int i, int j, double x, double xi) {
        if (straight) {
            const double lr = coeff.lr(j, 0.0), ll = coeff.ll(i, 0.0);
            return detail::straight_path(x, xi, lr, -ll, (x - xi) / (ll + lr), detail::Edge::diagonal, h);
        }
        return detail::trace_path(
            x, xi, h, [&](double px, double pxi) { return std::pair{coeff.lr(j, pxi), -coeff.ll(i, px)}; },
            [](double px, double pxi) { return px - pxi; }, [](double, double) { return detail::Edge::diagonal; });
    };
    auto g22_path = [&](int i, int j, double x, double xi) {
        if (straight) {
            const double li = coeff.ll(i, 0.0), lj = coeff.ll(j, 0.0);
            const double s_xi = xi / lj;
            const double s_diag = li > lj ? (x - xi) / (li - lj) : std::numeric_limits<double>::infinity();
            if (s_xi <= s_diag) return detail::straight_path(x, xi, -lj, -li, s_xi, detail::Edge::xi_zero, h);
            return detail::straight_path(x, xi, -lj, -li, s_diag, detail::Edge::diagonal, h);
        }
        return detail::trace_path(
            x, xi, h, [&](double px, double pxi) { return std::pair{-coeff.ll(j, pxi), -coeff.ll(i, px)}; },
            [](double px, double pxi) { return std::min(pxi, px - pxi + 1e-14); },
            [](double, double pxi) { return pxi <= 1e-13 ? detail::Edge::xi_zero : detail::Edge::diagonal; });
    };

    // G21 evaluated on the edge xi = 0
    auto g21_edge = [](const TriFieldMatrix& F, double x) {
        Eigen::MatrixXd g(F.rows(), F.cols());
        for (int i = 0; i < F.rows(); ++i)
            for (int k = 0; k < F.cols(); ++k) g(i, k) = F(i, k).interpolate(x, 0.0);
        return g;
    };

    Eigen::MatrixXd scratch_r, scratch_l, scratch_o;
    int iter = 0;
    double change = std::numeric_limits<double>::infinity();
    while (true) {
        ++iter;
        TriFieldMatrix G21(m, n, N), G22(m, m, N);
        for (int a = 0; a <= N; ++a) {
            const double x = grid.coord(a);
            for (int b = 0; b <= a; ++b) {
                const double xi = grid.coord(b);
                for (int i = 0; i < m; ++i) {
                    for (int j = 0; j < n; ++j) {
                        const detail::Path path = g21_path(i, j, x, xi);
                        const double xe = path.exit_x;
                        double value = -coeff.So(xe, scratch_o)(i, j) / (coeff.ll(i, xe) + coeff.lr(j, xe));
                        for (const auto& p : path.samples) {
                            const Eigen::MatrixXd& Sr = coeff.Sr(p.xi, scratch_r);
                            const Eigen::MatrixXd& So = coeff.So(p.xi, scratch_o);
                            double F = 0.0;
                            for (int k = 0; k < n; ++k) {
                                const double g = ks.G21(i, k).interpolate(p.x, p.xi);
                                F -= g * Sr(k, j);
                                if (k == j) F -= g * coeff.dlr(j, p.xi);
                            }
                            for (int k = 0; k < m; ++k) {
                                if (So(k, j) != 0.0) F -= ks.G22(i, k).interpolate(p.x, p.xi) * So(k, j);
                            }
                            value -= F * p.ds;
                        }
                        G21(i, j).at(a, b) =
                            (b == a) ? -coeff.So(x, scratch_o)(i, j) / (coeff.ll(i, x) + coeff.lr(j, x)) : value;
                    }
                    for (int j = 0; j < m; ++j) {
                        const detail::Path path = g22_path(i, j, x, xi);
                        double value = 0.0;
                        if (path.edge == detail::Edge::xi_zero && i <= j) {
                            const Eigen::MatrixXd g = g21_edge(ks.G21, path.exit_x);
                            value = (g * lr0.asDiagonal() * Q0)(i, j) / ll0(j);
                        }
                        for (const auto& p : path.samples) {
                            const Eigen::MatrixXd& Sl = coeff.Sl(p.xi, scratch_l);
                            double F = 0.0;
                            const double dl = coeff.dll(j, p.xi);
                            if (dl != 0.0) F -= ks.G22(i, j).interpolate(p.x, p.xi) * dl;
                            for (int k = 0; k < n; ++k) {
                                if (Sl(k, j) != 0.0) F += ks.G21(i, k).interpolate(p.x, p.xi) * Sl(k, j);
                            }
                            value += F * p.ds;
                        }
                        G22(i, j).at(a, b) = value;
                    }
                }
            }
        }
        change = std::max(G21.max_abs_difference(ks.G21), G22.max_abs_difference(ks.G22));
        ks.kernel_changes.push_back(change);
        ks.G21 = std::move(G21);
        ks.G22 = std::move(G22);
        if (!std::isfinite(change)) throw IterationError("solve_kernels: iteration diverged", iter, change);
        if (change < tol) break;
        if (iter >= max_iter) {
            std::ostringstream os;
            os << "solve_kernels: no convergence after " << iter << " iterations (last change " << change << ")";
            throw IterationError(os.str(), iter, change);
        }
    }
    ks.kernel_iterations = iter;

    ks.Delta.assign(static_cast<std::size_t>(N + 1), Eigen::MatrixXd::Zero(m, m));
    for (int a = 0; a <= N; ++a) {
        const Eigen::MatrixXd full = ks.G22.node(a, 0) * ll0.asDiagonal() - ks.G21.node(a, 0) * lr0.asDiagonal() * Q0;
        auto& D = ks.Delta[static_cast<std::size_t>(a)];
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < i; ++j) D(i, j) = full(i, j);
    }

    solve_C(ks, sys, tol, max_iter);
    return ks;
}

/// G22_ij with i > j takes data on the diagonal on one side of the
/// characteristic through the corner (0,0) and on xi = 0 on the other, so its
/// derivatives jump across that curve. Stencils straddling it are reported
/// separately from the smooth interior.
struct ResidualReport {
    double interior_pde = 0.0;      // max |PDE residual| at smooth interior nodes (central differences)
    double interior_pde_x = 0.0;    // location of the maximum
    double interior_pde_xi = 0.0;
    std::string interior_pde_component;
    double interior_pde_mean = 0.0; // mean |PDE residual| over all interior nodes and components
    double corner_characteristic = 0.0;  // max |PDE residual| on stencils crossing the corner characteristic
    double diagonal_bc = 0.0;       // G21(x,x) Lr + Ll G21(x,x) + So
    double commutator_bc = 0.0;     // G22_ij(x,x)(l_j - l_i), components with diagonal data (i > j)
    double commutator_defect = 0.0; // same quantity for i < j, where no diagonal datum is assigned
    double xi_zero_bc = 0.0;        // G21(x,0) Lr(0) Q0 - G22(x,0) Ll(0) + Delta(x)
    double delta_upper = 0.0;       // max |Delta_ij|, i <= j
};

inline ResidualReport kernel_residuals(const KernelSet& ks, const HeteroSystem& sys) {
    ResidualReport rep;
    const int N = ks.grid.N, n = ks.n, m = ks.m;
    const double h = ks.grid.h();
    detail::CoefficientCache coeff(sys);

    double total = 0.0;
    long count = 0;
    auto note = [&](double r, double x, double xi, const std::string& name) {
        total += r;
        ++count;
        if (r > rep.interior_pde) {
            rep.interior_pde = r;
            rep.interior_pde_x = x;
            rep.interior_pde_xi = xi;
            rep.interior_pde_component = name;
        }
    };
    // corner characteristic xi(x) of G22_ij, tabulated by integrating
    // dxi/dx = l_j(xi) / l_i(x) from the origin
    std::vector<std::vector<double>> corner(static_cast<std::size_t>(m * m));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < i; ++j) {
            auto& c = corner[static_cast<std::size_t>(i * m + j)];
            c.assign(static_cast<std::size_t>(N + 1), 0.0);
            double xi = 0.0;
            const int sub = 8;
            for (int a = 0; a < N; ++a) {
                for (int k = 0; k < sub; ++k) {
                    const double dx = h / sub, x0 = (a + static_cast<double>(k) / sub) * h;
                    const double xim = xi + 0.5 * dx * coeff.ll(j, xi) / coeff.ll(i, x0);
                    xi += dx * coeff.ll(j, xim) / coeff.ll(i, x0 + 0.5 * dx);
                }
                c[static_cast<std::size_t>(a + 1)] = xi;
            }
        }
    auto straddles_corner = [&](int a, int b, int i, int j) {
        const auto& c = corner[static_cast<std::size_t>(i * m + j)];
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (auto [da, db] : {std::pair{0, 0}, {1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
            const double side = (b + db) * h - c[static_cast<std::size_t>(a + da)];
            lo = std::min(lo, side);
            hi = std::max(hi, side);
        }
        return lo <= 1e-12 && hi >= -1e-12;
    };

    for (int a = 2; a <= N - 1; ++a) {
        const double x = ks.grid.coord(a);
        for (int b = 1; b <= a - 1; ++b) {
            const double xi = ks.grid.coord(b);
            const Eigen::MatrixXd g21 = ks.G21.node(a, b), g22 = ks.G22.node(a, b);
            const Eigen::MatrixXd Sr = coeff.Sr(xi), Sl = coeff.Sl(xi), So = coeff.So(xi);
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < n; ++j) {
                    const auto& G = ks.G21(i, j);
                    const double dxi = (G.at(a, b + 1) - G.at(a, b - 1)) / (2.0 * h);
                    const double dx = (G.at(a + 1, b) - G.at(a - 1, b)) / (2.0 * h);
                    const double rhs = -g21(i, j) * coeff.dlr(j, xi) - (g21.row(i) * Sr.col(j))(0) -
                                       (g22.row(i) * So.col(j))(0);
                    const double r = std::abs(coeff.lr(j, xi) * dxi - coeff.ll(i, x) * dx - rhs);
                    note(r, x, xi, "G21_" + std::to_string(i + 1) + std::to_string(j + 1));
                }
                for (int j = 0; j < m; ++j) {
                    const auto& G = ks.G22(i, j);
                    const double dxi = (G.at(a, b + 1) - G.at(a, b - 1)) / (2.0 * h);
                    const double dx = (G.at(a + 1, b) - G.at(a - 1, b)) / (2.0 * h);
                    const double rhs = -g22(i, j) * coeff.dll(j, xi) + (g21.row(i) * Sl.col(j))(0);
                    const double r = std::abs(coeff.ll(j, xi) * dxi + coeff.ll(i, x) * dx - rhs);
                    if (i > j && straddles_corner(a, b, i, j)) {
                        rep.corner_characteristic = std::max(rep.corner_characteristic, r);
                        total += r;
                        ++count;
                        continue;
                    }
                    note(r, x, xi, "G22_" + std::to_string(i + 1) + std::to_string(j + 1));
                }
            }
        }
    }

    if (count > 0) rep.interior_pde_mean = total / static_cast<double>(count);

    const Eigen::VectorXd lr0 = sys.speeds_r(0.0), ll0 = sys.speeds_l(0.0);
    for (int a = 0; a <= N; ++a) {
        const double x = ks.grid.coord(a);
        const Eigen::MatrixXd g21 = ks.G21.node(a, a), g22 = ks.G22.node(a, a);
        const Eigen::VectorXd lr = sys.speeds_r(x), ll = sys.speeds_l(x);
        const Eigen::MatrixXd diag = g21 * lr.asDiagonal() + ll.asDiagonal() * g21 + coeff.So(x);
        rep.diagonal_bc = std::max(rep.diagonal_bc, diag.cwiseAbs().maxCoeff());
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) {
                const double c = std::abs(g22(i, j) * (ll(j) - ll(i)));
                if (i > j) rep.commutator_bc = std::max(rep.commutator_bc, c);
                if (i < j) rep.commutator_defect = std::max(rep.commutator_defect, c);
            }
        const Eigen::MatrixXd& D = ks.Delta[static_cast<std::size_t>(a)];
        const Eigen::MatrixXd edge =
            ks.G21.node(a, 0) * lr0.asDiagonal() * sys.Q0 - ks.G22.node(a, 0) * ll0.asDiagonal() + D;
        rep.xi_zero_bc = std::max(rep.xi_zero_bc, edge.cwiseAbs().maxCoeff());
        for (int i = 0; i < m; ++i)
            for (int j = i; j < m; ++j) rep.delta_upper = std::max(rep.delta_upper, std::abs(D(i, j)));
    }
    return rep;
}

/// CSV with columns x, xi, component, value (Delta rows carry xi = 0).
inline void write_kernels_csv(std::ostream& os, const KernelSet& ks) {
    os << "x,xi,component,value\n";
    os << std::setprecision(17);
    const int N = ks.grid.N;
    auto dump = [&](const TriFieldMatrix& F, const std::string& name) {
        for (int i = 0; i < F.rows(); ++i)
            for (int j = 0; j < F.cols(); ++j) {
                const std::string comp = name + "_" + std::to_string(i + 1) + std::to_string(j + 1);
                for (int a = 0; a <= N; ++a)
                    for (int b = 0; b <= a; ++b)
                        os << ks.grid.coord(a) << ',' << ks.grid.coord(b) << ',' << comp << ',' << F(i, j).at(a, b)
                           << '\n';
            }
    };
    dump(ks.G21, "G21");
    dump(ks.G22, "G22");
    dump(ks.Cr, "Cr");
    dump(ks.Cl, "Cl");
    for (int i = 0; i < ks.m; ++i)
        for (int j = 0; j < ks.m; ++j)
            for (int a = 0; a <= N; ++a)
                os << ks.grid.coord(a) << ",0,Delta_" << i + 1 << j + 1 << ','
                   << ks.Delta[static_cast<std::size_t>(a)](i, j) << '\n';
}

}  // namespace svbs
