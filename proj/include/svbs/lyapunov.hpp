#pragma once

// Lyapunov function of the target system
//   V = 1/2 int e^{-nu x} eps^T Lr^{-1} eps + 1/2 int (1+x) beta^T D Ll^{-1} beta
// and the successive choice of nu and D.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "svbs/controller.hpp"
#include "svbs/errors.hpp"
#include "svbs/hetero_system.hpp"
#include "svbs/kernel_solver.hpp"
#include "svbs/quadrature.hpp"

namespace svbs {

struct LyapunovParams {
    double nu = 1.0;
    Eigen::VectorXd d;  // m weights
    double q_bar = 0.0;
    double coupling_bound = 0.0;  // bound on |Sr|, |Sl|, |Cr|, |Cl|
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    double C1 = 0.0;
    double C2 = 0.0;
    double c = 0.0;  // guaranteed decay rate of V
    double f1 = 0.0;
    double f2 = 0.0;
    double f3 = 0.0;
    double d_floor = 0.0;    // lower bound imposed on every d_i
    bool d_inflated = false; // d_floor exceeded q_bar
    std::vector<std::string> notes;
};

inline double lyapunov_f1(double nu, double M, double lambda_min) {
    const double r = M / lambda_min;
    return nu - 2.0 * r * r - r * (5.0 + 1.0 / nu);
}

inline double lyapunov_f2(double nu, const Eigen::VectorXd& d, int m) {
    const double dmin = d.size() > 0 ? d.minCoeff() : std::numeric_limits<double>::infinity();
    return dmin - 2.0 * m + 1.0 - 1.0 / nu;
}

inline double lyapunov_f3(double nu, double q_bar, int m) { return q_bar - 2.0 * m + 1.0 - 1.0 / nu; }

inline double sandwich_C1(double nu, const Eigen::VectorXd& d, double lambda_max) {
    double lo = std::exp(-nu);
    if (d.size() > 0) lo = std::min(lo, d.minCoeff());
    return lo / (2.0 * lambda_max);
}

inline double sandwich_C2(const Eigen::VectorXd& d, double lambda_min) {
    double hi = 1.0;
    if (d.size() > 0) hi = std::max(hi, 2.0 * d.maxCoeff());
    return hi / (2.0 * lambda_min);
}

namespace detail {

inline double spectral_norm(const Eigen::MatrixXd& A) {
    if (A.size() == 0) return 0.0;
    return Eigen::JacobiSVD<Eigen::MatrixXd>(A).singularValues()(0);
}

inline double sup_spectral_norm(const TriFieldMatrix& F) {
    const int N = F(0, 0).resolution();
    double s = 0.0;
    for (int a = 0; a <= N; ++a)
        for (int b = 0; b <= a; ++b) s = std::max(s, spectral_norm(F.node(a, b)));
    return s;
}

}  // namespace detail

/// Chooses nu and D.
///
/// nu is the smallest value with f1(nu) > 0 found by doubling from 1 and
/// bisecting to three significant digits. Each d_i is bounded below by
/// max(q_bar, 2m - 1 + 1/nu + 1), so that f2 >= 1; the recursion
///   d_k = floor + int (1+x) sum_{i>k} d_i^2 delta_ik^2 / (l_i)^2 dx
/// runs from k = m down to 1.
inline LyapunovParams choose_params(const HeteroSystem& sys, const KernelSet& ks,
                                    int samples = kDefaultValidationSamples) {
    if (ks.n != sys.n || ks.m != sys.m) throw DimensionError("choose_params: kernels do not match the system");
    const int m = sys.m;
    LyapunovParams p;

    const SpeedBounds bounds = speed_bounds(sys, samples);
    p.lambda_min = bounds.lambda_min;
    p.lambda_max = bounds.lambda_max;

    p.q_bar = m > 0 ? detail::spectral_norm(sys.Q0.transpose() * sys.Q0) * (1.0 + 1e-9) : 0.0;

    double M = 0.0;
    for (int k = 0; k < samples; ++k) {
        const double x = static_cast<double>(k) / (samples - 1);
        M = std::max({M, detail::spectral_norm(sys.Sr.at(x)), detail::spectral_norm(sys.Sl.at(x))});
    }
    M = std::max({M, detail::sup_spectral_norm(ks.Cr), detail::sup_spectral_norm(ks.Cl)});
    if (!std::isfinite(M)) throw DomainError("choose_params: unbounded coefficients");
    p.coupling_bound = M;

    auto admissible = [&](double nu) { return lyapunov_f1(nu, M, p.lambda_min) > 0.0; };
    double nu = 1.0;
    int doublings = 0;
    while (!admissible(nu)) {
        nu *= 2.0;
        if (++doublings > 200) throw DomainError("choose_params: no admissible nu");
    }
    if (doublings > 0) {
        double lo = nu / 2.0, hi = nu;
        while ((hi - lo) > 5e-4 * hi) {
            const double mid = 0.5 * (lo + hi);
            (admissible(mid) ? hi : lo) = mid;
        }
        // round up to three significant digits, staying admissible
        const double scale = std::pow(10.0, std::floor(std::log10(hi)) - 2.0);
        nu = std::ceil(hi / scale) * scale;
        if (!admissible(nu)) nu = hi;
    }
    p.nu = nu;

    p.d_floor = std::max(p.q_bar, 2.0 * m - 1.0 + 1.0 / nu + 1.0);
    p.d_inflated = p.d_floor > p.q_bar;
    if (p.d_inflated) {
        std::ostringstream os;
        os << "d floor raised from q_bar=" << p.q_bar << " to " << p.d_floor << " so that f2 >= 1";
        p.notes.push_back(os.str());
    }

    p.d = Eigen::VectorXd::Constant(m, p.d_floor);
    const int N = ks.grid.N;
    std::vector<double> xs(static_cast<std::size_t>(N + 1)), f(static_cast<std::size_t>(N + 1));
    for (int a = 0; a <= N; ++a) xs[static_cast<std::size_t>(a)] = ks.grid.coord(a);
    for (int k = m - 2; k >= 0; --k) {
        for (int a = 0; a <= N; ++a) {
            const double x = xs[static_cast<std::size_t>(a)];
            const Eigen::MatrixXd& D = ks.Delta[static_cast<std::size_t>(a)];
            double s = 0.0;
            for (int i = k + 1; i < m; ++i) {
                const double li = sys.lambda_l[static_cast<std::size_t>(i)](x);
                s += p.d(i) * p.d(i) * D(i, k) * D(i, k) / (li * li);
            }
            f[static_cast<std::size_t>(a)] = (1.0 + x) * s;
        }
        p.d(k) = p.d_floor + trapezoid(xs, f);
    }

    p.f1 = lyapunov_f1(nu, M, p.lambda_min);
    p.f2 = lyapunov_f2(nu, p.d, m);
    p.f3 = lyapunov_f3(nu, p.q_bar, m);
    if (!(p.f3 > 0.0)) {
        std::ostringstream os;
        os << "f3 = " << p.f3 << " <= 0; f2 is enforced directly through the d floor";
        p.notes.push_back(os.str());
    }
    p.C1 = sandwich_C1(nu, p.d, p.lambda_max);
    p.C2 = sandwich_C2(p.d, p.lambda_min);
    p.c = m > 0 ? p.lambda_min * std::min(p.f1, p.f2 / p.d.maxCoeff()) : p.lambda_min * p.f1;
    return p;
}

/// V on the cell-centred grid (midpoint weights, i.e. the nearest-cell
/// trapezoid rule).
inline double evaluate_V(const LyapunovParams& p, const TargetState& z, const HeteroSystem& sys) {
    const int n = static_cast<int>(z.eps.rows()), m = static_cast<int>(z.beta.rows());
    const int Nx = static_cast<int>(std::max(z.eps.cols(), z.beta.cols()));
    if (Nx == 0) return 0.0;
    if (n != sys.n || m != sys.m || (m > 0 && z.beta.cols() != Nx) || (n > 0 && z.eps.cols() != Nx))
        throw DimensionError("evaluate_V: target state does not match the system");
    if (p.d.size() != m) throw DimensionError("evaluate_V: need one weight per leftward state");
    const double dx = 1.0 / Nx;
    double V = 0.0;
    for (int j = 0; j < Nx; ++j) {
        const double x = (j + 0.5) * dx;
        double e = 0.0, b = 0.0;
        for (int i = 0; i < n; ++i) e += z.eps(i, j) * z.eps(i, j) / sys.lambda_r[static_cast<std::size_t>(i)](x);
        for (int i = 0; i < m; ++i)
            b += p.d(i) * z.beta(i, j) * z.beta(i, j) / sys.lambda_l[static_cast<std::size_t>(i)](x);
        V += std::exp(-p.nu * x) * e + (1.0 + x) * b;
    }
    return 0.5 * V * dx;
}

/// ||(eps, beta)||^2 with the same quadrature as evaluate_V.
inline double target_norm_squared(const TargetState& z) {
    const auto Nx = std::max(z.eps.cols(), z.beta.cols());
    if (Nx == 0) return 0.0;
    return (z.eps.squaredNorm() + z.beta.squaredNorm()) / static_cast<double>(Nx);
}

inline void write_params(std::ostream& os, const LyapunovParams& p) {
    os << std::setprecision(10);
    os << "nu = " << p.nu << '\n';
    os << "d =";
    for (Eigen::Index i = 0; i < p.d.size(); ++i) os << ' ' << p.d(i);
    os << '\n';
    os << "q_bar = " << p.q_bar << '\n'
       << "coupling_bound = " << p.coupling_bound << '\n'
       << "lambda_min = " << p.lambda_min << '\n'
       << "lambda_max = " << p.lambda_max << '\n'
       << "f1 = " << p.f1 << '\n'
       << "f2 = " << p.f2 << '\n'
       << "f3 = " << p.f3 << '\n'
       << "C1 = " << p.C1 << '\n'
       << "C2 = " << p.C2 << '\n'
       << "c = " << p.c << '\n'
       << "d_floor = " << p.d_floor << (p.d_inflated ? " (raised above q_bar)" : "") << '\n';
    for (const auto& note : p.notes) os << "note: " << note << '\n';
}

}  // namespace svbs
