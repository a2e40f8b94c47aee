#pragma once

// Two-layer shallow-water physics: flux, Jacobian, friction, linearization
// about a set point, and the characteristic (Riemann) decomposition of the
// linearized system.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <complex>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "svbs/errors.hpp"

namespace svbs {

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

struct PhysicalParams {
    double g = 9.81;  // m/s^2
    double r = 0.0;   // density ratio rho1/rho2
    double Cf = 0.0;  // interlayer friction coefficient
    bool flat_bathymetry = true;

    void validate() const {
        if (!(g > 0.0) || !std::isfinite(g)) throw DomainError("PhysicalParams: g must be positive");
        if (!(r >= 0.0 && r < 1.0)) throw DomainError("PhysicalParams: density ratio r must satisfy 0 <= r < 1");
        if (!(Cf >= 0.0) || !std::isfinite(Cf)) throw DomainError("PhysicalParams: Cf must be non-negative");
        if (!flat_bathymetry) throw DomainError("PhysicalParams: only flat bathymetry is supported");
    }
};

/// Constant operating profile (H1*, U1*, H2*, U2*).
struct SetPoint {
    double H1 = 0.0;
    double U1 = 0.0;
    double H2 = 0.0;
    double U2 = 0.0;

    Vec4 vector() const { return {H1, U1, H2, U2}; }

    bool subcritical(double g) const {
        return std::abs(U1) < std::sqrt(g * H1) && std::abs(U2) < std::sqrt(g * H2);
    }

    void validate(const PhysicalParams& params) const {
        if (!(H1 > 0.0) || !(H2 > 0.0)) throw DomainError("SetPoint: layer thicknesses must be positive");
        if (!std::isfinite(U1) || !std::isfinite(U2)) throw DomainError("SetPoint: non-finite velocity");
        if (!subcritical(params.g)) throw DomainError("SetPoint: both layers must be subcritical (|U_i| < sqrt(g H_i))");
    }
};

namespace detail {
inline void require_positive_thickness(const Vec4& W) {
    if (!(W(0) > 0.0) || !(W(2) > 0.0)) throw DomainError("state has non-positive layer thickness");
}
}  // namespace detail

/// Flux of the two-layer system in (H1, U1, H2, U2) variables.
inline Vec4 flux(const Vec4& W, const PhysicalParams& p) {
    detail::require_positive_thickness(W);
    const double H1 = W(0), U1 = W(1), H2 = W(2), U2 = W(3);
    return {H1 * U1, 0.5 * U1 * U1 + p.g * (H1 + H2), H2 * U2, 0.5 * U2 * U2 + p.g * (H2 + p.r * H1)};
}

/// Jacobian of `flux`, i.e. the quasilinear transport matrix A(W).
inline Mat4 jacobian(const Vec4& W, const PhysicalParams& p) {
    detail::require_positive_thickness(W);
    const double H1 = W(0), U1 = W(1), H2 = W(2), U2 = W(3);
    Mat4 A;
    A << U1, H1, 0.0, 0.0,
         p.g, U1, p.g, 0.0,
         0.0, 0.0, U2, H2,
         p.r * p.g, 0.0, p.g, U2;
    return A;
}

struct FrictionSources {
    double upper = 0.0;  // momentum source of layer 1
    double lower = 0.0;  // momentum source of layer 2
};

inline FrictionSources friction_sources(double U1, double U2, double Cf, double r) {
    const double shear = Cf * std::abs(U1 - U2) * (U1 - U2);
    return {-shear, r * shear};
}

/// Linearization about a set point, acting on deviations (h1, u1, h2, u2).
struct LinearModel {
    SetPoint setpoint;
    PhysicalParams params;
    Mat4 Astar = Mat4::Zero();
    double alpha_sf = 0.0;       // 2 Cf |U1* - U2*|
    Mat4 source = Mat4::Zero();  // S_l(U) = source * U
};

inline LinearModel linearize(const SetPoint& sp, const PhysicalParams& params) {
    params.validate();
    sp.validate(params);
    LinearModel model;
    model.setpoint = sp;
    model.params = params;
    model.Astar = jacobian(sp.vector(), params);
    model.alpha_sf = 2.0 * params.Cf * std::abs(sp.U1 - sp.U2);
    const double a = model.alpha_sf;
    // rows: u1-equation gets -a(u1-u2), u2-equation gets r a (u1-u2)
    model.source(1, 1) = -a;
    model.source(1, 3) = a;
    model.source(3, 1) = params.r * a;
    model.source(3, 3) = -params.r * a;
    return model;
}

enum class SpeedMode { closed_form_r0, numeric_quartic };

/// Theta(lambda) - r g^2 H1 H2; vanishes at every characteristic speed.
inline double characteristic_residual(double lambda, const SetPoint& sp, const PhysicalParams& p) {
    const double d1 = lambda - sp.U1, d2 = lambda - sp.U2;
    return (d1 * d1 - p.g * sp.H1) * (d2 * d2 - p.g * sp.H2) - p.r * p.g * p.g * sp.H1 * sp.H2;
}

namespace detail {

inline constexpr double kRepeatedRootTol = 1e-9;

inline void require_distinct_sorted(const std::array<double, 4>& roots, const char* where) {
    const double scale = std::max(1.0, std::max(std::abs(roots.front()), std::abs(roots.back())));
    for (std::size_t k = 1; k < roots.size(); ++k) {
        if (roots[k] - roots[k - 1] < kRepeatedRootTol * scale) {
            std::ostringstream os;
            os << where << ": repeated characteristic speed near " << roots[k];
            throw NonHyperbolicError(os.str());
        }
    }
}

inline std::array<double, 4> quartic_roots(const SetPoint& sp, const PhysicalParams& p) {
    // ((l-U1)^2 - gH1)((l-U2)^2 - gH2) - r g^2 H1 H2 as a monic quartic
    const double a1 = -2.0 * sp.U1, b1 = sp.U1 * sp.U1 - p.g * sp.H1;
    const double a2 = -2.0 * sp.U2, b2 = sp.U2 * sp.U2 - p.g * sp.H2;
    const double c3 = a1 + a2;
    const double c2 = b1 + a1 * a2 + b2;
    const double c1 = a1 * b2 + a2 * b1;
    const double c0 = b1 * b2 - p.r * p.g * p.g * sp.H1 * sp.H2;

    Mat4 companion = Mat4::Zero();
    companion(0, 3) = -c0;
    companion(1, 3) = -c1;
    companion(2, 3) = -c2;
    companion(3, 3) = -c3;
    companion(1, 0) = 1.0;
    companion(2, 1) = 1.0;
    companion(3, 2) = 1.0;

    Eigen::EigenSolver<Mat4> solver(companion, false);
    if (solver.info() != Eigen::Success) throw NonHyperbolicError("characteristic_speeds: companion eigensolve failed");
    const auto ev = solver.eigenvalues();

    std::array<double, 4> roots{};
    for (int k = 0; k < 4; ++k) {
        const std::complex<double> z = ev(k);
        if (std::abs(z.imag()) > 1e-9 * std::max(1.0, std::abs(z))) {
            std::ostringstream os;
            os << "characteristic_speeds: complex characteristic speed " << z.real() << (z.imag() < 0 ? "-" : "+")
               << std::abs(z.imag()) << "i (system is not hyperbolic)";
            throw NonHyperbolicError(os.str());
        }
        double x = z.real();
        // Newton polish on the factored form
        for (int it = 0; it < 4; ++it) {
            const double d1 = x - sp.U1, d2 = x - sp.U2;
            const double q1 = d1 * d1 - p.g * sp.H1, q2 = d2 * d2 - p.g * sp.H2;
            const double f = q1 * q2 - p.r * p.g * p.g * sp.H1 * sp.H2;
            const double df = 2.0 * d1 * q2 + 2.0 * d2 * q1;
            if (df == 0.0) break;
            const double step = f / df;
            if (!std::isfinite(step)) break;
            x -= step;
            if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(x))) break;
        }
        roots[static_cast<std::size_t>(k)] = x;
    }
    std::sort(roots.begin(), roots.end());

    // A double root is split by ~sqrt(eps) in floating point; treat a close
    // pair as repeated when the quartic at its midpoint is below rounding level.
    const double scale = std::max(1.0, std::max(std::abs(roots.front()), std::abs(roots.back())));
    for (std::size_t k = 1; k < roots.size(); ++k) {
        const double gap = roots[k] - roots[k - 1];
        if (gap >= 1e-6 * scale) continue;
        const double mid = 0.5 * (roots[k] + roots[k - 1]);
        const double d1 = mid - sp.U1, d2 = mid - sp.U2;
        const double f = characteristic_residual(mid, sp, p);
        const double magnitude =
            (d1 * d1 + p.g * sp.H1) * (d2 * d2 + p.g * sp.H2) + p.r * p.g * p.g * sp.H1 * sp.H2;
        if (std::abs(f) <= 64.0 * std::numeric_limits<double>::epsilon() * magnitude) {
            std::ostringstream os;
            os << "characteristic_speeds: repeated characteristic speed near " << mid;
            throw NonHyperbolicError(os.str());
        }
    }
    return roots;
}

}  // namespace detail

/// The four characteristic speeds of A(W*), sorted ascending.
inline std::array<double, 4> characteristic_speeds(const SetPoint& sp, const PhysicalParams& params,
                                                   SpeedMode mode = SpeedMode::numeric_quartic) {
    params.validate();
    sp.validate(params);
    std::array<double, 4> roots{};
    if (mode == SpeedMode::closed_form_r0) {
        const double c1 = std::sqrt(params.g * sp.H1), c2 = std::sqrt(params.g * sp.H2);
        roots = {sp.U1 - c1, sp.U1 + c1, sp.U2 - c2, sp.U2 + c2};
        std::sort(roots.begin(), roots.end());
    } else {
        roots = detail::quartic_roots(sp, params);
    }
    detail::require_distinct_sorted(roots, "characteristic_speeds");
    return roots;
}

/// Discrepancies between the numeric eigenstructure and the printed closed
/// forms. Informational only.
struct EigenDiagnostics {
    bool available = false;
    double right_vector = 0.0;   // max relative difference of V_k
    double left_vector = 0.0;    // max direction difference of L_k
    double inverse_coeffs = 0.0; // max relative difference of gamma_k, beta_k, alpha_k
    std::vector<std::string> messages;
};

/// Eigenvalues with right eigenvectors (columns of R) and left eigenvectors
/// (rows of L, L R = I).
///
/// When built from a LinearModel the columns follow the layer labelling
/// lambda_1 = U1*-c1, lambda_2 = U1*+c1, lambda_3 = U2*-c2, lambda_4 = U2*+c2;
/// otherwise they are sorted ascending. `rightward` lists the positive-speed
/// columns by ascending speed, `leftward` the negative-speed columns by
/// ascending magnitude.
struct EigenBasis {
    Vec4 lambdas = Vec4::Zero();
    Mat4 R = Mat4::Identity();
    Mat4 L = Mat4::Identity();
    std::vector<int> rightward;
    std::vector<int> leftward;
    bool layer_labelled = false;
    EigenDiagnostics diagnostics;
};

namespace detail {

inline Vec4 null_vector(const Mat4& A, double lambda) {
    const Mat4 shifted = A - lambda * Mat4::Identity();
    Eigen::JacobiSVD<Mat4> svd(shifted, Eigen::ComputeFullV);
    Vec4 v = svd.matrixV().col(3);
    const double norm = v.norm();
    if (std::abs(v(0)) > 1e-8 * norm) {
        v /= v(0);
    } else {
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        v /= v(arg);
    }
    return v;
}

inline void split_blocks(EigenBasis& basis) {
    basis.rightward.clear();
    basis.leftward.clear();
    for (int k = 0; k < 4; ++k) {
        if (basis.lambdas(k) > 0.0) basis.rightward.push_back(k);
        else if (basis.lambdas(k) < 0.0) basis.leftward.push_back(k);
        else throw NonHyperbolicError("eigenbasis: zero characteristic speed");
    }
    std::sort(basis.rightward.begin(), basis.rightward.end(),
              [&](int a, int b) { return basis.lambdas(a) < basis.lambdas(b); });
    std::sort(basis.leftward.begin(), basis.leftward.end(),
              [&](int a, int b) { return std::abs(basis.lambdas(a)) < std::abs(basis.lambdas(b)); });
}

inline void fill_vectors(EigenBasis& basis, const Mat4& A) {
    for (int k = 0; k < 4; ++k) basis.R.col(k) = null_vector(A, basis.lambdas(k));
    Eigen::FullPivLU<Mat4> lu(basis.R);
    if (!lu.isInvertible()) throw NonHyperbolicError("eigenbasis: eigenvectors are linearly dependent");
    basis.L = lu.inverse();
}

inline double direction_gap(const Vec4& a, const Vec4& b) {
    const Vec4 ua = a.normalized(), ub = b.normalized();
    return std::min((ua - ub).norm(), (ua + ub).norm());
}

inline void closed_form_diagnostics(EigenBasis& basis, const LinearModel& model) {
    const SetPoint& s = model.setpoint;
    const double g = model.params.g;
    const double trA = model.Astar.trace();
    const double detA = model.Astar.determinant();
    const Vec4& lam = basis.lambdas;
    auto& d = basis.diagnostics;
    d.available = true;

    for (int k = 0; k < 4; ++k) {
        const double l = lam(k);
        const double q1 = (l - s.U1) * (l - s.U1) - g * s.H1;
        Vec4 v;
        v << 1.0, (l - s.U1) / s.H1, q1 / (g * s.H1), (l - s.U2) * q1 / (g * s.H1 * s.H2);
        d.right_vector = std::max(d.right_vector, (v - basis.R.col(k)).norm() / basis.R.col(k).norm());

        // l_{k,.} and f_k as printed; indices i,j,l run over the other three labels
        std::array<int, 3> others{};
        int c = 0;
        for (int j = 0; j < 4; ++j)
            if (j != k) others[static_cast<std::size_t>(c++)] = j;
        const double fk = (lam(others[1]) + lam(others[0])) * lam(others[2]) + lam(others[0]) * lam(others[1]);
        const double denom = (lam(others[0]) - l) * (lam(others[1]) - l) * (lam(others[2]) - l);
        Vec4 lk;
        lk(0) = std::pow(s.U1, 3) - (trA - l) * (s.U1 * s.U1 + g * s.H1) + fk + 3.0 * g * s.H1 - detA / l;
        lk(1) = 3.0 * s.H1 * s.U1 * s.U1 - 2.0 * s.H1 * s.U1 * (trA - l) + s.H1 * (fk + g * s.H1);
        lk(2) = g * s.H1 * (7.0 * s.U1 - l);
        lk(3) = g * s.H1 * s.H2;
        lk *= -1.0 / denom;
        d.left_vector = std::max(d.left_vector, direction_gap(lk, basis.L.row(k).transpose()));

        const double gamma = (l - 1.0) / s.H1;
        const double beta = (s.U1 * s.U1 + 2.0 * (l - 1.0) * s.U1 - l * l + g * s.H1) / (g * s.H1);
        const double alpha = ((g * s.H1 * beta - 2.0 * l * l) * s.U2 + 3.0 * std::pow(s.U1, 3) +
                              7.0 * (l - 1.0) * s.U1 * s.U1 + 2.0 * (g * s.H1 - 2.0 * l * l) * s.U1 +
                              l * l * (trA - l) + g * s.H1 * (l + 2.0)) /
                             (g * s.H1 * s.H2);
        const Vec4 col = basis.R.col(k);
        const double scale = std::max(1.0, col.cwiseAbs().maxCoeff());
        d.inverse_coeffs = std::max({d.inverse_coeffs, std::abs(gamma - col(1)) / scale,
                                     std::abs(beta - col(2)) / scale, std::abs(alpha - col(3)) / scale});
    }
    auto note = [&](const char* what, double value) {
        if (value > 1e-6) {
            std::ostringstream os;
            os << "closed-form " << what << " differs from numeric basis (relative " << value << ")";
            d.messages.push_back(os.str());
        }
    };
    note("right eigenvectors", d.right_vector);
    note("left eigenvectors", d.left_vector);
    note("Riemann inverse coefficients", d.inverse_coeffs);
}

}  // namespace detail

/// Eigenstructure of an arbitrary real 4x4 matrix with distinct real eigenvalues.
inline EigenBasis eigenbasis(const Mat4& A) {
    Eigen::EigenSolver<Mat4> solver(A, false);
    if (solver.info() != Eigen::Success) throw NonHyperbolicError("eigenbasis: eigensolve failed");
    std::array<double, 4> values{};
    for (int k = 0; k < 4; ++k) {
        const std::complex<double> z = solver.eigenvalues()(k);
        if (std::abs(z.imag()) > 1e-9 * std::max(1.0, std::abs(z)))
            throw NonHyperbolicError("eigenbasis: complex eigenvalue");
        values[static_cast<std::size_t>(k)] = z.real();
    }
    std::sort(values.begin(), values.end());
    detail::require_distinct_sorted(values, "eigenbasis");

    EigenBasis basis;
    for (int k = 0; k < 4; ++k) basis.lambdas(k) = values[static_cast<std::size_t>(k)];
    detail::fill_vectors(basis, A);
    detail::split_blocks(basis);
    return basis;
}

/// Eigenstructure of the linearized model, columns in layer labelling.
inline EigenBasis eigenbasis(const LinearModel& model) {
    const auto numeric = characteristic_speeds(model.setpoint, model.params, SpeedMode::numeric_quartic);

    // Match sorted numeric roots to sorted decoupled-layer speeds.
    const double c1 = std::sqrt(model.params.g * model.setpoint.H1);
    const double c2 = std::sqrt(model.params.g * model.setpoint.H2);
    const std::array<double, 4> decoupled{model.setpoint.U1 - c1, model.setpoint.U1 + c1, model.setpoint.U2 - c2,
                                          model.setpoint.U2 + c2};
    std::array<int, 4> label{0, 1, 2, 3};
    std::stable_sort(label.begin(), label.end(), [&](int a, int b) {
        return decoupled[static_cast<std::size_t>(a)] < decoupled[static_cast<std::size_t>(b)];
    });

    EigenBasis basis;
    basis.layer_labelled = true;
    for (std::size_t k = 0; k < 4; ++k) basis.lambdas(label[k]) = numeric[k];
    detail::fill_vectors(basis, model.Astar);
    detail::split_blocks(basis);
    detail::closed_form_diagnostics(basis, model);
    return basis;
}

inline Vec4 to_riemann(const Vec4& U, const EigenBasis& basis) { return basis.L * U; }
inline Vec4 from_riemann(const Vec4& xi, const EigenBasis& basis) { return basis.R * xi; }

/// Source coupling in characteristic coordinates, split into the blocks of
/// the heterodirectional form.
struct CouplingMatrices {
    Mat4 M = Mat4::Zero();          // rank-one coupling, layer-labelled indices
    Eigen::MatrixXd Sr;             // u <- u
    Eigen::MatrixXd Sl;             // u <- v
    Eigen::MatrixXd So;             // v <- u (zero)
    Mat4 projected = Mat4::Zero();  // L * source * R, for comparison
    double dropped_v_block = 0.0;   // max |projected| over leftward rows
};

/// Places the linearized friction source on the rightward characteristic of
/// each layer: M = (0, a, 0, -r a)^T (alpha_k - gamma_k)_k, where gamma_k and
/// alpha_k are the u1 and u2 rows of R. The leftward (v) equations carry no
/// source.
inline CouplingMatrices coupling_matrices(const LinearModel& model, const EigenBasis& basis) {
    if (!basis.layer_labelled) throw DimensionError("coupling_matrices: basis must come from eigenbasis(LinearModel)");
    if (basis.rightward.size() != 2 || basis.leftward.size() != 2)
        throw DomainError("coupling_matrices: expected two rightward and two leftward characteristics");
    if (!(basis.lambdas(1) > 0.0) || !(basis.lambdas(3) > 0.0))
        throw DomainError("coupling_matrices: layer speeds U_i* + c_i must be rightward");

    CouplingMatrices out;
    Vec4 column = Vec4::Zero();
    column(1) = model.alpha_sf;
    column(3) = -model.params.r * model.alpha_sf;
    const Eigen::RowVector4d row = basis.R.row(3) - basis.R.row(1);
    out.M = column * row;

    const auto& rw = basis.rightward;
    const auto& lw = basis.leftward;
    auto block = [&](const std::vector<int>& rows, const std::vector<int>& cols) {
        Eigen::MatrixXd b(rows.size(), cols.size());
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < cols.size(); ++j) b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                out.M(rows[i], cols[j]);
        return b;
    };
    out.Sr = block(rw, rw);
    out.Sl = block(rw, lw);
    out.So = block(lw, rw);
    const Eigen::MatrixXd vv = block(lw, lw);
    const double v_block = std::max(out.So.cwiseAbs().maxCoeff(), vv.cwiseAbs().maxCoeff());
    if (v_block > 1e-12 * std::max(1.0, out.M.cwiseAbs().maxCoeff()))
        throw ConsistencyError("coupling_matrices: leftward equations carry a nonzero source block");

    out.projected = basis.L * model.source * basis.R;
    for (int k : lw) out.dropped_v_block = std::max(out.dropped_v_block, out.projected.row(k).cwiseAbs().maxCoeff());
    return out;
}

}  // namespace svbs
