#pragma once

// General heterodirectional system
//   u_t + Lr(x) u_x = Sr(x) u + Sl(x) v,   v_t - Ll(x) v_x = So(x) u,
//   u(t,0) = Q0 v(t,0),  v(t,1) = R1 u(t,1) + U(t),
// with n rightward states u and m leftward states v.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "svbs/bilayer_model.hpp"
#include "svbs/errors.hpp"

namespace svbs {

/// Scalar coefficient on [0,1]: constant, callable, or sampled with linear
/// interpolation.
class CoefficientField {
public:
    struct Sampled {
        std::vector<double> x;
        std::vector<double> y;
    };

    CoefficientField() : repr_(0.0) {}
    CoefficientField(double value) : repr_(value) {}  // NOLINT(google-explicit-constructor)
    explicit CoefficientField(std::function<double(double)> fn) : repr_(std::move(fn)) {}

    static CoefficientField sampled(std::vector<double> x, std::vector<double> y) {
        if (x.size() != y.size() || x.size() < 2) throw DimensionError("CoefficientField: need >= 2 matching samples");
        for (std::size_t k = 1; k < x.size(); ++k)
            if (!(x[k] > x[k - 1])) throw DomainError("CoefficientField: sample abscissae must increase");
        if (x.front() > 0.0 || x.back() < 1.0) throw DomainError("CoefficientField: samples must cover [0,1]");
        CoefficientField f;
        f.repr_ = Sampled{std::move(x), std::move(y)};
        return f;
    }

    bool is_constant() const { return std::holds_alternative<double>(repr_); }

    double operator()(double x) const {
        if (const double* c = std::get_if<double>(&repr_)) return *c;
        if (const auto* fn = std::get_if<std::function<double(double)>>(&repr_)) return (*fn)(x);
        const auto& s = std::get<Sampled>(repr_);
        const auto it = std::upper_bound(s.x.begin(), s.x.end(), x);
        std::size_t hi = static_cast<std::size_t>(it - s.x.begin());
        hi = std::clamp<std::size_t>(hi, 1, s.x.size() - 1);
        const std::size_t lo = hi - 1;
        const double w = (x - s.x[lo]) / (s.x[hi] - s.x[lo]);
        return (1.0 - w) * s.y[lo] + w * s.y[hi];
    }

    /// d/dx: exactly zero for constants, central difference otherwise.
    double derivative(double x, double h = 1e-5) const {
        if (is_constant()) return 0.0;
        const double a = std::max(0.0, x - h), b = std::min(1.0, x + h);
        return ((*this)(b) - (*this)(a)) / (b - a);
    }

private:
    std::variant<double, std::function<double(double)>, Sampled> repr_;
};

/// Matrix of coefficient fields.
class FieldMatrix {
public:
    FieldMatrix() = default;
    FieldMatrix(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows * cols)) {}

    static FieldMatrix constant(const Eigen::MatrixXd& m) {
        FieldMatrix f(static_cast<int>(m.rows()), static_cast<int>(m.cols()));
        for (int i = 0; i < f.rows_; ++i)
            for (int j = 0; j < f.cols_; ++j) f(i, j) = CoefficientField(m(i, j));
        return f;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    CoefficientField& operator()(int i, int j) { return data_[static_cast<std::size_t>(i * cols_ + j)]; }
    const CoefficientField& operator()(int i, int j) const { return data_[static_cast<std::size_t>(i * cols_ + j)]; }

    Eigen::MatrixXd at(double x) const {
        Eigen::MatrixXd m(rows_, cols_);
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j) m(i, j) = (*this)(i, j)(x);
        return m;
    }

    bool is_constant() const {
        return std::all_of(data_.begin(), data_.end(), [](const CoefficientField& f) { return f.is_constant(); });
    }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<CoefficientField> data_;
};

struct HeteroSystem {
    int n = 0;  // rightward states
    int m = 0;  // leftward states
    std::vector<CoefficientField> lambda_r;  // n positive speeds, ascending
    std::vector<CoefficientField> lambda_l;  // m positive speed magnitudes, ascending
    FieldMatrix Sr;  // n x n
    FieldMatrix Sl;  // n x m
    FieldMatrix So;  // m x n
    Eigen::MatrixXd Q0;  // n x m
    Eigen::MatrixXd R1;  // m x n

    Eigen::VectorXd speeds_r(double x) const {
        Eigen::VectorXd s(n);
        for (int i = 0; i < n; ++i) s(i) = lambda_r[static_cast<std::size_t>(i)](x);
        return s;
    }
    Eigen::VectorXd speeds_l(double x) const {
        Eigen::VectorXd s(m);
        for (int i = 0; i < m; ++i) s(i) = lambda_l[static_cast<std::size_t>(i)](x);
        return s;
    }
    bool constant_speeds() const {
        auto c = [](const CoefficientField& f) { return f.is_constant(); };
        return std::all_of(lambda_r.begin(), lambda_r.end(), c) && std::all_of(lambda_l.begin(), lambda_l.end(), c);
    }
};

struct ValidationReport {
    bool ok = true;
    std::string message;  // first violated constraint

    explicit operator bool() const { return ok; }
};

struct SpeedBounds {
    double lambda_min = 0.0;
    double lambda_max = 0.0;
};

inline constexpr int kDefaultValidationSamples = 1001;
inline constexpr double kSpeedOrderTol = 1e-12;

inline ValidationReport validate(const HeteroSystem& sys, int samples = kDefaultValidationSamples) {
    auto fail = [](const std::string& msg) { return ValidationReport{false, msg}; };
    auto shape = [](const char* name, long rows, long cols, long er, long ec) -> std::string {
        if (rows == er && cols == ec) return {};
        std::ostringstream os;
        os << name << " is " << rows << "x" << cols << ", expected " << er << "x" << ec;
        return os.str();
    };
    if (sys.n < 1) return fail("n must be >= 1");
    if (sys.m < 0) return fail("m must be >= 0");
    if (static_cast<int>(sys.lambda_r.size()) != sys.n) return fail("lambda_r must have n entries");
    if (static_cast<int>(sys.lambda_l.size()) != sys.m) return fail("lambda_l must have m entries");
    for (const auto& msg : {shape("Sr", sys.Sr.rows(), sys.Sr.cols(), sys.n, sys.n),
                            shape("Sl", sys.Sl.rows(), sys.Sl.cols(), sys.n, sys.m),
                            shape("So", sys.So.rows(), sys.So.cols(), sys.m, sys.n),
                            shape("Q0", sys.Q0.rows(), sys.Q0.cols(), sys.n, sys.m),
                            shape("R1", sys.R1.rows(), sys.R1.cols(), sys.m, sys.n)})
        if (!msg.empty()) return fail(msg);
    if (!sys.Q0.allFinite() || !sys.R1.allFinite()) return fail("Q0/R1 contain non-finite entries");
    if (samples < 2) return fail("need at least 2 validation samples");

    for (int k = 0; k < samples; ++k) {
        const double x = static_cast<double>(k) / (samples - 1);
        auto check_family = [&](const std::vector<CoefficientField>& speeds, const char* name) -> std::string {
            double prev = 0.0;
            for (std::size_t i = 0; i < speeds.size(); ++i) {
                const double s = speeds[i](x);
                std::ostringstream os;
                if (!std::isfinite(s)) {
                    os << name << "_" << i + 1 << " not finite at x=" << x;
                    return os.str();
                }
                if (!(s > kSpeedOrderTol)) {
                    os << name << "_" << i + 1 << " not positive at x=" << x;
                    return os.str();
                }
                if (i > 0 && !(s - prev > kSpeedOrderTol)) {
                    os << name << " speeds not strictly increasing at x=" << x << " (index " << i + 1 << ")";
                    return os.str();
                }
                prev = s;
            }
            return {};
        };
        if (auto msg = check_family(sys.lambda_r, "lambda_r"); !msg.empty()) return fail(msg);
        if (auto msg = check_family(sys.lambda_l, "lambda_l"); !msg.empty()) return fail(msg);
        if (!sys.Sr.at(x).allFinite() || !sys.Sl.at(x).allFinite() || !sys.So.at(x).allFinite()) {
            std::ostringstream os;
            os << "unbounded coefficient at x=" << x;
            return fail(os.str());
        }
    }
    return {};
}

/// Extreme transport speeds over the validation grid.
inline SpeedBounds speed_bounds(const HeteroSystem& sys, int samples = kDefaultValidationSamples) {
    SpeedBounds b{std::numeric_limits<double>::infinity(), 0.0};
    for (int k = 0; k < samples; ++k) {
        const double x = static_cast<double>(k) / (samples - 1);
        for (const auto& f : sys.lambda_r) b.lambda_min = std::min(b.lambda_min, f(x)), b.lambda_max = std::max(b.lambda_max, f(x));
        for (const auto& f : sys.lambda_l) b.lambda_min = std::min(b.lambda_min, f(x)), b.lambda_max = std::max(b.lambda_max, f(x));
    }
    return b;
}

/// Builds the 2+2 system of the linearized two-layer model.
///
/// `Q0` and `R1` are given in layer order, u = (xi_2, xi_4) and
/// v = (xi_1, xi_3), and are permuted to the ascending-speed order used by
/// the system.
inline HeteroSystem from_bilayer(const LinearModel& model, const EigenBasis& basis, const Eigen::MatrixXd& Q0,
                                 const Eigen::MatrixXd& R1) {
    if (Q0.rows() != 2 || Q0.cols() != 2 || R1.rows() != 2 || R1.cols() != 2)
        throw DimensionError("from_bilayer: Q0 and R1 must be 2x2");
    const CouplingMatrices coupling = coupling_matrices(model, basis);

    // layer-order position of each characteristic label within its block
    std::vector<int> right_labels = basis.rightward, left_labels = basis.leftward;
    std::sort(right_labels.begin(), right_labels.end());
    std::sort(left_labels.begin(), left_labels.end());
    auto pos = [](const std::vector<int>& v, int label) {
        return static_cast<int>(std::find(v.begin(), v.end(), label) - v.begin());
    };

    HeteroSystem sys;
    sys.n = 2;
    sys.m = 2;
    for (int k : basis.rightward) sys.lambda_r.emplace_back(basis.lambdas(k));
    for (int k : basis.leftward) sys.lambda_l.emplace_back(std::abs(basis.lambdas(k)));
    sys.Sr = FieldMatrix::constant(coupling.Sr);
    sys.Sl = FieldMatrix::constant(coupling.Sl);
    sys.So = FieldMatrix::constant(coupling.So);
    sys.Q0.resize(2, 2);
    sys.R1.resize(2, 2);
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const int ri = pos(right_labels, basis.rightward[static_cast<std::size_t>(i)]);
            const int lj = pos(left_labels, basis.leftward[static_cast<std::size_t>(j)]);
            sys.Q0(i, j) = Q0(ri, lj);
            const int li = pos(left_labels, basis.leftward[static_cast<std::size_t>(i)]);
            const int rj = pos(right_labels, basis.rightward[static_cast<std::size_t>(j)]);
            sys.R1(i, j) = R1(li, rj);
        }
    }
    if (auto report = validate(sys); !report) throw DomainError("from_bilayer: " + report.message);
    return sys;
}

}  // namespace svbs
