#pragma once

// Boundary feedback law and the backstepping map (u, v) -> (eps, beta).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "svbs/errors.hpp"
#include "svbs/hetero_system.hpp"
#include "svbs/kernel_solver.hpp"
#include "svbs/quadrature.hpp"

namespace svbs {

/// Characteristic state on the cell-centred simulation grid.
struct RiemannState {
    double t = 0.0;
    Eigen::MatrixXd u;  // n x Nx, rightward
    Eigen::MatrixXd v;  // m x Nx, leftward
    Eigen::VectorXd u_left;   // u(t,0) imposed by the boundary condition
    Eigen::VectorXd v_right;  // v(t,1) imposed by the boundary condition
    Eigen::VectorXd clock;    // per-component transport phase, u then v

    int cells() const { return static_cast<int>(u.cols()); }

    static RiemannState zeros(int n, int m, int Nx) {
        RiemannState s;
        s.u = Eigen::MatrixXd::Zero(n, Nx);
        s.v = Eigen::MatrixXd::Zero(m, Nx);
        s.u_left = Eigen::VectorXd::Zero(n);
        s.v_right = Eigen::VectorXd::Zero(m);
        s.clock = Eigen::VectorXd::Zero(n + m);
        return s;
    }
};

namespace detail {

/// Trapezoid weights on {0, x_0, ..., x_{Nx-1}, 1}, folded onto the cell
/// owning each node (nearest-cell end values).
struct FoldedNode {
    int cell;
    double xi;
    double weight;
};

inline std::vector<FoldedNode> boundary_extended_nodes(const SimGrid& grid) {
    const auto nodes = grid.extended_nodes();
    std::vector<FoldedNode> out;
    out.reserve(nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        double w = 0.0;
        if (k > 0) w += 0.5 * (nodes[k] - nodes[k - 1]);
        if (k + 1 < nodes.size()) w += 0.5 * (nodes[k + 1] - nodes[k]);
        const int cell = std::clamp(static_cast<int>(k) - 1, 0, grid.Nx - 1);
        out.push_back({cell, nodes[k], w});
    }
    return out;
}

inline void require_compatible(const KernelSet& ks, const RiemannState& s) {
    if (s.u.rows() != ks.n || s.v.rows() != ks.m || s.u.cols() != s.v.cols())
        throw DimensionError("state dimensions do not match the kernels");
}

}  // namespace detail

/// Precomputed feedback
///   U(t) = -R1 u(t,1) + int_0^1 G21(1,xi) u(t,xi) + G22(1,xi) v(t,xi) dxi
/// on a fixed simulation grid.
class FeedbackLaw {
public:
    FeedbackLaw(const KernelSet& ks, Eigen::MatrixXd R1, const SimGrid& grid)
        : R1_(std::move(R1)), n_(ks.n), m_(ks.m), Nx_(grid.Nx) {
        if (R1_.rows() != m_ || R1_.cols() != n_) throw DimensionError("FeedbackLaw: R1 must be m x n");
        Ku_.assign(static_cast<std::size_t>(Nx_), Eigen::MatrixXd::Zero(m_, n_));
        Kv_.assign(static_cast<std::size_t>(Nx_), Eigen::MatrixXd::Zero(m_, m_));
        for (const auto& node : detail::boundary_extended_nodes(grid)) {
            auto& ku = Ku_[static_cast<std::size_t>(node.cell)];
            auto& kv = Kv_[static_cast<std::size_t>(node.cell)];
            for (int i = 0; i < m_; ++i) {
                for (int j = 0; j < n_; ++j) ku(i, j) += node.weight * ks.G21(i, j).interpolate_last_row(node.xi);
                for (int j = 0; j < m_; ++j) kv(i, j) += node.weight * ks.G22(i, j).interpolate_last_row(node.xi);
            }
        }
    }

    Eigen::VectorXd operator()(const RiemannState& s) const {
        if (s.u.rows() != n_ || s.v.rows() != m_ || s.cells() != Nx_)
            throw DimensionError("FeedbackLaw: state does not match the grid");
        Eigen::VectorXd U = -R1_ * s.u.col(Nx_ - 1);
        for (int j = 0; j < Nx_; ++j)
            U += Ku_[static_cast<std::size_t>(j)] * s.u.col(j) + Kv_[static_cast<std::size_t>(j)] * s.v.col(j);
        return U;
    }

    const Eigen::MatrixXd& R1() const { return R1_; }

private:
    Eigen::MatrixXd R1_;
    int n_, m_, Nx_;
    std::vector<Eigen::MatrixXd> Ku_;
    std::vector<Eigen::MatrixXd> Kv_;
};

inline Eigen::VectorXd control_input(const KernelSet& ks, const RiemannState& s, const Eigen::MatrixXd& R1) {
    detail::require_compatible(ks, s);
    return FeedbackLaw(ks, R1, SimGrid(s.cells()))(s);
}

struct TargetState {
    Eigen::MatrixXd eps;   // n x Nx
    Eigen::MatrixXd beta;  // m x Nx
    Eigen::VectorXd beta_right;  // beta(t,1), using the imposed v(t,1)
    double beta_right_error_bound = 0.0;  // trapezoid error estimate of the x = 1 integral
};

/// Precomputed backstepping map
///   eps = u,  beta(x) = v(x) - int_0^x G21(x,xi) u(xi) + G22(x,xi) v(xi) dxi.
class TargetTransform {
public:
    TargetTransform(const KernelSet& ks, const SimGrid& grid) : n_(ks.n), m_(ks.m), Nx_(grid.Nx) {
        offsets_.reserve(static_cast<std::size_t>(Nx_) + 1);
        const double dx = grid.dx();
        for (int j = 0; j < Nx_; ++j) {
            offsets_.push_back(entries_.size());
            const double x = grid.center(j);
            // nodes 0, x_0, ..., x_j
            std::vector<FoldedEntry> local;
            auto add = [&](int cell, double xi, double w) {
                Eigen::MatrixXd g21(m_, n_), g22(m_, m_);
                for (int i = 0; i < m_; ++i) {
                    for (int q = 0; q < n_; ++q) g21(i, q) = ks.G21(i, q).interpolate(x, xi);
                    for (int q = 0; q < m_; ++q) g22(i, q) = ks.G22(i, q).interpolate(x, xi);
                }
                entries_.push_back({cell, w * g21, w * g22});
            };
            add(0, 0.0, 0.25 * dx);
            for (int k = 0; k <= j; ++k) {
                double w = 0.0;
                w += (k == 0) ? 0.25 * dx : 0.5 * dx;
                if (k < j) w += 0.5 * dx;
                add(k, grid.center(k), w);
            }
        }
        offsets_.push_back(entries_.size());

        for (const auto& node : detail::boundary_extended_nodes(grid)) {
            Eigen::MatrixXd g21(m_, n_), g22(m_, m_);
            for (int i = 0; i < m_; ++i) {
                for (int q = 0; q < n_; ++q) g21(i, q) = ks.G21(i, q).interpolate(1.0, node.xi);
                for (int q = 0; q < m_; ++q) g22(i, q) = ks.G22(i, q).interpolate(1.0, node.xi);
            }
            right_.push_back({node.cell, node.weight * g21, node.weight * g22});
            right_nodes_.push_back({node.cell, node.xi, 0.0});
            right_g_.push_back({node.cell, g21, g22});
        }
    }

    TargetState operator()(const RiemannState& s) const {
        if (s.u.rows() != n_ || s.v.rows() != m_ || s.cells() != Nx_)
            throw DimensionError("TargetTransform: state does not match the grid");
        TargetState out;
        out.eps = s.u;
        out.beta = s.v;
        for (int j = 0; j < Nx_; ++j) {
            Eigen::VectorXd acc = Eigen::VectorXd::Zero(m_);
            for (std::size_t e = offsets_[static_cast<std::size_t>(j)]; e < offsets_[static_cast<std::size_t>(j) + 1]; ++e) {
                const auto& en = entries_[e];
                acc += en.g21 * s.u.col(en.cell) + en.g22 * s.v.col(en.cell);
            }
            out.beta.col(j) -= acc;
        }

        const Eigen::VectorXd v_right = s.v_right.size() == m_ ? s.v_right : Eigen::VectorXd(s.v.col(Nx_ - 1));
        Eigen::VectorXd fine = Eigen::VectorXd::Zero(m_);
        double magnitude = 0.0;
        for (const auto& en : right_) {
            const Eigen::VectorXd term = en.g21 * s.u.col(en.cell) + en.g22 * s.v.col(en.cell);
            fine += term;
            magnitude += term.cwiseAbs().sum();
        }
        out.beta_right = v_right - fine;

        // same integral on every other node for a Richardson-type error estimate
        std::vector<double> xs;
        std::vector<std::vector<double>> fs(static_cast<std::size_t>(m_));
        for (std::size_t k = 0; k < right_g_.size(); ++k) {
            const bool keep = k == 0 || k + 1 == right_g_.size() || (k % 2 == 1);
            if (!keep) continue;
            xs.push_back(right_nodes_[k].xi);
            const auto& g = right_g_[k];
            const Eigen::VectorXd f = g.g21 * s.u.col(g.cell) + g.g22 * s.v.col(g.cell);
            for (int i = 0; i < m_; ++i) fs[static_cast<std::size_t>(i)].push_back(f(i));
        }
        double err = 0.0;
        for (int i = 0; i < m_; ++i) err = std::max(err, std::abs(trapezoid(xs, fs[static_cast<std::size_t>(i)]) - fine(i)));
        out.beta_right_error_bound = err + 1e-13 * magnitude;
        return out;
    }

private:
    struct FoldedEntry {
        int cell;
        Eigen::MatrixXd g21;
        Eigen::MatrixXd g22;
    };

    int n_, m_, Nx_;
    std::vector<std::size_t> offsets_;
    std::vector<FoldedEntry> entries_;
    std::vector<FoldedEntry> right_;
    std::vector<detail::FoldedNode> right_nodes_;
    std::vector<FoldedEntry> right_g_;
};

inline TargetState to_target(const KernelSet& ks, const RiemannState& s) {
    detail::require_compatible(ks, s);
    return TargetTransform(ks, SimGrid(s.cells()))(s);
}

}  // namespace svbs
