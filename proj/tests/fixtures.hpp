#pragma once

#include <Eigen/Dense>

#include "svbs/bilayer_model.hpp"
#include "svbs/hetero_system.hpp"

namespace fixtures {

inline const svbs::SetPoint kSec4Point{3.0, 1.0, 1.0, 0.95};

inline svbs::PhysicalParams sec4_params() { return svbs::PhysicalParams{9.81, 0.01, 0.05, true}; }

inline Eigen::MatrixXd sec4_Q0() {
    Eigen::MatrixXd Q(2, 2);
    Q << -1.5, 0.01, 0.01, 1.5;
    return Q;
}

inline Eigen::MatrixXd sec4_R1() {
    Eigen::MatrixXd R(2, 2);
    R << 0.5, 0.1, 0.15, -0.5;
    return R;
}

struct Sec4 {
    svbs::LinearModel model;
    svbs::EigenBasis basis;
    svbs::HeteroSystem system;
};

inline Sec4 sec4() {
    Sec4 s;
    s.model = svbs::linearize(kSec4Point, sec4_params());
    s.basis = svbs::eigenbasis(s.model);
    s.system = svbs::from_bilayer(s.model, s.basis, sec4_Q0(), sec4_R1());
    return s;
}

/// Constant-coefficient 2+2 system with all couplings nonzero.
inline svbs::HeteroSystem coupled_2x2() {
    svbs::HeteroSystem sys;
    sys.n = 2;
    sys.m = 2;
    sys.lambda_r = {1.0, 1.5};
    sys.lambda_l = {0.8, 1.3};
    Eigen::MatrixXd Sr(2, 2), Sl(2, 2), So(2, 2);
    Sr << 0.1, -0.2, 0.3, 0.05;
    Sl << 0.4, 0.1, -0.3, 0.2;
    So << 0.5, -0.25, 0.2, 0.3;
    sys.Sr = svbs::FieldMatrix::constant(Sr);
    sys.Sl = svbs::FieldMatrix::constant(Sl);
    sys.So = svbs::FieldMatrix::constant(So);
    sys.Q0.resize(2, 2);
    sys.Q0 << 0.5, 0.2, -0.1, 0.4;
    sys.R1.resize(2, 2);
    sys.R1 << 0.3, -0.2, 0.1, 0.6;
    return sys;
}

/// Pure transport with boundary reflections only.
inline svbs::HeteroSystem trivial_2x2(const Eigen::MatrixXd& Q0, const Eigen::MatrixXd& R1) {
    svbs::HeteroSystem sys;
    sys.n = 2;
    sys.m = 2;
    sys.lambda_r = {1.0, 2.0};
    sys.lambda_l = {1.25, 2.5};
    sys.Sr = svbs::FieldMatrix::constant(Eigen::MatrixXd::Zero(2, 2));
    sys.Sl = svbs::FieldMatrix::constant(Eigen::MatrixXd::Zero(2, 2));
    sys.So = svbs::FieldMatrix::constant(Eigen::MatrixXd::Zero(2, 2));
    sys.Q0 = Q0;
    sys.R1 = R1;
    return sys;
}

}  // namespace fixtures
