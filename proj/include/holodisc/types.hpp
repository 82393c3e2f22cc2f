#pragma once

#include <complex>
#include <string_view>

#include <Eigen/Dense>

namespace holodisc {

using cplx = std::complex<double>;

/// Column vector in C^n. Realified as (Re v_0, Im v_0, Re v_1, Im v_1, ...).
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

inline constexpr std::string_view kVersion = "0.3.0";

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace holodisc
