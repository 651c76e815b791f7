#pragma once

#include <complex>
#include <cstddef>

#include <Eigen/Dense>

namespace qsmooth {

using Complex = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace qsmooth
