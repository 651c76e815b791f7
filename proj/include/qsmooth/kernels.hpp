#pragma once

#include <span>
#include <vector>

#include "qsmooth/classical_dynamics.hpp"
#include "qsmooth/operator_core.hpp"

namespace qsmooth::kernels {

// Block kernels over all grid points. The top-level versions parallelise
// over grid points with OpenMP; kernels::serial holds straightforward
// single-threaded reference versions used by the tests and the benchmark.

/// f_k <- K_k(f_k)
void propagate(std::span<const StepPropagator> props, std::vector<CMat>& blocks);
/// g_k <- K_k*(g_k)
void propagate_adjoint(std::span<const StepPropagator> props, std::vector<CMat>& blocks);
/// f_k <- M f_k M^dag
void conjugate(const CMat& kraus, std::vector<CMat>& blocks);
/// g_k <- M^dag g_k M
void conjugate_adjoint(const CMat& kraus, std::vector<CMat>& blocks);
/// out_j = sum_k K[k -> j] in_k
void mix_forward(const TransitionKernel& kernel, const std::vector<CMat>& in,
                 std::vector<CMat>& out);
/// out_k = sum_j K[k -> j] in_j
void mix_adjoint(const TransitionKernel& kernel, const std::vector<CMat>& in,
                 std::vector<CMat>& out);
/// f_k <- K_k(M f_k M^dag), fusing U_k M into one operator when K_k is unitary.
void measure_propagate(const CMat& kraus, std::span<const StepPropagator> props,
                       std::vector<CMat>& blocks);
/// g_k <- M^dag K_k*(g_k) M
void propagate_measure_adjoint(const CMat& kraus, std::span<const StepPropagator> props,
                               std::vector<CMat>& blocks);
/// sum_k Re tr[a_k b_k] per grid point, written to out.
void pair_traces(const std::vector<CMat>& a, const std::vector<CMat>& b, std::vector<double>& out,
                 double* max_imag = nullptr);

namespace serial {
void propagate(std::span<const StepPropagator> props, std::vector<CMat>& blocks);
void propagate_adjoint(std::span<const StepPropagator> props, std::vector<CMat>& blocks);
void conjugate(const CMat& kraus, std::vector<CMat>& blocks);
void conjugate_adjoint(const CMat& kraus, std::vector<CMat>& blocks);
void mix_forward(const TransitionKernel& kernel, const std::vector<CMat>& in,
                 std::vector<CMat>& out);
void mix_adjoint(const TransitionKernel& kernel, const std::vector<CMat>& in,
                 std::vector<CMat>& out);
void measure_propagate(const CMat& kraus, std::span<const StepPropagator> props,
                       std::vector<CMat>& blocks);
void propagate_measure_adjoint(const CMat& kraus, std::span<const StepPropagator> props,
                               std::vector<CMat>& blocks);
void pair_traces(const std::vector<CMat>& a, const std::vector<CMat>& b, std::vector<double>& out,
                 double* max_imag = nullptr);
}  // namespace serial

}  // namespace qsmooth::kernels
