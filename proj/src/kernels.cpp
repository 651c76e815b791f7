#include "qsmooth/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qsmooth::kernels {

namespace {

using Index = std::ptrdiff_t;

constexpr Index kParallelThreshold = 8;

void check_sizes(std::size_t props, std::size_t blocks) {
  if (props != blocks) throw std::invalid_argument("kernels: propagator/block count mismatch");
}

inline Complex trace_product(const CMat& a, const CMat& b) {
  return (a.transpose().cwiseProduct(b)).sum();
}

}  // namespace

void propagate(std::span<const StepPropagator> props, std::vector<CMat>& blocks) {
  check_sizes(props.size(), blocks.size());
  const auto n = static_cast<Index>(blocks.size());
#pragma omp parallel for schedule(static) if (n > kParallelThreshold)
  for (Index k = 0; k < n; ++k) blocks[k] = props[k].apply(blocks[k]);
}

void propagate_adjoint(std::span<const StepPropagator> props, std::vector<CMat>& blocks) {
  check_sizes(props.size(), blocks.size());
  const auto n = static_cast<Index>(blocks.size());
#pragma omp parallel for schedule(static) if (n > kParallelThreshold)
  for (Index k = 0; k < n; ++k) blocks[k] = props[k].apply_adjoint(blocks[k]);
}

void conjugate(const CMat& kraus, std::vector<CMat>& blocks) {
  const CMat kraus_dag = kraus.adjoint();
  const auto n = static_cast<Index>(blocks.size());
#pragma omp parallel for schedule(static) if (n > kParallelThreshold)
  for (Index k = 0; k < n; ++k) {
    CMat tmp = kraus * blocks[k];
    blocks[k].noalias() = tmp * kraus_dag;
  }
}

void conjugate_adjoint(const CMat& kraus, std::vector<CMat>& blocks) {
  const CMat kraus_dag = kraus.adjoint();
  const auto n = static_cast<Index>(blocks.size());
#pragma omp parallel for schedule(static) if (n > kParallelThreshold)
  for (Index k = 0; k < n; ++k) {
    CMat tmp = kraus_dag * blocks[k];
    blocks[k].noalias() = tmp * kraus;
  }
}

void mix_forward(const TransitionKernel& kernel, const std::vector<CMat>& in,
                 std::vector<CMat>& out) {
  if (in.size() != kernel.size()) throw std::invalid_argument("mix_forward: size mismatch");
  out.resize(in.size());
  const auto n = static_cast<Index>(in.size());
#pragma omp parallel for schedule(static) if (n > kParallelThreshold)
  for (Index j = 0; j < n; ++j) {
    CMat acc = CMat::Zero(in[j].rows(), in[j].cols());
    for (const auto& e : kernel.column(static_cast<std::size_t>(j))) acc += e.weight * in[e.index];
    out[j] = std::move(acc);
  }
}

void mix_adjoint(const TransitionKernel& kernel, const std::vector<CMat>& in,
                 std::vector<CMat>& out) {
  if (in.size() != kernel.size()) throw std::invalid_argument("mix_adjoint: size mismatch");
  out.resize(in.size());
  const auto n = static_cast<Index>(in.size());
#pragma omp parallel for schedule(static) if (n > kParallelThreshold)
  for (Index k = 0; k < n; ++k) {
    CMat acc = CMat::Zero(in[k].rows(), in[k].cols());
    for (const auto& e : kernel.row(static_cast<std::size_t>(k))) acc += e.weight * in[e.index];
    out[k] = std::move(acc);
  }
}

void measure_propagate(const CMat& kraus, std::span<const StepPropagator> props,
                       std::vector<CMat>& blocks) {
  check_sizes(props.size(), blocks.size());
  const CMat kraus_dag = kraus.adjoint();
  const auto n = static_cast<Index>(blocks.size());
#pragma omp parallel for schedule(static) if (n > kParallelThreshold)
  for (Index k = 0; k < n; ++k) {
    const StepPropagator& prop = props[k];
    if (prop.is_unitary()) {
      const CMat a = prop.unitary() * kraus;
      CMat tmp = a * blocks[k];
      blocks[k].noalias() = tmp * a.adjoint();
    } else {
      CMat tmp = kraus * blocks[k];
      blocks[k] = prop.apply(tmp * kraus_dag);
    }
  }
}

void propagate_measure_adjoint(const CMat& kraus, std::span<const StepPropagator> props,
                               std::vector<CMat>& blocks) {
  check_sizes(props.size(), blocks.size());
  const CMat kraus_dag = kraus.adjoint();
  const auto n = static_cast<Index>(blocks.size());
#pragma omp parallel for schedule(static) if (n > kParallelThreshold)
  for (Index k = 0; k < n; ++k) {
    const StepPropagator& prop = props[k];
    if (prop.is_unitary()) {
      const CMat a = prop.unitary() * kraus;
      CMat tmp = a.adjoint() * blocks[k];
      blocks[k].noalias() = tmp * a;
    } else {
      CMat tmp = kraus_dag * prop.apply_adjoint(blocks[k]);
      blocks[k].noalias() = tmp * kraus;
    }
  }
}

void pair_traces(const std::vector<CMat>& a, const std::vector<CMat>& b, std::vector<double>& out,
                 double* max_imag) {
  if (a.size() != b.size()) throw std::invalid_argument("pair_traces: size mismatch");
  out.resize(a.size());
  const auto n = static_cast<Index>(a.size());
  double worst = 0.0;
#pragma omp parallel for schedule(static) reduction(max : worst) if (n > kParallelThreshold)
  for (Index k = 0; k < n; ++k) {
    const Complex v = trace_product(a[k], b[k]);
    out[k] = v.real();
    worst = std::max(worst, std::abs(v.imag()));
  }
  if (max_imag) *max_imag = worst;
}

namespace serial {

void propagate(std::span<const StepPropagator> props, std::vector<CMat>& blocks) {
  check_sizes(props.size(), blocks.size());
  for (std::size_t k = 0; k < blocks.size(); ++k) blocks[k] = props[k].apply(blocks[k]);
}

void propagate_adjoint(std::span<const StepPropagator> props, std::vector<CMat>& blocks) {
  check_sizes(props.size(), blocks.size());
  for (std::size_t k = 0; k < blocks.size(); ++k) blocks[k] = props[k].apply_adjoint(blocks[k]);
}

void conjugate(const CMat& kraus, std::vector<CMat>& blocks) {
  for (auto& b : blocks) b = (kraus * b * kraus.adjoint()).eval();
}

void conjugate_adjoint(const CMat& kraus, std::vector<CMat>& blocks) {
  for (auto& b : blocks) b = (kraus.adjoint() * b * kraus).eval();
}

void mix_forward(const TransitionKernel& kernel, const std::vector<CMat>& in,
                 std::vector<CMat>& out) {
  if (in.size() != kernel.size()) throw std::invalid_argument("mix_forward: size mismatch");
  out.assign(in.size(), CMat::Zero(in.front().rows(), in.front().cols()));
  // Scatter along rows: the reference keeps the defining sum order.
  for (std::size_t k = 0; k < in.size(); ++k) {
    for (const auto& e : kernel.row(k)) out[e.index] += e.weight * in[k];
  }
}

void mix_adjoint(const TransitionKernel& kernel, const std::vector<CMat>& in,
                 std::vector<CMat>& out) {
  if (in.size() != kernel.size()) throw std::invalid_argument("mix_adjoint: size mismatch");
  out.assign(in.size(), CMat::Zero(in.front().rows(), in.front().cols()));
  for (std::size_t k = 0; k < in.size(); ++k) {
    for (const auto& e : kernel.row(k)) out[k] += e.weight * in[e.index];
  }
}

void measure_propagate(const CMat& kraus, std::span<const StepPropagator> props,
                       std::vector<CMat>& blocks) {
  conjugate(kraus, blocks);
  propagate(props, blocks);
}

void propagate_measure_adjoint(const CMat& kraus, std::span<const StepPropagator> props,
                               std::vector<CMat>& blocks) {
  propagate_adjoint(props, blocks);
  conjugate_adjoint(kraus, blocks);
}

void pair_traces(const std::vector<CMat>& a, const std::vector<CMat>& b, std::vector<double>& out,
                 double* max_imag) {
  if (a.size() != b.size()) throw std::invalid_argument("pair_traces: size mismatch");
  out.resize(a.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const Complex v = (a[k] * b[k]).trace();
    out[k] = v.real();
    worst = std::max(worst, std::abs(v.imag()));
  }
  if (max_imag) *max_imag = worst;
}

}  // namespace serial

}  // namespace qsmooth::kernels
