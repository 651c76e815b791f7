#include "qsmooth/hybrid_engine.hpp"

#include <cmath>
#include <limits>

#include "qsmooth/hybrid_field.hpp"

namespace qsmooth {

double OperatorField::trace_sum() const {
  double s = 0.0;
  for (const auto& b : blocks) s += b.trace().real();
  return s;
}

double OperatorField::hermiticity_defect() const {
  double worst = 0.0;
  for (const auto& b : blocks) worst = std::max(worst, qsmooth::hermiticity_defect(b));
  return worst;
}

double OperatorField::min_eigenvalue() const {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& b : blocks) {
    const CMat herm = 0.5 * (b + b.adjoint());
    Eigen::SelfAdjointEigenSolver<CMat> eig(herm, Eigen::EigenvaluesOnly);
    lo = std::min(lo, eig.eigenvalues().minCoeff());
  }
  return lo;
}

double HybridDensityField::total_trace() const { return trace_sum() * grid->cell_volume(); }

void HybridDensityField::normalize() {
  const double z = total_trace();
  for (auto& b : blocks) b /= z;
  log_weight += std::log(z);
}

void EffectField::normalize() {
  const double z = trace_sum() / (static_cast<double>(blocks.size()) * dim());
  for (auto& b : blocks) b /= z;
  log_weight += std::log(z);
}

HybridEngine::HybridEngine(const Scenario& scenario)
    : scenario_(scenario), kernels_(scenario.classical, scenario.grid) {
  scenario_.validate();
  const ClassicalGrid& g = *scenario_.grid;
  propagators_.reserve(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    propagators_.emplace_back(LindbladGenerator::at(*scenario_.quantum, g.point(k)), scenario_.dt);
  }
}

const TransitionKernel& HybridEngine::kernel(double t) const {
  return *kernels_.get(t, scenario_.dt);
}

}  // namespace qsmooth
