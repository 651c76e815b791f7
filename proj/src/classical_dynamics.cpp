#include "qsmooth/classical_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "qsmooth/errors.hpp"

namespace qsmooth {

namespace {

constexpr double kResolvedRatio = 0.75;  // sd / spacing above which the Gaussian is sampled
constexpr double kWindowSd = 8.0;

bool is_psd(const RMat& m, double tol) {
  if (m.rows() != m.cols()) return false;
  if (m.size() == 0) return true;
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > tol * std::max(1.0, m.cwiseAbs().maxCoeff())) {
    return false;
  }
  Eigen::SelfAdjointEigenSolver<RMat> eig(m);
  return eig.eigenvalues().minCoeff() >= -tol * std::max(1.0, m.cwiseAbs().maxCoeff());
}

bool is_diagonal(const RMat& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (i == j) continue;
      const double scale = std::sqrt(std::abs(m(i, i) * m(j, j)));
      if (std::abs(m(i, j)) > 1e-14 * std::max(scale, 1e-300)) return false;
    }
  }
  return true;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Mass of N(mean, var) outside the cells covered by the axis.
double off_axis_mass(const GridAxis& axis, double mean, double var) {
  const double h = axis.spacing();
  const double lo = axis.min - 0.5 * h;
  const double hi = axis.max + 0.5 * h;
  if (var <= 0.0) return (mean < lo || mean > hi) ? 1.0 : 0.0;
  const double s = std::sqrt(var);
  return normal_cdf((lo - mean) / s) + (1.0 - normal_cdf((hi - mean) / s));
}

using AxisStencil = std::vector<std::pair<std::size_t, double>>;

void fold_add(AxisStencil& st, long idx, double w, std::size_t points, bool& folded) {
  const long last = static_cast<long>(points) - 1;
  if (idx < 0) {
    idx = 0;
    folded = folded || w > 0.0;
  } else if (idx > last) {
    idx = last;
    folded = folded || w > 0.0;
  }
  for (auto& [i, v] : st) {
    if (static_cast<long>(i) == idx) {
      v += w;
      return;
    }
  }
  st.emplace_back(static_cast<std::size_t>(idx), w);
}

AxisStencil interpolation_stencil(const GridAxis& axis, double mean, bool& folded) {
  AxisStencil st;
  const double h = axis.spacing();
  const double u = (mean - axis.min) / h;
  const long last = static_cast<long>(axis.points) - 1;
  if (u <= 0.0) {
    fold_add(st, 0, 1.0, axis.points, folded);
    folded = folded || u < -1e-12;
  } else if (u >= static_cast<double>(last)) {
    fold_add(st, last, 1.0, axis.points, folded);
    folded = folded || u > static_cast<double>(last) + 1e-12;
  } else {
    const long j = static_cast<long>(std::floor(u));
    const double frac = u - static_cast<double>(j);
    fold_add(st, j, 1.0 - frac, axis.points, folded);
    if (frac > 0.0) fold_add(st, j + 1, frac, axis.points, folded);
  }
  return st;
}

// Places N(mean, var) on one axis; see transition_kernel_matrix for the rules.
AxisStencil axis_stencil(const GridAxis& axis, double mean, double var, bool& folded) {
  const double h = axis.spacing();
  const double s = var > 0.0 ? std::sqrt(var) : 0.0;
  if (s >= kResolvedRatio * h) {
    AxisStencil st;
    const long last = static_cast<long>(axis.points) - 1;
    const long lo = std::max(0L, static_cast<long>(std::ceil((mean - kWindowSd * s - axis.min) / h)));
    const long hi =
        std::min(last, static_cast<long>(std::floor((mean + kWindowSd * s - axis.min) / h)));
    double total = 0.0;
    for (long i = lo; i <= hi; ++i) {
      const double z = (axis.point(static_cast<std::size_t>(i)) - mean) / s;
      const double w = std::exp(-0.5 * z * z);
      if (w > 0.0) {
        st.emplace_back(static_cast<std::size_t>(i), w);
        total += w;
      }
    }
    if (total <= 0.0) {
      // Entire window off-grid.
      return interpolation_stencil(axis, mean, folded);
    }
    for (auto& e : st) e.second /= total;
    if (off_axis_mass(axis, mean, var) > 1e-9) folded = true;
    return st;
  }
  if (s > 0.0) {
    const double u = (mean - axis.min) / h;
    const double j0 = std::round(u);
    const double delta = u - j0;
    const double v = var / (h * h);
    const double second = v + delta * delta;
    const double w_plus = 0.5 * (second + delta);
    const double w_minus = 0.5 * (second - delta);
    const double w_zero = 1.0 - second;
    if (w_plus >= 0.0 && w_minus >= 0.0 && w_zero >= 0.0) {
      AxisStencil st;
      const long c = static_cast<long>(j0);
      if (w_minus > 0.0) fold_add(st, c - 1, w_minus, axis.points, folded);
      if (w_zero > 0.0) fold_add(st, c, w_zero, axis.points, folded);
      if (w_plus > 0.0) fold_add(st, c + 1, w_plus, axis.points, folded);
      return st;
    }
  }
  return interpolation_stencil(axis, mean, folded);
}

std::vector<KernelEntry> tensor_stencil(const ClassicalGrid& grid,
                                        const std::vector<AxisStencil>& per_axis) {
  std::vector<KernelEntry> out{{0u, 1.0}};
  std::size_t stride = 1;
  for (int a = 0; a < grid.dim(); ++a) {
    std::vector<KernelEntry> next;
    next.reserve(out.size() * per_axis[a].size());
    for (const auto& e : out) {
      for (const auto& [idx, w] : per_axis[a]) {
        next.push_back({static_cast<std::uint32_t>(e.index + idx * stride), e.weight * w});
      }
    }
    out = std::move(next);
    stride *= grid.axis(a).points;
  }
  return out;
}

// Correlated diffusion: sample the multivariate Gaussian on a box around the
// mean. Requires every axis to be resolved.
std::vector<KernelEntry> correlated_gaussian(const ClassicalGrid& grid, const RVec& mean,
                                             const RMat& cov, bool& folded) {
  const int n = grid.dim();
  for (int a = 0; a < n; ++a) {
    if (std::sqrt(std::max(cov(a, a), 0.0)) < kResolvedRatio * grid.axis(a).spacing()) {
      throw std::invalid_argument(
          "transition_kernel_matrix: correlated diffusion needs a grid resolving the per-step "
          "spread on every axis");
    }
  }
  const RMat prec = cov.inverse();
  std::vector<std::size_t> lo(n), hi(n);
  for (int a = 0; a < n; ++a) {
    const GridAxis& ax = grid.axis(a);
    const double s = std::sqrt(cov(a, a));
    const double h = ax.spacing();
    lo[a] = static_cast<std::size_t>(
        std::max(0.0, std::ceil((mean(a) - kWindowSd * s - ax.min) / h)));
    hi[a] = static_cast<std::size_t>(std::clamp(std::floor((mean(a) + kWindowSd * s - ax.min) / h),
                                                0.0, static_cast<double>(ax.points - 1)));
    if (off_axis_mass(ax, mean(a), cov(a, a)) > 1e-9) folded = true;
    if (lo[a] > hi[a]) throw std::invalid_argument("transition_kernel_matrix: mean off grid");
  }
  std::vector<KernelEntry> out;
  std::vector<std::size_t> idx = lo;
  double total = 0.0;
  while (true) {
    const std::size_t flat = grid.flat_index(idx);
    const RVec z = grid.point(flat) - mean;
    const double w = std::exp(-0.5 * z.dot(prec * z));
    if (w > 0.0) {
      out.push_back({static_cast<std::uint32_t>(flat), w});
      total += w;
    }
    int a = 0;
    while (a < n) {
      if (idx[a] < hi[a]) {
        ++idx[a];
        break;
      }
      idx[a] = lo[a];
      ++a;
    }
    if (a == n) break;
  }
  for (auto& e : out) e.weight /= total;
  return out;
}

std::vector<KernelEntry> place_gaussian(const ClassicalGrid& grid, const RVec& mean,
                                        const RMat& cov, bool& folded) {
  if (grid.dim() == 1 || is_diagonal(cov)) {
    std::vector<AxisStencil> per_axis;
    per_axis.reserve(static_cast<std::size_t>(grid.dim()));
    for (int a = 0; a < grid.dim(); ++a) {
      per_axis.push_back(axis_stencil(grid.axis(a), mean(a), cov(a, a), folded));
    }
    return tensor_stencil(grid, per_axis);
  }
  return correlated_gaussian(grid, mean, cov, folded);
}

}  // namespace

void ClassicalModel::validate() const {
  if (n < 1 || w < 0) throw std::invalid_argument("ClassicalModel: bad dimensions");
  if (!drift || !noise_gain || !wiener_cov) {
    throw std::invalid_argument("ClassicalModel: drift, noise_gain and wiener_cov are required");
  }
  if (initial_mean.size() != n) throw std::invalid_argument("ClassicalModel: initial_mean size");
  if (initial_cov.rows() != n || initial_cov.cols() != n) {
    throw std::invalid_argument("ClassicalModel: initial_cov shape");
  }
  if (!is_psd(initial_cov, 1e-12)) {
    throw std::invalid_argument("ClassicalModel: initial_cov is not PSD");
  }
  const RMat q = wiener_cov(0.0);
  if (q.rows() != w || q.cols() != w) throw std::invalid_argument("ClassicalModel: Q shape");
  if (!is_psd(q, 1e-12)) throw std::invalid_argument("ClassicalModel: Q is not PSD");
  const RMat b = noise_gain(initial_mean, 0.0);
  if (b.rows() != n || b.cols() != w) throw std::invalid_argument("ClassicalModel: B shape");
  if (drift(initial_mean, 0.0).size() != n) throw std::invalid_argument("ClassicalModel: A size");
}

RMat ClassicalModel::diffusion(const RVec& x, double t) const {
  const RMat b = noise_gain(x, t);
  return b * wiener_cov(t) * b.transpose();
}

ClassicalModel ClassicalModel::linear_time_invariant(const RMat& a, const RMat& b, const RMat& q,
                                                     const RVec& mean0, const RMat& cov0) {
  ClassicalModel m;
  m.n = static_cast<int>(a.rows());
  m.w = static_cast<int>(b.cols());
  m.drift = [a](const RVec& x, double) -> RVec { return a * x; };
  m.noise_gain = [b](const RVec&, double) -> RMat { return b; };
  m.wiener_cov = [q](double) -> RMat { return q; };
  m.initial_mean = mean0;
  m.initial_cov = cov0;
  m.time_invariant = true;
  m.linear = LinearDynamics{a, b, q};
  m.validate();
  return m;
}

ClassicalModel ClassicalModel::ornstein_uhlenbeck(double lambda, double sigma, double mean0,
                                                  double var0) {
  return linear_time_invariant(RMat::Constant(1, 1, -lambda), RMat::Constant(1, 1, sigma),
                               RMat::Identity(1, 1), RVec::Constant(1, mean0),
                               RMat::Constant(1, 1, var0));
}

ClassicalModel ClassicalModel::random_walk(double sigma, double mean0, double var0) {
  return ornstein_uhlenbeck(0.0, sigma, mean0, var0);
}

ClassicalModel ClassicalModel::constant(double mean0, double var0) {
  return ornstein_uhlenbeck(0.0, 0.0, mean0, var0);
}

ClassicalGrid::ClassicalGrid(std::vector<GridAxis> axes) : axes_(std::move(axes)) {
  if (axes_.empty()) throw InvalidGrid("ClassicalGrid: no axes");
  size_ = 1;
  for (const auto& ax : axes_) {
    if (!(ax.min < ax.max)) throw InvalidGrid("ClassicalGrid: axis needs min < max");
    if (ax.points < 2) throw InvalidGrid("ClassicalGrid: axis needs at least 2 points");
    size_ *= ax.points;
    cell_volume_ *= ax.spacing();
  }
  if (size_ > std::numeric_limits<std::uint32_t>::max()) {
    throw InvalidGrid("ClassicalGrid: too many points");
  }
}

RVec ClassicalGrid::point(std::size_t flat) const {
  RVec x(dim());
  for (int a = 0; a < dim(); ++a) {
    const auto& ax = axes_[static_cast<std::size_t>(a)];
    x(a) = ax.point(flat % ax.points);
    flat /= ax.points;
  }
  return x;
}

std::size_t ClassicalGrid::flat_index(std::span<const std::size_t> multi) const {
  std::size_t flat = 0;
  std::size_t stride = 1;
  for (std::size_t a = 0; a < axes_.size(); ++a) {
    flat += multi[a] * stride;
    stride *= axes_[a].points;
  }
  return flat;
}

std::vector<std::size_t> ClassicalGrid::multi_index(std::size_t flat) const {
  std::vector<std::size_t> out(axes_.size());
  for (std::size_t a = 0; a < axes_.size(); ++a) {
    out[a] = flat % axes_[a].points;
    flat /= axes_[a].points;
  }
  return out;
}

bool ClassicalGrid::operator==(const ClassicalGrid& other) const {
  if (axes_.size() != other.axes_.size()) return false;
  for (std::size_t a = 0; a < axes_.size(); ++a) {
    if (axes_[a].min != other.axes_[a].min || axes_[a].max != other.axes_[a].max ||
        axes_[a].points != other.axes_[a].points) {
      return false;
    }
  }
  return true;
}

TransitionKernel::TransitionKernel(std::size_t size, std::vector<std::vector<KernelEntry>> rows,
                                   std::size_t boundary_clamps)
    : size_(size), boundary_clamps_(boundary_clamps) {
  if (rows.size() != size) throw std::invalid_argument("TransitionKernel: row count");
  row_offsets_.assign(size + 1, 0);
  std::vector<std::size_t> col_counts(size, 0);
  for (std::size_t k = 0; k < size; ++k) {
    row_offsets_[k + 1] = row_offsets_[k] + rows[k].size();
    for (const auto& e : rows[k]) ++col_counts[e.index];
  }
  row_entries_.reserve(row_offsets_.back());
  for (auto& r : rows) row_entries_.insert(row_entries_.end(), r.begin(), r.end());

  col_offsets_.assign(size + 1, 0);
  for (std::size_t j = 0; j < size; ++j) col_offsets_[j + 1] = col_offsets_[j] + col_counts[j];
  col_entries_.resize(row_entries_.size());
  std::vector<std::size_t> fill(col_offsets_.begin(), col_offsets_.end() - 1);
  for (std::size_t k = 0; k < size; ++k) {
    for (const auto& e : row(k)) {
      col_entries_[fill[e.index]++] = KernelEntry{static_cast<std::uint32_t>(k), e.weight};
    }
  }
}

std::span<const KernelEntry> TransitionKernel::row(std::size_t source) const {
  return {row_entries_.data() + row_offsets_[source], row_offsets_[source + 1] - row_offsets_[source]};
}

std::span<const KernelEntry> TransitionKernel::column(std::size_t target) const {
  return {col_entries_.data() + col_offsets_[target], col_offsets_[target + 1] - col_offsets_[target]};
}

RMat TransitionKernel::dense() const {
  RMat out = RMat::Zero(static_cast<Eigen::Index>(size_), static_cast<Eigen::Index>(size_));
  for (std::size_t k = 0; k < size_; ++k) {
    for (const auto& e : row(k)) out(static_cast<Eigen::Index>(k), e.index) += e.weight;
  }
  return out;
}

RVec euler_maruyama_step(const ClassicalModel& model, const RVec& x, double t, double dt,
                         const RVec& dw) {
  if (!(dt > 0.0)) throw std::invalid_argument("euler_maruyama_step: dt must be positive");
  RVec out = x + model.drift(x, t) * dt;
  if (model.w > 0) out += model.noise_gain(x, t) * dw;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (!std::isfinite(out(i))) {
      std::ostringstream msg;
      msg << "euler_maruyama_step: non-finite state component x[" << i << "] at t=" << t;
      throw NumericalError(msg.str());
    }
  }
  return out;
}

TransitionKernel transition_kernel_matrix(const ClassicalModel& model, const ClassicalGrid& grid,
                                          double t, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("transition_kernel_matrix: dt must be positive");
  if (grid.dim() != model.n) throw std::invalid_argument("transition_kernel_matrix: grid dim");
  std::vector<std::vector<KernelEntry>> rows(grid.size());
  std::size_t clamps = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const RVec x = grid.point(k);
    const RVec mean = x + model.drift(x, t) * dt;
    const RMat cov = model.w > 0 ? RMat(model.diffusion(x, t) * dt) : RMat::Zero(model.n, model.n);
    if (!mean.allFinite() || !cov.allFinite()) {
      throw NumericalError("transition_kernel_matrix: non-finite drift or diffusion");
    }
    bool folded = false;
    rows[k] = place_gaussian(grid, mean, cov, folded);
    if (folded) ++clamps;
  }
  return TransitionKernel(grid.size(), std::move(rows), clamps);
}

std::vector<double> prior_density(const ClassicalModel& model, const ClassicalGrid& grid) {
  if (grid.dim() != model.n) throw std::invalid_argument("prior_density: grid dim");
  double off = 0.0;
  for (int a = 0; a < grid.dim(); ++a) {
    off += off_axis_mass(grid.axis(a), model.initial_mean(a), model.initial_cov(a, a));
  }
  if (off > 1e-6) {
    std::ostringstream msg;
    msg << "prior mass off the grid is " << off << " (limit 1e-6)";
    throw InvalidGrid(msg.str());
  }
  bool folded = false;
  const auto entries = place_gaussian(grid, model.initial_mean, model.initial_cov, folded);
  std::vector<double> density(grid.size(), 0.0);
  for (const auto& e : entries) density[e.index] += e.weight / grid.cell_volume();
  return density;
}

std::vector<std::string> grid_width_warnings(const ClassicalModel& model,
                                             const ClassicalGrid& grid) {
  std::vector<std::string> out;
  for (int a = 0; a < grid.dim(); ++a) {
    const double sd = std::sqrt(std::max(model.initial_cov(a, a), 0.0));
    const double mean = model.initial_mean(a);
    const double half = std::min(mean - grid.axis(a).min, grid.axis(a).max - mean);
    if (sd > 0.0 && half < 5.0 * sd * (1.0 - 1e-12)) {
      std::ostringstream msg;
      msg << "grid axis " << a << " spans only " << half / sd
          << " prior standard deviations from the prior mean (recommended >= 5)";
      out.push_back(msg.str());
    }
  }
  return out;
}

KernelCache::KernelCache(std::shared_ptr<const ClassicalModel> model,
                         std::shared_ptr<const ClassicalGrid> grid)
    : model_(std::move(model)), grid_(std::move(grid)) {}

std::shared_ptr<const TransitionKernel> KernelCache::get(double t, double dt) const {
  const std::pair<double, double> key{model_->time_invariant ? 0.0 : t, dt};
  {
    std::shared_lock lock(mutex_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  auto kernel = std::make_shared<const TransitionKernel>(
      transition_kernel_matrix(*model_, *grid_, key.first, dt));
  std::unique_lock lock(mutex_);
  auto [it, inserted] = cache_.emplace(key, std::move(kernel));
  return it->second;
}

}  // namespace qsmooth
