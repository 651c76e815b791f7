#include <random>

#include "doctest.h"
#include "qsmooth/hybrid_engine.hpp"
#include "qsmooth/kernels.hpp"
#include "support.hpp"

using namespace qsmooth;

namespace {

std::vector<CMat> random_blocks(std::size_t k, int d, std::mt19937_64& rng) {
  std::vector<CMat> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(testing::random_matrix(d, rng));
  return out;
}

double max_diff(const std::vector<CMat>& a, const std::vector<CMat>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, testing::max_abs(a[i] - b[i]));
  return m;
}

// sum_k tr[a_k^dag b_k]
Complex inner(const std::vector<CMat>& a, const std::vector<CMat>& b) {
  Complex s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i].adjoint() * b[i]).trace();
  return s;
}

}  // namespace

TEST_CASE("parallel kernels agree with the serial reference") {
  for (bool dissipative : {false, true}) {
    CAPTURE(dissipative);
    testing::SmallSpec spec;
    spec.dim = 5;
    spec.points = 37;
    spec.dissipative = dissipative;
    const Scenario sc = testing::small_scenario(spec);
    const HybridEngine engine(sc);
    const auto& props = engine.propagators();
    REQUIRE(props.front().is_unitary() == !dissipative);
    const TransitionKernel& kernel = engine.kernel(0.0);
    std::mt19937_64 rng(11);
    const CMat m = testing::random_matrix(spec.dim, rng);
    const auto base = random_blocks(spec.points, spec.dim, rng);
    const auto other = random_blocks(spec.points, spec.dim, rng);
    const double tol = 1e-12;

    auto a = base, b = base;
    kernels::propagate(props, a);
    kernels::serial::propagate(props, b);
    CHECK(max_diff(a, b) < tol);

    a = base, b = base;
    kernels::propagate_adjoint(props, a);
    kernels::serial::propagate_adjoint(props, b);
    CHECK(max_diff(a, b) < tol);

    a = base, b = base;
    kernels::conjugate(m, a);
    kernels::serial::conjugate(m, b);
    CHECK(max_diff(a, b) < tol);

    a = base, b = base;
    kernels::conjugate_adjoint(m, a);
    kernels::serial::conjugate_adjoint(m, b);
    CHECK(max_diff(a, b) < tol);

    std::vector<CMat> oa, ob;
    kernels::mix_forward(kernel, base, oa);
    kernels::serial::mix_forward(kernel, base, ob);
    CHECK(max_diff(oa, ob) < tol);

    kernels::mix_adjoint(kernel, base, oa);
    kernels::serial::mix_adjoint(kernel, base, ob);
    CHECK(max_diff(oa, ob) < tol);

    a = base, b = base;
    kernels::measure_propagate(m, props, a);
    kernels::serial::measure_propagate(m, props, b);
    CHECK(max_diff(a, b) < tol);

    a = base, b = base;
    kernels::propagate_measure_adjoint(m, props, a);
    kernels::serial::propagate_measure_adjoint(m, props, b);
    CHECK(max_diff(a, b) < tol);

    std::vector<double> pa, pb;
    double ia = 0.0, ib = 0.0;
    kernels::pair_traces(base, other, pa, &ia);
    kernels::serial::pair_traces(base, other, pb, &ib);
    REQUIRE(pa.size() == spec.points);
    for (std::size_t k = 0; k < pa.size(); ++k) CHECK(pa[k] == doctest::Approx(pb[k]).epsilon(1e-13));
    CHECK(ia == doctest::Approx(ib).epsilon(1e-12));
  }
}

TEST_CASE("kernel compositions and adjoint pairs") {
  for (bool dissipative : {false, true}) {
    CAPTURE(dissipative);
    testing::SmallSpec spec;
    spec.dim = 4;
    spec.points = 21;
    spec.dissipative = dissipative;
    const Scenario sc = testing::small_scenario(spec);
    const HybridEngine engine(sc);
    const auto& props = engine.propagators();
    const TransitionKernel& kernel = engine.kernel(0.0);
    std::mt19937_64 rng(5);
    const CMat m = testing::random_matrix(spec.dim, rng);
    const auto f = random_blocks(spec.points, spec.dim, rng);
    const auto g = random_blocks(spec.points, spec.dim, rng);

    // fused measurement + propagation equals the two steps in sequence
    auto fused = f, split = f;
    kernels::measure_propagate(m, props, fused);
    kernels::conjugate(m, split);
    kernels::propagate(props, split);
    CHECK(max_diff(fused, split) < 1e-12);

    auto gfused = g, gsplit = g;
    kernels::propagate_measure_adjoint(m, props, gfused);
    kernels::propagate_adjoint(props, gsplit);
    kernels::conjugate_adjoint(m, gsplit);
    CHECK(max_diff(gfused, gsplit) < 1e-12);

    // <g, A f> = <A* g, f> for each forward/adjoint pair
    auto af = f, ag = g;
    kernels::propagate(props, af);
    kernels::propagate_adjoint(props, ag);
    CHECK(std::abs(inner(g, af) - inner(ag, f)) < 1e-11);

    af = f, ag = g;
    kernels::conjugate(m, af);
    kernels::conjugate_adjoint(m, ag);
    CHECK(std::abs(inner(g, af) - inner(ag, f)) < 1e-11);

    std::vector<CMat> mf, mg;
    kernels::mix_forward(kernel, f, mf);
    kernels::mix_adjoint(kernel, g, mg);
    CHECK(std::abs(inner(g, mf) - inner(mg, f)) < 1e-11);

    // mixing against the dense matrix
    const RMat dense = kernel.dense();
    for (std::size_t j = 0; j < spec.points; j += 5) {
      CMat expect = CMat::Zero(spec.dim, spec.dim);
      for (std::size_t k = 0; k < spec.points; ++k) expect += dense(k, j) * f[k];
      CHECK(testing::max_abs(mf[j] - expect) < 1e-12);
    }

    // pair_traces is Re tr[a_k b_k]
    std::vector<double> pt;
    kernels::pair_traces(f, g, pt);
    for (std::size_t k = 0; k < spec.points; ++k)
      CHECK(pt[k] == doctest::Approx((f[k] * g[k]).trace().real()).epsilon(1e-12));
  }
}
