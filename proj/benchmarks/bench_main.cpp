#include <benchmark/benchmark.h>

#include "poincare/langevin.hpp"
#include "poincare/metric_opt.hpp"
#include "poincare/stein.hpp"

using namespace poincare;

namespace {

struct Setup {
  TriMesh mesh;
  DensityField field;
  explicit Setup(int n)
      : mesh(build_rect_mesh({Vec2(-1.2, -1.2), Vec2(1.2, 1.2)}, n, n)),
        field(element_masses(mesh, DensitySpec::trimodal(0.025))) {}
};

MetricField flat(const DensityField& f) { return MetricField(f.element_count(), 0.5 * f.trace_cov * Mat2::Identity()); }

void BM_AssembleWeightedStiffness(benchmark::State& state) {
  const Setup s(static_cast<int>(state.range(0)));
  const ElemStiffTensor tensors = assemble_elem_stiffness(s.mesh, s.field);
  WeightedStiffnessAssembler assembler(tensors);
  const MetricField w = flat(s.field);
  for (auto _ : state) benchmark::DoNotOptimize(assembler.assemble(w));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.mesh.element_count()));
}
BENCHMARK(BM_AssembleWeightedStiffness)->Arg(28)->Arg(56)->Arg(112)->Unit(benchmark::kMillisecond);

void BM_Eigensolve(benchmark::State& state) {
  const Setup s(static_cast<int>(state.range(0)));
  const SparseSym k = assemble_weighted_stiffness(assemble_elem_stiffness(s.mesh, s.field), flat(s.field));
  const SparseSym m = assemble_mass(s.mesh, s.field);
  for (auto _ : state) benchmark::DoNotOptimize(DeflatedEigenSolver().solve(k, m, 5, nullptr));
}
BENCHMARK(BM_Eigensolve)->Arg(28)->Arg(56)->Unit(benchmark::kMillisecond);

// One Nesterov iteration, warm-started eigensolves included.
void BM_OptimizerStep(benchmark::State& state) {
  const Setup s(56);
  MetricProblem p(s.mesh, s.field);
  OptimizerConfig c;
  c.rule = UpdateRule::kNesterov;
  OptState st = initial_state(s.field, c);
  for (auto _ : state) {
    const ObjectiveEval ev = p.objective_and_gradient(lookahead_point(st), 5);
    st = update(st, ascent_direction(ev, s.field), s.field);
  }
}
BENCHMARK(BM_OptimizerStep)->Unit(benchmark::kMillisecond);

void BM_Kernel1d(benchmark::State& state) {
  const Density1D d = Density1D::cauchy(2.5);
  double x = -3.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernel_1d(d, x));
    x = x > 3.0 ? -3.0 : x + 0.01;
  }
}
BENCHMARK(BM_Kernel1d);

void BM_SumKernelMc(benchmark::State& state) {
  const Density1D lap = Density1D::laplace(1.0);
  const KernelEval k = tabulated_kernel_1d(lap, -20.0, 20.0, 2001);
  const VectorSampler sampler = product_sampler({lap});
  const BinSpec bins = BinSpec::symmetric(1, 3.0, 30);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sum_kernel_mc(k, sampler, 4, state.range(0), bins, 7));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SumKernelMc)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_UlaSteps(benchmark::State& state) {
  const Setup s(56);
  const MeshMetric metric(s.mesh, flat(s.field), s.field);
  const DensitySpec spec = DensitySpec::trimodal(0.025);
  SamplerConfig c;
  c.dt = 0.015;
  c.steps = 10000;
  c.grad_potential = [spec](const Vec2& x) { return potential_gradient(spec, x); };
  for (auto _ : state) benchmark::DoNotOptimize(run_chain(c, metric));
  state.SetItemsProcessed(state.iterations() * c.steps);
}
BENCHMARK(BM_UlaSteps)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
