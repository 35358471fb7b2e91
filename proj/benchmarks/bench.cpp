// throughput of the hot paths: parsing, annotation, predicate evaluation,
// execution, and refinement sampling

#include <benchmark/benchmark.h>

#include <fstream>
#include <sstream>
#include <string>

#include "lazytime/annotator.hpp"
#include "lazytime/exec.hpp"
#include "lazytime/parser.hpp"
#include "lazytime/predicate.hpp"
#include "lazytime/refine.hpp"

using namespace lazytime;

namespace {

std::string fixture(const std::string& name) {
    std::ifstream in(std::string(LAZYTIME_FIXTURES) + "/" + name);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const std::string& factorial_src() {
    static const std::string src = fixture("factorial3.imp");
    return src;
}

const std::string& loop_spec_src() {
    static const std::string src = fixture("loop.spec");
    return src;
}

}  // namespace

static void BM_ParseProgram(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(parse_program(factorial_src(), 6));
}
BENCHMARK(BM_ParseProgram);

static void BM_ParseSpec(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(parse_spec(loop_spec_src()));
}
BENCHMARK(BM_ParseSpec);

static void BM_Annotate(benchmark::State& state) {
    auto pr = parse_program(factorial_src(), 6);
    auto specs = parse_spec(loop_spec_src());
    for (auto _ : state)
        benchmark::DoNotOptimize(annotate(pr.program, specs, pr.universe));
}
BENCHMARK(BM_Annotate);

static void BM_NormalizeAnnotation(benchmark::State& state) {
    auto pr = parse_program(factorial_src(), 6);
    auto ann = annotate(pr.program, parse_spec(loop_spec_src()), pr.universe);
    for (auto _ : state) benchmark::DoNotOptimize(normalize(ann.pred));
}
BENCHMARK(BM_NormalizeAnnotation);

static void BM_EvalLoopSpec(benchmark::State& state) {
    auto pr = parse_program(factorial_src(), 6);
    auto spec = link(parse_spec(loop_spec_src())["loop"], pr.universe);
    Domain d;
    d.array_bound = 6;
    Binding b = zero_binding(pr.universe);
    b.post_need.set_cell(0, 3, true);
    b.post.time = ExtNat::fin(6);
    for (auto _ : state) benchmark::DoNotOptimize(eval_pred(*spec, b, d));
}
BENCHMARK(BM_EvalLoopSpec);

static void BM_LazyRunDivergent(benchmark::State& state) {
    auto pr = parse_program(factorial_src(), 8);
    RunConfig rc;
    rc.fuel = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(run_lazy(pr.program, pr.universe, rc));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LazyRunDivergent)->Arg(1000)->Arg(10000);

static void BM_EagerRunToFuel(benchmark::State& state) {
    auto pr = parse_program(factorial_src(), 8);
    RunConfig rc;
    rc.fuel = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(run_eager(pr.program, pr.universe, rc));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EagerRunToFuel)->Arg(10000);

static void BM_ObligationSamples(benchmark::State& state) {
    auto pr = parse_program(factorial_src(), 6);
    auto ann = annotate(pr.program, parse_spec(loop_spec_src()), pr.universe);
    CheckConfig cfg;
    cfg.domain.array_bound = 6;
    cfg.samples = static_cast<std::size_t>(state.range(0));
    cfg.jobs = 1;
    for (auto _ : state) {
        auto reports = check_obligations(ann, pr.universe, cfg);
        benchmark::DoNotOptimize(reports);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ObligationSamples)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

static void BM_Crosscheck(benchmark::State& state) {
    auto pr = parse_program(factorial_src(), 8);
    auto specs = parse_spec(loop_spec_src());
    Domain d;
    for (auto _ : state)
        benchmark::DoNotOptimize(crosscheck(pr.program, pr.universe, specs, {}, d));
    state.SetLabel("divergent factorial, fuel 10000");
}
BENCHMARK(BM_Crosscheck)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
