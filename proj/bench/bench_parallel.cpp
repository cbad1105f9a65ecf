// Serial reference loops against the OpenMP kernels. Argument 0 runs the
// serial path, 1 the parallel one.
//
//   ./build/bench/cmc_bench --benchmark_filter=BatchCmc

#include <benchmark/benchmark.h>

#include <filesystem>
#include <memory>
#include <random>
#include <unistd.h>

#include "cmc/experiment.hpp"
#include "cmc/ingest.hpp"
#include "cmc/spectral.hpp"
#include "cmc/svm.hpp"
#include "cmc/synth.hpp"

using namespace cmc;

namespace {

Execution exec_of(const benchmark::State& state) {
    return state.range(0) == 0 ? Execution::serial : Execution::parallel;
}

std::vector<double> white(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> d(0.0, 1.0);
    std::vector<double> x(n);
    for (double& v : x) v = d(gen);
    return x;
}

void BatchCmc(benchmark::State& state) {
    constexpr std::size_t kPairs = 400;
    std::vector<std::vector<double>> data;
    for (std::size_t i = 0; i < 2 * kPairs; ++i) data.push_back(white(2000, i));
    std::vector<spectral::SegmentPair> pairs;
    for (std::size_t i = 0; i < kPairs; ++i) pairs.push_back({data[2 * i], data[2 * i + 1]});
    for (auto _ : state) {
        benchmark::DoNotOptimize(spectral::batch_cmc(pairs, 500.0, {}, exec_of(state)));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * kPairs));
}

void CrossValidate(benchmark::State& state) {
    std::mt19937_64 gen(7);
    std::normal_distribution<double> d(0.0, 1.0);
    std::vector<svm::Sample> s;
    for (int i = 0; i < 160; ++i) {
        svm::Sample x;
        x.label = i % 2 ? 1 : -1;
        for (int j = 0; j < 40; ++j) x.features.push_back(d(gen) + (j < 4 ? 0.6 * x.label : 0.0));
        s.push_back(std::move(x));
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(svm::cross_validate(s, {svm::KernelKind::rbf}, {}, 5, 10, 1, exec_of(state)));
    }
}

void GenerateTrials(benchmark::State& state) {
    synth::CouplingModel m;
    m.noise_var = 1.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(synth::generate_trials(m, 2000, 200, exec_of(state)));
    }
}

struct SweepData {
    std::filesystem::path dir;
    std::unique_ptr<ingest::Dataset> ds;
    SweepData() {
        dir = std::filesystem::temp_directory_path() / ("cmc_bench_" + std::to_string(::getpid()));
        synth::DatasetSpec spec;
        spec.trials_per_class = 40;
        synth::write_dataset(spec, dir);
        ds = std::make_unique<ingest::Dataset>(ingest::Dataset::load(dir));
    }
    ~SweepData() {
        std::error_code ec;
        std::filesystem::remove_all(dir, ec);
    }
};

void Sweep(benchmark::State& state) {
    static SweepData data;
    experiment::CvConfig cv;
    cv.reps = 2;
    for (auto _ : state) {
        // Fresh experiment each time so segmentation and features are included.
        experiment::Experiment exp(*data.ds, {}, cv, 1, exec_of(state));
        benchmark::DoNotOptimize(exp.run_sweep(experiment::Task::light_vs_heavy, 4.0, {svm::KernelKind::linear}));
    }
}

}  // namespace

BENCHMARK(BatchCmc)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(CrossValidate)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(GenerateTrials)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(Sweep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->Iterations(2);

BENCHMARK_MAIN();
