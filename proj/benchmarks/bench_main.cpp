#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include <Eigen/Dense>

#include "ctl/affinity.hpp"
#include "ctl/generators.hpp"
#include "ctl/nn.hpp"
#include "ctl/tarnet.hpp"
#include "ctl/transport.hpp"

namespace {

using namespace ctl;

Eigen::MatrixXd gaussian_cloud(int rows, int cols, std::uint64_t seed, double shift = 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = gauss(rng) + shift;
    return m;
}

void bench_mlp_gradient(benchmark::State& state) {
    const int dim = static_cast<int>(state.range(0));
    const MlpSpec spec{{dim, 64, 32}, Activation::elu, 7};
    Eigen::VectorXd params = init_params(spec);
    Eigen::VectorXd x = gaussian_cloud(dim, 1, 11).col(0);
    const auto loss = [](const Eigen::VectorXd& out, Eigen::VectorXd& dout) {
        dout = out;
        return 0.5 * out.squaredNorm();
    };
    for (auto _ : state) {
        const GradResult result = evaluate_with_gradient(spec, params, x, loss);
        benchmark::DoNotOptimize(result.grad.data());
    }
}

void bench_sinkhorn(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const Eigen::MatrixXd p = gaussian_cloud(n, 3, 21);
    const Eigen::MatrixXd q = gaussian_cloud(n, 3, 22, 0.5);
    const SinkhornConfig config{0.01, 500};
    for (auto _ : state) {
        benchmark::DoNotOptimize(sinkhorn_w1(p, q, config));
    }
}

void bench_exact_w1(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const Eigen::MatrixXd p = gaussian_cloud(n, 3, 31);
    const Eigen::MatrixXd q = gaussian_cloud(n, 3, 32, 0.5);
    for (auto _ : state) {
        benchmark::DoNotOptimize(exact_w1(p, q));
    }
}

void bench_objective_gradient(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const CausalDataset ds = gen_heat(1.0, n, 41);
    TarNetModel model = make_model(1, default_phi_spec(1), default_head_hidden(), 2, 5);
    TrainConfig config;
    config.ipm.iters = 200;
    Batch batch;
    batch.x = ds.x;
    batch.a = ds.a;
    batch.y = ds.y;
    Eigen::VectorXd grad;
    for (auto _ : state) {
        benchmark::DoNotOptimize(objective_with_gradient(model, batch, config, grad));
    }
}

void bench_fisher_diag(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const CausalDataset ds = gen_heat(1.0, n, 51);
    const TarNetModel model = make_model(1, default_phi_spec(1), default_head_hidden(), 2, 5);
    for (auto _ : state) {
        const FisherSignature sig = empirical_fisher_diag(model, ds);
        benchmark::DoNotOptimize(sig.diag.data());
    }
}

void bench_cita(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const CausalDataset source = gen_heat(0.8, n, 61);
    const CausalDataset target = gen_heat(1.4, n, 61);
    const TarNetModel model = make_model(1, default_phi_spec(1), default_head_hidden(), 2, 5);
    for (auto _ : state) {
        benchmark::DoNotOptimize(cita(model, source, target).d_sym);
    }
}

BENCHMARK(bench_mlp_gradient)->Arg(4)->Arg(16)->Arg(64);
BENCHMARK(bench_sinkhorn)->Arg(32)->Arg(64)->Arg(128);
BENCHMARK(bench_exact_w1)->Arg(32)->Arg(64)->Arg(128);
BENCHMARK(bench_objective_gradient)->Arg(128)->Arg(512);
BENCHMARK(bench_fisher_diag)->Arg(256)->Arg(1024);
BENCHMARK(bench_cita)->Arg(256)->Arg(1024);

}  // namespace

BENCHMARK_MAIN();
