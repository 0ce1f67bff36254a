// Times the serial reference kernels against their OpenMP variants, then a
// whole attack campaign at one worker versus all cores.
//
//   ./advtopk_bench [--quick]

#include <chrono>
#include <cstdio>
#include <cstring>
#include <random>
#include <vector>

#include "advtopk/campaign.hpp"
#include "advtopk/kernels.hpp"

using namespace advtopk;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<float> random_vec(std::size_t n, std::mt19937& rng) {
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    std::vector<float> v(n);
    for (float& x : v) x = dist(rng);
    return v;
}

template <typename F>
double time_loop(int reps, F&& fn) {
    fn();  // warm up
    const auto t0 = Clock::now();
    for (int r = 0; r < reps; ++r) fn();
    return seconds_since(t0) / reps;
}

void bench_matmul(int n, int reps, std::mt19937& rng) {
    std::vector<float> a = random_vec(static_cast<std::size_t>(n) * n, rng);
    std::vector<float> b = random_vec(static_cast<std::size_t>(n) * n, rng);
    std::vector<float> c(static_cast<std::size_t>(n) * n);
    const double serial =
        time_loop(reps, [&] { kernels::matmul_serial(a.data(), b.data(), c.data(), n, n, n); });
    kernels::set_threads(kernels::hardware_threads());
    const double parallel =
        time_loop(reps, [&] { kernels::matmul(a.data(), b.data(), c.data(), n, n, n); });
    std::printf("matmul %4dx%-4d      serial %8.3f ms   omp(%d) %8.3f ms   speedup %.2fx\n", n, n,
                serial * 1e3, kernels::threads(), parallel * 1e3, serial / parallel);
}

void bench_matvec(int m, int k, int reps, std::mt19937& rng) {
    std::vector<float> a = random_vec(static_cast<std::size_t>(m) * k, rng);
    std::vector<float> x = random_vec(static_cast<std::size_t>(k), rng);
    std::vector<float> y(static_cast<std::size_t>(m));
    const double serial =
        time_loop(reps, [&] { kernels::matvec_serial(a.data(), x.data(), y.data(), m, k); });
    kernels::set_threads(kernels::hardware_threads());
    const double parallel = time_loop(reps, [&] { kernels::matvec(a.data(), x.data(), y.data(), m, k); });
    std::printf("matvec %4dx%-4d      serial %8.3f ms   omp(%d) %8.3f ms   speedup %.2fx\n", m, k,
                serial * 1e3, kernels::threads(), parallel * 1e3, serial / parallel);
}

void bench_conv(int c, int hw, int reps, std::mt19937& rng) {
    std::vector<float> x = random_vec(static_cast<std::size_t>(c) * hw * hw, rng);
    std::vector<float> w = random_vec(static_cast<std::size_t>(c) * c * 9, rng);
    std::vector<float> bias = random_vec(static_cast<std::size_t>(c), rng);
    std::vector<float> y(static_cast<std::size_t>(c) * hw * hw);
    const double serial = time_loop(
        reps, [&] { kernels::conv3x3_serial(x.data(), w.data(), bias.data(), y.data(), c, c, hw, hw); });
    kernels::set_threads(kernels::hardware_threads());
    const double parallel = time_loop(
        reps, [&] { kernels::conv3x3(x.data(), w.data(), bias.data(), y.data(), c, c, hw, hw); });
    std::printf("conv3x3 %2dch %3dx%-3d serial %8.3f ms   omp(%d) %8.3f ms   speedup %.2fx\n", c, hw,
                hw, serial * 1e3, kernels::threads(), parallel * 1e3, serial / parallel);
}

double run_fixture_campaign(int threads, const Model& model, const Dataset& val, int samples,
                            int iterations) {
    CampaignSpec spec;
    AttackVariant cw;
    cw.method = AttackMethod::CwTopk;
    cw.opt.search_steps = 4;
    cw.opt.iterations = iterations;
    AttackVariant kd;
    kd.method = AttackMethod::Distill;
    kd.opt = cw.opt;
    spec.variants = {cw, kd};
    spec.sample_count = samples;
    spec.seed = 11;
    const EvalPool pool = select_eval_pool(model, val, samples, spec.seed);
    kernels::set_threads(threads);
    const std::string path = "/tmp/advtopk_bench_outcomes_" + std::to_string(threads) + ".jsonl";
    std::remove(path.c_str());
    const auto t0 = Clock::now();
    run_campaign(model, pool, spec, nullptr, path, threads);
    std::remove(path.c_str());
    return seconds_since(t0);
}

}  // namespace

int main(int argc, char** argv) {
    const bool quick = argc > 1 && std::strcmp(argv[1], "--quick") == 0;
    std::mt19937 rng(12345);

    std::printf("== kernel benchmarks (serial reference vs OpenMP dispatch) ==\n");
    bench_matvec(128, 64, quick ? 200 : 2000, rng);
    bench_matvec(2048, 2048, quick ? 20 : 100, rng);
    bench_matmul(128, quick ? 20 : 100, rng);
    bench_matmul(512, quick ? 3 : 20, rng);
    bench_conv(8, 28, quick ? 50 : 400, rng);
    bench_conv(16, 56, quick ? 5 : 40, rng);

    std::printf("\n== campaign throughput (identical tasks, 1 worker vs all cores) ==\n");
    Dataset data = generate_synthetic(20, 50, 64, 1001);
    Dataset train, val;
    for (int c = 0; c < 20; ++c) {
        for (int i = 0; i < 50; ++i)
            ((i < 40) ? train : val).samples.push_back(data.samples[static_cast<std::size_t>(c * 50 + i)]);
    }
    std::vector<std::string> labels;
    for (int i = 0; i < 20; ++i) labels.push_back("class" + std::to_string(i));
    Architecture arch;
    arch.input_shape = {64};
    arch.layers = {{LayerKind::Affine, 64, 128}, {LayerKind::Relu, 0, 0}, {LayerKind::Affine, 128, 20}};
    TrainConfig tc;
    tc.epochs = 12;
    Model model = train_classifier(train, val, arch, labels, tc);

    const int samples = quick ? 6 : 20;
    const int iterations = quick ? 100 : 300;
    const double t1 = run_fixture_campaign(1, model, val, samples, iterations);
    const double tn = run_fixture_campaign(kernels::hardware_threads(), model, val, samples, iterations);
    std::printf("campaign %3d attacks  1 worker %7.2f s   %d workers %7.2f s   speedup %.2fx\n",
                samples * 2, t1, kernels::hardware_threads(), tn, t1 / tn);
    return 0;
}
