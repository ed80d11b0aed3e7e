#include <benchmark/benchmark.h>

#include <random>

#include "truthprobe/analysis.hpp"
#include "truthprobe/pipeline.hpp"
#include "truthprobe/probes.hpp"

using namespace truthprobe;

namespace {

struct Data {
    Eigen::MatrixXd X;
    std::vector<Answer> y;
    std::vector<Polarity> pi;
};

// a = tau * g + tau * pi * p + noise, g and p random (not orthogonalized).
Data make_data(std::size_t n, std::size_t d, std::uint64_t seed = 1) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    Eigen::VectorXd g(static_cast<Eigen::Index>(d)), p(static_cast<Eigen::Index>(d));
    for (auto& v : g) v = N(rng);
    for (auto& v : p) v = N(rng);
    g *= 2.0 / g.norm();
    p *= 1.0 / p.norm();
    Data out;
    out.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) {
        const double tau = coin(rng) ? 1.0 : -1.0;
        const double pol = coin(rng) ? 1.0 : -1.0;
        out.y.push_back(tau > 0 ? Answer::yes : Answer::no);
        out.pi.push_back(pol > 0 ? Polarity::assert_ : Polarity::negate);
        for (std::size_t j = 0; j < d; ++j) {
            const auto k = static_cast<Eigen::Index>(j);
            out.X(static_cast<Eigen::Index>(i), k) = tau * g[k] + tau * pol * p[k] + N(rng);
        }
    }
    return out;
}

}  // namespace

static void BM_FitLr(benchmark::State& state) {
    const auto d = static_cast<std::size_t>(state.range(0));
    const auto data = make_data(2000, d);
    Solver used = Solver::newton;
    for (auto _ : state) {
        auto probe = fit_lr(data.X, data.y, 1.0);
        benchmark::DoNotOptimize(probe.alpha);
        used = probe.fit.solver;
    }
    state.SetLabel(std::string(to_string(used)));
}
BENCHMARK(BM_FitLr)->Arg(16)->Arg(64)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

static void BM_FitMm(benchmark::State& state) {
    const auto data = make_data(2000, static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        auto probe = fit_mm(data.X, data.y);
        benchmark::DoNotOptimize(probe.beta);
    }
}
BENCHMARK(BM_FitMm)->Arg(64)->Arg(1024)->Unit(benchmark::kMillisecond);

static void BM_FitTtpd(benchmark::State& state) {
    const auto data = make_data(2000, static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        auto probe = fit_ttpd(data.X, data.y, data.pi);
        benchmark::DoNotOptimize(probe.alpha);
    }
}
BENCHMARK(BM_FitTtpd)->Arg(64)->Arg(1024)->Unit(benchmark::kMillisecond);

static void BM_Predict(benchmark::State& state) {
    const auto d = static_cast<std::size_t>(state.range(0));
    const auto data = make_data(500, d);
    const Probe probe = fit_ttpd(data.X, data.y, data.pi);
    const Eigen::VectorXf x = data.X.row(0).transpose().cast<float>();
    for (auto _ : state) {
        benchmark::DoNotOptimize(predict(probe, std::span<const float>(x.data(), d)));
    }
}
BENCHMARK(BM_Predict)->Arg(64)->Arg(4096);

static void BM_SweepLayers(benchmark::State& state) {
    const std::size_t groups = 200, d = 64, layers = static_cast<std::size_t>(state.range(0));
    const auto base = make_data(groups * 2, d);
    ActivationDataset ds;
    ds.model_id = "bench";
    ds.d = d;
    for (std::size_t i = 0; i < groups * 2; ++i) {
        ActivationSample s;
        s.base_id = "q" + std::to_string(i / 2);
        s.polarity = i % 2 ? Polarity::negate : Polarity::assert_;
        s.label = base.y[i];
        ds.rows.push_back(s);
    }
    for (std::size_t k = 0; k < layers; ++k) ds.layers.push_back(base.X.cast<float>());
    const auto sp = split(ds, 0.8, 0);
    SweepOptions opts;
    opts.threads = static_cast<unsigned>(state.range(1));
    for (auto _ : state) {
        auto out = sweep_layers(ds, ProbeKind::lr, sp, opts);
        benchmark::DoNotOptimize(out.result.best_layer);
    }
}
BENCHMARK(BM_SweepLayers)->Args({8, 1})->Args({8, 0})->Unit(benchmark::kMillisecond);

static void BM_Consistency(benchmark::State& state) {
    const std::size_t groups = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(0.0, 0.5);
    ActivationDataset ds;
    ds.d = 1;
    for (std::size_t g = 0; g < groups; ++g)
        for (Entity e : kAllEntities)
            for (Polarity p : kAllPolarities) {
                ActivationSample s;
                s.base_id = "q" + std::to_string(g);
                s.entity = e;
                s.polarity = p;
                s.yes_prob = U(rng);
                s.no_prob = U(rng);
                ds.rows.push_back(s);
            }
    ds.layers.assign(1, LayerMatrix::Zero(static_cast<Eigen::Index>(ds.n()), 1));
    const ProbeBundle none;
    for (auto _ : state) {
        auto rep = consistency(ds, none);
        benchmark::DoNotOptimize(rep.fits.data());
    }
}
BENCHMARK(BM_Consistency)->Arg(51)->Arg(5000);

BENCHMARK_MAIN();
