#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "prdim/em.hpp"
#include "prdim/missing.hpp"

using namespace prdim;

namespace {

struct SmallProblem {
    Denoiser denoiser;
    PatternRecognizer recognizer;
    NoiseSchedule sched;
    Tensor x0_obs;
    Tensor m;
};

SmallProblem make_problem(std::uint64_t seed, bool random_pr = true) {
    SmallProblem p;
    Rng rng(seed);
    p.denoiser = make_denoiser(6, {12}, 8, rng);
    p.recognizer = random_pr ? make_recognizer(6, {10}, rng) : make_zero_recognizer(6, {10});
    p.sched = build_schedule(10, 1e-4, 0.5, ScheduleKind::quadratic);
    Tensor x = Tensor::zeros({5, 6});
    rng.fill_normal(x.values);
    p.m = Tensor::zeros({5, 6});
    for (double& v : p.m.values) v = rng.uniform() < 0.7 ? 1.0 : 0.0;
    p.x0_obs = observed_fill(x, p.m);
    return p;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        if (a.values[i] != b.values[i]) return false;
    }
    return true;
}

} // namespace

TEST_CASE("e_step with guidance scale 0 equals the unguided sampler bitwise") {
    SmallProblem p = make_problem(60);
    EmConfig cfg;
    cfg.guidance_scale = 0.0;
    Rng a(61), b(61);
    Tensor guided = e_step(p.denoiser, p.recognizer, p.x0_obs, p.m, p.sched, cfg, a);
    Tensor plain = sample_unguided(p.denoiser, p.x0_obs, p.m, p.sched, b);
    CHECK(bitwise_equal(guided, plain));
}

TEST_CASE("e_step with a zero-weight recognizer equals the unguided sampler bitwise") {
    SmallProblem p = make_problem(62, /*random_pr=*/false);
    for (auto path : {GuidancePath::full_chain, GuidancePath::x0hat_only}) {
        EmConfig cfg;
        cfg.guidance_scale = 1.0;
        cfg.guidance_path = path;
        Rng a(63), b(63);
        Tensor guided = e_step(p.denoiser, p.recognizer, p.x0_obs, p.m, p.sched, cfg, a);
        Tensor plain = sample_unguided(p.denoiser, p.x0_obs, p.m, p.sched, b);
        CHECK(bitwise_equal(guided, plain));
    }
}

TEST_CASE("e_step output preserves observed entries bitwise, both guidance paths") {
    for (auto path : {GuidancePath::full_chain, GuidancePath::x0hat_only}) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            SmallProblem p = make_problem(100 + seed);
            EmConfig cfg;
            cfg.guidance_path = path;
            Rng rng(200 + seed);
            Tensor out = e_step(p.denoiser, p.recognizer, p.x0_obs, p.m, p.sched, cfg, rng);
            for (std::size_t i = 0; i < out.numel(); ++i) {
                if (p.m.values[i] == 1.0) CHECK(out.values[i] == p.x0_obs.values[i]);
            }
        }
    }
}

TEST_CASE("e_step is deterministic given the seed") {
    SmallProblem p = make_problem(64);
    EmConfig cfg;
    Rng a(65), b(65);
    Tensor r1 = e_step(p.denoiser, p.recognizer, p.x0_obs, p.m, p.sched, cfg, a);
    Tensor r2 = e_step(p.denoiser, p.recognizer, p.x0_obs, p.m, p.sched, cfg, b);
    CHECK(bitwise_equal(r1, r2));
}

TEST_CASE("guidance actually moves the missing entries when the recognizer is trained") {
    SmallProblem p = make_problem(66);
    OptimizerState opt;
    Tensor x_fake = Tensor::zeros({5, 6});
    Rng noise(67);
    noise.fill_normal(x_fake.values);
    for (int i = 0; i < 50; ++i) pr_train_step(p.recognizer, p.m, x_fake, 1e-2, opt);
    EmConfig cfg;
    cfg.guidance_scale = 1.0;
    Rng a(68), b(68);
    Tensor guided = e_step(p.denoiser, p.recognizer, p.x0_obs, p.m, p.sched, cfg, a);
    Tensor plain = sample_unguided(p.denoiser, p.x0_obs, p.m, p.sched, b);
    bool moved = false;
    for (std::size_t i = 0; i < guided.numel(); ++i) {
        if (p.m.values[i] == 0.0 && guided.values[i] != plain.values[i]) moved = true;
    }
    CHECK(moved);
}

TEST_CASE("m_step with zero learning rates leaves both networks unchanged") {
    SmallProblem p = make_problem(69);
    Tensor imputed = p.x0_obs;
    Denoiser d0 = p.denoiser;
    PatternRecognizer pr0 = p.recognizer;
    OptimizerState ot, op;
    EmConfig cfg;
    cfg.lr_theta = 0.0;
    cfg.lr_phi = 0.0;
    Rng rng(70);
    MStepResult r = m_step(p.denoiser, p.recognizer, ot, op, imputed, p.x0_obs, p.m, p.sched, cfg, rng);
    CHECK(r.l_diff >= 0.0);
    CHECK(r.l_pr >= 0.0);
    for (std::size_t l = 0; l < d0.net.layers.size(); ++l) {
        CHECK(bitwise_equal(p.denoiser.net.layers[l].w, d0.net.layers[l].w));
    }
    for (std::size_t l = 0; l < pr0.net.layers.size(); ++l) {
        CHECK(bitwise_equal(p.recognizer.net.layers[l].w, pr0.net.layers[l].w));
    }
}

TEST_CASE("m_step drives the recognizer below chance on a logistic mechanism") {
    Rng rng(71);
    const std::size_t n = 64, d = 8;
    Tensor x = Tensor::zeros({n, d});
    rng.fill_normal(x.values);
    MaskSample s = gen_mnar_logistic(x, 5.0, 0.8, rng);
    Denoiser den = make_denoiser(d, {12}, 8, rng);
    PatternRecognizer pr = make_recognizer(d, {24, 24}, rng);
    NoiseSchedule sched = build_schedule(10, 1e-4, 0.5, ScheduleKind::quadratic);
    OptimizerState ot, op;
    EmConfig cfg;
    cfg.batch = 16;
    double l_pr = 0.0;
    Rng step_rng(72);
    for (int i = 0; i < 50; ++i) {  // 50 epochs x 4 batches = 200 steps
        MStepResult r = m_step(den, pr, ot, op, x, observed_fill(x, s.mask), s.mask, sched, cfg, step_rng);
        l_pr = r.l_pr;
    }
    CHECK(l_pr < 0.55);
}

TEST_CASE("m_step is deterministic under a fixed seed") {
    auto run = [] {
        SmallProblem p = make_problem(73);
        OptimizerState ot, op;
        EmConfig cfg;
        cfg.batch = 2;
        Rng rng(74);
        m_step(p.denoiser, p.recognizer, ot, op, p.x0_obs, p.x0_obs, p.m, p.sched, cfg, rng);
        return p.denoiser;
    };
    Denoiser a = run();
    Denoiser b = run();
    for (std::size_t l = 0; l < a.net.layers.size(); ++l) {
        CHECK(bitwise_equal(a.net.layers[l].w, b.net.layers[l].w));
    }
}

TEST_CASE("run_em validates its configuration") {
    SmallProblem p = make_problem(75);
    MaskedDataset train;
    train.x = p.x0_obs;
    train.m = p.m;
    EmConfig cfg;
    cfg.iterations = 0;
    Rng rng(76);
    CHECK_THROWS_AS(run_em(p.denoiser, p.recognizer, train, p.sched, cfg, rng), std::invalid_argument);
    cfg.iterations = 1;
    cfg.mode = EmMode::soft;
    cfg.soft_samples = 1;
    CHECK_THROWS_AS(run_em(p.denoiser, p.recognizer, train, p.sched, cfg, rng), std::invalid_argument);
}

TEST_CASE("run_em traces have one entry per iteration and freeze observed entries") {
    SmallProblem p = make_problem(77);
    MaskedDataset train;
    train.x = p.x0_obs;
    train.m = p.m;
    EmConfig cfg;
    cfg.iterations = 3;
    cfg.batch = 2;
    Rng rng(78);
    EmState state = run_em(p.denoiser, p.recognizer, train, p.sched, cfg, rng);
    CHECK(state.trace.l_diff.size() == 3);
    CHECK(state.trace.l_pr.size() == 3);
    CHECK(state.iteration == 3);
    for (std::size_t i = 0; i < state.imputed.numel(); ++i) {
        if (p.m.values[i] == 1.0) CHECK(state.imputed.values[i] == p.x0_obs.values[i]);
    }
}

TEST_CASE("run_em with zero learning rates reproduces a single phase-1 e_step") {
    SmallProblem p = make_problem(79);
    MaskedDataset train;
    train.x = p.x0_obs;
    train.m = p.m;
    EmConfig cfg;
    cfg.iterations = 1;
    cfg.lr_theta = 0.0;
    cfg.lr_phi = 0.0;
    Rng rng(80);
    EmState state = run_em(p.denoiser, p.recognizer, train, p.sched, cfg, rng);

    // With zero learning rates the parameters never move, so the final
    // imputation is one e_step from the phase-1 pair under the documented
    // substream rule.
    Rng probe(80);
    std::uint64_t base = probe.next_u64();
    Rng ref_rng(seed_for(base, "em_final", 0));
    Tensor want = e_step(p.denoiser, p.recognizer, p.x0_obs, p.m, p.sched, cfg, ref_rng);
    CHECK(bitwise_equal(state.imputed, want));
}

TEST_CASE("soft EM concentrates: 16-sample means vary less than 4-sample means") {
    SmallProblem p = make_problem(81);
    auto variance_of_means = [&](std::size_t samples) {
        EmConfig cfg;
        cfg.mode = EmMode::soft;
        cfg.soft_samples = samples;
        const int repeats = 24;
        std::vector<Tensor> means;
        for (int r = 0; r < repeats; ++r) {
            Rng rng(1000 + (std::uint64_t)r);
            means.push_back(
                e_step_expectation(p.denoiser, p.recognizer, p.x0_obs, p.m, p.sched, cfg, rng));
        }
        double var = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < p.m.numel(); ++i) {
            if (p.m.values[i] == 1.0) continue;
            double mean = 0.0;
            for (const auto& t : means) mean += t.values[i];
            mean /= repeats;
            for (const auto& t : means) var += (t.values[i] - mean) * (t.values[i] - mean);
            count += repeats;
        }
        return var / (double)count;
    };
    double v4 = variance_of_means(4);
    double v16 = variance_of_means(16);
    double ratio = v4 / v16;
    CHECK(ratio > 2.0);
    CHECK(ratio < 8.0);
}

TEST_CASE("soft EM pins observed entries bitwise despite averaging") {
    SmallProblem p = make_problem(82);
    EmConfig cfg;
    cfg.mode = EmMode::soft;
    cfg.soft_samples = 3;
    Rng rng(83);
    Tensor out = e_step_expectation(p.denoiser, p.recognizer, p.x0_obs, p.m, p.sched, cfg, rng);
    for (std::size_t i = 0; i < out.numel(); ++i) {
        if (p.m.values[i] == 1.0) CHECK(out.values[i] == p.x0_obs.values[i]);
    }
}

TEST_CASE("impute_out_of_sample rejects mismatched feature counts and is deterministic") {
    SmallProblem p = make_problem(84);
    EmState state;
    state.denoiser = p.denoiser;
    state.recognizer = p.recognizer;
    EmConfig cfg;
    Rng rng(85);
    CHECK_THROWS_AS(impute_out_of_sample(state, Tensor::zeros({2, 5}), Tensor::zeros({2, 5}), p.sched,
                                         cfg, rng),
                    std::invalid_argument);
    Rng a(86), b(86);
    Tensor r1 = impute_out_of_sample(state, p.x0_obs, p.m, p.sched, cfg, a);
    Tensor r2 = impute_out_of_sample(state, p.x0_obs, p.m, p.sched, cfg, b);
    CHECK(bitwise_equal(r1, r2));
}

TEST_CASE("fully observed test rows come back unchanged") {
    SmallProblem p = make_problem(87);
    EmState state;
    state.denoiser = p.denoiser;
    state.recognizer = p.recognizer;
    EmConfig cfg;
    Tensor full_m = Tensor::full({3, 6}, 1.0);
    Tensor x = Tensor::zeros({3, 6});
    Rng noise(88);
    noise.fill_normal(x.values);
    Rng rng(89);
    Tensor out = impute_out_of_sample(state, x, full_m, p.sched, cfg, rng);
    CHECK(bitwise_equal(out, x));
}
