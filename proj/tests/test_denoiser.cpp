#include <catch2/catch_amalgamated.hpp>

#include "diffrecon/denoiser.hpp"
#include "diffrecon/phantom.hpp"

using namespace diffrecon;

namespace {

DenoiserConfig tiny_config() {
    DenoiserConfig cfg;
    cfg.depth = 2;
    cfg.width = 3;
    cfg.kernel = 3;
    cfg.alpha_embed_dim = 4;
    return cfg;
}

DenoiserParams random_params(const DenoiserConfig& cfg, std::uint64_t seed) {
    DenoiserParams p = init_params(cfg, seed);
    RandomSource rng(seed + 1000);
    for (auto& t : p.tensors)
        for (double& v : t.v) v = (rng.uniform() - 0.5);
    return p;
}

DenoiserParams zero_params(const DenoiserConfig& cfg) {
    DenoiserParams p = init_params(cfg, 0);
    for (auto& t : p.tensors)
        for (double& v : t.v) v = 0.0;
    return p;
}

}  // namespace

TEST_CASE("all-zero parameters predict zero noise") {
    for (int depth : {1, 2, 4}) {
        DenoiserConfig cfg = tiny_config();
        cfg.depth = depth;
        const DenoiserParams p = zero_params(cfg);
        RandomSource rng(3);
        const RealImage x = gaussian_image(rng, 12, 12);
        const RealImage y = gaussian_image(rng, 12, 12);
        const RealImage out = predict_noise(p, x, y, 0.5);
        for (double v : out.data) REQUIRE(v == 0.0);
    }
}

TEST_CASE("prediction is deterministic and shape-preserving") {
    const DenoiserParams p = random_params(tiny_config(), 5);
    RandomSource rng(6);
    for (int n : {32, 64}) {
        const RealImage x = gaussian_image(rng, n, n);
        const RealImage y = gaussian_image(rng, n, n);
        const RealImage a = predict_noise(p, x, y, 0.7);
        const RealImage b = predict_noise(p, x, y, 0.7);
        REQUIRE(a.height == n);
        REQUIRE(a.width == n);
        REQUIRE(a.data == b.data);
    }
}

TEST_CASE("prediction validates inputs") {
    const DenoiserParams p = random_params(tiny_config(), 7);
    RandomSource rng(8);
    const RealImage x = gaussian_image(rng, 8, 8);
    const RealImage y = gaussian_image(rng, 8, 9);
    REQUIRE_THROWS_AS(predict_noise(p, x, y, 0.5), std::invalid_argument);
    const RealImage y2 = gaussian_image(rng, 8, 8);
    REQUIRE_THROWS_AS(predict_noise(p, x, y2, 0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(predict_noise(p, x, y2, 1.5), std::invalid_argument);
}

TEST_CASE("config validation rejects bad dimensions") {
    DenoiserConfig cfg;
    cfg.kernel = 4;
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = DenoiserConfig{};
    cfg.depth = 0;
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = DenoiserConfig{};
    cfg.p_norm = 3;
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("the four-parameter toy config exists: depth 1, kernel 1, embed 1") {
    DenoiserConfig cfg;
    cfg.depth = 1;
    cfg.width = 1;
    cfg.kernel = 1;
    cfg.alpha_embed_dim = 1;
    const DenoiserParams p = init_params(cfg, 0);
    REQUIRE(p.parameter_count() == 4);
}

TEST_CASE("perfect prediction gives zero loss and vanishing gradients (p=2)") {
    const DenoiserConfig cfg = tiny_config();
    const DenoiserParams p = zero_params(cfg);  // predicts zero everywhere
    RandomSource rng(9);
    const RealImage x = gaussian_image(rng, 8, 8);
    const RealImage y0 = gaussian_image(rng, 8, 8);
    std::vector<std::pair<RealImage, RealImage>> batch{{x, y0}};
    std::vector<NoiseDraw> draws{{0.5, RealImage(8, 8, 0.0)}};  // eps = 0 = prediction
    const LossGrad lg = loss_and_grad_with_draws(p, batch, draws, 2);
    REQUIRE(lg.loss == 0.0);
    for (const auto& g : lg.grads)
        for (double v : g.v) REQUIRE(v == 0.0);
}

TEST_CASE("analytic gradients match central finite differences") {
    DenoiserConfig cfg = tiny_config();
    cfg.p_norm = 2;
    DenoiserParams params = random_params(cfg, 11);

    RandomSource rng(12);
    std::vector<std::pair<RealImage, RealImage>> batch;
    std::vector<NoiseDraw> draws;
    for (int i = 0; i < 2; ++i) {
        batch.emplace_back(gaussian_image(rng, 6, 6), gaussian_image(rng, 6, 6));
        draws.push_back({0.37 + 0.36 * i, gaussian_image(rng, 6, 6)});
    }

    const LossGrad lg = loss_and_grad_with_draws(params, batch, draws, 2);
    const double h = 1e-4;
    for (std::size_t ti = 0; ti < params.tensors.size(); ++ti) {
        for (std::size_t i = 0; i < params.tensors[ti].v.size(); ++i) {
            const double saved = params.tensors[ti].v[i];
            params.tensors[ti].v[i] = saved + h;
            const double up = loss_and_grad_with_draws(params, batch, draws, 2).loss;
            params.tensors[ti].v[i] = saved - h;
            const double dn = loss_and_grad_with_draws(params, batch, draws, 2).loss;
            params.tensors[ti].v[i] = saved;
            const double fd = (up - dn) / (2.0 * h);
            const double analytic = lg.grads[ti].v[i];
            // the 1e-6 floor covers coordinates whose true gradient sits
            // below the finite-difference cancellation noise (~1e-10 here)
            const double rel = std::abs(analytic - fd) / std::max({std::abs(fd), std::abs(analytic), 1e-6});
            REQUIRE(rel < 1e-4);
        }
    }
}

TEST_CASE("p=1 loss is nonnegative and has the right gradient scale") {
    const DenoiserConfig cfg = tiny_config();
    const DenoiserParams p = random_params(cfg, 13);
    RandomSource rng(14);
    std::vector<std::pair<RealImage, RealImage>> batch{
        {gaussian_image(rng, 8, 8), gaussian_image(rng, 8, 8)}};
    std::vector<NoiseDraw> draws{{0.6, gaussian_image(rng, 8, 8)}};
    const LossGrad lg = loss_and_grad_with_draws(p, batch, draws, 1);
    REQUIRE(lg.loss >= 0.0);
}

TEST_CASE("loss is permutation-invariant over the batch") {
    const DenoiserConfig cfg = tiny_config();
    const DenoiserParams p = random_params(cfg, 15);
    RandomSource rng(16);
    std::vector<std::pair<RealImage, RealImage>> batch;
    std::vector<NoiseDraw> draws;
    for (int i = 0; i < 4; ++i) {
        batch.emplace_back(gaussian_image(rng, 8, 8), gaussian_image(rng, 8, 8));
        draws.push_back({0.2 + 0.2 * i, gaussian_image(rng, 8, 8)});
    }
    const double fwd = loss_and_grad_with_draws(p, batch, draws, 2).loss;
    std::reverse(batch.begin(), batch.end());
    std::reverse(draws.begin(), draws.end());
    const double rev = loss_and_grad_with_draws(p, batch, draws, 2).loss;
    REQUIRE_THAT(fwd, Catch::Matchers::WithinRel(rev, 1e-12));
}

TEST_CASE("prediction is smooth in alpha_bar") {
    DenoiserConfig cfg;  // default-size network
    const DenoiserParams p = init_params(cfg, 17);
    RandomSource rng(18);
    const RealImage x = gaussian_image(rng, 16, 16);
    const RealImage y = gaussian_image(rng, 16, 16);
    const RealImage a = predict_noise(p, x, y, 0.5);
    const RealImage b = predict_noise(p, x, y, 0.5 + 1e-8);
    REQUIRE(max_abs_diff(a, b) < 1e-4);
}

TEST_CASE("loss decreases over 100 optimizer steps on one fixed batch") {
    DenoiserConfig cfg = tiny_config();
    TrainState state = init_train_state(cfg, 19, 1e-2);
    RandomSource rng(20);
    PhantomSpec spec;
    spec.size = 16;
    const RealImage truth = gen_phantom(spec, rng);
    std::vector<std::pair<RealImage, RealImage>> batch{{truth, truth}};
    std::vector<NoiseDraw> draws{{0.5, gaussian_image(rng, 16, 16)}};

    const double first = loss_and_grad_with_draws(state.params, batch, draws, 2).loss;
    double last = first;
    for (int step = 0; step < 100; ++step) {
        const LossGrad lg = loss_and_grad_with_draws(state.params, batch, draws, 2);
        adam_step(state, lg.grads);
        last = lg.loss;
    }
    REQUIRE(last < first);
}

TEST_CASE("empty batches and datasets are rejected") {
    const DenoiserConfig cfg = tiny_config();
    const DenoiserParams p = init_params(cfg, 21);
    const NoiseSchedule s = linear_beta_schedule(10, 1e-3, 0.2);
    RandomSource rng(22);
    std::vector<std::pair<RealImage, RealImage>> empty;
    REQUIRE_THROWS_AS(loss_and_grad(p, empty, s, rng, 2), std::invalid_argument);
    TrainState state = init_train_state(cfg, 23);
    TrainOptions opt;
    REQUIRE_THROWS_AS(train(state, empty, s, opt, rng), std::invalid_argument);
}

TEST_CASE("zero epochs leave the state untouched") {
    const DenoiserConfig cfg = tiny_config();
    TrainState state = init_train_state(cfg, 24);
    const auto before = state.params.tensors;
    const NoiseSchedule s = linear_beta_schedule(10, 1e-3, 0.2);
    RandomSource rng(25);
    std::vector<std::pair<RealImage, RealImage>> data{{RealImage(8, 8, 0.1), RealImage(8, 8, 0.2)}};
    TrainOptions opt;
    opt.epochs = 0;
    const auto losses = train(state, data, s, opt, rng);
    REQUIRE(losses.empty());
    REQUIRE(state.step_count == 0);
    for (std::size_t i = 0; i < before.size(); ++i)
        REQUIRE(state.params.tensors[i].v == before[i].v);
}

TEST_CASE("training is byte-identical across reruns with one seed") {
    const DenoiserConfig cfg = tiny_config();
    const NoiseSchedule s = linear_beta_schedule(20, 1e-3, 0.2);
    std::vector<std::pair<RealImage, RealImage>> data;
    RandomSource gen(26);
    PhantomSpec spec;
    spec.size = 16;
    for (int i = 0; i < 6; ++i) {
        const RealImage t = gen_phantom(spec, gen);
        data.emplace_back(t, t);
    }
    TrainOptions opt;
    opt.epochs = 2;
    opt.batch_size = 4;

    TrainState s1 = init_train_state(cfg, 27);
    RandomSource r1(28);
    const auto l1 = train(s1, data, s, opt, r1);
    TrainState s2 = init_train_state(cfg, 27);
    RandomSource r2(28);
    const auto l2 = train(s2, data, s, opt, r2);
    REQUIRE(l1 == l2);
    for (std::size_t i = 0; i < s1.params.tensors.size(); ++i)
        REQUIRE(s1.params.tensors[i].v == s2.params.tensors[i].v);
}

TEST_CASE("training on phantom pairs reduces the epoch loss") {
    // 200 synthetic 32x32 pairs, small trunk: epoch-20 loss beats epoch-1.
    DenoiserConfig cfg;
    cfg.depth = 3;
    cfg.width = 6;
    const NoiseSchedule s = linear_beta_schedule(50, 1e-3, 0.2);

    PhantomSpec spec;
    spec.size = 32;
    DatasetParams dparams;
    dparams.pattern = MaskPattern::G1D;
    dparams.acceleration = 4.0;
    dparams.seed = 29;
    std::vector<std::pair<RealImage, RealImage>> data;
    RandomSource gen(29);
    for (int i = 0; i < 200; ++i) {
        RandomSource item = gen.fork(i);
        const RealImage truth = gen_phantom(spec, item);
        const MeasurementOp op(gen_g1d(32, 32, 4.0, dparams.seed + i));
        const KSpaceMeasurement b = undersample(op, truth, 0.0, item);
        data.emplace_back(zero_fill(op, b), truth);
    }

    TrainState state = init_train_state(cfg, 30, 2e-3);
    TrainOptions opt;
    opt.epochs = 20;
    opt.batch_size = 10;
    RandomSource rng(31);
    const auto losses = train(state, data, s, opt, rng);
    REQUIRE(losses.size() == 20);
    REQUIRE(losses.back() < losses.front());
}
