#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "fracseg/adam.hpp"
#include "fracseg/error.hpp"
#include "fracseg/loss.hpp"
#include "fracseg/mask.hpp"
#include "fracseg/rng.hpp"
#include "fracseg/tensor.hpp"
#include "oracles.hpp"

using namespace fracseg;
using namespace fracseg::optim;

namespace {

LossBatch<double> make_batch(const Tensor<double>& logits, std::vector<std::uint8_t> ids) {
    const auto& d = logits.dims();
    return LossBatch<double>{logits, MaskBatch{d.n, d.h, d.w, std::move(ids)}};
}

} // namespace

TEST_CASE("cross entropy of uniform logits is ln(num_classes)") {
    Tensor<double> logits(Dims4{1, 3, 1, 1}, 0.0);
    const auto r = cross_entropy_loss(make_batch(logits, {1}));
    CHECK(r.loss == doctest::Approx(std::log(3.0)).epsilon(1e-12));
    CHECK(r.counted_pixels == 1);
}

TEST_CASE("cross entropy of a saturated correct logit is numerically zero") {
    Tensor<double> logits(Dims4{1, 3, 1, 1}, {0.0, 50.0, 0.0});
    const auto r = cross_entropy_loss(make_batch(logits, {1}));
    CHECK(r.loss < 1e-9);
    CHECK(std::isfinite(r.loss));
}

TEST_CASE("cross entropy stays finite on extreme logits") {
    Tensor<double> logits(Dims4{1, 3, 1, 1}, {1000.0, -1000.0, 0.0});
    const auto r = cross_entropy_loss(make_batch(logits, {2}));
    CHECK(std::isfinite(r.loss));
    for (std::int64_t i = 0; i < r.grad_logits.size(); ++i)
        CHECK(std::isfinite(r.grad_logits[i]));
}

TEST_CASE("unlabeled pixels are skipped by loss and gradient") {
    Tensor<double> logits(Dims4{1, 3, 1, 2}, {1.0, 2.0, -1.0, 0.5, 0.3, -0.2});
    const auto r = cross_entropy_loss(make_batch(logits, {0, kUnlabeledId}));
    CHECK(r.counted_pixels == 1);
    // The ignored pixel's gradient column must be exactly zero.
    CHECK(r.grad_logits.at(0, 0, 0, 1) == 0.0);
    CHECK(r.grad_logits.at(0, 1, 0, 1) == 0.0);
    CHECK(r.grad_logits.at(0, 2, 0, 1) == 0.0);

    Tensor<double> all_void_logits(Dims4{1, 3, 1, 1}, 0.0);
    const auto rv = cross_entropy_loss(make_batch(all_void_logits, {kUnlabeledId}));
    CHECK(rv.counted_pixels == 0);
    CHECK(rv.loss == 0.0);
}

TEST_CASE("out-of-range target ids are rejected") {
    Tensor<double> logits(Dims4{1, 3, 1, 1}, 0.0);
    CHECK_THROWS_AS(cross_entropy_loss(make_batch(logits, {3})), DataError);
    Tensor<double> bad_shape(Dims4{1, 3, 2, 2}, 0.0);
    CHECK_THROWS_AS(cross_entropy_loss(make_batch(bad_shape, {0})), ShapeError);
}

TEST_CASE("cross entropy gradient equals softmax minus one-hot over counted pixels") {
    Rng rng(17);
    Tensor<double> logits(Dims4{2, 3, 2, 2});
    for (std::int64_t i = 0; i < logits.size(); ++i) logits[i] = rng.normal();
    std::vector<std::uint8_t> ids{0, 1, 2, kUnlabeledId, 2, 2, 0, 1};
    auto batch = make_batch(logits, ids);
    const auto r = cross_entropy_loss(batch);
    CHECK(r.counted_pixels == 7);

    auto loss = [&]() { return cross_entropy_loss(batch).loss; };
    for (int c = 0; c < 12; ++c) {
        const std::int64_t i = std::int64_t(rng.uniform_int(std::uint64_t(logits.size())));
        const double fd = oracle::central_diff(loss, &batch.logits[i], 1e-6);
        CHECK(oracle::rel_err(fd, r.grad_logits[i]) < 1e-6);
    }
}

TEST_CASE("pixel accuracy counts argmax hits over labeled pixels") {
    // Argmax classes: 1, 1, 2, 0 against targets 1, 2, 2, 2.
    Tensor<double> logits(Dims4{1, 3, 1, 4}, 0.0);
    logits.at(0, 1, 0, 0) = 5.0;
    logits.at(0, 1, 0, 1) = 5.0;
    logits.at(0, 2, 0, 2) = 5.0;
    logits.at(0, 0, 0, 3) = 5.0;
    const auto batch = make_batch(logits, {1, 2, 2, 2});
    CHECK(pixel_accuracy(batch) == doctest::Approx(0.5));

    Tensor<double> one(Dims4{1, 3, 1, 2}, 0.0);
    one.at(0, 2, 0, 0) = 3.0;
    one.at(0, 0, 0, 1) = 3.0;
    CHECK(pixel_accuracy(make_batch(one, {2, kUnlabeledId})) == doctest::Approx(1.0));
}

TEST_CASE("first adam step moves by about lr regardless of gradient scale") {
    AdamHyper hyper;
    hyper.lr = 1e-6;
    AdamState<double> state(1, hyper);
    double param = 1.0;
    const double grad = 0.1;
    adam_step(&param, &grad, 1, state);
    // With bias correction the first update is lr * g / (|g| + eps).
    CHECK(1.0 - param == doctest::Approx(1e-6).epsilon(1e-4));
    CHECK(state.t == 1);
}

TEST_CASE("adam matches a hand-stepped reference over several iterations") {
    AdamHyper hyper;
    hyper.lr = 0.01;
    AdamState<double> state(2, hyper);
    std::vector<double> param{0.5, -1.25};
    std::vector<double> ref = param;
    double m[2] = {0, 0}, v[2] = {0, 0};

    Rng rng(3);
    for (int t = 1; t <= 25; ++t) {
        const double g[2] = {rng.normal(), rng.normal()};
        adam_step(param.data(), g, 2, state);
        for (int i = 0; i < 2; ++i) {
            m[i] = hyper.beta1 * m[i] + (1 - hyper.beta1) * g[i];
            v[i] = hyper.beta2 * v[i] + (1 - hyper.beta2) * g[i] * g[i];
            const double mh = m[i] / (1 - std::pow(hyper.beta1, t));
            const double vh = v[i] / (1 - std::pow(hyper.beta2, t));
            ref[i] -= hyper.lr * mh / (std::sqrt(vh) + hyper.epsilon);
        }
        CHECK(param[0] == doctest::Approx(ref[0]).epsilon(1e-12));
        CHECK(param[1] == doctest::Approx(ref[1]).epsilon(1e-12));
    }
    CHECK(state.t == 25);
}

TEST_CASE("adam drives a quadratic to its minimum") {
    AdamHyper hyper;
    hyper.lr = 0.1;
    AdamState<double> state(1, hyper);
    double x = -4.0;
    for (int t = 0; t < 500; ++t) {
        const double g = 2.0 * (x - 3.0);
        adam_step(&x, &g, 1, state);
    }
    CHECK(std::abs(x - 3.0) < 1e-2);
}

TEST_CASE("adam rejects non-finite gradients without touching the parameter") {
    AdamHyper hyper;
    AdamState<double> state(1, hyper);
    double param = 2.0;
    const double bad = std::nan("");
    CHECK_THROWS_AS(adam_step(&param, &bad, 1, state), NumericError);
    CHECK(param == 2.0);
    CHECK(state.t == 0);

    hyper.check_finite = false;
    AdamState<double> loose(1, hyper);
    double p2 = 2.0;
    CHECK_NOTHROW(adam_step(&p2, &bad, 1, loose));
}

TEST_CASE("adam handles an all-zero gradient") {
    AdamHyper hyper;
    AdamState<double> state(3, hyper);
    std::vector<double> param{1.0, 2.0, 3.0};
    const std::vector<double> zeros(3, 0.0);
    adam_step(param.data(), zeros.data(), 3, state);
    CHECK(param[0] == doctest::Approx(1.0));
    CHECK(std::isfinite(param[2]));
}

TEST_CASE("adam tensor overload updates in place") {
    Tensor<double> param(Dims4{1, 1, 1, 2}, {1.0, -1.0});
    Tensor<double> grad(Dims4{1, 1, 1, 2}, {0.5, -0.5});
    AdamHyper hyper;
    hyper.lr = 0.01;
    AdamState<double> state(2, hyper);
    adam_step(param, grad, state);
    CHECK(param[0] < 1.0);
    CHECK(param[1] > -1.0);
}

TEST_CASE("rng is reproducible and fork derives a distinct stream") {
    Rng a(123), b(123);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());

    Rng c(123), d(123);
    auto cf = c.fork(0);
    auto df = d.fork(0);
    CHECK(cf.next() == df.next());
    auto c2 = Rng(123).fork(1);
    CHECK(cf.next() != c2.next());
}

TEST_CASE("uniform stays in [0,1) and uniform_int respects its bound") {
    Rng rng(7);
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    CHECK(lo < 0.01);
    CHECK(hi > 0.99);

    std::vector<int> counts(7, 0);
    for (int i = 0; i < 70000; ++i) ++counts[rng.uniform_int(7)];
    for (int k = 0; k < 7; ++k) CHECK(std::abs(counts[k] - 10000) < 500);
    CHECK(rng.uniform_int(1) == 0);
    CHECK(rng.uniform_int(0) == 0);
}

TEST_CASE("normal samples have roughly standard moments") {
    Rng rng(99);
    const int n = 50000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sq += z * z;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("shuffle produces a permutation and depends on the seed") {
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    auto w = v;
    Rng rng(21);
    rng.shuffle(w);
    CHECK(w != v);
    auto sorted = w;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == v);

    auto w2 = v;
    Rng rng2(21);
    rng2.shuffle(w2);
    CHECK(w2 == w);
}
