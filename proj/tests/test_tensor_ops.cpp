#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "fracseg/error.hpp"
#include "fracseg/ops.hpp"
#include "fracseg/rng.hpp"
#include "fracseg/tensor.hpp"
#include "oracles.hpp"

using namespace fracseg;

TEST_CASE("tensor layout is NCHW row-major with contiguous planes") {
    Tensor<float> t(Dims4{2, 3, 4, 5});
    CHECK(t.size() == 2 * 3 * 4 * 5);
    CHECK(t.index(0, 0, 0, 0) == 0);
    CHECK(t.index(0, 0, 0, 1) == 1);
    CHECK(t.index(0, 0, 1, 0) == 5);
    CHECK(t.index(0, 1, 0, 0) == 20);
    CHECK(t.index(1, 0, 0, 0) == 60);
    t.at(1, 2, 3, 4) = 7.0f;
    CHECK(t[t.size() - 1] == 7.0f);
    CHECK(t.plane(1, 2) == t.data() + t.index(1, 2, 0, 0));
}

TEST_CASE("tensor constructor rejects mismatched data and negative dims") {
    CHECK_THROWS_AS(Tensor<float>(Dims4{1, 1, 2, 2}, std::vector<float>{1.0f, 2.0f}), ShapeError);
    CHECK_THROWS_AS(Tensor<float>(Dims4{1, -1, 2, 2}), ShapeError);
}

TEST_CASE("tensor cast converts element type and keeps values") {
    Tensor<float> t(Dims4{1, 1, 1, 3}, {1.5f, -2.0f, 0.25f});
    const auto d = t.cast<double>();
    CHECK(d.dims() == t.dims());
    CHECK(d[0] == doctest::Approx(1.5));
    CHECK(d[1] == doctest::Approx(-2.0));
}

TEST_CASE("check_finite flags NaN and Inf") {
    Tensor<float> t(Dims4{1, 1, 1, 2}, {1.0f, std::nanf("")});
    CHECK_THROWS_AS(t.check_finite("t"), NumericError);
    Tensor<float> ok(Dims4{1, 1, 1, 2}, {1.0f, 2.0f});
    CHECK_NOTHROW(ok.check_finite("ok"));
}

TEST_CASE("same-padded 3x3 all-ones convolution sums the full 3x3 input to 45") {
    Tensor<float> input(Dims4{1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    ops::ConvParams<float> p;
    p.kernel = Tensor<float>(Dims4{1, 1, 3, 3}, 1.0f);
    p.bias = {0.0f};
    p.stride = 1;
    p.pad = 1;
    const auto out = ops::conv2d_forward(input, p);
    CHECK(out.dims() == Dims4{1, 1, 3, 3});
    CHECK(out.at(0, 0, 1, 1) == doctest::Approx(45.0f));
    CHECK(out.at(0, 0, 0, 0) == doctest::Approx(1 + 2 + 4 + 5));
}

TEST_CASE("conv2d matches the direct nested-loop reference on random shapes") {
    Rng rng(41);
    for (int it = 0; it < 30; ++it) {
        const std::int64_t n = 1 + std::int64_t(rng.uniform_int(2));
        const std::int64_t cin = 1 + std::int64_t(rng.uniform_int(3));
        const std::int64_t cout = 1 + std::int64_t(rng.uniform_int(3));
        const std::int64_t k = rng.uniform_int(2) == 0 ? 1 : 3;
        const int stride = 1 + int(rng.uniform_int(2));
        const int pad = int(rng.uniform_int(2));
        const std::int64_t h = k + std::int64_t(rng.uniform_int(5));
        const std::int64_t w = k + std::int64_t(rng.uniform_int(5));

        const auto input = oracle::random_tensor(rng, Dims4{n, cin, h, w});
        const auto kernel = oracle::random_tensor(rng, Dims4{cout, cin, k, k});
        std::vector<double> bias(static_cast<std::size_t>(cout));
        for (auto& b : bias) b = rng.normal();

        ops::ConvParams<double> p{kernel, bias, stride, pad};
        const auto got = ops::conv2d_forward(input, p);
        const auto want = oracle::conv2d(input, kernel, bias, stride, pad);
        REQUIRE(got.dims() == want.dims());
        for (std::int64_t i = 0; i < got.size(); ++i)
            CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
}

TEST_CASE("conv2d output dim formula and shape guards") {
    CHECK(ops::conv2d_output_dims(Dims4{1, 3, 8, 8}, Dims4{4, 3, 3, 3}, 1, 1) ==
          Dims4{1, 4, 8, 8});
    CHECK(ops::conv2d_output_dims(Dims4{2, 1, 7, 5}, Dims4{2, 1, 3, 3}, 2, 0) ==
          Dims4{2, 2, 3, 2});
    Tensor<float> mismatched(Dims4{1, 2, 8, 8}, 1.0f);
    ops::ConvParams<float> p;
    p.kernel = Tensor<float>(Dims4{4, 3, 3, 3}, 0.1f);
    p.bias.assign(4, 0.0f);
    p.pad = 1;
    CHECK_THROWS_AS(ops::conv2d_forward(mismatched, p), ShapeError);
}

TEST_CASE("conv2d bias gradient accumulates one per output pixel") {
    Tensor<float> input(Dims4{1, 1, 2, 2}, {1, 2, 3, 4});
    ops::ConvParams<float> p;
    p.kernel = Tensor<float>(Dims4{1, 1, 3, 3}, 0.5f);
    p.bias = {0.0f};
    p.stride = 1;
    p.pad = 1;
    Tensor<float> grad_out(Dims4{1, 1, 2, 2}, 1.0f);
    const auto grads = ops::conv2d_backward(input, p, grad_out);
    CHECK(grads.bias[0] == doctest::Approx(4.0f));
    CHECK(grads.input.dims() == input.dims());
    CHECK(grads.kernel.dims() == p.kernel.dims());
}

TEST_CASE("conv2d backward matches central differences") {
    Rng rng(97);
    for (int it = 0; it < 6; ++it) {
        auto input = oracle::random_tensor(rng, Dims4{1, 2, 5, 4});
        const auto kernel = oracle::random_tensor(rng, Dims4{3, 2, 3, 3});
        std::vector<double> bias{rng.normal(), rng.normal(), rng.normal()};
        ops::ConvParams<double> p{kernel, bias, 1, 1};
        const auto probe =
            oracle::random_tensor(rng, ops::conv2d_output_dims(input.dims(), kernel.dims(), 1, 1));

        auto loss = [&]() {
            const auto out = ops::conv2d_forward(input, p);
            double acc = 0.0;
            for (std::int64_t i = 0; i < out.size(); ++i) acc += out[i] * probe[i];
            return acc;
        };

        const auto grads = ops::conv2d_backward(input, p, probe);
        auto check_tensor = [&](Tensor<double>& x, const Tensor<double>& analytic) {
            for (int c = 0; c < 5; ++c) {
                const std::int64_t i = std::int64_t(rng.uniform_int(std::uint64_t(x.size())));
                const double fd = oracle::central_diff(loss, &x[i], 1e-6);
                CHECK(oracle::rel_err(fd, analytic[i]) < 1e-6);
            }
        };
        check_tensor(input, grads.input);
        check_tensor(p.kernel, grads.kernel);
        for (std::size_t b = 0; b < bias.size(); ++b) {
            const double fd = oracle::central_diff(loss, &p.bias[b], 1e-6);
            CHECK(oracle::rel_err(fd, grads.bias[b]) < 1e-6);
        }
    }
}

TEST_CASE("stride-2 2x2 transpose conv paints disjoint blocks") {
    Tensor<float> input(Dims4{1, 1, 2, 2}, {1, 2, 3, 4});
    ops::ConvParams<float> p;
    p.kernel = Tensor<float>(Dims4{1, 1, 2, 2}, 1.0f);
    p.bias = {0.0f};
    p.stride = 2;
    p.pad = 0;
    const auto out = ops::conv2d_transpose_forward(input, p);
    REQUIRE(out.dims() == Dims4{1, 1, 4, 4});
    const std::vector<float> want{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
    for (std::int64_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(want[i]));
}

TEST_CASE("conv2d_transpose matches the scatter-add reference on random shapes") {
    Rng rng(43);
    for (int it = 0; it < 30; ++it) {
        const std::int64_t n = 1 + std::int64_t(rng.uniform_int(2));
        const std::int64_t cin = 1 + std::int64_t(rng.uniform_int(3));
        const std::int64_t cout = 1 + std::int64_t(rng.uniform_int(3));
        const std::int64_t k = 2 + std::int64_t(rng.uniform_int(2));
        const int stride = 1 + int(rng.uniform_int(2));
        const std::int64_t h = 1 + std::int64_t(rng.uniform_int(5));
        const std::int64_t w = 1 + std::int64_t(rng.uniform_int(5));

        const auto input = oracle::random_tensor(rng, Dims4{n, cin, h, w});
        const auto kernel = oracle::random_tensor(rng, Dims4{cin, cout, k, k});
        std::vector<double> bias(static_cast<std::size_t>(cout));
        for (auto& b : bias) b = rng.normal();

        ops::ConvParams<double> p{kernel, bias, stride, 0};
        const auto got = ops::conv2d_transpose_forward(input, p);
        const auto want = oracle::conv2d_transpose(input, kernel, bias, stride, 0);
        REQUIRE(got.dims() == want.dims());
        for (std::int64_t i = 0; i < got.size(); ++i)
            CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
}

TEST_CASE("conv and transpose conv with a shared kernel are adjoint") {
    Rng rng(11);
    for (int it = 0; it < 10; ++it) {
        const std::int64_t cin = 1 + std::int64_t(rng.uniform_int(3));
        const std::int64_t cout = 1 + std::int64_t(rng.uniform_int(3));
        const std::int64_t k = 2;
        const int stride = 2;
        const std::int64_t h = 2 * (1 + std::int64_t(rng.uniform_int(4)));
        const std::int64_t w = 2 * (1 + std::int64_t(rng.uniform_int(4)));

        const auto kernel = oracle::random_tensor(rng, Dims4{cout, cin, k, k});
        const auto x = oracle::random_tensor(rng, Dims4{1, cin, h, w});
        ops::ConvParams<double> fwd{kernel, {}, stride, 0};
        const auto ax = ops::conv2d_forward(x, fwd);
        const auto y = oracle::random_tensor(rng, ax.dims());

        ops::ConvParams<double> bwd{kernel, {}, stride, 0};
        const auto aty = ops::conv2d_transpose_forward(y, bwd);
        REQUIRE(aty.dims() == x.dims());

        double lhs = 0.0, rhs = 0.0;
        for (std::int64_t i = 0; i < ax.size(); ++i) lhs += ax[i] * y[i];
        for (std::int64_t i = 0; i < x.size(); ++i) rhs += x[i] * aty[i];
        CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
    }
}

TEST_CASE("conv2d_transpose backward matches central differences") {
    Rng rng(53);
    for (int it = 0; it < 4; ++it) {
        auto input = oracle::random_tensor(rng, Dims4{1, 3, 3, 4});
        const auto kernel = oracle::random_tensor(rng, Dims4{3, 2, 2, 2});
        std::vector<double> bias{rng.normal(), rng.normal()};
        ops::ConvParams<double> p{kernel, bias, 2, 0};
        const auto probe = oracle::random_tensor(
            rng, ops::conv2d_transpose_output_dims(input.dims(), kernel.dims(), 2, 0));

        auto loss = [&]() {
            const auto out = ops::conv2d_transpose_forward(input, p);
            double acc = 0.0;
            for (std::int64_t i = 0; i < out.size(); ++i) acc += out[i] * probe[i];
            return acc;
        };

        const auto grads = ops::conv2d_transpose_backward(input, p, probe);
        for (int c = 0; c < 5; ++c) {
            const std::int64_t i =
                std::int64_t(rng.uniform_int(std::uint64_t(p.kernel.size())));
            const double fd = oracle::central_diff(loss, &p.kernel[i], 1e-6);
            CHECK(oracle::rel_err(fd, grads.kernel[i]) < 1e-6);
        }
        for (int c = 0; c < 5; ++c) {
            const std::int64_t i =
                std::int64_t(rng.uniform_int(std::uint64_t(input.size())));
            const double fd = oracle::central_diff(loss, &input[i], 1e-6);
            CHECK(oracle::rel_err(fd, grads.input[i]) < 1e-6);
        }
        for (std::size_t b = 0; b < bias.size(); ++b) {
            const double fd = oracle::central_diff(loss, &p.bias[b], 1e-6);
            CHECK(oracle::rel_err(fd, grads.bias[b]) < 1e-6);
        }
    }
}

TEST_CASE("2x2 maxpool keeps the window maximum and remembers where it was") {
    Tensor<float> input(Dims4{1, 1, 2, 2}, {1, 2, 3, 4});
    const auto [out, idx] = ops::maxpool2x2_forward(input);
    REQUIRE(out.dims() == Dims4{1, 1, 1, 1});
    CHECK(out[0] == doctest::Approx(4.0f));
    CHECK(idx.argmax.size() == 1);
    CHECK(idx.argmax[0] == 3);

    Tensor<float> grad_out(Dims4{1, 1, 1, 1}, 2.5f);
    const auto grad_in = ops::maxpool2x2_backward(idx, grad_out);
    REQUIRE(grad_in.dims() == input.dims());
    CHECK(grad_in[0] == 0.0f);
    CHECK(grad_in[1] == 0.0f);
    CHECK(grad_in[2] == 0.0f);
    CHECK(grad_in[3] == doctest::Approx(2.5f));
}

TEST_CASE("five pools take 640 down to 20") {
    Dims4 d{1, 1, 640, 640};
    for (int i = 0; i < 5; ++i) d = ops::maxpool2x2_output_dims(d);
    CHECK(d.h == 20);
    CHECK(d.w == 20);
    CHECK_THROWS_AS(ops::maxpool2x2_output_dims(Dims4{1, 1, 7, 8}), ShapeError);
}

TEST_CASE("maxpool backward routes gradients only to the argmax elements") {
    Rng rng(5);
    const auto input = oracle::random_tensor(rng, Dims4{2, 3, 6, 4});
    const auto [out, idx] = ops::maxpool2x2_forward(input);
    const auto probe = oracle::random_tensor(rng, out.dims());
    const auto grad_in = ops::maxpool2x2_backward(idx, probe);

    double grad_sum = 0.0, probe_sum = 0.0;
    for (std::int64_t i = 0; i < grad_in.size(); ++i) grad_sum += grad_in[i];
    for (std::int64_t i = 0; i < probe.size(); ++i) probe_sum += probe[i];
    CHECK(grad_sum == doctest::Approx(probe_sum));

    std::int64_t nonzero = 0;
    for (std::int64_t i = 0; i < grad_in.size(); ++i)
        if (grad_in[i] != 0.0) ++nonzero;
    CHECK(nonzero == out.size());
}

TEST_CASE("relu clamps negatives and passes zero gradient at the origin") {
    Tensor<float> input(Dims4{1, 1, 1, 3}, {-1.0f, 0.0f, 2.0f});
    const auto out = ops::relu_forward(input);
    CHECK(out[0] == 0.0f);
    CHECK(out[1] == 0.0f);
    CHECK(out[2] == 2.0f);

    Tensor<float> grad_out(Dims4{1, 1, 1, 3}, 1.0f);
    const auto grad_in = ops::relu_backward(input, grad_out);
    CHECK(grad_in[0] == 0.0f);
    CHECK(grad_in[1] == 0.0f);
    CHECK(grad_in[2] == 1.0f);
}

TEST_CASE("channel softmax is uniform on equal logits and stable on huge ones") {
    Tensor<float> equal(Dims4{1, 3, 1, 1}, {0.0f, 0.0f, 0.0f});
    const auto u = ops::softmax_channels(equal);
    for (int c = 0; c < 3; ++c) CHECK(u.at(0, c, 0, 0) == doctest::Approx(1.0f / 3.0f));

    Tensor<float> huge(Dims4{1, 3, 1, 1}, {1000.0f, 0.0f, 0.0f});
    const auto s = ops::softmax_channels(huge);
    CHECK(std::isfinite(s.at(0, 0, 0, 0)));
    CHECK(s.at(0, 0, 0, 0) == doctest::Approx(1.0f));
    CHECK(s.at(0, 1, 0, 0) == doctest::Approx(0.0f));

    Tensor<double> rnd(Dims4{2, 4, 3, 3});
    Rng rng(9);
    for (std::int64_t i = 0; i < rnd.size(); ++i) rnd[i] = rng.normal() * 3.0;
    const auto p = ops::softmax_channels(rnd);
    for (std::int64_t n = 0; n < 2; ++n)
        for (std::int64_t y = 0; y < 3; ++y)
            for (std::int64_t x = 0; x < 3; ++x) {
                double sum = 0.0;
                for (std::int64_t c = 0; c < 4; ++c) sum += p.at(n, c, y, x);
                CHECK(sum == doctest::Approx(1.0));
            }
}

TEST_CASE("concat keeps the first argument's channels first and split inverts it") {
    Tensor<float> a(Dims4{1, 2, 4, 4});
    Tensor<float> b(Dims4{1, 3, 4, 4});
    for (std::int64_t i = 0; i < a.size(); ++i) a[i] = float(i);
    for (std::int64_t i = 0; i < b.size(); ++i) b[i] = float(100 + i);

    const auto cat = ops::concat_channels(a, b);
    REQUIRE(cat.dims() == Dims4{1, 5, 4, 4});
    CHECK(cat.at(0, 0, 0, 0) == a.at(0, 0, 0, 0));
    CHECK(cat.at(0, 1, 3, 3) == a.at(0, 1, 3, 3));
    CHECK(cat.at(0, 2, 0, 0) == b.at(0, 0, 0, 0));
    CHECK(cat.at(0, 4, 3, 3) == b.at(0, 2, 3, 3));

    const auto [fa, fb] = ops::split_channels(cat, 2);
    CHECK(fa == a);
    CHECK(fb == b);

    CHECK_THROWS_AS(ops::concat_channels(a, Tensor<float>(Dims4{1, 3, 4, 5})), ShapeError);
}

TEST_CASE("concat handles encoder-scale skip tensors") {
    Tensor<float> up(Dims4{1, 512, 40, 40}, 1.0f);
    Tensor<float> skip(Dims4{1, 512, 40, 40}, 2.0f);
    const auto cat = ops::concat_channels(skip, up);
    REQUIRE(cat.dims() == Dims4{1, 1024, 40, 40});
    CHECK(cat.at(0, 0, 0, 0) == 2.0f);
    CHECK(cat.at(0, 512, 0, 0) == 1.0f);
    CHECK(cat.at(0, 1023, 39, 39) == 1.0f);
}
