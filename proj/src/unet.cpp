#include "fracseg/unet.hpp"

#include <cmath>
#include <string>

#include "fracseg/error.hpp"
#include "fracseg/rng.hpp"

namespace fracseg::unet {

void UNetConfig::validate() const {
    if (stages < 1) throw ConfigError("UNetConfig: stages must be >= 1");
    if (static_cast<int>(encoder_channels.size()) != stages) {
        throw ConfigError("UNetConfig: encoder_channels has " +
                          std::to_string(encoder_channels.size()) + " entries for " +
                          std::to_string(stages) + " stages");
    }
    if (static_cast<int>(conv_repeats.size()) != stages) {
        throw ConfigError("UNetConfig: conv_repeats has " + std::to_string(conv_repeats.size()) +
                          " entries for " + std::to_string(stages) + " stages");
    }
    for (int c : encoder_channels) {
        if (c < 1) throw ConfigError("UNetConfig: encoder channel widths must be >= 1");
    }
    for (int r : conv_repeats) {
        if (r < 1) throw ConfigError("UNetConfig: conv_repeats entries must be >= 1");
    }
    if (num_classes < 2) throw ConfigError("UNetConfig: num_classes must be >= 2");
    if (input_channels < 1) throw ConfigError("UNetConfig: input_channels must be >= 1");
}

Dims4 bottleneck_dims(const UNetConfig& config, std::int64_t h, std::int64_t w) {
    config.validate();
    const std::int64_t f = config.downsample_factor();
    if (h % f != 0 || w % f != 0) {
        throw ShapeError("bottleneck_dims: input " + std::to_string(h) + "x" + std::to_string(w) +
                         " not divisible by " + std::to_string(f));
    }
    return {1, config.encoder_channels.back(), h / f, w / f};
}

namespace {

template <typename T>
ops::ConvParams<T> make_conv(Rng& rng, int c_out, int c_in, int k, int pad) {
    ops::ConvParams<T> p;
    p.kernel = Tensor<T>({c_out, c_in, k, k});
    p.bias.assign(static_cast<std::size_t>(c_out), T(0));
    p.stride = 1;
    p.pad = pad;
    const double stddev = std::sqrt(2.0 / (double(c_in) * k * k));
    for (std::int64_t i = 0; i < p.kernel.size(); ++i) {
        p.kernel[i] = static_cast<T>(rng.normal() * stddev);
    }
    return p;
}

// Transpose-conv kernel layout is (C_in, C_out, kH, kW).
template <typename T>
ops::ConvParams<T> make_upconv(Rng& rng, int c_in, int c_out) {
    ops::ConvParams<T> p;
    p.kernel = Tensor<T>({c_in, c_out, 2, 2});
    p.bias.assign(static_cast<std::size_t>(c_out), T(0));
    p.stride = 2;
    p.pad = 0;
    const double stddev = std::sqrt(2.0 / (double(c_in) * 2 * 2));
    for (std::int64_t i = 0; i < p.kernel.size(); ++i) {
        p.kernel[i] = static_cast<T>(rng.normal() * stddev);
    }
    return p;
}

// Channel width entering the transpose conv of stage s (0-based).
int up_in_channels(const UNetConfig& cfg, int s) {
    return (s == cfg.stages - 1) ? cfg.encoder_channels[static_cast<std::size_t>(s)]
                                 : cfg.encoder_channels[static_cast<std::size_t>(s + 1)];
}

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
    if (dst.dims() != src.dims()) {
        throw ShapeError("gradient join: dims " + dst.dims().str() + " vs " + src.dims().str());
    }
    T* d = dst.data();
    const T* s = src.data();
    for (std::int64_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

} // namespace

template <typename T>
UNetModel<T> build(const UNetConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);

    UNetModel<T> model;
    model.config = config;
    model.enc.resize(static_cast<std::size_t>(config.stages));
    model.up.resize(static_cast<std::size_t>(config.stages));
    model.dec.resize(static_cast<std::size_t>(config.stages));

    // Parameters are drawn in parameter_views order so the seed pins the
    // entire initialization.
    int prev = config.input_channels;
    for (int s = 0; s < config.stages; ++s) {
        const int ch = config.encoder_channels[static_cast<std::size_t>(s)];
        for (int i = 0; i < config.conv_repeats[static_cast<std::size_t>(s)]; ++i) {
            model.enc[static_cast<std::size_t>(s)].push_back(
                make_conv<T>(rng, ch, i == 0 ? prev : ch, 3, 1));
        }
        prev = ch;
    }
    for (int s = config.stages - 1; s >= 0; --s) {
        const int ch = config.encoder_channels[static_cast<std::size_t>(s)];
        model.up[static_cast<std::size_t>(s)] = make_upconv<T>(rng, up_in_channels(config, s), ch);
        for (int i = 0; i < config.conv_repeats[static_cast<std::size_t>(s)]; ++i) {
            model.dec[static_cast<std::size_t>(s)].push_back(
                make_conv<T>(rng, ch, i == 0 ? 2 * ch : ch, 3, 1));
        }
    }
    model.classifier = make_conv<T>(rng, config.num_classes, config.encoder_channels[0], 1, 0);
    return model;
}

template <typename T>
Tensor<T> forward(const UNetModel<T>& model, const Tensor<T>& input, ForwardContext<T>* ctx) {
    const UNetConfig& cfg = model.config;
    const Dims4& d = input.dims();
    if (d.c != cfg.input_channels) {
        throw ShapeError("unet forward: input has C=" + std::to_string(d.c) + ", model expects " +
                         std::to_string(cfg.input_channels));
    }
    const std::int64_t f = cfg.downsample_factor();
    if (d.h % f != 0 || d.w % f != 0) {
        throw ShapeError("unet forward: input " + std::to_string(d.h) + "x" + std::to_string(d.w) +
                         " not divisible by " + std::to_string(f) +
                         "; pad the image first (the prediction path reflect-pads and crops)");
    }

    const auto S = static_cast<std::size_t>(cfg.stages);
    if (ctx) {
        *ctx = ForwardContext<T>{};
        ctx->input = input;
        ctx->enc_in.resize(S);
        ctx->enc_pre.resize(S);
        ctx->skips.resize(S);
        ctx->pool_idx.resize(S);
        ctx->up_in.resize(S);
        ctx->dec_in.resize(S);
        ctx->dec_pre.resize(S);
    }

    std::vector<Tensor<T>> skips(S);
    Tensor<T> x = input;
    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t i = 0; i < model.enc[s].size(); ++i) {
            if (ctx) ctx->enc_in[s].push_back(x);
            Tensor<T> z = ops::conv2d_forward(x, model.enc[s][i]);
            x = ops::relu_forward(z);
            if (ctx) ctx->enc_pre[s].push_back(std::move(z));
        }
        skips[s] = std::move(x);
        auto [pooled, idx] = ops::maxpool2x2_forward(skips[s]);
        x = std::move(pooled);
        if (ctx) {
            ctx->skips[s] = skips[s];
            ctx->pool_idx[s] = std::move(idx);
        }
    }

    for (std::size_t si = S; si-- > 0;) {
        if (ctx) ctx->up_in[si] = x;
        // concat_channels asserts at every stage that the skip and the
        // upsampled map agree on H, W
        Tensor<T> upped = ops::conv2d_transpose_forward(x, model.up[si]);
        x = ops::concat_channels(skips[si], upped);
        skips[si] = Tensor<T>{};
        for (std::size_t i = 0; i < model.dec[si].size(); ++i) {
            if (ctx) ctx->dec_in[si].push_back(x);
            Tensor<T> z = ops::conv2d_forward(x, model.dec[si][i]);
            x = ops::relu_forward(z);
            if (ctx) ctx->dec_pre[si].push_back(std::move(z));
        }
    }

    Tensor<T> logits = ops::conv2d_forward(x, model.classifier);
    if (ctx) {
        ctx->classifier_in = std::move(x);
        ctx->valid = true;
    }
    return logits;
}

template <typename T>
UNetGradients<T> zero_gradients(const UNetModel<T>& model) {
    UNetGradients<T> g;
    const auto S = model.enc.size();
    g.enc.resize(S);
    g.up.resize(S);
    g.dec.resize(S);
    for (std::size_t s = 0; s < S; ++s) {
        for (const auto& layer : model.enc[s]) {
            g.enc[s].push_back(
                {Tensor<T>(layer.kernel.dims()), std::vector<T>(layer.bias.size(), T(0))});
        }
        g.up[s] = {Tensor<T>(model.up[s].kernel.dims()),
                   std::vector<T>(model.up[s].bias.size(), T(0))};
        for (const auto& layer : model.dec[s]) {
            g.dec[s].push_back(
                {Tensor<T>(layer.kernel.dims()), std::vector<T>(layer.bias.size(), T(0))});
        }
    }
    g.classifier = {Tensor<T>(model.classifier.kernel.dims()),
                    std::vector<T>(model.classifier.bias.size(), T(0))};
    return g;
}

template <typename T>
UNetGradients<T> backward(const UNetModel<T>& model, const ForwardContext<T>& ctx,
                          const Tensor<T>& grad_logits) {
    if (!ctx.valid) {
        throw ShapeError("unet backward: no cached forward pass; run forward with a context");
    }
    const auto S = model.enc.size();
    UNetGradients<T> g = zero_gradients(model);

    auto cls = ops::conv2d_backward(ctx.classifier_in, model.classifier, grad_logits);
    g.classifier.kernel = std::move(cls.kernel);
    g.classifier.bias = std::move(cls.bias);
    Tensor<T> grad_x = std::move(cls.input);

    // Decoder stages unwind in reverse execution order (stage 0 ran last).
    // Each stage leaves the gradient on its skip tensor behind; the final
    // transpose conv hands the gradient on the bottleneck to the encoder walk.
    std::vector<Tensor<T>> grad_skip(S);
    for (std::size_t si = 0; si < S; ++si) {
        for (std::size_t i = model.dec[si].size(); i-- > 0;) {
            Tensor<T> grad_z = ops::relu_backward(ctx.dec_pre[si][i], grad_x);
            auto cg = ops::conv2d_backward(ctx.dec_in[si][i], model.dec[si][i], grad_z);
            g.dec[si][i].kernel = std::move(cg.kernel);
            g.dec[si][i].bias = std::move(cg.bias);
            grad_x = std::move(cg.input);
        }
        auto [gs, grad_up] = ops::split_channels(grad_x, ctx.skips[si].dims().c);
        grad_skip[si] = std::move(gs);
        auto ug = ops::conv2d_transpose_backward(ctx.up_in[si], model.up[si], grad_up);
        g.up[si].kernel = std::move(ug.kernel);
        g.up[si].bias = std::move(ug.bias);
        grad_x = std::move(ug.input); // grad on up_in[si]
    }

    // Encoder walk. grad_x currently holds the gradient on the bottleneck
    // (the pool output of the last stage). Each stage output feeds both its
    // pool and the decoder skip, so the two gradient branches add.
    for (std::size_t s = S; s-- > 0;) {
        Tensor<T> grad_stage_out = ops::maxpool2x2_backward(ctx.pool_idx[s], grad_x);
        add_into(grad_stage_out, grad_skip[s]);
        grad_skip[s] = Tensor<T>{};
        grad_x = std::move(grad_stage_out);
        for (std::size_t i = model.enc[s].size(); i-- > 0;) {
            Tensor<T> grad_z = ops::relu_backward(ctx.enc_pre[s][i], grad_x);
            auto cg = ops::conv2d_backward(ctx.enc_in[s][i], model.enc[s][i], grad_z);
            g.enc[s][i].kernel = std::move(cg.kernel);
            g.enc[s][i].bias = std::move(cg.bias);
            grad_x = std::move(cg.input);
        }
    }

    if (!model.frozen.empty()) {
        auto grads = gradient_views(model, g);
        for (auto& view : grads) {
            if (model.frozen.count(view.name)) {
                std::fill(view.data, view.data + view.len, T(0));
            }
        }
    }
    return g;
}

namespace {

// Shared traversal: visit(prefix, kernel_tensor&, bias_vector&) for every
// layer, in the stable parameter order.
template <typename Model, typename Fn>
void visit_layers(Model& model, Fn&& visit) {
    const int S = model.config.stages;
    for (int s = 0; s < S; ++s) {
        auto& stage = model.enc[static_cast<std::size_t>(s)];
        for (std::size_t i = 0; i < stage.size(); ++i) {
            visit("enc" + std::to_string(s + 1) + ".conv" + std::to_string(i + 1),
                  stage[i].kernel, stage[i].bias);
        }
    }
    for (int s = S - 1; s >= 0; --s) {
        auto& upl = model.up[static_cast<std::size_t>(s)];
        visit("dec" + std::to_string(s + 1) + ".up", upl.kernel, upl.bias);
        auto& stage = model.dec[static_cast<std::size_t>(s)];
        for (std::size_t i = 0; i < stage.size(); ++i) {
            visit("dec" + std::to_string(s + 1) + ".conv" + std::to_string(i + 1),
                  stage[i].kernel, stage[i].bias);
        }
    }
    visit("classifier", model.classifier.kernel, model.classifier.bias);
}

// Gradient traversal in exactly the same order.
template <typename Model, typename Grads, typename Fn>
void visit_grad_layers(const Model& model, Grads& grads, Fn&& visit) {
    const int S = model.config.stages;
    for (int s = 0; s < S; ++s) {
        auto& stage = grads.enc[static_cast<std::size_t>(s)];
        for (std::size_t i = 0; i < stage.size(); ++i) {
            visit("enc" + std::to_string(s + 1) + ".conv" + std::to_string(i + 1),
                  stage[i].kernel, stage[i].bias);
        }
    }
    for (int s = S - 1; s >= 0; --s) {
        visit("dec" + std::to_string(s + 1) + ".up", grads.up[static_cast<std::size_t>(s)].kernel,
              grads.up[static_cast<std::size_t>(s)].bias);
        auto& stage = grads.dec[static_cast<std::size_t>(s)];
        for (std::size_t i = 0; i < stage.size(); ++i) {
            visit("dec" + std::to_string(s + 1) + ".conv" + std::to_string(i + 1),
                  stage[i].kernel, stage[i].bias);
        }
    }
    visit("classifier", grads.classifier.kernel, grads.classifier.bias);
}

} // namespace

template <typename T>
std::vector<ParamView<T>> parameter_views(UNetModel<T>& model) {
    std::vector<ParamView<T>> out;
    visit_layers(model, [&](const std::string& name, Tensor<T>& kernel, std::vector<T>& bias) {
        out.push_back({name + ".kernel", kernel.data(), static_cast<std::size_t>(kernel.size()),
                       4, kernel.dims()});
        out.push_back({name + ".bias", bias.data(), bias.size(), 1,
                       Dims4{static_cast<std::int64_t>(bias.size()), 1, 1, 1}});
    });
    return out;
}

template <typename T>
std::vector<ParamView<const T>> parameter_views(const UNetModel<T>& model) {
    std::vector<ParamView<const T>> out;
    visit_layers(const_cast<UNetModel<T>&>(model),
                 [&](const std::string& name, const Tensor<T>& kernel,
                     const std::vector<T>& bias) {
                     out.push_back({name + ".kernel", kernel.data(),
                                    static_cast<std::size_t>(kernel.size()), 4, kernel.dims()});
                     out.push_back({name + ".bias", bias.data(), bias.size(), 1,
                                    Dims4{static_cast<std::int64_t>(bias.size()), 1, 1, 1}});
                 });
    return out;
}

template <typename T>
std::vector<ParamView<T>> gradient_views(const UNetModel<T>& model, UNetGradients<T>& grads) {
    std::vector<ParamView<T>> out;
    visit_grad_layers(model, grads,
                      [&](const std::string& name, Tensor<T>& kernel, std::vector<T>& bias) {
                          out.push_back({name + ".kernel", kernel.data(),
                                         static_cast<std::size_t>(kernel.size()), 4,
                                         kernel.dims()});
                          out.push_back({name + ".bias", bias.data(), bias.size(), 1,
                                         Dims4{static_cast<std::int64_t>(bias.size()), 1, 1, 1}});
                      });
    return out;
}

template <typename T>
std::vector<std::string> parameter_names(const UNetModel<T>& model) {
    std::vector<std::string> names;
    for (const auto& view : parameter_views(model)) names.push_back(view.name);
    return names;
}

template <typename T>
std::int64_t parameter_count(const UNetModel<T>& model) {
    std::int64_t count = 0;
    for (const auto& view : parameter_views(model)) {
        count += static_cast<std::int64_t>(view.len);
    }
    return count;
}

template <typename T>
void set_encoder_frozen(UNetModel<T>& model, bool frozen) {
    for (const auto& name : parameter_names(model)) {
        if (name.rfind("enc", 0) == 0) {
            if (frozen) {
                model.frozen.insert(name);
            } else {
                model.frozen.erase(name);
            }
        }
    }
}

template <typename From, typename To>
UNetModel<To> convert_model(const UNetModel<From>& model) {
    UNetModel<To> out;
    out.config = model.config;
    out.frozen = model.frozen;
    const auto S = model.enc.size();
    out.enc.resize(S);
    out.up.resize(S);
    out.dec.resize(S);
    auto conv_params = [](const ops::ConvParams<From>& p) {
        ops::ConvParams<To> q;
        q.kernel = p.kernel.template cast<To>();
        q.bias.assign(p.bias.begin(), p.bias.end());
        q.stride = p.stride;
        q.pad = p.pad;
        return q;
    };
    for (std::size_t s = 0; s < S; ++s) {
        for (const auto& layer : model.enc[s]) out.enc[s].push_back(conv_params(layer));
        out.up[s] = conv_params(model.up[s]);
        for (const auto& layer : model.dec[s]) out.dec[s].push_back(conv_params(layer));
    }
    out.classifier = conv_params(model.classifier);
    return out;
}

#define FRACSEG_INSTANTIATE_UNET(T)                                                             \
    template UNetModel<T> build<T>(const UNetConfig&, std::uint64_t);                           \
    template Tensor<T> forward<T>(const UNetModel<T>&, const Tensor<T>&, ForwardContext<T>*);   \
    template UNetGradients<T> backward<T>(const UNetModel<T>&, const ForwardContext<T>&,        \
                                          const Tensor<T>&);                                    \
    template UNetGradients<T> zero_gradients<T>(const UNetModel<T>&);                           \
    template std::vector<ParamView<T>> parameter_views<T>(UNetModel<T>&);                       \
    template std::vector<ParamView<const T>> parameter_views<T>(const UNetModel<T>&);           \
    template std::vector<ParamView<T>> gradient_views<T>(const UNetModel<T>&,                   \
                                                         UNetGradients<T>&);                    \
    template std::vector<std::string> parameter_names<T>(const UNetModel<T>&);                  \
    template std::int64_t parameter_count<T>(const UNetModel<T>&);                              \
    template void set_encoder_frozen<T>(UNetModel<T>&, bool);

FRACSEG_INSTANTIATE_UNET(float)
FRACSEG_INSTANTIATE_UNET(double)

template UNetModel<double> convert_model<float, double>(const UNetModel<float>&);
template UNetModel<float> convert_model<double, float>(const UNetModel<double>&);

} // namespace fracseg::unet
