#include "fracseg/commands.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "fracseg/error.hpp"
#include "fracseg/image.hpp"
#include "fracseg/quantify.hpp"
#include "fracseg/raster.hpp"
#include "fracseg/rng.hpp"
#include "fracseg/synthetic.hpp"
#include "fracseg/tiling.hpp"
#include "fracseg/trainer.hpp"
#include "fracseg/via.hpp"
#include "fracseg/weights_io.hpp"

namespace fracseg::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create directory " + dir + ": " + ec.message());
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << text;
    if (!text.empty() && text.back() != '\n') out << "\n";
    if (!out) throw DataError("write failed: " + path);
}

json model_config_json(const unet::UNetConfig& model) {
    return {{"stages", model.stages},
            {"encoder_channels", model.encoder_channels},
            {"conv_repeats", model.conv_repeats},
            {"num_classes", model.num_classes},
            {"input_channels", model.input_channels}};
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

Tensor<float> image_to_tensor(const image::GrayImage& img) {
    Tensor<float> t({1, 1, img.h, img.w});
    float* dst = t.data();
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        dst[i] = static_cast<float>(img.pixels[i]) / 255.0f;
    }
    return t;
}

int next_multiple(int value, int factor) {
    return ((value + factor - 1) / factor) * factor;
}

} // namespace

std::string run_config_to_json(const RunConfig& config) {
    json j = {
        {"model", model_config_json(config.model)},
        {"adam",
         {{"lr", config.adam.lr},
          {"beta1", config.adam.beta1},
          {"beta2", config.adam.beta2},
          {"epsilon", config.adam.epsilon}}},
        {"batch_size", config.batch_size},
        {"epochs", config.epochs},
        {"iters_per_epoch", config.iters_per_epoch},
        {"val_iters", config.val_iters},
        {"seed", config.seed},
        {"deterministic", config.deterministic},
        {"void_policy",
         config.void_policy == dataset::VoidPolicy::Background ? "background" : "ignore"},
        {"brightness_threshold", config.brightness_threshold},
        {"encoder_weights", config.encoder_weights},
        {"freeze_encoder", config.freeze_encoder},
    };
    return j.dump(2);
}

DatasetBuildResult cmd_dataset_build(const std::string& via_json_path,
                                     const std::string& images_dir, const std::string& out_dir,
                                     int tile_size, std::array<double, 3> split_ratios,
                                     std::uint64_t seed) {
    for (double r : split_ratios) {
        if (r < 0.0) throw ConfigError("split ratios must be non-negative");
    }
    const double ratio_sum = split_ratios[0] + split_ratios[1] + split_ratios[2];
    if (std::abs(ratio_sum - 1.0) > 1e-9) {
        throw ConfigError("split ratios must sum to 1, got " + std::to_string(ratio_sum));
    }

    DatasetBuildResult result;
    via::AnnotationProject project = via::parse_via_file(via_json_path);
    result.warnings = project.warnings;

    ensure_dir(out_dir);
    ensure_dir(out_dir + "/tiles");
    ensure_dir(out_dir + "/masks");

    // Split assignment is by source image so tiles of one micrograph never
    // land in two splits.
    std::vector<std::string> sources;
    for (const auto& [filename, entry] : project.entries) sources.push_back(filename);
    Rng rng(seed);
    rng.shuffle(sources);
    const auto n = static_cast<double>(sources.size());
    const auto train_end = static_cast<std::size_t>(std::llround(split_ratios[0] * n));
    const auto val_end =
        static_cast<std::size_t>(std::llround((split_ratios[0] + split_ratios[1]) * n));

    result.manifest.tile_size = tile_size;
    result.manifest.splits["train"];
    result.manifest.splits["val"];
    result.manifest.splits["test"];

    for (std::size_t s = 0; s < sources.size(); ++s) {
        const std::string& filename = sources[s];
        const via::ImageAnnotations& entry = project.entries.at(filename);
        const std::string split = s < train_end ? "train" : (s < val_end ? "val" : "test");

        const std::string image_path = (fs::path(images_dir) / filename).string();
        image::GrayImage img = image::read_gray_png(image_path, &result.warnings);
        ClassMask mask = raster::rasterize(entry, img.h, img.w, &result.warnings);
        std::vector<tiling::Tile> tiles =
            tiling::tile(img, mask, tile_size, tile_size, &result.warnings);

        const std::string stem = stem_of(filename);
        for (const tiling::Tile& t : tiles) {
            const std::string tile_name = stem + "_y" + std::to_string(t.origin_y) + "_x" +
                                          std::to_string(t.origin_x) + ".png";
            image::write_gray_png(t.image, out_dir + "/tiles/" + tile_name);
            dataset::write_mask_png(t.mask, out_dir + "/masks/" + tile_name);
            result.manifest.splits[split].push_back({"tiles/" + tile_name, "masks/" + tile_name,
                                                     filename, t.origin_y, t.origin_x});
        }
    }

    result.manifest_path = out_dir + "/manifest.json";
    dataset::save_manifest(result.manifest, result.manifest_path);

    json echo = {{"command", "dataset-build"},
                 {"via_json", via_json_path},
                 {"images_dir", images_dir},
                 {"tile_size", tile_size},
                 {"split_ratios", split_ratios},
                 {"seed", seed}};
    write_text_file(out_dir + "/dataset_build_config.json", echo.dump(2));
    return result;
}

TrainResult cmd_train(const std::string& manifest_path, const RunConfig& config,
                      const std::string& out_dir) {
    if (config.epochs < 1 || config.iters_per_epoch < 1) {
        throw ConfigError("epochs and iterations per epoch must be >= 1");
    }
    if (config.val_iters < 0) throw ConfigError("validation iterations must be >= 0");

    ensure_dir(out_dir);
    write_text_file(out_dir + "/train_config.json", run_config_to_json(config));

    const dataset::DatasetManifest manifest = dataset::load_manifest(manifest_path);
    const std::string base_dir = fs::path(manifest_path).parent_path().string();

    Rng root(config.seed);
    const std::uint64_t init_seed = root.next();
    const std::uint64_t train_seed = root.next();
    const std::uint64_t val_seed = root.next();

    auto model = unet::build<float>(config.model, init_seed);
    if (!config.encoder_weights.empty()) {
        weights::import_encoder(model, config.encoder_weights, config.freeze_encoder);
    } else if (config.freeze_encoder) {
        unet::set_encoder_frozen(model, true);
    }

    dataset::BatchIterator train_iter(manifest, "train", base_dir, config.batch_size, train_seed,
                                      config.void_policy);
    const bool run_val = config.val_iters > 0;
    std::optional<dataset::BatchIterator> val_iter;
    if (run_val) {
        val_iter.emplace(manifest, "val", base_dir, config.batch_size, val_seed,
                         config.void_policy);
    }

    train::Trainer trainer(model, config.adam);

    TrainResult result;
    result.log_path = out_dir + "/log.jsonl";
    result.best_weights_path = out_dir + "/best.fseg";
    result.final_weights_path = out_dir + "/final.fseg";
    std::ofstream log(result.log_path);
    if (!log) throw DataError("cannot write " + result.log_path);

    double best_val_loss = std::numeric_limits<double>::infinity();
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        double train_loss = 0.0, train_acc = 0.0;
        for (int it = 0; it < config.iters_per_epoch; ++it) {
            const auto stats = trainer.step(train_iter.next());
            train_loss += stats.loss;
            train_acc += stats.accuracy;
        }
        train_loss /= config.iters_per_epoch;
        train_acc /= config.iters_per_epoch;

        double val_loss = 0.0, val_acc = 0.0;
        if (run_val) {
            for (int it = 0; it < config.val_iters; ++it) {
                const auto stats = trainer.measure(val_iter->next());
                val_loss += stats.loss;
                val_acc += stats.accuracy;
            }
            val_loss /= config.val_iters;
            val_acc /= config.val_iters;
        }

        json line = {{"epoch", epoch},
                     {"train_loss", train_loss},
                     {"train_acc", train_acc},
                     {"val_loss", val_loss},
                     {"val_acc", val_acc}};
        log << line.dump() << "\n";
        log.flush();
        std::cout << line.dump() << std::endl;

        const double selector = run_val ? val_loss : train_loss;
        if (selector < best_val_loss) {
            best_val_loss = selector;
            weights::save_weights(model, result.best_weights_path);
        }
    }
    weights::save_weights(model, result.final_weights_path);
    result.best_val_loss = best_val_loss;
    return result;
}

PredictResult cmd_predict(const std::string& weights_path,
                          const std::vector<std::string>& image_paths,
                          const std::string& out_dir, const PredictOptions& options) {
    if (image_paths.empty()) throw ConfigError("predict: no input images given");
    ensure_dir(out_dir);

    auto model = weights::load_weights(weights_path);
    const int factor = std::max<int>(32, static_cast<int>(model.config.downsample_factor()));

    json echo = {{"command", "predict"},
                 {"weights", weights_path},
                 {"images", image_paths},
                 {"overlay", options.overlay},
                 {"brightness_threshold", options.brightness_threshold
                                              ? json(*options.brightness_threshold)
                                              : json(nullptr)},
                 {"model", model_config_json(model.config)}};
    write_text_file(out_dir + "/predict_config.json", echo.dump(2));

    PredictResult result;
    for (const std::string& path : image_paths) {
        std::vector<std::string> warnings;
        const image::GrayImage img = image::read_gray_png(path, &warnings);
        for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";

        const int padded_h = next_multiple(img.h, factor);
        const int padded_w = next_multiple(img.w, factor);
        const image::GrayImage padded =
            (padded_h == img.h && padded_w == img.w) ? img
                                                     : image::reflect_pad(img, padded_h, padded_w);

        const Tensor<float> input = image_to_tensor(padded);
        const Tensor<float> logits = unet::forward(model, input);

        // crop the logits back to the source size before classification
        Tensor<float> cropped({1, logits.dims().c, img.h, img.w});
        for (std::int64_t c = 0; c < logits.dims().c; ++c) {
            const float* src = logits.plane(0, c);
            float* dst = cropped.plane(0, c);
            for (int y = 0; y < img.h; ++y) {
                std::copy(src + static_cast<std::size_t>(y) * padded_w,
                          src + static_cast<std::size_t>(y) * padded_w + img.w,
                          dst + static_cast<std::size_t>(y) * img.w);
            }
        }
        const ClassMask mask = quantify::classify(cropped);

        const std::string stem = stem_of(path);
        const std::string mask_path = out_dir + "/" + stem + "_mask.png";
        dataset::write_mask_png(mask, mask_path);
        result.mask_paths.push_back(mask_path);

        if (options.overlay) {
            const image::RgbImage colored = quantify::overlay(img, mask);
            image::write_rgb_png(colored, out_dir + "/" + stem + "_overlay.png");
        }

        BoolMask evaluable;
        const BoolMask* evaluable_ptr = nullptr;
        if (options.brightness_threshold) {
            evaluable = dataset::brightness_mask(img, *options.brightness_threshold);
            evaluable_ptr = &evaluable;
        }
        const auto fractions = quantify::area_fractions(mask, evaluable_ptr);
        write_text_file(out_dir + "/" + stem + "_fractions.json",
                        quantify::area_fractions_to_json(fractions));
    }
    return result;
}

metrics::EvalReport cmd_evaluate(const std::string& manifest_path, const std::string& split,
                                 const EvaluateOptions& options, const std::string& out_dir) {
    const bool have_weights = !options.weights_path.empty();
    const bool have_pred_dir = !options.pred_dir.empty();
    if (have_weights == have_pred_dir) {
        throw ConfigError("evaluate needs exactly one of --weights or --pred-dir");
    }

    const dataset::DatasetManifest manifest = dataset::load_manifest(manifest_path);
    const std::string base_dir = fs::path(manifest_path).parent_path().string();
    auto split_it = manifest.splits.find(split);
    if (split_it == manifest.splits.end() || split_it->second.empty()) {
        throw DataError("manifest split \"" + split + "\" is missing or empty");
    }

    std::optional<unet::UNetModel<float>> model;
    if (have_weights) model = weights::load_weights(options.weights_path);

    std::vector<metrics::EvalPair> pairs;
    for (const dataset::ManifestEntry& entry : split_it->second) {
        metrics::EvalPair pair;
        pair.gt = dataset::read_mask_png(dataset::resolve_path(base_dir, entry.mask));
        const std::string image_path = dataset::resolve_path(base_dir, entry.image);
        pair.image = image::read_gray_png(image_path);
        if (have_weights) {
            const Tensor<float> input = image_to_tensor(*pair.image);
            pair.pred = quantify::classify(unet::forward(*model, input));
        } else {
            const std::string pred_path =
                options.pred_dir + "/" + stem_of(entry.image) + "_mask.png";
            pair.pred = dataset::read_mask_png(pred_path);
        }
        pairs.push_back(std::move(pair));
    }

    metrics::EvalOptions eval_options;
    eval_options.brightness_threshold = options.brightness_threshold;
    eval_options.beta = options.beta;
    eval_options.per_image = options.per_image;
    const metrics::EvalReport report = metrics::evaluate_pair_set(pairs, eval_options);

    ensure_dir(out_dir);
    json echo = {{"command", "evaluate"},
                 {"manifest", manifest_path},
                 {"split", split},
                 {"weights", options.weights_path},
                 {"pred_dir", options.pred_dir},
                 {"beta", options.beta},
                 {"per_image", options.per_image},
                 {"exclude_void", options.exclude_void},
                 {"brightness_threshold", options.brightness_threshold
                                              ? json(*options.brightness_threshold)
                                              : json(nullptr)}};
    write_text_file(out_dir + "/evaluate_config.json", echo.dump(2));
    write_text_file(out_dir + "/eval_report.json", metrics::report_to_json(report));
    write_text_file(out_dir + "/eval_report.txt", metrics::report_to_text(report));

    std::cout << metrics::report_to_text(report);
    const auto& headline = options.exclude_void ? report.void_excluded : report.with_void;
    std::cout << "\nmean IoU (" << (options.exclude_void ? "void excluded" : "with void")
              << "): " << (headline.mean ? std::to_string(*headline.mean) : "undefined") << "\n";
    return report;
}

std::string cmd_report(const std::string& report_json_path, const std::string& out_path) {
    std::ifstream in(report_json_path);
    if (!in) throw DataError("cannot open report: " + report_json_path);
    std::ostringstream buf;
    buf << in.rdbuf();
    const metrics::EvalReport report = metrics::report_from_json(buf.str());
    const std::string text = metrics::report_to_text(report);
    if (!out_path.empty()) write_text_file(out_path, text);
    return text;
}

dataset::DatasetManifest write_synthetic_dataset(const std::string& out_dir, std::uint64_t seed,
                                                 int count, int size, double val_fraction,
                                                 double test_fraction) {
    if (count < 1) throw ConfigError("synthetic dataset needs at least one tile");
    if (val_fraction < 0 || test_fraction < 0 || val_fraction + test_fraction > 1.0) {
        throw ConfigError("synthetic val/test fractions must be non-negative and sum to <= 1");
    }
    if (size % 32 != 0) {
        throw ConfigError("synthetic tile size must be a multiple of 32 to match the tiling "
                          "contract, got " +
                          std::to_string(size));
    }

    ensure_dir(out_dir);
    ensure_dir(out_dir + "/tiles");
    ensure_dir(out_dir + "/masks");

    const auto tiles = synthetic::make_dataset(seed, count, size);
    const int val_count = static_cast<int>(std::llround(val_fraction * count));
    const int test_count = static_cast<int>(std::llround(test_fraction * count));
    const int train_count = count - val_count - test_count;

    dataset::DatasetManifest manifest;
    manifest.tile_size = size;
    manifest.splits["train"];
    manifest.splits["val"];
    manifest.splits["test"];
    for (int i = 0; i < count; ++i) {
        const std::string name = "synthetic_" + std::to_string(i) + ".png";
        image::write_gray_png(tiles[static_cast<std::size_t>(i)].image,
                              out_dir + "/tiles/" + name);
        dataset::write_mask_png(tiles[static_cast<std::size_t>(i)].mask,
                                out_dir + "/masks/" + name);
        const std::string split =
            i < train_count ? "train" : (i < train_count + val_count ? "val" : "test");
        manifest.splits[split].push_back({"tiles/" + name, "masks/" + name, name, 0, 0});
    }
    dataset::save_manifest(manifest, out_dir + "/manifest.json");

    json echo = {{"command", "synth"}, {"seed", seed},   {"count", count},
                 {"size", size},       {"val_fraction", val_fraction},
                 {"test_fraction", test_fraction}};
    write_text_file(out_dir + "/synth_config.json", echo.dump(2));
    return manifest;
}

} // namespace fracseg::cli
