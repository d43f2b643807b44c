#include <CLI11.hpp>

#include <array>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fracseg/commands.hpp"
#include "fracseg/error.hpp"

namespace {

using namespace fracseg;

// Exit codes: 0 success, 2 configuration error, 3 data or shape error,
// 4 numeric failure.
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct ModelShapeFlags {
    std::string scale;
    int stages = 0;
    std::vector<int> widths;
    std::vector<int> repeats;

    void apply(unet::UNetConfig& model) const {
        if (scale == "full") model = unet::UNetConfig::full_scale();
        if (scale == "desk") model = unet::UNetConfig::desk_scale();
        if (stages > 0) {
            model.stages = stages;
            model.encoder_channels.resize(static_cast<std::size_t>(stages),
                                          model.encoder_channels.back());
            model.conv_repeats.resize(static_cast<std::size_t>(stages),
                                      model.conv_repeats.back());
        }
        if (!widths.empty()) {
            model.encoder_channels = widths;
            model.stages = static_cast<int>(widths.size());
            model.conv_repeats.resize(widths.size(),
                                      model.conv_repeats.empty() ? 2
                                                                 : model.conv_repeats.back());
        }
        if (!repeats.empty()) model.conv_repeats = repeats;
        model.validate();
    }
};

void add_model_flags(CLI::App* cmd, ModelShapeFlags& flags) {
    cmd->add_option("--model-scale", flags.scale, "architecture preset")
        ->check(CLI::IsMember({"full", "desk"}));
    cmd->add_option("--stages", flags.stages, "number of pooling stages");
    cmd->add_option("--widths", flags.widths, "per-stage encoder channel widths")
        ->delimiter(',');
    cmd->add_option("--repeats", flags.repeats, "per-stage conv repeat counts")->delimiter(',');
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fracture-surface segmentation toolkit"};
    app.require_subcommand(1);

    // dataset-build
    auto* build = app.add_subcommand(
        "dataset-build", "rasterize polygon annotations and cut training tiles");
    std::string build_annotations, build_images, build_out;
    int build_tile_size = 640;
    std::vector<double> build_ratios{0.8, 0.1, 0.1};
    std::uint64_t build_seed = 0;
    std::string build_config;
    build->add_option("--config", build_config, "INI file with long-option keys");
    build->add_option("--annotations", build_annotations, "VIA polygon JSON export")->required();
    build->add_option("--images", build_images, "directory holding the source micrographs")
        ->required();
    build->add_option("--out", build_out, "output dataset directory")->required();
    build->add_option("--tile-size", build_tile_size, "square tile edge, multiple of 32");
    build->add_option("--split-ratios", build_ratios, "train,val,test fractions")
        ->delimiter(',')
        ->expected(3);
    build->add_option("--seed", build_seed, "split-assignment seed");

    // train
    auto* train = app.add_subcommand("train", "train the segmentation network");
    std::string train_manifest, train_out;
    cli::RunConfig run;
    ModelShapeFlags train_model;
    std::string train_void_policy = "background";
    std::string train_config;
    train->add_option("--config", train_config, "INI file with long-option keys");
    train->add_option("--manifest", train_manifest, "dataset manifest JSON")->required();
    train->add_option("--out", train_out, "run directory")->required();
    train->add_option("--seed", run.seed, "run seed");
    train->add_option("--batch-size", run.batch_size);
    train->add_option("--epochs", run.epochs);
    train->add_option("--iters-per-epoch", run.iters_per_epoch);
    train->add_option("--val-iters", run.val_iters);
    train->add_option("--lr", run.adam.lr, "Adam learning rate");
    train->add_option("--brightness-threshold", run.brightness_threshold);
    train->add_flag("--deterministic,!--no-deterministic", run.deterministic,
                    "bit-reproducible execution");
    train->add_option("--void-policy", train_void_policy,
                      "unlabeled pixels: background (train on them) or ignore")
        ->check(CLI::IsMember({"background", "ignore"}));
    train->add_option("--encoder-weights", run.encoder_weights,
                      "weight file to import the encoder from");
    train->add_flag("--freeze-encoder", run.freeze_encoder,
                    "exclude encoder parameters from optimization");
    add_model_flags(train, train_model);

    // predict
    auto* predict = app.add_subcommand("predict", "classify every pixel of input images");
    std::string predict_weights, predict_out;
    std::vector<std::string> predict_images;
    cli::PredictOptions predict_options;
    std::optional<int> predict_brightness;
    std::string predict_config;
    predict->add_option("--config", predict_config, "INI file with long-option keys");
    predict->add_option("--weights", predict_weights, "trained weight file")->required();
    predict->add_option("--out", predict_out, "output directory")->required();
    predict->add_option("images", predict_images, "input images")->required();
    predict->add_flag("--overlay", predict_options.overlay, "write color overlays");
    predict->add_option("--brightness-threshold", predict_brightness,
                        "restrict area fractions to pixels at or below this intensity");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "run the evaluation protocol on a split");
    std::string eval_manifest, eval_split = "test", eval_out;
    cli::EvaluateOptions eval_options;
    std::optional<int> eval_brightness;
    std::string evaluate_config;
    evaluate->add_option("--config", evaluate_config, "INI file with long-option keys");
    evaluate->add_option("--manifest", eval_manifest, "dataset manifest JSON")->required();
    evaluate->add_option("--split", eval_split, "manifest split to evaluate");
    evaluate->add_option("--out", eval_out, "output directory")->required();
    evaluate->add_option("--weights", eval_options.weights_path,
                         "predict with this weight file");
    evaluate->add_option("--pred-dir", eval_options.pred_dir,
                         "use precomputed prediction masks instead");
    evaluate->add_option("--beta", eval_options.beta, "F-measure beta");
    evaluate->add_flag("--per-image", eval_options.per_image,
                       "also report per-image averaged ratios");
    evaluate->add_flag("--exclude-void", eval_options.exclude_void,
                       "headline the void-excluded variant");
    evaluate->add_option("--brightness-threshold", eval_brightness,
                         "drop pixels brighter than this from evaluation");

    // report
    auto* report = app.add_subcommand("report", "render a saved evaluation report as text");
    std::string report_input, report_out;
    report->add_option("--input", report_input, "eval_report.json produced by evaluate")
        ->required();
    report->add_option("--out", report_out, "also write the table to this file");

    // synth
    auto* synth = app.add_subcommand("synth", "generate a seeded synthetic dataset");
    std::string synth_out;
    std::uint64_t synth_seed = 0;
    int synth_count = 200, synth_size = 64;
    double synth_val = 0.2, synth_test = 0.0;
    synth->add_option("--out", synth_out, "output dataset directory")->required();
    synth->add_option("--seed", synth_seed);
    synth->add_option("--count", synth_count, "number of tiles");
    synth->add_option("--size", synth_size, "tile edge length");
    synth->add_option("--val-fraction", synth_val);
    synth->add_option("--test-fraction", synth_test);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    // Values from an INI file fill in whatever the command line left unset.
    const struct {
        CLI::App* sub;
        const std::string* path;
    } config_sources[] = {{build, &build_config},
                          {train, &train_config},
                          {predict, &predict_config},
                          {evaluate, &evaluate_config}};
    try {
        for (const auto& source : config_sources) {
            if (!source.sub->parsed() || source.path->empty()) continue;
            std::ifstream in(*source.path);
            if (!in) {
                std::cerr << "error: cannot open config file " << *source.path << "\n";
                return kExitConfig;
            }
            source.sub->allow_config_extras(CLI::config_extras_mode::error);
            source.sub->parse_from_stream(in);
        }
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*build) {
            const auto result = cli::cmd_dataset_build(
                build_annotations, build_images, build_out, build_tile_size,
                {build_ratios[0], build_ratios[1], build_ratios[2]}, build_seed);
            for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
            std::size_t tiles = 0;
            for (const auto& [name, entries] : result.manifest.splits) tiles += entries.size();
            std::cout << "wrote " << tiles << " tiles (train "
                      << result.manifest.splits.at("train").size() << ", val "
                      << result.manifest.splits.at("val").size() << ", test "
                      << result.manifest.splits.at("test").size() << ") to "
                      << result.manifest_path << "\n";
        } else if (*train) {
            run.void_policy = train_void_policy == "ignore" ? dataset::VoidPolicy::Ignore
                                                            : dataset::VoidPolicy::Background;
            train_model.apply(run.model);
            const auto result = cli::cmd_train(train_manifest, run, train_out);
            std::cout << "final weights: " << result.final_weights_path << "\n";
            std::cout << "best weights:  " << result.best_weights_path << "\n";
        } else if (*predict) {
            predict_options.brightness_threshold = predict_brightness;
            const auto result =
                cli::cmd_predict(predict_weights, predict_images, predict_out, predict_options);
            for (const auto& p : result.mask_paths) std::cout << p << "\n";
        } else if (*evaluate) {
            eval_options.brightness_threshold = eval_brightness;
            cli::cmd_evaluate(eval_manifest, eval_split, eval_options, eval_out);
        } else if (*report) {
            std::cout << cli::cmd_report(report_input, report_out);
        } else if (*synth) {
            const auto manifest = cli::write_synthetic_dataset(synth_out, synth_seed, synth_count,
                                                               synth_size, synth_val, synth_test);
            std::cout << "wrote " << synth_count << " synthetic tiles (train "
                      << manifest.splits.at("train").size() << ", val "
                      << manifest.splits.at("val").size() << ", test "
                      << manifest.splits.at("test").size() << ") to " << synth_out << "\n";
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const ShapeError& e) {
        std::cerr << "shape error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
