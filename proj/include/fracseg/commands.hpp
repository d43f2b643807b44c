#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fracseg/adam.hpp"
#include "fracseg/dataset.hpp"
#include "fracseg/metrics.hpp"
#include "fracseg/unet.hpp"

namespace fracseg::cli {

// Every field defaults to the published training protocol; commands echo the
// resolved values into their run directory so runs can be audited and
// replayed.
struct RunConfig {
    unet::UNetConfig model = unet::UNetConfig::full_scale();
    optim::AdamHyper adam;
    int batch_size = 4;
    int epochs = 40;
    int iters_per_epoch = 200;
    int val_iters = 100;
    std::uint64_t seed = 0;
    bool deterministic = true;
    dataset::VoidPolicy void_policy = dataset::VoidPolicy::Background;
    int brightness_threshold = 220;
    std::string encoder_weights;
    bool freeze_encoder = false;
};

std::string run_config_to_json(const RunConfig& config);

struct DatasetBuildResult {
    dataset::DatasetManifest manifest;
    std::string manifest_path;
    std::vector<std::string> warnings;
};

DatasetBuildResult cmd_dataset_build(const std::string& via_json_path,
                                     const std::string& images_dir, const std::string& out_dir,
                                     int tile_size, std::array<double, 3> split_ratios,
                                     std::uint64_t seed);

struct TrainResult {
    std::string best_weights_path;
    std::string final_weights_path;
    std::string log_path;
    double best_val_loss = 0.0;
};

TrainResult cmd_train(const std::string& manifest_path, const RunConfig& config,
                      const std::string& out_dir);

struct PredictOptions {
    bool overlay = false;
    std::optional<int> brightness_threshold; // restricts area-fraction counting
};

struct PredictResult {
    std::vector<std::string> mask_paths;
};

PredictResult cmd_predict(const std::string& weights_path,
                          const std::vector<std::string>& image_paths,
                          const std::string& out_dir, const PredictOptions& options);

struct EvaluateOptions {
    std::string weights_path; // exactly one of weights_path / pred_dir
    std::string pred_dir;     // holds <tile stem>_mask.png files
    std::optional<int> brightness_threshold;
    double beta = 1.0;
    bool per_image = false;
    bool exclude_void = false; // picks the headline variant printed at the end
};

metrics::EvalReport cmd_evaluate(const std::string& manifest_path, const std::string& split,
                                 const EvaluateOptions& options, const std::string& out_dir);

// Renders a saved evaluation report as the plain-text table.
std::string cmd_report(const std::string& report_json_path, const std::string& out_path);

// Writes a seeded synthetic dataset (tiles, masks, manifest) under out_dir.
dataset::DatasetManifest write_synthetic_dataset(const std::string& out_dir, std::uint64_t seed,
                                                 int count, int size, double val_fraction,
                                                 double test_fraction);

} // namespace fracseg::cli
