#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fracseg/image.hpp"
#include "fracseg/loss.hpp"
#include "fracseg/mask.hpp"
#include "fracseg/rng.hpp"
#include "fracseg/tensor.hpp"

namespace fracseg::dataset {

struct ManifestEntry {
    std::string image;  // tile image path, relative to the manifest
    std::string mask;   // tile mask path
    std::string source; // source micrograph the tile was cut from
    int origin_y = 0;
    int origin_x = 0;
};

struct DatasetManifest {
    int tile_size = 0;
    std::map<std::string, std::vector<ManifestEntry>> splits;
};

void save_manifest(const DatasetManifest& manifest, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

// Masks travel as single-channel 8-bit PNGs holding the class ids directly.
void write_mask_png(const ClassMask& mask, const std::string& path);
ClassMask read_mask_png(const std::string& path);

// Evaluable iff intensity <= threshold. The default screens out saturated
// highlights.
BoolMask brightness_mask(const image::GrayImage& img, int threshold = 220);

// What training does with unlabeled-void pixels: treat them as background,
// or keep the void id so the loss skips them.
enum class VoidPolicy { Background, Ignore };

struct SampleBatch {
    Tensor<float> input;     // (N,1,H,W), pixel values scaled to [0,1]
    optim::MaskBatch target; // (N,H,W) class ids
};

// Draws uniformly shuffled batches, reshuffling whenever fewer than
// batch_size samples remain. The delivered sequence depends only on
// (manifest split, batch_size, seed, policy).
class BatchIterator {
  public:
    BatchIterator(const DatasetManifest& manifest, const std::string& split,
                  const std::string& base_dir, int batch_size, std::uint64_t seed,
                  VoidPolicy policy = VoidPolicy::Background);

    SampleBatch next();

    int sample_count() const { return static_cast<int>(entries_.size()); }

  private:
    struct CachedTile {
        image::GrayImage image;
        ClassMask mask;
    };
    const CachedTile& load(std::size_t entry_index);

    std::vector<ManifestEntry> entries_;
    std::vector<CachedTile> cache_;
    std::vector<char> cached_;
    std::string base_dir_;
    int batch_size_;
    int tile_size_;
    VoidPolicy policy_;
    Rng rng_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
};

// Joins a manifest-relative path onto the manifest's directory.
std::string resolve_path(const std::string& base_dir, const std::string& relative);

} // namespace fracseg::dataset
