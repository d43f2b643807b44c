#include "fracseg/dataset.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>

#include "fracseg/error.hpp"

namespace fracseg::dataset {

namespace {

using nlohmann::json;

} // namespace

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
    json splits = json::object();
    for (const auto& [name, entries] : manifest.splits) {
        json list = json::array();
        for (const auto& e : entries) {
            list.push_back({{"image", e.image},
                            {"mask", e.mask},
                            {"source", e.source},
                            {"origin", {e.origin_y, e.origin_x}}});
        }
        splits[name] = std::move(list);
    }
    json doc = {{"tile_size", manifest.tile_size}, {"splits", std::move(splits)}};
    std::ofstream out(path);
    if (!out) throw DataError("cannot write manifest: " + path);
    out << doc.dump(2) << "\n";
    if (!out) throw DataError("manifest write failed: " + path);
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest: " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError("manifest " + path + " is malformed: " + e.what());
    }
    DatasetManifest manifest;
    try {
        manifest.tile_size = doc.at("tile_size").get<int>();
        for (const auto& [name, list] : doc.at("splits").items()) {
            std::vector<ManifestEntry>& entries = manifest.splits[name];
            for (const auto& item : list) {
                ManifestEntry e;
                e.image = item.at("image").get<std::string>();
                e.mask = item.at("mask").get<std::string>();
                e.source = item.value("source", std::string{});
                if (item.contains("origin")) {
                    e.origin_y = item.at("origin").at(0).get<int>();
                    e.origin_x = item.at("origin").at(1).get<int>();
                }
                entries.push_back(std::move(e));
            }
        }
    } catch (const json::exception& e) {
        throw DataError("manifest " + path + " has an unexpected layout: " + e.what());
    }
    return manifest;
}

void write_mask_png(const ClassMask& mask, const std::string& path) {
    image::GrayImage img(mask.h, mask.w);
    img.pixels = mask.ids;
    image::write_gray_png(img, path);
}

ClassMask read_mask_png(const std::string& path) {
    std::vector<std::string> warnings;
    image::GrayImage img = image::read_gray_png(path, &warnings);
    if (!warnings.empty()) {
        throw DataError("mask " + path + " is not a single-channel 8-bit PNG");
    }
    ClassMask mask(img.h, img.w);
    mask.ids = std::move(img.pixels);
    for (std::uint8_t id : mask.ids) {
        if (id != kBackgroundId && id != kIntergranularId && id != kTransgranularId &&
            id != kUnlabeledId) {
            throw DataError("mask " + path + " holds invalid class id " + std::to_string(id));
        }
    }
    return mask;
}

BoolMask brightness_mask(const image::GrayImage& img, int threshold) {
    BoolMask mask(img.h, img.w);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        mask.v[i] = img.pixels[i] <= threshold ? 1 : 0;
    }
    return mask;
}

std::string resolve_path(const std::string& base_dir, const std::string& relative) {
    std::filesystem::path p(relative);
    if (p.is_absolute() || base_dir.empty()) return relative;
    return (std::filesystem::path(base_dir) / p).string();
}

BatchIterator::BatchIterator(const DatasetManifest& manifest, const std::string& split,
                             const std::string& base_dir, int batch_size, std::uint64_t seed,
                             VoidPolicy policy)
    : base_dir_(base_dir), batch_size_(batch_size), tile_size_(manifest.tile_size),
      policy_(policy), rng_(seed) {
    auto it = manifest.splits.find(split);
    if (it == manifest.splits.end() || it->second.empty()) {
        throw DataError("manifest split \"" + split + "\" is missing or empty");
    }
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    entries_ = it->second;
    cache_.resize(entries_.size());
    cached_.assign(entries_.size(), 0);
    order_.resize(entries_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    rng_.shuffle(order_);
}

const BatchIterator::CachedTile& BatchIterator::load(std::size_t entry_index) {
    if (!cached_[entry_index]) {
        const ManifestEntry& e = entries_[entry_index];
        CachedTile tile;
        tile.image = image::read_gray_png(resolve_path(base_dir_, e.image));
        tile.mask = read_mask_png(resolve_path(base_dir_, e.mask));
        if (tile.image.h != tile.mask.h || tile.image.w != tile.mask.w) {
            throw DataError("tile " + e.image + " is " + std::to_string(tile.image.h) + "x" +
                            std::to_string(tile.image.w) + " but its mask is " +
                            std::to_string(tile.mask.h) + "x" + std::to_string(tile.mask.w));
        }
        cache_[entry_index] = std::move(tile);
        cached_[entry_index] = 1;
    }
    return cache_[entry_index];
}

SampleBatch BatchIterator::next() {
    if (cursor_ + static_cast<std::size_t>(batch_size_) > order_.size()) {
        rng_.shuffle(order_);
        cursor_ = 0;
        if (static_cast<std::size_t>(batch_size_) > order_.size()) {
            throw DataError("split has " + std::to_string(order_.size()) +
                            " tiles, fewer than one batch of " + std::to_string(batch_size_));
        }
    }

    const CachedTile& first = load(order_[cursor_]);
    const int h = first.image.h;
    const int w = first.image.w;

    SampleBatch batch{Tensor<float>({batch_size_, 1, h, w}),
                      optim::MaskBatch{batch_size_, h, w,
                                       std::vector<std::uint8_t>(
                                           static_cast<std::size_t>(batch_size_) * h * w)}};
    for (int b = 0; b < batch_size_; ++b) {
        const CachedTile& tile = load(order_[cursor_ + static_cast<std::size_t>(b)]);
        if (tile.image.h != h || tile.image.w != w) {
            throw DataError("tiles in one batch disagree on size");
        }
        float* dst = batch.input.plane(b, 0);
        for (std::size_t i = 0; i < tile.image.pixels.size(); ++i) {
            dst[i] = static_cast<float>(tile.image.pixels[i]) / 255.0f;
        }
        std::uint8_t* tgt = batch.target.ids.data() + static_cast<std::size_t>(b) * h * w;
        for (std::size_t i = 0; i < tile.mask.ids.size(); ++i) {
            std::uint8_t id = tile.mask.ids[i];
            if (id == kUnlabeledId && policy_ == VoidPolicy::Background) id = kBackgroundId;
            tgt[i] = id;
        }
    }
    cursor_ += static_cast<std::size_t>(batch_size_);
    return batch;
}

} // namespace fracseg::dataset
