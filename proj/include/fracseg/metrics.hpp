#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fracseg/image.hpp"
#include "fracseg/mask.hpp"

namespace fracseg::metrics {

// Rows are ground-truth class, columns are predicted class; index 3 holds the
// unlabeled-void id 255. Counts add across images, so per-image matrices can
// be merged in any grouping with a deterministic total.
struct ConfusionCounts {
    std::array<std::array<std::int64_t, 4>, 4> m{};

    static int index_of(std::uint8_t id);
    static const char* label_of(int index);

    void add(std::uint8_t gt, std::uint8_t pred) { ++m[index_of(gt)][index_of(pred)]; }
    ConfusionCounts& merge(const ConfusionCounts& other);

    std::int64_t total() const;
    std::int64_t row(int c) const;
    std::int64_t col(int c) const;
    std::int64_t tp(int c) const { return m[c][c]; }
    std::int64_t fp(int c) const { return col(c) - tp(c); }
    std::int64_t fn(int c) const { return row(c) - tp(c); }

    bool operator==(const ConfusionCounts&) const = default;
};

// A pixel contributes iff it is evaluable (always, when no mask is given) and,
// under exclude_void, its ground truth is neither unlabeled-void nor
// background. Those two ids are dropped together because evaluation treats
// unannotated and background areas as one excluded set.
ConfusionCounts accumulate(const ClassMask& gt, const ClassMask& pred,
                           const BoolMask* evaluable = nullptr, bool exclude_void = false);

// tp/(tp+fp+fn) for one class; empty when the denominator is zero.
std::optional<double> iou(const ConfusionCounts& counts, std::uint8_t class_id);

// Unweighted mean over the real classes (0,1,2) present in the ground truth.
std::optional<double> mean_iou(const ConfusionCounts& counts);

// (1+b^2)tp / ((1+b^2)tp + b^2 fn + fp); empty when tp=fp=fn=0.
std::optional<double> f_measure(const ConfusionCounts& counts, std::uint8_t positive_class,
                                double beta);

// Fraction of evaluated pixels whose prediction equals the ground truth.
std::optional<double> accuracy(const ConfusionCounts& counts);

struct EvalPair {
    ClassMask gt;
    ClassMask pred;
    std::optional<image::GrayImage> image; // needed only for brightness masking
};

struct EvalOptions {
    std::optional<int> brightness_threshold;
    double beta = 1.0;
    std::uint8_t positive_class = kIntergranularId;
    bool per_image = false; // also report per-image averaged ratios
};

struct MetricSet {
    std::int64_t evaluated_pixels = 0;
    std::array<std::optional<double>, 3> class_iou;
    std::optional<double> mean;
    std::optional<double> f_beta;
    std::optional<double> acc;
    // Means of the per-image ratios (images where the ratio is undefined are
    // skipped). Populated only in per-image mode.
    std::optional<double> per_image_mean_iou;
    std::optional<double> per_image_f_beta;
};

// Counts are pooled across all pairs before ratios are computed
// (micro-averaging); both the with-void and void-excluded variants are
// reported.
struct EvalReport {
    int pair_count = 0;
    double beta = 1.0;
    std::uint8_t positive_class = kIntergranularId;
    std::optional<int> brightness_threshold;
    bool per_image = false;
    ConfusionCounts counts_with_void;
    ConfusionCounts counts_void_excluded;
    MetricSet with_void;
    MetricSet void_excluded;
};

EvalReport evaluate_pair_set(const std::vector<EvalPair>& pairs, const EvalOptions& options);

// JSON rendering with stable field names, and a plain-text table.
std::string report_to_json(const EvalReport& report);
std::string report_to_text(const EvalReport& report);

// Inverse of report_to_json.
EvalReport report_from_json(const std::string& text);

} // namespace fracseg::metrics
