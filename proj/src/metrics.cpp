#include "fracseg/metrics.hpp"

#include <json.hpp>

#include <iomanip>
#include <sstream>

#include "fracseg/dataset.hpp"
#include "fracseg/error.hpp"

namespace fracseg::metrics {

int ConfusionCounts::index_of(std::uint8_t id) {
    switch (id) {
        case kBackgroundId: return 0;
        case kIntergranularId: return 1;
        case kTransgranularId: return 2;
        case kUnlabeledId: return 3;
        default:
            throw DataError("confusion counts: invalid class id " + std::to_string(id));
    }
}

const char* ConfusionCounts::label_of(int index) {
    static const char* labels[4] = {"background", "intergranular", "transgranular", "unlabeled"};
    return labels[index];
}

ConfusionCounts& ConfusionCounts::merge(const ConfusionCounts& other) {
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) m[r][c] += other.m[r][c];
    }
    return *this;
}

std::int64_t ConfusionCounts::total() const {
    std::int64_t sum = 0;
    for (int r = 0; r < 4; ++r) sum += row(r);
    return sum;
}

std::int64_t ConfusionCounts::row(int c) const {
    return m[c][0] + m[c][1] + m[c][2] + m[c][3];
}

std::int64_t ConfusionCounts::col(int c) const {
    return m[0][c] + m[1][c] + m[2][c] + m[3][c];
}

ConfusionCounts accumulate(const ClassMask& gt, const ClassMask& pred, const BoolMask* evaluable,
                           bool exclude_void) {
    if (gt.h != pred.h || gt.w != pred.w) {
        throw ShapeError("accumulate: ground truth is " + std::to_string(gt.h) + "x" +
                         std::to_string(gt.w) + ", prediction is " + std::to_string(pred.h) + "x" +
                         std::to_string(pred.w));
    }
    if (evaluable && (evaluable->h != gt.h || evaluable->w != gt.w)) {
        throw ShapeError("accumulate: evaluable mask dims disagree with the masks");
    }
    ConfusionCounts counts;
    for (std::size_t i = 0; i < gt.ids.size(); ++i) {
        if (evaluable && !evaluable->v[i]) continue;
        const std::uint8_t g = gt.ids[i];
        if (exclude_void && (g == kUnlabeledId || g == kBackgroundId)) continue;
        counts.add(g, pred.ids[i]);
    }
    return counts;
}

std::optional<double> iou(const ConfusionCounts& counts, std::uint8_t class_id) {
    const int c = ConfusionCounts::index_of(class_id);
    const std::int64_t denom = counts.tp(c) + counts.fp(c) + counts.fn(c);
    if (denom == 0) return std::nullopt;
    return double(counts.tp(c)) / double(denom);
}

std::optional<double> mean_iou(const ConfusionCounts& counts) {
    double sum = 0.0;
    int present = 0;
    for (std::uint8_t id : {kBackgroundId, kIntergranularId, kTransgranularId}) {
        const int c = ConfusionCounts::index_of(id);
        if (counts.row(c) == 0) continue;
        const auto value = iou(counts, id);
        if (!value) continue;
        sum += *value;
        ++present;
    }
    if (present == 0) return std::nullopt;
    return sum / present;
}

std::optional<double> f_measure(const ConfusionCounts& counts, std::uint8_t positive_class,
                                double beta) {
    const int c = ConfusionCounts::index_of(positive_class);
    const double b2 = beta * beta;
    const double tp = double(counts.tp(c));
    const double denom = (1.0 + b2) * tp + b2 * double(counts.fn(c)) + double(counts.fp(c));
    if (denom == 0.0) return std::nullopt;
    return (1.0 + b2) * tp / denom;
}

std::optional<double> accuracy(const ConfusionCounts& counts) {
    const std::int64_t total = counts.total();
    if (total == 0) return std::nullopt;
    std::int64_t correct = 0;
    for (int c = 0; c < 4; ++c) correct += counts.tp(c);
    return double(correct) / double(total);
}

namespace {

MetricSet metric_set(const ConfusionCounts& counts, const EvalOptions& options) {
    MetricSet set;
    set.evaluated_pixels = counts.total();
    set.class_iou[0] = iou(counts, kBackgroundId);
    set.class_iou[1] = iou(counts, kIntergranularId);
    set.class_iou[2] = iou(counts, kTransgranularId);
    set.mean = mean_iou(counts);
    set.f_beta = f_measure(counts, options.positive_class, options.beta);
    set.acc = accuracy(counts);
    return set;
}

std::optional<double> mean_of_defined(const std::vector<std::optional<double>>& values) {
    double sum = 0.0;
    int n = 0;
    for (const auto& v : values) {
        if (!v) continue;
        sum += *v;
        ++n;
    }
    if (n == 0) return std::nullopt;
    return sum / n;
}

} // namespace

EvalReport evaluate_pair_set(const std::vector<EvalPair>& pairs, const EvalOptions& options) {
    if (pairs.empty()) throw DataError("evaluate_pair_set: no mask pairs given");

    EvalReport report;
    report.pair_count = static_cast<int>(pairs.size());
    report.beta = options.beta;
    report.positive_class = options.positive_class;
    report.brightness_threshold = options.brightness_threshold;
    report.per_image = options.per_image;

    std::vector<std::optional<double>> image_mean_iou_with, image_mean_iou_excl;
    std::vector<std::optional<double>> image_f_with, image_f_excl;

    for (const EvalPair& pair : pairs) {
        BoolMask evaluable;
        const BoolMask* evaluable_ptr = nullptr;
        if (options.brightness_threshold) {
            if (!pair.image) {
                throw DataError(
                    "evaluate_pair_set: brightness masking needs the source image of every pair");
            }
            evaluable = dataset::brightness_mask(*pair.image, *options.brightness_threshold);
            evaluable_ptr = &evaluable;
        }
        const ConfusionCounts with_void = accumulate(pair.gt, pair.pred, evaluable_ptr, false);
        const ConfusionCounts excl = accumulate(pair.gt, pair.pred, evaluable_ptr, true);
        report.counts_with_void.merge(with_void);
        report.counts_void_excluded.merge(excl);
        if (options.per_image) {
            image_mean_iou_with.push_back(mean_iou(with_void));
            image_mean_iou_excl.push_back(mean_iou(excl));
            image_f_with.push_back(f_measure(with_void, options.positive_class, options.beta));
            image_f_excl.push_back(f_measure(excl, options.positive_class, options.beta));
        }
    }

    report.with_void = metric_set(report.counts_with_void, options);
    report.void_excluded = metric_set(report.counts_void_excluded, options);
    if (options.per_image) {
        report.with_void.per_image_mean_iou = mean_of_defined(image_mean_iou_with);
        report.void_excluded.per_image_mean_iou = mean_of_defined(image_mean_iou_excl);
        report.with_void.per_image_f_beta = mean_of_defined(image_f_with);
        report.void_excluded.per_image_f_beta = mean_of_defined(image_f_excl);
    }
    return report;
}

namespace {

using nlohmann::json;

json opt_json(const std::optional<double>& value) {
    if (!value) return nullptr;
    return *value;
}

json metric_set_json(const MetricSet& set, bool per_image) {
    json j = {
        {"evaluated_pixels", set.evaluated_pixels},
        {"iou",
         {{"background", opt_json(set.class_iou[0])},
          {"intergranular", opt_json(set.class_iou[1])},
          {"transgranular", opt_json(set.class_iou[2])}}},
        {"mean_iou", opt_json(set.mean)},
        {"f_beta", opt_json(set.f_beta)},
        {"accuracy", opt_json(set.acc)},
    };
    if (per_image) {
        j["per_image_mean_iou"] = opt_json(set.per_image_mean_iou);
        j["per_image_f_beta"] = opt_json(set.per_image_f_beta);
    }
    return j;
}

json confusion_json(const ConfusionCounts& counts) {
    json rows = json::array();
    for (int r = 0; r < 4; ++r) {
        json row = json::array();
        for (int c = 0; c < 4; ++c) row.push_back(counts.m[r][c]);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string ratio_cell(const std::optional<double>& value) {
    if (!value) return "undefined";
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << *value;
    return os.str();
}

} // namespace

std::string report_to_json(const EvalReport& report) {
    json j = {
        {"pair_count", report.pair_count},
        {"beta", report.beta},
        {"positive_class", ConfusionCounts::label_of(
                               ConfusionCounts::index_of(report.positive_class))},
        {"brightness_threshold",
         report.brightness_threshold ? json(*report.brightness_threshold) : json(nullptr)},
        {"class_labels", {"background", "intergranular", "transgranular", "unlabeled"}},
        {"with_void",
         {{"metrics", metric_set_json(report.with_void, report.per_image)},
          {"confusion", confusion_json(report.counts_with_void)}}},
        {"void_excluded",
         {{"metrics", metric_set_json(report.void_excluded, report.per_image)},
          {"confusion", confusion_json(report.counts_void_excluded)}}},
    };
    return j.dump(2);
}

namespace {

std::optional<double> opt_from_json(const json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

std::uint8_t class_id_from_label(const std::string& label) {
    for (std::uint8_t id : {kBackgroundId, kIntergranularId, kTransgranularId, kUnlabeledId}) {
        if (label == ConfusionCounts::label_of(ConfusionCounts::index_of(id))) return id;
    }
    throw DataError("report JSON: unknown class label \"" + label + "\"");
}

MetricSet metric_set_from_json(const json& j) {
    MetricSet set;
    set.evaluated_pixels = j.at("evaluated_pixels").get<std::int64_t>();
    set.class_iou[0] = opt_from_json(j.at("iou").at("background"));
    set.class_iou[1] = opt_from_json(j.at("iou").at("intergranular"));
    set.class_iou[2] = opt_from_json(j.at("iou").at("transgranular"));
    set.mean = opt_from_json(j.at("mean_iou"));
    set.f_beta = opt_from_json(j.at("f_beta"));
    set.acc = opt_from_json(j.at("accuracy"));
    if (j.contains("per_image_mean_iou")) {
        set.per_image_mean_iou = opt_from_json(j.at("per_image_mean_iou"));
        set.per_image_f_beta = opt_from_json(j.at("per_image_f_beta"));
    }
    return set;
}

ConfusionCounts confusion_from_json(const json& rows) {
    ConfusionCounts counts;
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) counts.m[r][c] = rows.at(r).at(c).get<std::int64_t>();
    }
    return counts;
}

} // namespace

EvalReport report_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DataError("report JSON is malformed: " + std::string(e.what()));
    }
    try {
        EvalReport report;
        report.pair_count = j.at("pair_count").get<int>();
        report.beta = j.at("beta").get<double>();
        report.positive_class = class_id_from_label(j.at("positive_class").get<std::string>());
        if (!j.at("brightness_threshold").is_null()) {
            report.brightness_threshold = j.at("brightness_threshold").get<int>();
        }
        report.with_void = metric_set_from_json(j.at("with_void").at("metrics"));
        report.void_excluded = metric_set_from_json(j.at("void_excluded").at("metrics"));
        report.per_image = j.at("with_void").at("metrics").contains("per_image_mean_iou");
        report.counts_with_void = confusion_from_json(j.at("with_void").at("confusion"));
        report.counts_void_excluded = confusion_from_json(j.at("void_excluded").at("confusion"));
        return report;
    } catch (const json::exception& e) {
        throw DataError("report JSON has an unexpected layout: " + std::string(e.what()));
    }
}

std::string report_to_text(const EvalReport& report) {
    std::ostringstream os;
    os << "pairs evaluated: " << report.pair_count << "\n";
    os << "positive class: "
       << ConfusionCounts::label_of(ConfusionCounts::index_of(report.positive_class))
       << ", beta = " << report.beta << "\n";
    if (report.brightness_threshold) {
        os << "brightness threshold: " << *report.brightness_threshold << "\n";
    }
    os << "\n";
    os << std::left << std::setw(26) << "metric" << std::setw(14) << "with_void"
       << "void_excluded\n";
    auto line = [&](const std::string& name, const std::optional<double>& a,
                    const std::optional<double>& b) {
        os << std::left << std::setw(26) << name << std::setw(14) << ratio_cell(a)
           << ratio_cell(b) << "\n";
    };
    line("iou background", report.with_void.class_iou[0], report.void_excluded.class_iou[0]);
    line("iou intergranular", report.with_void.class_iou[1], report.void_excluded.class_iou[1]);
    line("iou transgranular", report.with_void.class_iou[2], report.void_excluded.class_iou[2]);
    line("mean iou", report.with_void.mean, report.void_excluded.mean);
    line("f_beta", report.with_void.f_beta, report.void_excluded.f_beta);
    line("accuracy", report.with_void.acc, report.void_excluded.acc);
    if (report.per_image) {
        line("per-image mean iou", report.with_void.per_image_mean_iou,
             report.void_excluded.per_image_mean_iou);
        line("per-image f_beta", report.with_void.per_image_f_beta,
             report.void_excluded.per_image_f_beta);
    }
    os << std::left << std::setw(26) << "evaluated pixels" << std::setw(14)
       << report.with_void.evaluated_pixels << report.void_excluded.evaluated_pixels << "\n";

    os << "\nconfusion (rows gt, cols pred; with_void counts):\n";
    os << std::left << std::setw(15) << "";
    for (int c = 0; c < 4; ++c) os << std::setw(15) << ConfusionCounts::label_of(c);
    os << "\n";
    for (int r = 0; r < 4; ++r) {
        os << std::left << std::setw(15) << ConfusionCounts::label_of(r);
        for (int c = 0; c < 4; ++c) os << std::setw(15) << report.counts_with_void.m[r][c];
        os << "\n";
    }
    return os.str();
}

} // namespace fracseg::metrics
