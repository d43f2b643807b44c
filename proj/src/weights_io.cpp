#include "fracseg/weights_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <regex>
#include <vector>

namespace fracseg::weights {

namespace {

constexpr char kMagic[4] = {'F', 'S', 'E', 'G'};
constexpr std::uint32_t kVersion = 1;

void put_bytes(std::ostream& out, const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename U>
void put_le(std::ostream& out, U value) {
    unsigned char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        buf[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xff);
    }
    put_bytes(out, buf, sizeof(U));
}

void put_f32(std::ostream& out, float value) {
    put_le(out, std::bit_cast<std::uint32_t>(value));
}

class Reader {
  public:
    explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) throw WeightsError(ErrorKind::Io, "cannot open weight file: " + path);
    }

    void bytes(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw WeightsError(ErrorKind::Truncated, "truncated weight file: " + path_);
        }
    }

    template <typename U>
    U le() {
        unsigned char buf[sizeof(U)];
        bytes(buf, sizeof(U));
        U value = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) {
            value |= static_cast<U>(buf[i]) << (8 * i);
        }
        return value;
    }

    float f32() { return std::bit_cast<float>(le<std::uint32_t>()); }

    bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

  private:
    std::ifstream in_;
    std::string path_;
};

struct Record {
    std::vector<std::uint64_t> dims;
    std::vector<float> data;
};

std::map<std::string, Record> read_container(const std::string& path) {
    Reader in(path);
    char magic[4];
    in.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw WeightsError(ErrorKind::BadMagic, "not a FSEG weight file: " + path);
    }
    const auto version = in.le<std::uint32_t>();
    if (version != kVersion) {
        throw WeightsError(ErrorKind::BadVersion, "unsupported weight file version " +
                                                      std::to_string(version) + ": " + path);
    }
    const auto count = in.le<std::uint32_t>();
    std::map<std::string, Record> records;
    for (std::uint32_t r = 0; r < count; ++r) {
        const auto name_len = in.le<std::uint16_t>();
        std::string name(name_len, '\0');
        in.bytes(name.data(), name_len);
        std::uint8_t rank;
        in.bytes(&rank, 1);
        Record rec;
        std::uint64_t total = 1;
        for (std::uint8_t d = 0; d < rank; ++d) {
            rec.dims.push_back(in.le<std::uint64_t>());
            total *= rec.dims.back();
        }
        rec.data.resize(total);
        for (auto& v : rec.data) v = in.f32();
        records.emplace(std::move(name), std::move(rec));
    }
    return records;
}

std::vector<std::uint64_t> view_dims(const unet::ParamView<const float>& view) {
    if (view.rank == 1) return {static_cast<std::uint64_t>(view.len)};
    return {static_cast<std::uint64_t>(view.dims.n), static_cast<std::uint64_t>(view.dims.c),
            static_cast<std::uint64_t>(view.dims.h), static_cast<std::uint64_t>(view.dims.w)};
}

std::string dims_str(const std::vector<std::uint64_t>& dims) {
    std::string s = "(";
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(dims[i]);
    }
    return s + ")";
}

void fill_model(unet::UNetModel<float>& model, const std::map<std::string, Record>& records,
                const std::string& path) {
    auto views = unet::parameter_views(model);
    for (const auto& view : views) {
        auto it = records.find(view.name);
        if (it == records.end()) {
            throw WeightsError(ErrorKind::MissingTensor,
                               "weight file " + path + " is missing tensor " + view.name);
        }
        const auto expected = view_dims({view.name, view.data, view.len, view.rank, view.dims});
        if (it->second.dims != expected) {
            throw WeightsError(ErrorKind::DimMismatch,
                               "tensor " + view.name + " has dims " + dims_str(it->second.dims) +
                                   " in " + path + ", model expects " + dims_str(expected));
        }
        std::copy(it->second.data.begin(), it->second.data.end(), view.data);
    }
    if (records.size() != views.size()) {
        for (const auto& [name, rec] : records) {
            bool known = false;
            for (const auto& view : views) {
                if (view.name == name) {
                    known = true;
                    break;
                }
            }
            if (!known) {
                throw WeightsError(ErrorKind::UnknownTensor,
                                   "weight file " + path + " contains unknown tensor " + name);
            }
        }
    }
}

} // namespace

void save_weights(const unet::UNetModel<float>& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw WeightsError(ErrorKind::Io, "cannot write weight file: " + path);
    const auto views = unet::parameter_views(model);
    put_bytes(out, kMagic, 4);
    put_le(out, kVersion);
    put_le(out, static_cast<std::uint32_t>(views.size()));
    for (const auto& view : views) {
        put_le(out, static_cast<std::uint16_t>(view.name.size()));
        put_bytes(out, view.name.data(), view.name.size());
        const std::uint8_t rank = static_cast<std::uint8_t>(view.rank);
        put_bytes(out, &rank, 1);
        for (auto d : view_dims(view)) put_le(out, d);
        for (std::size_t i = 0; i < view.len; ++i) put_f32(out, view.data[i]);
    }
    out.flush();
    if (!out) throw WeightsError(ErrorKind::Io, "write failed: " + path);
}

unet::UNetModel<float> load_weights(const std::string& path) {
    const auto records = read_container(path);

    static const std::regex enc_kernel(R"(^enc(\d+)\.conv(\d+)\.kernel$)");
    int stages = 0;
    std::map<int, int> repeats;
    std::map<int, std::uint64_t> widths;
    std::uint64_t input_channels = 0;
    for (const auto& [name, rec] : records) {
        std::smatch m;
        if (!std::regex_match(name, m, enc_kernel)) continue;
        const int s = std::stoi(m[1]);
        const int i = std::stoi(m[2]);
        stages = std::max(stages, s);
        repeats[s] = std::max(repeats[s], i);
        if (i == 1 && rec.dims.size() == 4) {
            widths[s] = rec.dims[0];
            if (s == 1) input_channels = rec.dims[1];
        }
    }
    if (stages == 0) {
        throw WeightsError(ErrorKind::MissingTensor,
                           "weight file " + path + " has no encoder tensors to infer a model from");
    }
    auto cls = records.find("classifier.kernel");
    if (cls == records.end() || cls->second.dims.size() != 4) {
        throw WeightsError(ErrorKind::MissingTensor,
                           "weight file " + path + " is missing tensor classifier.kernel");
    }

    unet::UNetConfig config;
    config.stages = stages;
    config.encoder_channels.clear();
    config.conv_repeats.clear();
    for (int s = 1; s <= stages; ++s) {
        if (!widths.count(s) || !repeats.count(s)) {
            throw WeightsError(ErrorKind::MissingTensor,
                               "weight file " + path + " is missing tensor enc" +
                                   std::to_string(s) + ".conv1.kernel");
        }
        config.encoder_channels.push_back(static_cast<int>(widths[s]));
        config.conv_repeats.push_back(repeats[s]);
    }
    config.num_classes = static_cast<int>(cls->second.dims[0]);
    config.input_channels = static_cast<int>(input_channels);

    auto model = unet::build<float>(config, 0);
    fill_model(model, records, path);
    return model;
}

unet::UNetModel<float> load_weights(const std::string& path, const unet::UNetConfig& config) {
    const auto records = read_container(path);
    auto model = unet::build<float>(config, 0);
    fill_model(model, records, path);
    return model;
}

void import_encoder(unet::UNetModel<float>& model, const std::string& path, bool freeze) {
    const auto records = read_container(path);
    auto views = unet::parameter_views(model);

    // Validate everything before touching the model so a bad file leaves it
    // intact.
    std::vector<std::pair<unet::ParamView<float>*, const Record*>> plan;
    std::vector<std::string> missing;
    for (auto& view : views) {
        if (view.name.rfind("enc", 0) != 0) continue;
        auto it = records.find(view.name);
        if (it == records.end()) {
            missing.push_back(view.name);
            continue;
        }
        const Record& rec = it->second;
        const auto expected = view_dims({view.name, view.data, view.len, view.rank, view.dims});
        const bool rgb_first = view.rank == 4 && view.dims.c == 1 && rec.dims.size() == 4 &&
                               rec.dims[0] == static_cast<std::uint64_t>(view.dims.n) &&
                               rec.dims[1] == 3 &&
                               rec.dims[2] == static_cast<std::uint64_t>(view.dims.h) &&
                               rec.dims[3] == static_cast<std::uint64_t>(view.dims.w);
        if (rec.dims != expected && !rgb_first) {
            throw WeightsError(ErrorKind::DimMismatch,
                               "tensor " + view.name + " has dims " + dims_str(rec.dims) + " in " +
                                   path + ", model expects " + dims_str(expected));
        }
        plan.emplace_back(&view, &rec);
    }
    if (!missing.empty()) {
        std::string what = "weight file " + path + " is missing encoder tensors:";
        for (const auto& name : missing) what += " " + name;
        throw WeightsError(ErrorKind::MissingTensor, what);
    }

    for (auto& [view, rec] : plan) {
        const auto expected = view_dims({view->name, view->data, view->len, view->rank,
                                         view->dims});
        if (rec->dims == expected) {
            std::copy(rec->data.begin(), rec->data.end(), view->data);
            continue;
        }
        // An RGB-pretrained first conv is adapted to grayscale input by
        // averaging its input channels.
        const std::size_t spatial = static_cast<std::size_t>(view->dims.h * view->dims.w);
        for (std::int64_t co = 0; co < view->dims.n; ++co) {
            for (std::size_t s = 0; s < spatial; ++s) {
                float sum = 0.0f;
                for (std::size_t ci = 0; ci < 3; ++ci) {
                    sum += rec->data[(static_cast<std::size_t>(co) * 3 + ci) * spatial + s];
                }
                view->data[static_cast<std::size_t>(co) * spatial + s] = sum / 3.0f;
            }
        }
    }
    if (freeze) unet::set_encoder_frozen(model, true);
}

} // namespace fracseg::weights
