#pragma once

#include <string>

#include "fracseg/error.hpp"
#include "fracseg/unet.hpp"

namespace fracseg::weights {

// Binary weight container. Little-endian throughout, no padding between
// records:
//   "FSEG"  u32 version=1  u32 tensor_count
//   per tensor: u16 name_len, name bytes, u8 rank, rank x u64 dims,
//               raw float32 payload
enum class ErrorKind {
    BadMagic,
    BadVersion,
    Truncated,
    UnknownTensor,
    DimMismatch,
    MissingTensor,
    Io,
};

class WeightsError : public DataError {
  public:
    WeightsError(ErrorKind kind, const std::string& what) : DataError(what), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

  private:
    ErrorKind kind_;
};

void save_weights(const unet::UNetModel<float>& model, const std::string& path);

// Reconstructs the architecture from the tensor names and dims in the file.
unet::UNetModel<float> load_weights(const std::string& path);

// Validates the file against an expected architecture; a tensor whose dims
// disagree raises DimMismatch naming it.
unet::UNetModel<float> load_weights(const std::string& path, const unet::UNetConfig& config);

// Replaces the encoder parameters from a weight file (decoder entries in the
// file, if any, are ignored). A first-layer kernel with 3 input channels is
// channel-averaged down to the model's single grayscale channel. Every
// missing encoder tensor is listed in one error. freeze marks the imported
// parameters as excluded from optimization.
void import_encoder(unet::UNetModel<float>& model, const std::string& path, bool freeze);

} // namespace fracseg::weights
