#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "fracseg/error.hpp"

namespace fracseg {

// Dense rank-4 array in NCHW row-major layout. Channel planes are contiguous,
// which is what the convolution inner loops rely on.
struct Dims4 {
    std::int64_t n = 0;
    std::int64_t c = 0;
    std::int64_t h = 0;
    std::int64_t w = 0;

    std::int64_t count() const { return n * c * h * w; }

    bool operator==(const Dims4&) const = default;

    std::string str() const {
        std::ostringstream os;
        os << "(" << n << "," << c << "," << h << "," << w << ")";
        return os.str();
    }
};

template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Dims4 dims, T fill_value = T(0))
        : dims_(dims), data_(static_cast<std::size_t>(check_dims(dims).count()), fill_value) {}

    Tensor(Dims4 dims, std::vector<T> data) : dims_(dims), data_(std::move(data)) {
        check_dims(dims);
        if (static_cast<std::int64_t>(data_.size()) != dims_.count()) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match dims " + dims_.str());
        }
    }

    const Dims4& dims() const { return dims_; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    std::int64_t index(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
        return ((n * dims_.c + c) * dims_.h + h) * dims_.w + w;
    }

    T& at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) {
        return data_[static_cast<std::size_t>(index(n, c, h, w))];
    }
    const T& at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
        return data_[static_cast<std::size_t>(index(n, c, h, w))];
    }

    // Pointer to the start of one (n, c) plane of h*w contiguous scalars.
    T* plane(std::int64_t n, std::int64_t c) {
        return data_.data() + static_cast<std::size_t>(index(n, c, 0, 0));
    }
    const T* plane(std::int64_t n, std::int64_t c) const {
        return data_.data() + static_cast<std::size_t>(index(n, c, 0, 0));
    }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

    // Throws NumericError on the first NaN/Inf entry. Checked-mode hook.
    void check_finite(const std::string& label) const {
        for (std::size_t i = 0; i < data_.size(); ++i) {
            if (!std::isfinite(static_cast<double>(data_[i]))) {
                throw NumericError(label + ": non-finite value at flat index " +
                                   std::to_string(i));
            }
        }
    }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(data_.size());
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return Tensor<U>(dims_, std::move(out));
    }

    bool operator==(const Tensor& other) const {
        return dims_ == other.dims_ && data_ == other.data_;
    }

private:
    static const Dims4& check_dims(const Dims4& d) {
        if (d.n < 0 || d.c < 0 || d.h < 0 || d.w < 0) {
            throw ShapeError("negative tensor dimension " + d.str());
        }
        return d;
    }

    Dims4 dims_;
    std::vector<T> data_;
};

} // namespace fracseg
