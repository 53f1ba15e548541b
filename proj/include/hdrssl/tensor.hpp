#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hdrssl {

/// Raised for malformed inputs: wrong shapes, out-of-range values, bad files.
class InvalidInput : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Shape {
    int n = 0, c = 0, h = 0, w = 0;

    std::size_t size() const { return static_cast<std::size_t>(n) * c * h * w; }
    bool operator==(const Shape&) const = default;
    std::string str() const;
};

/// Dense planar NCHW tensor. Images are tensors with n == 1.
template <typename T>
class BasicTensor {
public:
    using value_type = T;

    BasicTensor() = default;
    BasicTensor(int n, int c, int h, int w, T fill = T(0))
        : shape_{n, c, h, w}, data_(shape_.size(), fill) {
        if (n < 0 || c < 0 || h < 0 || w < 0) throw InvalidInput("negative tensor dimension");
    }
    explicit BasicTensor(Shape s, T fill = T(0)) : BasicTensor(s.n, s.c, s.h, s.w, fill) {}

    static BasicTensor image(int c, int h, int w, T fill = T(0)) { return BasicTensor(1, c, h, w, fill); }

    const Shape& shape() const { return shape_; }
    int n() const { return shape_.n; }
    int c() const { return shape_.c; }
    int h() const { return shape_.h; }
    int w() const { return shape_.w; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }
    std::size_t plane() const { return static_cast<std::size_t>(shape_.h) * shape_.w; }
    std::size_t sample_size() const { return plane() * shape_.c; }

    T& operator()(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
    const T& operator()(int n, int c, int y, int x) const { return data_[index(n, c, y, x)]; }
    T& at(int c, int y, int x) { return data_[index(0, c, y, x)]; }
    const T& at(int c, int y, int x) const { return data_[index(0, c, y, x)]; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::span<T> span() { return data_; }
    std::span<const T> span() const { return data_; }
    std::vector<T>& values() { return data_; }
    const std::vector<T>& values() const { return data_; }

    std::span<T> sample(int n) { return {data_.data() + n * sample_size(), sample_size()}; }
    std::span<const T> sample(int n) const { return {data_.data() + n * sample_size(), sample_size()}; }
    std::span<T> channel(int n, int c) { return {data_.data() + index(n, c, 0, 0), plane()}; }
    std::span<const T> channel(int n, int c) const { return {data_.data() + index(n, c, 0, 0), plane()}; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool operator==(const BasicTensor&) const = default;

private:
    std::size_t index(int n, int c, int y, int x) const {
        return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
    }

    Shape shape_;
    std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

template <typename To, typename From>
BasicTensor<To> tensor_cast(const BasicTensor<From>& t) {
    BasicTensor<To> out(t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) out.data()[i] = static_cast<To>(t.data()[i]);
    return out;
}

void require_same_shape(const Shape& a, const Shape& b, const char* what);

/// Copies sample `index` of a batch into a standalone image.
Tensor take_sample(const Tensor& batch, int index);

/// Stacks equally shaped images into a batch.
Tensor stack(std::span<const Tensor> images);

/// Crops a spatial window from every sample of `t`.
Tensor crop(const Tensor& t, int y0, int x0, int h, int w);

}  // namespace hdrssl
