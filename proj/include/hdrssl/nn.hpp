#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hdrssl/tensor.hpp"

namespace hdrssl {

/// One named parameter tensor with its gradient accumulator.
struct Param {
    std::string name;
    std::vector<int> shape;
    std::vector<float> value;
    std::vector<float> grad;

    std::size_t size() const { return value.size(); }
};

/// Flat, ordered collection of parameter tensors. Teacher and student are two
/// ParameterSets over the same architecture.
class ParameterSet {
public:
    std::size_t add(std::string name, std::vector<int> shape);

    std::size_t count() const { return params_.size(); }
    std::size_t scalar_count() const;

    Param& operator[](std::size_t i) { return params_[i]; }
    const Param& operator[](std::size_t i) const { return params_[i]; }
    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    void zero_grad();

    /// Throws InvalidInput naming the first tensor whose name or shape differs.
    void require_compatible(const ParameterSet& other, const char* what) const;

    /// FNV-1a over names, shapes and value bits.
    std::uint64_t fingerprint() const;

    double l2_distance(const ParameterSet& other) const;

    bool operator==(const ParameterSet& other) const;

private:
    std::vector<Param> params_;
};

/// 2-D convolution, square kernel, zero "same"-style padding k/2.
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(ParameterSet& params, const std::string& name, int in_channels, int out_channels, int kernel = 3,
           int stride = 1);

    int in_channels() const { return in_; }
    int out_channels() const { return out_; }
    int stride() const { return stride_; }
    int output_size(int input) const { return (input + 2 * pad_ - kernel_) / stride_ + 1; }

    /// He-uniform weights, zero bias.
    template <typename Rng>
    void init(ParameterSet& params, Rng& rng) const;

    Tensor forward(const ParameterSet& params, const Tensor& x) const;

    /// Accumulates weight/bias gradients into `params` and, when `dx` is non-null,
    /// writes the input gradient (overwriting).
    void backward(ParameterSet& params, const Tensor& x, const Tensor& dy, Tensor* dx) const;

    /// Input gradient only, for frozen layers.
    Tensor backward_input(const ParameterSet& params, const Tensor& x, const Tensor& dy) const;

    std::size_t weight_index() const { return weight_; }
    std::size_t bias_index() const { return bias_; }

private:
    void im2col(const float* x, int h, int w, float* col) const;
    void col2im(const float* col, int h, int w, float* dx) const;
    void backward_impl(const ParameterSet& params, ParameterSet* grads, const Tensor& x, const Tensor& dy,
                       Tensor* dx) const;

    int in_ = 0, out_ = 0, kernel_ = 3, stride_ = 1, pad_ = 1;
    std::size_t weight_ = 0, bias_ = 0;
};

// Elementwise activations. Backward variants take the forward *output*.
Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& y, const Tensor& dy);
Tensor sigmoid(const Tensor& x);
Tensor sigmoid_backward(const Tensor& y, const Tensor& dy);

Tensor add(const Tensor& a, const Tensor& b);
void add_inplace(Tensor& a, const Tensor& b);
Tensor multiply(const Tensor& a, const Tensor& b);

/// Concatenates along the channel axis.
Tensor concat_channels(std::span<const Tensor* const> parts);
/// Channel slice [c0, c0 + count).
Tensor slice_channels(const Tensor& t, int c0, int count);
/// Adds `src` into channels [c0, c0 + src.c()) of `dst`.
void accumulate_channels(Tensor& dst, int c0, const Tensor& src);

struct AdamConfig {
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    Adam() = default;
    Adam(const ParameterSet& params, AdamConfig cfg);

    void step(ParameterSet& params);

    long long steps() const { return t_; }
    const AdamConfig& config() const { return cfg_; }
    void set_lr(double lr) { cfg_.lr = lr; }
    const std::vector<std::vector<float>>& first_moment() const { return m_; }
    const std::vector<std::vector<float>>& second_moment() const { return v_; }
    void restore(long long t, std::vector<std::vector<float>> m, std::vector<std::vector<float>> v);

private:
    AdamConfig cfg_;
    long long t_ = 0;
    std::vector<std::vector<float>> m_, v_;
};

}  // namespace hdrssl

#include <cmath>
#include <random>

namespace hdrssl {

template <typename Rng>
void Conv2d::init(ParameterSet& params, Rng& rng) const {
    const double fan_in = static_cast<double>(in_) * kernel_ * kernel_;
    const double bound = std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (float& v : params[weight_].value) v = static_cast<float>(dist(rng));
    std::fill(params[bias_].value.begin(), params[bias_].value.end(), 0.0f);
}

}  // namespace hdrssl
