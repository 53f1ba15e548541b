#include "hdrssl/nn.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cstring>

namespace hdrssl {

namespace {
using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRow = Eigen::Map<RowMat>;
using CMapRow = Eigen::Map<const RowMat>;
}  // namespace

std::size_t ParameterSet::add(std::string name, std::vector<int> shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    params_.push_back(Param{std::move(name), std::move(shape), std::vector<float>(n, 0.0f),
                            std::vector<float>(n, 0.0f)});
    return params_.size() - 1;
}

std::size_t ParameterSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
}

void ParameterSet::zero_grad() {
    for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), 0.0f);
}

void ParameterSet::require_compatible(const ParameterSet& other, const char* what) const {
    if (count() != other.count())
        throw InvalidInput(std::string(what) + ": parameter count " + std::to_string(count()) + " vs " +
                           std::to_string(other.count()));
    for (std::size_t i = 0; i < count(); ++i) {
        if (params_[i].name != other.params_[i].name || params_[i].shape != other.params_[i].shape)
            throw InvalidInput(std::string(what) + ": tensor '" + params_[i].name + "' does not match '" +
                               other.params_[i].name + "'");
    }
}

std::uint64_t ParameterSet::fingerprint() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ull;
        }
    };
    for (const auto& p : params_) {
        mix(p.name.data(), p.name.size());
        mix(p.shape.data(), p.shape.size() * sizeof(int));
        mix(p.value.data(), p.value.size() * sizeof(float));
    }
    return h;
}

double ParameterSet::l2_distance(const ParameterSet& other) const {
    require_compatible(other, "l2_distance");
    double s = 0.0;
    for (std::size_t i = 0; i < count(); ++i)
        for (std::size_t k = 0; k < params_[i].size(); ++k) {
            const double d = static_cast<double>(params_[i].value[k]) - other.params_[i].value[k];
            s += d * d;
        }
    return std::sqrt(s);
}

bool ParameterSet::operator==(const ParameterSet& other) const {
    if (count() != other.count()) return false;
    for (std::size_t i = 0; i < count(); ++i)
        if (params_[i].name != other.params_[i].name || params_[i].shape != other.params_[i].shape ||
            params_[i].value != other.params_[i].value)
            return false;
    return true;
}

Conv2d::Conv2d(ParameterSet& params, const std::string& name, int in_channels, int out_channels, int kernel,
               int stride)
    : in_(in_channels), out_(out_channels), kernel_(kernel), stride_(stride), pad_(kernel / 2) {
    weight_ = params.add(name + ".weight", {out_channels, in_channels, kernel, kernel});
    bias_ = params.add(name + ".bias", {out_channels});
}

void Conv2d::im2col(const float* x, int h, int w, float* col) const {
    const int oh = output_size(h), ow = output_size(w);
    const std::size_t p = static_cast<std::size_t>(oh) * ow;
    for (int c = 0; c < in_; ++c)
        for (int ky = 0; ky < kernel_; ++ky)
            for (int kx = 0; kx < kernel_; ++kx) {
                float* row = col + ((static_cast<std::size_t>(c) * kernel_ + ky) * kernel_ + kx) * p;
                const float* plane = x + static_cast<std::size_t>(c) * h * w;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride_ - pad_ + ky;
                    float* dst = row + static_cast<std::size_t>(oy) * ow;
                    if (iy < 0 || iy >= h) {
                        std::fill(dst, dst + ow, 0.0f);
                        continue;
                    }
                    const float* src = plane + static_cast<std::size_t>(iy) * w;
                    if (stride_ == 1) {
                        const int shift = kx - pad_;
                        const int lo = std::max(0, -shift), hi = std::min(ow, w - shift);
                        std::fill(dst, dst + lo, 0.0f);
                        if (hi > lo) std::memcpy(dst + lo, src + lo + shift, sizeof(float) * (hi - lo));
                        std::fill(dst + std::max(hi, lo), dst + ow, 0.0f);
                    } else {
                        for (int ox = 0; ox < ow; ++ox) {
                            const int ix = ox * stride_ - pad_ + kx;
                            dst[ox] = (ix >= 0 && ix < w) ? src[ix] : 0.0f;
                        }
                    }
                }
            }
}

void Conv2d::col2im(const float* col, int h, int w, float* dx) const {
    const int oh = output_size(h), ow = output_size(w);
    const std::size_t p = static_cast<std::size_t>(oh) * ow;
    std::fill(dx, dx + static_cast<std::size_t>(in_) * h * w, 0.0f);
    for (int c = 0; c < in_; ++c)
        for (int ky = 0; ky < kernel_; ++ky)
            for (int kx = 0; kx < kernel_; ++kx) {
                const float* row = col + ((static_cast<std::size_t>(c) * kernel_ + ky) * kernel_ + kx) * p;
                float* plane = dx + static_cast<std::size_t>(c) * h * w;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride_ - pad_ + ky;
                    if (iy < 0 || iy >= h) continue;
                    const float* src = row + static_cast<std::size_t>(oy) * ow;
                    float* dst = plane + static_cast<std::size_t>(iy) * w;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride_ - pad_ + kx;
                        if (ix >= 0 && ix < w) dst[ix] += src[ox];
                    }
                }
            }
}

Tensor Conv2d::forward(const ParameterSet& params, const Tensor& x) const {
    if (x.c() != in_)
        throw InvalidInput("conv: expected " + std::to_string(in_) + " input channels, got " + x.shape().str());
    const int h = x.h(), w = x.w(), oh = output_size(h), ow = output_size(w);
    const std::size_t p = static_cast<std::size_t>(oh) * ow;
    const int k = in_ * kernel_ * kernel_;
    Tensor y(x.n(), out_, oh, ow);
    RowMat col(k, static_cast<Eigen::Index>(p));
    CMapRow wmat(params[weight_].value.data(), out_, k);
    Eigen::Map<const Eigen::VectorXf> bias(params[bias_].value.data(), out_);
    for (int n = 0; n < x.n(); ++n) {
        im2col(x.sample(n).data(), h, w, col.data());
        MapRow out(y.sample(n).data(), out_, static_cast<Eigen::Index>(p));
        out.noalias() = wmat * col;
        out.colwise() += bias;
    }
    return y;
}

void Conv2d::backward_impl(const ParameterSet& params, ParameterSet* grads, const Tensor& x, const Tensor& dy,
                           Tensor* dx) const {
    const int h = x.h(), w = x.w(), oh = output_size(h), ow = output_size(w);
    if (dy.n() != x.n() || dy.c() != out_ || dy.h() != oh || dy.w() != ow)
        throw InvalidInput("conv backward: gradient shape " + dy.shape().str());
    const std::size_t p = static_cast<std::size_t>(oh) * ow;
    const int k = in_ * kernel_ * kernel_;
    RowMat col(k, static_cast<Eigen::Index>(p));
    RowMat dcol;
    CMapRow wmat(params[weight_].value.data(), out_, k);
    if (dx) *dx = Tensor(x.shape());
    for (int n = 0; n < x.n(); ++n) {
        CMapRow g(dy.sample(n).data(), out_, static_cast<Eigen::Index>(p));
        if (grads) {
            im2col(x.sample(n).data(), h, w, col.data());
            MapRow dw((*grads)[weight_].grad.data(), out_, k);
            dw.noalias() += g * col.transpose();
            // Plain loop: a vectorised reduction would depend on the buffer's alignment.
            float* db = (*grads)[bias_].grad.data();
            for (int o = 0; o < out_; ++o) {
                const float* row = g.data() + static_cast<std::size_t>(o) * p;
                float s = 0.0f;
                for (std::size_t i = 0; i < p; ++i) s += row[i];
                db[o] += s;
            }
        }
        if (dx) {
            dcol.noalias() = wmat.transpose() * g;
            col2im(dcol.data(), h, w, dx->sample(n).data());
        }
    }
}

void Conv2d::backward(ParameterSet& params, const Tensor& x, const Tensor& dy, Tensor* dx) const {
    backward_impl(params, &params, x, dy, dx);
}

Tensor Conv2d::backward_input(const ParameterSet& params, const Tensor& x, const Tensor& dy) const {
    Tensor dx;
    backward_impl(params, nullptr, x, dy, &dx);
    return dx;
}

Tensor relu(const Tensor& x) {
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y.data()[i] = std::max(x.data()[i], 0.0f);
    return y;
}

Tensor relu_backward(const Tensor& y, const Tensor& dy) {
    require_same_shape(y.shape(), dy.shape(), "relu_backward");
    Tensor dx(y.shape());
    for (std::size_t i = 0; i < y.size(); ++i) dx.data()[i] = y.data()[i] > 0.0f ? dy.data()[i] : 0.0f;
    return dx;
}

Tensor sigmoid(const Tensor& x) {
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y.data()[i] = 1.0f / (1.0f + std::exp(-x.data()[i]));
    return y;
}

Tensor sigmoid_backward(const Tensor& y, const Tensor& dy) {
    require_same_shape(y.shape(), dy.shape(), "sigmoid_backward");
    Tensor dx(y.shape());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const float s = y.data()[i];
        dx.data()[i] = dy.data()[i] * s * (1.0f - s);
    }
    return dx;
}

Tensor add(const Tensor& a, const Tensor& b) {
    Tensor out = a;
    add_inplace(out, b);
    return out;
}

void add_inplace(Tensor& a, const Tensor& b) {
    require_same_shape(a.shape(), b.shape(), "add");
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += b.data()[i];
}

Tensor multiply(const Tensor& a, const Tensor& b) {
    require_same_shape(a.shape(), b.shape(), "multiply");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
    return out;
}

Tensor concat_channels(std::span<const Tensor* const> parts) {
    if (parts.empty()) return {};
    const Tensor& first = *parts.front();
    int channels = 0;
    for (const Tensor* t : parts) {
        if (t->n() != first.n() || t->h() != first.h() || t->w() != first.w())
            throw InvalidInput("concat_channels: spatial/batch mismatch");
        channels += t->c();
    }
    Tensor out(first.n(), channels, first.h(), first.w());
    for (int n = 0; n < first.n(); ++n) {
        float* dst = out.sample(n).data();
        for (const Tensor* t : parts) {
            auto src = t->sample(n);
            dst = std::copy(src.begin(), src.end(), dst);
        }
    }
    return out;
}

Tensor slice_channels(const Tensor& t, int c0, int count) {
    if (c0 < 0 || count <= 0 || c0 + count > t.c()) throw InvalidInput("slice_channels: range");
    Tensor out(t.n(), count, t.h(), t.w());
    for (int n = 0; n < t.n(); ++n) {
        const float* src = t.channel(n, c0).data();
        std::copy(src, src + count * t.plane(), out.sample(n).data());
    }
    return out;
}

void accumulate_channels(Tensor& dst, int c0, const Tensor& src) {
    if (src.n() != dst.n() || src.h() != dst.h() || src.w() != dst.w() || c0 + src.c() > dst.c())
        throw InvalidInput("accumulate_channels: shape");
    for (int n = 0; n < src.n(); ++n) {
        auto s = src.sample(n);
        float* d = dst.channel(n, c0).data();
        for (std::size_t i = 0; i < s.size(); ++i) d[i] += s[i];
    }
}

Adam::Adam(const ParameterSet& params, AdamConfig cfg) : cfg_(cfg) {
    for (const auto& p : params) {
        m_.emplace_back(p.size(), 0.0f);
        v_.emplace_back(p.size(), 0.0f);
    }
}

void Adam::step(ParameterSet& params) {
    if (params.count() != m_.size()) throw InvalidInput("adam: parameter set does not match optimizer state");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const float b1 = static_cast<float>(cfg_.beta1), b2 = static_cast<float>(cfg_.beta2);
    const float step = static_cast<float>(cfg_.lr / bc1);
    const float inv_sqrt_bc2 = static_cast<float>(1.0 / std::sqrt(bc2));
    const float eps = static_cast<float>(cfg_.eps);
    for (std::size_t i = 0; i < params.count(); ++i) {
        Param& p = params[i];
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t k = 0; k < p.size(); ++k) {
            const float g = p.grad[k];
            m[k] = b1 * m[k] + (1.0f - b1) * g;
            v[k] = b2 * v[k] + (1.0f - b2) * g * g;
            p.value[k] -= step * m[k] / (std::sqrt(v[k]) * inv_sqrt_bc2 + eps);
        }
    }
}

void Adam::restore(long long t, std::vector<std::vector<float>> m, std::vector<std::vector<float>> v) {
    if (m.size() != m_.size() || v.size() != v_.size()) throw InvalidInput("adam: restore size mismatch");
    t_ = t;
    m_ = std::move(m);
    v_ = std::move(v);
}

}  // namespace hdrssl
