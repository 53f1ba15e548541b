#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hdrssl/nn.hpp"
#include "hdrssl/photometric.hpp"
#include "hdrssl/tensor.hpp"

namespace hdrssl {

/// Binary per-pixel keep mask, N x 1 x H x W, values in {0,1}.
using PixelMask = BasicTensor<std::uint8_t>;

/// Floor applied to the judge output before the uncertainty loss.
inline constexpr double kSigmaFloor = 1e-3;

/// Raised when a loss term becomes non-finite; names the offending term.
class NumericalError : public std::runtime_error {
public:
    NumericalError(std::string term, const std::string& what) : std::runtime_error(what), term_(std::move(term)) {}
    const std::string& term() const { return term_; }

private:
    std::string term_;
};

namespace detail {

template <typename T>
void check_mask(const BasicTensor<T>& pred, const PixelMask* mask, const char* what) {
    if (!mask) return;
    if (mask->n() != pred.n() || mask->c() != 1 || mask->h() != pred.h() || mask->w() != pred.w())
        throw InvalidInput(std::string(what) + ": mask shape " + mask->shape().str() + " does not match " +
                           pred.shape().str());
}

inline bool mask_on(const PixelMask* mask, int n, std::size_t pixel) {
    return !mask || mask->sample(n)[pixel] != 0;
}

}  // namespace detail

/// Mean |T(pred) - T(target)|. With a mask, per-pixel L1 is weighted by the mask and
/// normalised by 3 * (mask sum); an all-zero mask yields 0.
template <typename T>
double recon_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target, const PhotometricConfig& cfg,
                  const PixelMask* mask = nullptr, BasicTensor<T>* grad_pred = nullptr) {
    require_same_shape(pred.shape(), target.shape(), "recon_loss");
    detail::check_mask(pred, mask, "recon_loss");
    if (grad_pred) *grad_pred = BasicTensor<T>(pred.shape());
    const std::size_t plane = pred.plane();
    double sum = 0.0, count = 0.0;
    for (int n = 0; n < pred.n(); ++n)
        for (std::size_t p = 0; p < plane; ++p) {
            if (!detail::mask_on(mask, n, p)) continue;
            count += pred.c();
            for (int c = 0; c < pred.c(); ++c) {
                const std::size_t i = (static_cast<std::size_t>(n) * pred.c() + c) * plane + p;
                const double d = tonemap_value(pred.data()[i], cfg.mu) - tonemap_value(target.data()[i], cfg.mu);
                sum += std::abs(d);
            }
        }
    if (count == 0.0) return 0.0;
    if (grad_pred) {
        for (int n = 0; n < pred.n(); ++n)
            for (std::size_t p = 0; p < plane; ++p) {
                if (!detail::mask_on(mask, n, p)) continue;
                for (int c = 0; c < pred.c(); ++c) {
                    const std::size_t i = (static_cast<std::size_t>(n) * pred.c() + c) * plane + p;
                    const double d = tonemap_value(pred.data()[i], cfg.mu) - tonemap_value(target.data()[i], cfg.mu);
                    const double sgn = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
                    grad_pred->data()[i] = static_cast<T>(sgn * tonemap_derivative(pred.data()[i], cfg.mu) / count);
                }
            }
    }
    return sum / count;
}

/// Gaussian negative log-likelihood form over the tonemapped residual:
/// mean of d^2 / (2 s^2) + log(s) with s = max(sigma, kSigmaFloor), over unmasked entries.
template <typename T>
double uncertainty_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target, const BasicTensor<T>& sigma,
                        const PhotometricConfig& cfg, const PixelMask* mask = nullptr,
                        BasicTensor<T>* grad_pred = nullptr, BasicTensor<T>* grad_sigma = nullptr) {
    require_same_shape(pred.shape(), target.shape(), "uncertainty_loss");
    require_same_shape(pred.shape(), sigma.shape(), "uncertainty_loss sigma");
    detail::check_mask(pred, mask, "uncertainty_loss");
    if (grad_pred) *grad_pred = BasicTensor<T>(pred.shape());
    if (grad_sigma) *grad_sigma = BasicTensor<T>(pred.shape());
    const std::size_t plane = pred.plane();
    double count = 0.0;
    for (int n = 0; n < pred.n(); ++n)
        for (std::size_t p = 0; p < plane; ++p)
            if (detail::mask_on(mask, n, p)) count += pred.c();
    if (count == 0.0) return 0.0;
    double sum = 0.0;
    for (int n = 0; n < pred.n(); ++n)
        for (std::size_t p = 0; p < plane; ++p) {
            if (!detail::mask_on(mask, n, p)) continue;
            for (int c = 0; c < pred.c(); ++c) {
                const std::size_t i = (static_cast<std::size_t>(n) * pred.c() + c) * plane + p;
                const double d = tonemap_value(pred.data()[i], cfg.mu) - tonemap_value(target.data()[i], cfg.mu);
                const double raw = sigma.data()[i];
                const double s = raw > kSigmaFloor ? raw : kSigmaFloor;
                sum += d * d / (2.0 * s * s) + std::log(s);
                if (grad_pred)
                    grad_pred->data()[i] =
                        static_cast<T>(d / (s * s) * tonemap_derivative(pred.data()[i], cfg.mu) / count);
                if (grad_sigma)
                    grad_sigma->data()[i] =
                        raw > kSigmaFloor ? static_cast<T>((-d * d / (s * s * s) + 1.0 / s) / count) : T(0);
            }
        }
    return sum / count;
}

/// Frozen multi-level feature extractor for the perceptual loss.
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    /// Smallest accepted spatial size.
    virtual int min_size() const = 0;
    virtual std::vector<Tensor> features(const Tensor& image) const = 0;
    /// Vector-Jacobian product: d(sum_j <d_features[j], features_j>) / d image.
    virtual Tensor input_gradient(const Tensor& image, std::span<const Tensor> d_features) const = 0;
};

/// Three strided 3x3 conv + ReLU levels (3 -> 8 -> 16 -> 16 channels) with fixed-seed
/// random weights.
class ConvPyramidExtractor final : public FeatureExtractor {
public:
    explicit ConvPyramidExtractor(std::uint64_t seed = 0x5eed);

    int min_size() const override { return 8; }
    std::vector<Tensor> features(const Tensor& image) const override;
    Tensor input_gradient(const Tensor& image, std::span<const Tensor> d_features) const override;

private:
    ParameterSet params_;
    std::vector<Conv2d> levels_;
};

/// Sum over levels of mean |psi_j(T(pred)) - psi_j(T(target))|.
double perceptual_loss(const Tensor& pred, const Tensor& target, const PhotometricConfig& cfg,
                       const FeatureExtractor& fx, Tensor* grad_pred = nullptr);

struct LossWeights {
    double lambda_u = 1.0;
    double lambda_v = 0.01;

    void validate() const;
};

struct LossTerms {
    double recon = 0.0;
    double perceptual = 0.0;
    double uncertainty = 0.0;
};

/// L_s^r + lv L_s^v + L_s^k + lu (L_u^r + lv L_u^v + L_u^k). Missing unlabeled terms count as 0.
/// Throws NumericalError naming the first non-finite term.
double total_loss(const LossTerms& labeled, const std::optional<LossTerms>& unlabeled, const LossWeights& w);

}  // namespace hdrssl
