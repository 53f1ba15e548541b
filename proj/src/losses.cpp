#include "hdrssl/losses.hpp"

#include <random>

namespace hdrssl {

ConvPyramidExtractor::ConvPyramidExtractor(std::uint64_t seed) {
    levels_.emplace_back(params_, "psi.level0", 3, 8, 3, 2);
    levels_.emplace_back(params_, "psi.level1", 8, 16, 3, 2);
    levels_.emplace_back(params_, "psi.level2", 16, 16, 3, 2);
    std::mt19937_64 rng(seed);
    for (const auto& level : levels_) level.init(params_, rng);
}

std::vector<Tensor> ConvPyramidExtractor::features(const Tensor& image) const {
    if (image.c() != 3) throw InvalidInput("feature extractor expects 3 channels, got " + image.shape().str());
    if (image.h() < min_size() || image.w() < min_size())
        throw InvalidInput("patch " + image.shape().str() + " smaller than the feature extractor minimum of " +
                           std::to_string(min_size()));
    std::vector<Tensor> out;
    const Tensor* x = &image;
    for (const auto& level : levels_) {
        out.push_back(relu(level.forward(params_, *x)));
        x = &out.back();
    }
    return out;
}

Tensor ConvPyramidExtractor::input_gradient(const Tensor& image, std::span<const Tensor> d_features) const {
    if (d_features.size() != levels_.size()) throw InvalidInput("input_gradient: one gradient per level required");
    const auto acts = features(image);
    Tensor carry;
    for (int j = static_cast<int>(levels_.size()) - 1; j >= 0; --j) {
        Tensor d_act = d_features[j];
        if (!carry.empty()) add_inplace(d_act, carry);
        const Tensor& input = j == 0 ? image : acts[j - 1];
        carry = levels_[j].backward_input(params_, input, relu_backward(acts[j], d_act));
    }
    return carry;
}

double perceptual_loss(const Tensor& pred, const Tensor& target, const PhotometricConfig& cfg,
                       const FeatureExtractor& fx, Tensor* grad_pred) {
    require_same_shape(pred.shape(), target.shape(), "perceptual_loss");
    const Tensor tp = tonemap(pred, cfg);
    const Tensor tt = tonemap(target, cfg);
    const auto fp = fx.features(tp);
    const auto ft = fx.features(tt);
    double total = 0.0;
    std::vector<Tensor> d_features;
    for (std::size_t j = 0; j < fp.size(); ++j) {
        require_same_shape(fp[j].shape(), ft[j].shape(), "perceptual_loss features");
        double sum = 0.0;
        const double inv = 1.0 / static_cast<double>(fp[j].size());
        Tensor d(fp[j].shape());
        for (std::size_t i = 0; i < fp[j].size(); ++i) {
            const double diff = static_cast<double>(fp[j].data()[i]) - ft[j].data()[i];
            sum += std::abs(diff);
            d.data()[i] = static_cast<float>((diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0)) * inv);
        }
        total += sum * inv;
        d_features.push_back(std::move(d));
    }
    if (grad_pred) {
        Tensor g = fx.input_gradient(tp, d_features);
        for (std::size_t i = 0; i < g.size(); ++i)
            g.data()[i] = static_cast<float>(g.data()[i] * tonemap_derivative(pred.data()[i], cfg.mu));
        *grad_pred = std::move(g);
    }
    return total;
}

void LossWeights::validate() const {
    if (!(lambda_u >= 0.0) || !(lambda_v >= 0.0)) throw InvalidInput("loss weights must be non-negative");
}

double total_loss(const LossTerms& labeled, const std::optional<LossTerms>& unlabeled, const LossWeights& w) {
    auto check = [](double v, const char* name) {
        if (!std::isfinite(v)) throw NumericalError(name, std::string("non-finite loss term ") + name);
    };
    check(labeled.recon, "L_s^r");
    check(labeled.perceptual, "L_s^v");
    check(labeled.uncertainty, "L_s^k");
    double total = labeled.recon + w.lambda_v * labeled.perceptual + labeled.uncertainty;
    if (unlabeled) {
        check(unlabeled->recon, "L_u^r");
        check(unlabeled->perceptual, "L_u^v");
        check(unlabeled->uncertainty, "L_u^k");
        total += w.lambda_u * (unlabeled->recon + w.lambda_v * unlabeled->perceptual + unlabeled->uncertainty);
    }
    check(total, "L");
    return total;
}

}  // namespace hdrssl
