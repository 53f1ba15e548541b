#pragma once

#include <limits>

#include "hdrssl/photometric.hpp"
#include "hdrssl/tensor.hpp"

namespace hdrssl {

/// Returned by psnr() for identical images. Never fold it into an average.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

inline bool is_identical_psnr(double v) { return v == kPsnrIdentical; }

/// 10 log10(1 / MSE) over every element, peak value 1.
double psnr(const Tensor& a, const Tensor& b);

/// Mean SSIM over channels and valid window positions: 11x11 Gaussian window,
/// sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic range 1.
double ssim(const Tensor& a, const Tensor& b);

inline constexpr int kSsimWindow = 11;

struct QualityScores {
    double psnr_mu = 0.0;
    double psnr_l = 0.0;
    double ssim_mu = 0.0;
    double ssim_l = 0.0;
};

/// PSNR/SSIM in the tonemapped and (clamped) linear domains.
QualityScores evaluate_quality(const Tensor& prediction, const Tensor& reference, const PhotometricConfig& cfg);

}  // namespace hdrssl
