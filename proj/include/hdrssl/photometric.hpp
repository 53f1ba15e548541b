#pragma once

#include <array>
#include <cmath>

#include "hdrssl/tensor.hpp"

namespace hdrssl {

struct PhotometricConfig {
    double gamma = 2.2;
    double mu = 5000.0;

    void validate() const;
};

/// Three exposure-bracketed LDR frames (3 x H x W each, values in [0,1]).
/// Frame 1 is the reference; exposure times are linear multipliers.
struct LdrBurst {
    std::array<Tensor, 3> frames;
    std::array<double, 3> exposure_times{1.0, 1.0, 1.0};

    static constexpr int kReference = 1;

    int height() const { return frames[0].h(); }
    int width() const { return frames[0].w(); }

    /// Throws InvalidInput unless the frames share a 1x3xHxW shape, values lie in
    /// [0,1] and every exposure time is strictly positive.
    void validate() const;
};

/// Converts an exposure value (stops) into a linear exposure multiplier.
inline double exposure_from_stops(double ev) { return std::exp2(ev); }

inline double gamma_correct_value(double x, double t, double gamma) { return std::pow(x, gamma) / t; }

inline double tonemap_value(double v, double mu) {
    const double c = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    return std::log1p(mu * c) / std::log1p(mu);
}

/// d tonemap / d v; zero outside [0,1] where the clamp is active.
inline double tonemap_derivative(double v, double mu) {
    if (v < 0.0 || v > 1.0) return 0.0;
    return mu / ((1.0 + mu * v) * std::log1p(mu));
}

/// Per-frame x^gamma / t.
std::array<Tensor, 3> gamma_correct(const LdrBurst& burst, const PhotometricConfig& cfg);

/// 18-channel network input: per frame, 3 raw channels then 3 gamma-corrected channels.
Tensor assemble_input(const LdrBurst& burst, const PhotometricConfig& cfg);

template <typename T>
BasicTensor<T> tonemap(const BasicTensor<T>& img, const PhotometricConfig& cfg) {
    BasicTensor<T> out(img.shape());
    for (std::size_t i = 0; i < img.size(); ++i)
        out.data()[i] = static_cast<T>(tonemap_value(static_cast<double>(img.data()[i]), cfg.mu));
    return out;
}

template <typename T>
BasicTensor<T> clamp01(const BasicTensor<T>& img) {
    BasicTensor<T> out(img.shape());
    for (std::size_t i = 0; i < img.size(); ++i) out.data()[i] = std::clamp(img.data()[i], T(0), T(1));
    return out;
}

}  // namespace hdrssl
