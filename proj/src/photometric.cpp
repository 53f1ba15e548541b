#include "hdrssl/photometric.hpp"

#include <string>

namespace hdrssl {

void PhotometricConfig::validate() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidInput("gamma must be positive");
    if (!(mu > 0.0) || !std::isfinite(mu)) throw InvalidInput("mu must be positive");
}

void LdrBurst::validate() const {
    const Shape ref = frames[0].shape();
    if (ref.n != 1 || ref.c != 3 || ref.h <= 0 || ref.w <= 0)
        throw InvalidInput("burst frame 0 must be 1x3xHxW, got " + ref.str());
    for (int i = 0; i < 3; ++i) {
        if (!(frames[i].shape() == ref))
            throw InvalidInput("burst frame " + std::to_string(i) + " shape " + frames[i].shape().str() +
                               " differs from " + ref.str());
        if (!(exposure_times[i] > 0.0) || !std::isfinite(exposure_times[i]))
            throw InvalidInput("exposure time " + std::to_string(i) + " must be positive");
        for (float v : frames[i].values())
            if (!(v >= 0.0f && v <= 1.0f))
                throw InvalidInput("burst frame " + std::to_string(i) + " has a value outside [0,1]");
    }
}

std::array<Tensor, 3> gamma_correct(const LdrBurst& burst, const PhotometricConfig& cfg) {
    cfg.validate();
    burst.validate();
    std::array<Tensor, 3> out;
    for (int i = 0; i < 3; ++i) {
        const Tensor& f = burst.frames[i];
        const double t = burst.exposure_times[i];
        out[i] = Tensor(f.shape());
        for (std::size_t k = 0; k < f.size(); ++k)
            out[i].data()[k] = static_cast<float>(gamma_correct_value(f.data()[k], t, cfg.gamma));
    }
    return out;
}

Tensor assemble_input(const LdrBurst& burst, const PhotometricConfig& cfg) {
    const auto corrected = gamma_correct(burst, cfg);
    const int h = burst.height(), w = burst.width();
    Tensor out = Tensor::image(18, h, w);
    for (int i = 0; i < 3; ++i) {
        for (int c = 0; c < 3; ++c) {
            auto raw = burst.frames[i].channel(0, c);
            auto gc = corrected[i].channel(0, c);
            std::copy(raw.begin(), raw.end(), out.channel(0, 6 * i + c).begin());
            std::copy(gc.begin(), gc.end(), out.channel(0, 6 * i + 3 + c).begin());
        }
    }
    return out;
}

}  // namespace hdrssl
