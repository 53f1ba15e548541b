#include "hdrssl/metrics.hpp"

#include <array>
#include <cmath>
#include <vector>

namespace hdrssl {

double psnr(const Tensor& a, const Tensor& b) {
    require_same_shape(a.shape(), b.shape(), "psnr");
    if (a.empty()) throw InvalidInput("psnr: empty image");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i]);
        sum += d * d;
    }
    if (sum == 0.0) return kPsnrIdentical;
    const double mse = sum / static_cast<double>(a.size());
    return -10.0 * std::log10(mse);
}

namespace {

std::array<double, kSsimWindow> gaussian_kernel() {
    std::array<double, kSsimWindow> k{};
    constexpr double sigma = 1.5;
    double total = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double x = i - kSsimWindow / 2;
        k[i] = std::exp(-(x * x) / (2.0 * sigma * sigma));
        total += k[i];
    }
    for (double& v : k) v /= total;
    return k;
}

// Valid-mode separable filtering of a single plane.
std::vector<double> filter_valid(const std::vector<double>& src, int h, int w,
                                 const std::array<double, kSsimWindow>& k) {
    const int oh = h - kSsimWindow + 1, ow = w - kSsimWindow + 1;
    std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < kSsimWindow; ++i) s += k[i] * src[static_cast<std::size_t>(y) * w + x + i];
            tmp[static_cast<std::size_t>(y) * ow + x] = s;
        }
    std::vector<double> out(static_cast<std::size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < kSsimWindow; ++i) s += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = s;
        }
    return out;
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b) {
    require_same_shape(a.shape(), b.shape(), "ssim");
    if (a.h() < kSsimWindow || a.w() < kSsimWindow)
        throw InvalidInput("ssim: image " + a.shape().str() + " smaller than the 11x11 window");
    static const auto kernel = gaussian_kernel();
    constexpr double c1 = (0.01 * 1.0) * (0.01 * 1.0);
    constexpr double c2 = (0.03 * 1.0) * (0.03 * 1.0);

    const int h = a.h(), w = a.w();
    const std::size_t plane = a.plane();
    double total = 0.0;
    std::size_t count = 0;
    std::vector<double> x(plane), y(plane), xx(plane), yy(plane), xy(plane);
    for (int n = 0; n < a.n(); ++n)
        for (int c = 0; c < a.c(); ++c) {
            auto pa = a.channel(n, c);
            auto pb = b.channel(n, c);
            for (std::size_t i = 0; i < plane; ++i) {
                x[i] = pa[i];
                y[i] = pb[i];
                xx[i] = x[i] * x[i];
                yy[i] = y[i] * y[i];
                xy[i] = x[i] * y[i];
            }
            const auto mx = filter_valid(x, h, w, kernel);
            const auto my = filter_valid(y, h, w, kernel);
            const auto sxx = filter_valid(xx, h, w, kernel);
            const auto syy = filter_valid(yy, h, w, kernel);
            const auto sxy = filter_valid(xy, h, w, kernel);
            for (std::size_t i = 0; i < mx.size(); ++i) {
                const double vx = sxx[i] - mx[i] * mx[i];
                const double vy = syy[i] - my[i] * my[i];
                const double cov = sxy[i] - mx[i] * my[i];
                total += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
                         ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
            }
            count += mx.size();
        }
    return total / static_cast<double>(count);
}

QualityScores evaluate_quality(const Tensor& prediction, const Tensor& reference, const PhotometricConfig& cfg) {
    const Tensor lp = clamp01(prediction), lr = clamp01(reference);
    const Tensor tp = tonemap(prediction, cfg), tr = tonemap(reference, cfg);
    QualityScores q;
    q.psnr_mu = psnr(tp, tr);
    q.psnr_l = psnr(lp, lr);
    q.ssim_mu = ssim(tp, tr);
    q.ssim_l = ssim(lp, lr);
    return q;
}

}  // namespace hdrssl
