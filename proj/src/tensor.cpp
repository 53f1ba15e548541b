#include "hdrssl/tensor.hpp"

#include <algorithm>

namespace hdrssl {

std::string Shape::str() const {
    return "[" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + "]";
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
    if (!(a == b)) throw InvalidInput(std::string(what) + ": shape mismatch " + a.str() + " vs " + b.str());
}

Tensor take_sample(const Tensor& batch, int index) {
    if (index < 0 || index >= batch.n()) throw InvalidInput("take_sample: index out of range");
    Tensor out = Tensor::image(batch.c(), batch.h(), batch.w());
    auto src = batch.sample(index);
    std::copy(src.begin(), src.end(), out.data());
    return out;
}

Tensor stack(std::span<const Tensor> images) {
    if (images.empty()) return {};
    const Shape s = images.front().shape();
    Tensor out(static_cast<int>(images.size()), s.c, s.h, s.w);
    for (std::size_t i = 0; i < images.size(); ++i) {
        const Tensor& img = images[i];
        if (img.n() != 1 || img.c() != s.c || img.h() != s.h || img.w() != s.w)
            throw InvalidInput("stack: image shapes differ");
        std::copy(img.data(), img.data() + img.size(), out.sample(static_cast<int>(i)).data());
    }
    return out;
}

Tensor crop(const Tensor& t, int y0, int x0, int h, int w) {
    if (y0 < 0 || x0 < 0 || h <= 0 || w <= 0 || y0 + h > t.h() || x0 + w > t.w())
        throw InvalidInput("crop: window " + std::to_string(h) + "x" + std::to_string(w) + " at (" +
                           std::to_string(y0) + "," + std::to_string(x0) + ") outside " + t.shape().str());
    Tensor out(t.n(), t.c(), h, w);
    for (int n = 0; n < t.n(); ++n)
        for (int c = 0; c < t.c(); ++c)
            for (int y = 0; y < h; ++y) {
                const float* src = &t(n, c, y0 + y, x0);
                std::copy(src, src + w, &out(n, c, y, 0));
            }
    return out;
}

}  // namespace hdrssl
