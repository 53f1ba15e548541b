#include "hdrssl/inference.hpp"

#include <cmath>
#include <numbers>

#include "hdrssl/data.hpp"

namespace hdrssl {

void TileConfig::validate() const {
    if (patch <= 0 || stride <= 0 || stride > patch) throw InvalidInput("tile stride must lie in (0, patch]");
}

double hann_weight(int i, int n) {
    const double s = std::sin(std::numbers::pi * (i + 0.5) / n);
    return s * s;
}

namespace {

std::vector<int> tile_positions(int extent, const TileConfig& t) {
    if (extent <= t.patch) return {0};
    return grid_positions(extent, t.patch, t.stride);
}

}  // namespace

FullOutput infer_tiled(const HdrModel& model, const LdrBurst& burst, const PhotometricConfig& photo,
                       const TileConfig& tiles) {
    tiles.validate();
    burst.validate();
    const Tensor& ref = burst.frames[LdrBurst::kReference];
    const int h = ref.h(), w = ref.w();
    const int ph = std::min(h, tiles.patch), pw = std::min(w, tiles.patch);
    const auto ys = tile_positions(h, tiles), xs = tile_positions(w, tiles);

    std::vector<double> wy(ph), wx(pw);
    for (int i = 0; i < ph; ++i) wy[i] = hann_weight(i, ph);
    for (int i = 0; i < pw; ++i) wx[i] = hann_weight(i, pw);

    const int fc = model.network().backbone().feature_channels();
    TensorD pred(1, 3, h, w), unc(1, 3, h, w), feat(1, fc, h, w);
    std::vector<double> norm(static_cast<std::size_t>(h) * w, 0.0);
    for (int y0 : ys)
        for (int x0 : xs) {
            LdrBurst tile;
            for (int i = 0; i < 3; ++i) tile.frames[i] = crop(burst.frames[i], y0, x0, ph, pw);
            tile.exposure_times = burst.exposure_times;
            const FullOutput out = model.forward_full(assemble_input(tile, photo));
            for (int y = 0; y < ph; ++y)
                for (int x = 0; x < pw; ++x) {
                    const double wt = wy[y] * wx[x];
                    norm[static_cast<std::size_t>(y0 + y) * w + x0 + x] += wt;
                    for (int c = 0; c < 3; ++c) {
                        pred(0, c, y0 + y, x0 + x) += wt * out.prediction(0, c, y, x);
                        unc(0, c, y0 + y, x0 + x) += wt * out.uncertainty(0, c, y, x);
                    }
                    for (int c = 0; c < fc; ++c) feat(0, c, y0 + y, x0 + x) += wt * out.feature(0, c, y, x);
                }
        }
    auto finish = [&](TensorD& acc) {
        for (int c = 0; c < acc.c(); ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) acc(0, c, y, x) /= norm[static_cast<std::size_t>(y) * w + x];
        return tensor_cast<float>(acc);
    };
    return {finish(pred), finish(unc), finish(feat)};
}

}  // namespace hdrssl
