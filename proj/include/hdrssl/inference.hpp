#pragma once

#include "hdrssl/model.hpp"
#include "hdrssl/photometric.hpp"

namespace hdrssl {

struct TileConfig {
    int patch = 64;
    int stride = 32;

    void validate() const;
};

/// sin^2(pi (i + 0.5) / n): strictly positive, so every pixel receives weight.
double hann_weight(int i, int n);

/// Full-frame forward by overlapping tiles blended with a separable Hann window.
/// Images no larger than one tile in either dimension use a single tile along that axis.
FullOutput infer_tiled(const HdrModel& model, const LdrBurst& burst, const PhotometricConfig& photo,
                       const TileConfig& tiles);

}  // namespace hdrssl
