#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hdrssl/inference.hpp"
#include "hdrssl/semisup.hpp"

namespace hdrssl {

struct MaskViz {
    Tensor pseudo_tonemapped;  ///< 1x3xHxW
    Tensor heatmap;            ///< 1x1xHxW normalised pixel scores
    Tensor patch_overlay;      ///< 1x3xHxW, red tint where no covering patch is kept
    Tensor pixel_overlay;      ///< 1x3xHxW, red tint on masked pixels
    double heat_min = 0.0, heat_max = 0.0;
    int patches_kept = 0, patches_total = 0;
    double pixel_kept_fraction = 0.0;
};

/// Thresholds are used as given (any non-negative value), so values above 1 keep everything.
MaskViz build_mask_viz(const HdrModel& teacher, const SceneRecord& scene, const PhotometricConfig& photo,
                       const PatchGrid& grid, const MaskThresholds& thresholds, int pool_batch = 16);

/// pseudo_hdr.png, uncertainty.png, patch_mask.png, pixel_mask.png and summary.txt.
void write_mask_viz(const std::filesystem::path& dir, const MaskViz& viz, const MaskThresholds& thresholds);

/// One tab-separated line per record: patch_id scene y x raw_patch_score patch_score kept unmasked_fraction.
std::string format_pool_table(const std::vector<Patch>& patches, const std::vector<PseudoLabelRecord>& pool);

}  // namespace hdrssl
