#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hdrssl/photometric.hpp"
#include "hdrssl/tensor.hpp"

namespace hdrssl {

struct SceneRecord {
    std::string scene_id;
    LdrBurst burst;
    std::optional<Tensor> gt;  ///< linear radiance in [0,1], aligned with the reference frame

    void validate() const;
};

/// Loads `<dir>/{*.tif x3, exposure.txt, *.hdr?}`. TIFFs are taken in lexicographic order;
/// exposure.txt holds three stop values; the HDR ground truth is optional.
SceneRecord load_kalantari_scene(const std::filesystem::path& dir);

/// Writes `<dir>/{ldr_0.tif, ldr_1.tif, ldr_2.tif, exposure.txt, gt.hdr?}` (16-bit TIFF,
/// Radiance RGBE).
void write_scene(const std::filesystem::path& dir, const SceneRecord& scene);

/// The exact values load_kalantari_scene would return after write_scene.
SceneRecord quantize_for_storage(const SceneRecord& scene);

/// Every scene directory under `root`, sorted by name.
std::vector<SceneRecord> load_dataset(const std::filesystem::path& root);

enum class SplitPolicy { FirstN, Random };

struct SplitSpec {
    int n_labeled = 5;
    std::uint64_t seed = 0;
    SplitPolicy policy = SplitPolicy::FirstN;
};

struct DataSplit {
    std::vector<SceneRecord> labeled;
    std::vector<SceneRecord> unlabeled;              ///< gt removed
    std::vector<std::optional<Tensor>> hidden_gt;    ///< diagnostics only, parallel to `unlabeled`
};

DataSplit make_split(const std::vector<SceneRecord>& scenes, const SplitSpec& spec);

struct PatchGrid {
    int patch_size = 64;
    int stride = 32;

    void validate() const;
};

enum class PatchMode { Grid, Random };

struct Patch {
    std::string scene_id;
    int y = 0, x = 0;
    LdrBurst burst;
    std::optional<Tensor> gt;
};

/// Grid positions along one axis: every `stride`, plus an edge-snapped last position.
std::vector<int> grid_positions(int extent, int patch_size, int stride);

/// Aligned crops of all frames and the GT. Random mode draws `random_count` windows
/// (default: as many as the grid would give) uniformly.
std::vector<Patch> extract_patches(const SceneRecord& scene, const PatchGrid& grid, PatchMode mode,
                                   std::uint64_t seed = 0, int random_count = -1);

struct SynthOptions {
    int height = 128;
    int width = 128;
    double gamma = 2.2;
    std::array<double, 3> stops{-2.0, 0.0, 2.0};
    double motion = 6.0;          ///< max foreground displacement (px) of frames 0 and 2
    double noise = 0.01;          ///< display-domain noise sigma at t = 1, scaled by 1/t
    bool bright_region = true;    ///< radiance >= 0.3 block; clips in the long exposure only
    int foreground_objects = 2;

    static SynthOptions from_difficulty(double difficulty);
};

/// Procedural exposure bracket: smooth background + textured shapes + optional bright
/// block, moving foreground objects in the non-reference frames, exposure-scaled noise.
/// Background radiance stays below 0.2 so only the bright block clips at t = 4.
SceneRecord synth_scene(std::uint64_t seed, const SynthOptions& opts);
SceneRecord synth_scene(std::uint64_t seed, double difficulty);

/// Pixels of the bright block in a scene generated with the same seed/options (1 = inside).
std::vector<std::uint8_t> synth_bright_mask(std::uint64_t seed, const SynthOptions& opts);

}  // namespace hdrssl
