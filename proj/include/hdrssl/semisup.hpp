#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hdrssl/data.hpp"
#include "hdrssl/losses.hpp"
#include "hdrssl/model.hpp"
#include "hdrssl/nn.hpp"

namespace hdrssl {

// ---------------------------------------------------------------------------
// Teacher / student state

enum class Stage { Warmup, Semi };

const char* stage_name(Stage s);

struct TrainerState {
    HdrModel student;
    std::optional<HdrModel> teacher;
    /// Double-precision EMA accumulator; the teacher network holds its float rounding.
    std::vector<std::vector<double>> teacher_master;
    Adam optimizer;
    int epoch = 0;
    long long step = 0;
    std::uint64_t rng_seed = 0;
    Stage stage = Stage::Warmup;

    TrainerState(HdrModel model, AdamConfig adam, std::uint64_t seed);
};

/// teacher <- alpha * teacher + (1 - alpha) * student, elementwise.
void ema_update(ParameterSet& teacher, const ParameterSet& student, double alpha);
/// Accumulates in `teacher_master` (seeded from the float teacher when empty), so k updates
/// round once rather than k times.
void ema_update(TrainerState& state, double alpha);

/// Deep-copies the student into the teacher and enters the semi-supervised stage.
void init_teacher(TrainerState& state);

// ---------------------------------------------------------------------------
// Pseudo labels and bi-level masking

struct MaskThresholds {
    double tau_pa = 0.4;
    double tau_pi = 0.4;

    void validate() const;
};

/// Keep rule shared by both mask levels: score < tau, with an exact tie kept when tau > 0.
/// tau = 0 therefore rejects everything and tau > 1 keeps everything.
inline bool passes_threshold(double score, double tau) { return score < tau || (score == tau && tau > 0.0); }

struct PseudoLabelRecord {
    int patch_id = 0;
    Tensor hdr;                        ///< teacher prediction, 1x3xHxW
    Tensor uncertainty;                ///< judge output, 1x3xHxW
    double raw_patch_score = 0.0;      ///< mean uncertainty over pixels and channels
    std::vector<double> raw_pixel_scores;  ///< per-pixel channel mean
    double patch_score = 0.0;          ///< pool-normalised, in [0,1]
    std::vector<double> pixel_scores;  ///< pool-normalised, in [0,1]
    PixelMask pixel_mask;              ///< 1x1xHxW
    bool kept = true;
};

/// Teacher forward over every patch (in order; patch_id = index). Raw scores only.
std::vector<PseudoLabelRecord> generate_pseudo_pool(const HdrModel& teacher, const std::vector<Patch>& patches,
                                                    const PhotometricConfig& photo, int batch_size = 16);

/// Pool-wide min-max normalisation of patch and pixel scores followed by thresholding.
/// Constant scores normalise to 0. Scores are summed in stored (channel, row, column) order.
std::vector<PseudoLabelRecord> normalize_and_mask(std::vector<PseudoLabelRecord> pool, const MaskThresholds& t);

// ---------------------------------------------------------------------------
// Augmentation

enum class AugOp { HFlip, VFlip, Rot90Cw, Rot90Ccw, RgbShuffle };
enum class AugKind { WeakLabeled, StrongUnlabeled };

struct AugStep {
    AugOp op = AugOp::HFlip;
    std::array<int, 3> permutation{0, 1, 2};  ///< RgbShuffle: output channel c takes input channel permutation[c]
};

struct AugmentationSpec {
    AugKind kind = AugKind::WeakLabeled;
    std::vector<AugStep> ops;

    /// Throws unless every op belongs to the kind's op set.
    void validate() const;
};

struct AugmentationProbabilities {
    double flip = 0.5;
    double rotate = 0.5;
    double shuffle = 0.5;
};

/// weak: vflip, rot90 cw. strong: hflip, rot90 ccw, non-identity RGB permutation.
AugmentationSpec sample_augmentation(AugKind kind, std::mt19937_64& rng, const AugmentationProbabilities& p = {});

/// Spatial flip/rotation of every sample and channel; RgbShuffle is not spatial and is rejected.
template <typename T>
BasicTensor<T> apply_spatial(const BasicTensor<T>& img, AugOp op) {
    const int h = img.h(), w = img.w();
    const bool swap = op == AugOp::Rot90Cw || op == AugOp::Rot90Ccw;
    BasicTensor<T> out(img.n(), img.c(), swap ? w : h, swap ? h : w);
    for (int n = 0; n < img.n(); ++n)
        for (int c = 0; c < img.c(); ++c)
            for (int y = 0; y < out.h(); ++y)
                for (int x = 0; x < out.w(); ++x) {
                    int sy = y, sx = x;
                    switch (op) {
                        case AugOp::HFlip: sx = w - 1 - x; break;
                        case AugOp::VFlip: sy = h - 1 - y; break;
                        case AugOp::Rot90Cw: sy = h - 1 - x; sx = y; break;
                        case AugOp::Rot90Ccw: sy = x; sx = w - 1 - y; break;
                        case AugOp::RgbShuffle: throw InvalidInput("apply_spatial: RgbShuffle is not spatial");
                    }
                    out(n, c, y, x) = img(n, c, sy, sx);
                }
    return out;
}

/// Output channel c takes input channel perm[c].
Tensor permute_channels(const Tensor& img, const std::array<int, 3>& perm);

struct AugmentedSample {
    LdrBurst burst;
    Tensor target;
    std::optional<PixelMask> mask;
};

AugmentedSample apply_augmentation(const AugmentationSpec& spec, const LdrBurst& burst, const Tensor& target,
                                   const std::optional<PixelMask>& mask);

// ---------------------------------------------------------------------------
// Training epoch

/// Table-3 style module switches.
struct AblationToggle {
    bool enable_mt = true;
    bool enable_unc_loss = true;
    bool enable_patch_mask = true;
    bool enable_pixel_mask = true;
    bool enable_strong_aug = true;

    void validate() const;
};

struct TrainConfig {
    PhotometricConfig photo;
    LossWeights weights;
    MaskThresholds thresholds;
    double alpha = 0.999;
    int batch_size = 64;
    int steps_per_epoch = 0;  ///< 0: one pass over the labeled patches
    AblationToggle toggles;
    AugmentationProbabilities aug;
    bool judge_into_features = true;
};

/// A kept pseudo-labelled sample ready for the student.
struct PseudoSample {
    const Patch* input = nullptr;
    const PseudoLabelRecord* record = nullptr;
};

struct EpochMetrics {
    int epoch = 0;
    Stage stage = Stage::Warmup;
    LossTerms supervised;
    LossTerms unsupervised;
    double total = 0.0;
    int steps = 0;
    double kept_patch_fraction = 0.0;
    double unmasked_pixel_fraction = 0.0;
};

/// One epoch of student updates: weak-augmented labeled batches, strong-augmented pseudo
/// batches (kept records, pixel masks applied), one optimizer step and, in the semi stage,
/// one EMA update per step. Throws NumericalError before touching parameters if a loss
/// term is non-finite.
EpochMetrics training_epoch(TrainerState& state, const std::vector<Patch>& labeled,
                            const std::vector<PseudoSample>& pseudo, const TrainConfig& cfg,
                            const FeatureExtractor& fx, std::mt19937_64& rng);

/// Kept records of a masked pool paired with their input patches.
std::vector<PseudoSample> kept_samples(const std::vector<Patch>& patches, const std::vector<PseudoLabelRecord>& pool);

}  // namespace hdrssl
