#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hdrssl/config.hpp"
#include "hdrssl/metrics.hpp"

namespace hdrssl {

struct Datasets {
    std::vector<SceneRecord> train;
    std::vector<SceneRecord> val;  ///< empty: validation uses the hidden GT of unlabeled scenes
};

Datasets load_datasets(const RunConfig& cfg);

struct SceneQuality {
    std::string scene_id;
    QualityScores scores;
};

struct EvalReport {
    std::vector<SceneQuality> rows;
    /// Means over rows; identical-image PSNR rows are left out of the PSNR means and counted below.
    QualityScores mean;
    int identical_psnr_mu = 0;
    int identical_psnr_l = 0;
};

EvalReport evaluate_model(const HdrModel& model, const std::vector<SceneRecord>& scenes,
                          const PhotometricConfig& photo, const TileConfig& tiles);
/// Per-scene rows, then a `mean` row. PSNR of identical images prints as `inf`.
std::string format_report(const EvalReport& report);

/// One metrics-log line (no trailing newline).
std::string format_metrics_line(const EpochMetrics& m, double val_psnr_mu);

/// `<dir>/{student/, teacher/?, trainer.txt, adam_m_NNN.f32, adam_v_NNN.f32}`.
void save_trainer_checkpoint(const std::filesystem::path& dir, const TrainerState& state);
TrainerState load_trainer_checkpoint(const std::filesystem::path& dir, const AdamConfig& adam);

/// Removes records from training according to the enabled masks; disabled masks keep everything.
MaskThresholds effective_thresholds(const MaskThresholds& t, const AblationToggle& toggles);

struct TrainOutcome {
    std::vector<EpochMetrics> epochs;
    std::vector<double> val_psnr_mu;  ///< per epoch, NaN where not evaluated
    EvalReport final_report;
    std::vector<std::string> log_lines;
};

/// Warm-up then semi-supervised training. With a non-empty `run_dir` writes metrics.log,
/// checkpoints/ and report.txt. On a non-finite loss the last finite state is saved to
/// checkpoints/abort and the NumericalError is rethrown.
TrainOutcome run_training(const RunConfig& cfg, const Datasets& data, const std::filesystem::path& run_dir,
                          std::ostream* progress = nullptr);

struct AblationRow {
    std::string row;
    std::string label;
    bool ok = false;
    QualityScores scores;
    std::string error;
};

/// Runs the named ablation rows (all of them when `rows` is empty) with the ablation budget,
/// sharing seed and data.
std::vector<AblationRow> run_ablation(const RunConfig& cfg, const Datasets& data, const std::filesystem::path& run_dir,
                                      std::ostream* progress = nullptr, std::vector<std::string> rows = {});
std::string format_ablation_table(const std::vector<AblationRow>& rows);

}  // namespace hdrssl
