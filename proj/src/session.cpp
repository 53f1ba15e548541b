#include "hdrssl/session.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

namespace hdrssl {

namespace fs = std::filesystem;

Datasets load_datasets(const RunConfig& cfg) {
    if (cfg.data.empty()) throw ConfigError("no dataset given (set data)");
    Datasets d;
    d.train = load_dataset(cfg.data);
    if (!cfg.val_data.empty()) d.val = load_dataset(cfg.val_data);
    return d;
}

// ---------------------------------------------------------------------------

EvalReport evaluate_model(const HdrModel& model, const std::vector<SceneRecord>& scenes,
                          const PhotometricConfig& photo, const TileConfig& tiles) {
    EvalReport r;
    double sums[4] = {0, 0, 0, 0};
    int finite_mu = 0, finite_l = 0;
    for (const auto& s : scenes) {
        if (!s.gt) throw InvalidInput("scene " + s.scene_id + " has no ground truth to evaluate against");
        const FullOutput out = infer_tiled(model, s.burst, photo, tiles);
        const QualityScores q = evaluate_quality(out.prediction, *s.gt, photo);
        r.rows.push_back({s.scene_id, q});
        if (is_identical_psnr(q.psnr_mu)) ++r.identical_psnr_mu;
        else sums[0] += q.psnr_mu, ++finite_mu;
        if (is_identical_psnr(q.psnr_l)) ++r.identical_psnr_l;
        else sums[1] += q.psnr_l, ++finite_l;
        sums[2] += q.ssim_mu;
        sums[3] += q.ssim_l;
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const auto n = static_cast<double>(r.rows.size());
    r.mean.psnr_mu = finite_mu ? sums[0] / finite_mu : (r.identical_psnr_mu ? kPsnrIdentical : nan);
    r.mean.psnr_l = finite_l ? sums[1] / finite_l : (r.identical_psnr_l ? kPsnrIdentical : nan);
    r.mean.ssim_mu = r.rows.empty() ? nan : sums[2] / n;
    r.mean.ssim_l = r.rows.empty() ? nan : sums[3] / n;
    return r;
}

namespace {

std::string fmt_metric(double v) {
    if (std::isinf(v) && v > 0) return "inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string fmt_loss(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

}  // namespace

std::string format_report(const EvalReport& report) {
    std::ostringstream out;
    out << "scene psnr_mu psnr_l ssim_mu ssim_l\n";
    auto row = [&](const std::string& name, const QualityScores& q) {
        out << name << ' ' << fmt_metric(q.psnr_mu) << ' ' << fmt_metric(q.psnr_l) << ' ' << fmt_metric(q.ssim_mu)
            << ' ' << fmt_metric(q.ssim_l) << '\n';
    };
    for (const auto& r : report.rows) row(r.scene_id, r.scores);
    row("mean", report.mean);
    if (report.identical_psnr_mu || report.identical_psnr_l)
        out << "identical_psnr_rows mu=" << report.identical_psnr_mu << " l=" << report.identical_psnr_l << '\n';
    return out.str();
}

std::string format_metrics_line(const EpochMetrics& m, double val_psnr_mu) {
    std::ostringstream out;
    out << "epoch=" << m.epoch + 1 << " stage=" << stage_name(m.stage) << " Ls_r=" << fmt_loss(m.supervised.recon)
        << " Ls_v=" << fmt_loss(m.supervised.perceptual) << " Ls_k=" << fmt_loss(m.supervised.uncertainty)
        << " Lu_r=" << fmt_loss(m.unsupervised.recon) << " Lu_v=" << fmt_loss(m.unsupervised.perceptual)
        << " Lu_k=" << fmt_loss(m.unsupervised.uncertainty) << " kept_patch_fraction=" << fmt_loss(m.kept_patch_fraction)
        << " unmasked_pixel_fraction=" << fmt_loss(m.unmasked_pixel_fraction)
        << " val_psnr_mu=" << (std::isnan(val_psnr_mu) ? std::string("nan") : fmt_metric(val_psnr_mu));
    return out.str();
}

// ---------------------------------------------------------------------------

void save_trainer_checkpoint(const fs::path& dir, const TrainerState& state) {
    fs::create_directories(dir);
    save_checkpoint(dir / "student", state.student, state.step);
    if (state.teacher) save_checkpoint(dir / "teacher", *state.teacher, state.step);
    const auto& m = state.optimizer.first_moment();
    const auto& v = state.optimizer.second_moment();
    for (std::size_t i = 0; i < m.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "adam_m_%03zu.f32", i);
        write_f32_blob(dir / name, m[i]);
        std::snprintf(name, sizeof name, "adam_v_%03zu.f32", i);
        write_f32_blob(dir / name, v[i]);
    }
    std::ofstream out(dir / "trainer.txt");
    out << "epoch " << state.epoch << "\nstep " << state.step << "\nstage " << stage_name(state.stage)
        << "\nrng_seed " << state.rng_seed << "\nadam_steps " << state.optimizer.steps() << "\nadam_tensors "
        << m.size() << '\n';
    if (!out) throw InvalidInput("cannot write " + (dir / "trainer.txt").string());
}

TrainerState load_trainer_checkpoint(const fs::path& dir, const AdamConfig& adam) {
    std::ifstream in(dir / "trainer.txt");
    if (!in) throw InvalidInput("missing " + (dir / "trainer.txt").string());
    std::string key, stage;
    int epoch = 0;
    long long step = 0, adam_steps = 0;
    std::uint64_t seed = 0;
    std::size_t tensors = 0;
    while (in >> key) {
        if (key == "epoch") in >> epoch;
        else if (key == "step") in >> step;
        else if (key == "stage") in >> stage;
        else if (key == "rng_seed") in >> seed;
        else if (key == "adam_steps") in >> adam_steps;
        else if (key == "adam_tensors") in >> tensors;
        else throw InvalidInput("unknown trainer.txt key '" + key + "'");
    }
    TrainerState state(load_checkpoint(dir / "student"), adam, seed);
    if (fs::exists(dir / "teacher")) {
        HdrModel t = load_checkpoint(dir / "teacher");
        state.teacher.emplace(state.student.network_ptr(), t.parameters());
    }
    state.epoch = epoch;
    state.step = step;
    state.stage = stage == "semi" ? Stage::Semi : Stage::Warmup;
    const ParameterSet& p = state.student.parameters();
    if (tensors != p.count()) throw InvalidInput("optimizer state does not match the model");
    std::vector<std::vector<float>> m(tensors), v(tensors);
    for (std::size_t i = 0; i < tensors; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "adam_m_%03zu.f32", i);
        m[i] = read_f32_blob(dir / name, p[i].value.size());
        std::snprintf(name, sizeof name, "adam_v_%03zu.f32", i);
        v[i] = read_f32_blob(dir / name, p[i].value.size());
    }
    state.optimizer.restore(adam_steps, std::move(m), std::move(v));
    return state;
}

MaskThresholds effective_thresholds(const MaskThresholds& t, const AblationToggle& toggles) {
    // Normalised scores never exceed 1, so a threshold above 1 keeps everything.
    MaskThresholds e = t;
    if (!toggles.enable_patch_mask) e.tau_pa = 2.0;
    if (!toggles.enable_pixel_mask) e.tau_pi = 2.0;
    return e;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<Patch> patches_of(const std::vector<SceneRecord>& scenes, const PatchGrid& grid) {
    std::vector<Patch> out;
    for (const auto& s : scenes) {
        auto p = extract_patches(s, grid, PatchMode::Grid);
        out.insert(out.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
    }
    return out;
}

void write_text(const fs::path& file, const std::string& text) {
    std::ofstream out(file);
    out << text;
    if (!out) throw InvalidInput("cannot write " + file.string());
}

}  // namespace

TrainOutcome run_training(const RunConfig& cfg, const Datasets& data, const fs::path& run_dir, std::ostream* progress) {
    cfg.validate();
    const TrainConfig tc = cfg.train_config();
    tc.toggles.validate();
    const DataSplit split = make_split(data.train, cfg.split());

    std::vector<SceneRecord> val = data.val;
    if (val.empty())
        for (std::size_t i = 0; i < split.unlabeled.size(); ++i)
            if (split.hidden_gt[i]) {
                SceneRecord s = split.unlabeled[i];
                s.gt = split.hidden_gt[i];
                val.push_back(std::move(s));
            }

    const std::vector<Patch> labeled = patches_of(split.labeled, cfg.grid());
    const std::vector<Patch> unlabeled = patches_of(split.unlabeled, cfg.grid());
    const ConvPyramidExtractor fx(0x5eed);

    TrainerState state(HdrModel(cfg.model_spec()), cfg.adam(), cfg.seed);
    std::mt19937_64 rng(cfg.seed ^ 0x7f4a7c159e3779b9ULL);
    const MaskThresholds thresholds = effective_thresholds(tc.thresholds, tc.toggles);

    std::ofstream log;
    if (!run_dir.empty()) {
        fs::create_directories(run_dir / "checkpoints");
        write_text(run_dir / "config.resolved.ini", dump_config(cfg));
        log.open(run_dir / "metrics.log", std::ios::trunc);
        if (!log) throw InvalidInput("cannot write " + (run_dir / "metrics.log").string());
    }

    auto eval_target = [&]() -> const HdrModel& {
        return cfg.eval_model == "teacher" && state.teacher ? *state.teacher : state.student;
    };

    TrainOutcome outcome;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        state.epoch = epoch;
        state.optimizer.set_lr(cfg.lr_at(epoch));
        if (epoch == cfg.warmup_epochs && tc.toggles.enable_mt) init_teacher(state);

        std::vector<PseudoLabelRecord> pool;
        std::vector<PseudoSample> pseudo;
        if (state.stage == Stage::Semi && tc.weights.lambda_u > 0.0 && !unlabeled.empty()) {
            pool = normalize_and_mask(generate_pseudo_pool(*state.teacher, unlabeled, tc.photo, cfg.pool_batch),
                                      thresholds);
            pseudo = kept_samples(unlabeled, pool);
        }

        EpochMetrics m;
        try {
            m = training_epoch(state, labeled, pseudo, tc, fx, rng);
        } catch (const NumericalError&) {
            if (!run_dir.empty()) save_trainer_checkpoint(run_dir / "checkpoints" / "abort", state);
            throw;
        }
        if (!pool.empty()) {
            std::size_t on = 0, total = 0;
            for (const auto& s : pseudo) {
                for (auto v : s.record->pixel_mask.values()) on += v;
                total += s.record->pixel_mask.size();
            }
            m.kept_patch_fraction = static_cast<double>(pseudo.size()) / static_cast<double>(pool.size());
            m.unmasked_pixel_fraction = total ? static_cast<double>(on) / static_cast<double>(total) : 0.0;
        }

        const bool last = epoch + 1 == cfg.epochs;
        double val_psnr = std::numeric_limits<double>::quiet_NaN();
        if (!val.empty() && (last || (cfg.val_every > 0 && (epoch + 1) % cfg.val_every == 0))) {
            EvalReport r = evaluate_model(eval_target(), val, tc.photo, cfg.tiles());
            val_psnr = r.mean.psnr_mu;
            if (last) outcome.final_report = std::move(r);
        }

        const std::string line = format_metrics_line(m, val_psnr);
        outcome.epochs.push_back(m);
        outcome.val_psnr_mu.push_back(val_psnr);
        outcome.log_lines.push_back(line);
        if (log.is_open()) log << line << '\n' << std::flush;
        if (progress) *progress << line << '\n' << std::flush;

        if (!run_dir.empty() && cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0) {
            char name[32];
            std::snprintf(name, sizeof name, "epoch_%04d", epoch + 1);
            save_trainer_checkpoint(run_dir / "checkpoints" / name, state);
        }
    }

    if (!run_dir.empty()) {
        save_trainer_checkpoint(run_dir / "checkpoints" / "final", state);
        std::ostringstream rep;
        rep << "model " << (cfg.eval_model == "teacher" && state.teacher ? "teacher" : "student") << '\n'
            << format_report(outcome.final_report);
        write_text(run_dir / "report.txt", rep.str());
    }
    return outcome;
}

// ---------------------------------------------------------------------------

namespace {

const char* row_label(const std::string& row) {
    if (row == "bl") return "i BL";
    if (row == "mt") return "ii BL+MT";
    if (row == "lk") return "iii +Lk";
    if (row == "pam") return "iv +PaM";
    if (row == "pim") return "v +PiM";
    if (row == "both") return "vi +PaM+PiM";
    return "vii +SAug";
}

}  // namespace

std::vector<AblationRow> run_ablation(const RunConfig& cfg, const Datasets& data, const fs::path& run_dir,
                                      std::ostream* progress, std::vector<std::string> names) {
    cfg.validate();
    if (names.empty()) names = ablation_rows();
    for (const auto& name : names) toggles_for_row(name);
    std::vector<AblationRow> rows;
    for (const auto& name : names) {
        AblationRow row;
        row.row = name;
        row.label = row_label(name);
        RunConfig rc = cfg;
        rc.ablation = name;
        rc.epochs = cfg.ablate_epochs;
        rc.warmup_epochs = cfg.ablate_warmup_epochs;
        rc.val_every = 0;
        rc.checkpoint_every = 0;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const fs::path dir = run_dir.empty() ? fs::path() : run_dir / "ablation" / name;
            TrainOutcome o = run_training(rc, data, dir);
            row.scores = o.final_report.mean;
            row.ok = !o.final_report.rows.empty();
            if (!row.ok) row.error = "no validation scenes";
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (progress) {
            *progress << row.label << ": " << (row.ok ? fmt_metric(row.scores.psnr_mu) : "failed (" + row.error + ")")
                      << " (" << static_cast<int>(secs) << " s)\n"
                      << std::flush;
        }
        rows.push_back(std::move(row));
    }
    if (!run_dir.empty()) {
        fs::create_directories(run_dir);
        write_text(run_dir / "ablation.txt", format_ablation_table(rows));
    }
    return rows;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
    std::ostringstream out;
    out << "row config psnr_mu ssim_mu status\n";
    for (const auto& r : rows) {
        std::string label = r.label;
        const auto sp = label.find(' ');
        out << label.substr(0, sp) << ' ' << label.substr(sp + 1) << ' '
            << (r.ok ? fmt_metric(r.scores.psnr_mu) : "nan") << ' ' << (r.ok ? fmt_metric(r.scores.ssim_mu) : "nan")
            << ' ' << (r.ok ? "ok" : "failed: " + r.error) << '\n';
    }
    return out.str();
}

}  // namespace hdrssl
