#include "hdrssl/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>

#include "hdrssl/session.hpp"
#include "hdrssl/viz.hpp"

namespace hdrssl {

namespace fs = std::filesystem;

namespace {

/// Config flags shared by the commands that take a RunConfig.
struct ConfigOptions {
    std::string config_file;
    std::map<std::string, std::string> overrides;  // key -> raw value
    std::vector<std::string> order;
};

void add_config_options(CLI::App* cmd, ConfigOptions& opts, const std::vector<std::string>& skip = {}) {
    cmd->add_option("--config", opts.config_file, "config file ([section] key = value)");
    for (const auto& f : config_fields()) {
        if (std::find(skip.begin(), skip.end(), f.key) != skip.end()) continue;
        const std::string key = f.key;
        cmd->add_option_function<std::string>(
            f.flag(),
            [&opts, key](const std::string& v) {
                if (!opts.overrides.count(key)) opts.order.push_back(key);
                opts.overrides[key] = v;
            },
            f.help);
    }
}

RunConfig resolve_config(const ConfigOptions& opts) {
    RunConfig cfg;
    if (const char* env = std::getenv("HDRSSL_SEED"); env && *env) set_config_value(cfg, "seed", env);
    if (!opts.config_file.empty()) apply_config_file(cfg, opts.config_file);
    for (const auto& key : opts.order) set_config_value(cfg, key, opts.overrides.at(key));
    cfg.validate();
    return cfg;
}

/// A model directory, a trainer checkpoint (student/ or teacher/ inside) or a run directory.
HdrModel resolve_model(const std::string& path, const std::string& which) {
    if (path == "identity") return HdrModel(ModelSpec{"identity", 0, 0});
    fs::path p = path;
    if (fs::exists(p / "checkpoints" / "final")) p = p / "checkpoints" / "final";
    if (fs::exists(p / "manifest.txt")) return load_checkpoint(p);
    if (fs::exists(p / which / "manifest.txt")) return load_checkpoint(p / which);
    if (fs::exists(p / "student" / "manifest.txt")) return load_checkpoint(p / "student");
    throw InvalidInput("no checkpoint found at " + path);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Semi-supervised HDR deghosting: training, evaluation and inspection"};
    app.require_subcommand(1);

    ConfigOptions train_opts, eval_opts, pseudo_opts, viz_opts, ablate_opts;
    bool print_config = false;
    auto* train = app.add_subcommand("train", "warm-up then semi-supervised training");
    add_config_options(train, train_opts);
    train->add_flag("--print-config", print_config, "print the resolved config and exit");

    std::string checkpoint, dataset, report_out;
    auto* eval = app.add_subcommand("eval", "tiled full-frame evaluation of a checkpoint");
    add_config_options(eval, eval_opts);
    eval->add_option("--checkpoint", checkpoint, "checkpoint directory, run directory or 'identity'")->required();
    eval->add_option("--dataset", dataset, "dataset root with ground truth")->required();
    eval->add_option("--out", report_out, "also write the report here");

    auto* pseudo = app.add_subcommand("pseudo-gen", "teacher pseudo labels and masks for a dataset");
    add_config_options(pseudo, pseudo_opts);
    pseudo->add_option("--checkpoint", checkpoint, "teacher checkpoint")->required();
    pseudo->add_option("--dataset", dataset, "dataset root (ground truth ignored)")->required();

    std::string scene_dir;
    std::optional<double> viz_tau_pa, viz_tau_pi;
    auto* viz = app.add_subcommand("mask-viz", "pseudo HDR, uncertainty and mask images for one scene");
    add_config_options(viz, viz_opts, {"tau_pa", "tau_pi"});
    viz->add_option("--checkpoint", checkpoint, "teacher checkpoint")->required();
    viz->add_option("--scene", scene_dir, "scene directory")->required();
    viz->add_option("--tau-pa", viz_tau_pa, "patch threshold (any value >= 0)");
    viz->add_option("--tau-pi", viz_tau_pi, "pixel threshold (any value >= 0)");

    auto* ablate = app.add_subcommand("ablate", "ablation rows with a shared seed and budget");
    add_config_options(ablate, ablate_opts);
    std::vector<std::string> ablate_rows;
    ablate->add_option("--rows", ablate_rows, "subset of rows (comma separated); default all")->delimiter(',');

    std::string synth_out;
    int synth_count = 40, synth_h = 128, synth_w = 128;
    double synth_difficulty = 0.5;
    std::uint64_t synth_seed = 0;
    auto* synth = app.add_subcommand("synth-gen", "write a synthetic dataset in the scene-directory layout");
    synth->add_option("--out", synth_out, "output root")->required();
    synth->add_option("--scenes", synth_count, "number of scenes")->check(CLI::Range(1, 1 << 20));
    synth->add_option("--difficulty", synth_difficulty, "motion/noise level")->check(CLI::Range(0.0, 10.0));
    synth->add_option("--seed", synth_seed, "seed of the first scene; scene i uses seed + i");
    synth->add_option("--height", synth_h)->check(CLI::Range(16, 8192));
    synth->add_option("--width", synth_w)->check(CLI::Range(16, 8192));

    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }

    try {
        if (*train) {
            const RunConfig cfg = resolve_config(train_opts);
            if (print_config) {
                out << dump_config(cfg);
                return kExitOk;
            }
            const Datasets data = load_datasets(cfg);
            const TrainOutcome o = run_training(cfg, data, cfg.run_dir, &err);
            out << format_report(o.final_report);
        } else if (*eval) {
            const RunConfig cfg = resolve_config(eval_opts);
            const HdrModel model = resolve_model(checkpoint, cfg.eval_model);
            const EvalReport r = evaluate_model(model, load_dataset(dataset), cfg.photometric(), cfg.tiles());
            const std::string text = format_report(r);
            out << text;
            if (!report_out.empty()) {
                std::ofstream f(report_out);
                f << text;
                if (!f) throw InvalidInput("cannot write " + report_out);
            }
        } else if (*pseudo) {
            const RunConfig cfg = resolve_config(pseudo_opts);
            const HdrModel teacher = resolve_model(checkpoint, "teacher");
            std::vector<Patch> patches;
            for (const auto& s : load_dataset(dataset)) {
                auto p = extract_patches(s, cfg.grid(), PatchMode::Grid);
                patches.insert(patches.end(), p.begin(), p.end());
            }
            const auto pool = normalize_and_mask(
                generate_pseudo_pool(teacher, patches, cfg.photometric(), cfg.pool_batch), {cfg.tau_pa, cfg.tau_pi});
            const fs::path dir = fs::path(cfg.run_dir) / "pseudo";
            fs::create_directories(dir);
            std::ofstream f(dir / "pool.tsv");
            f << format_pool_table(patches, pool);
            if (!f) throw InvalidInput("cannot write " + (dir / "pool.tsv").string());
            std::size_t kept = 0;
            for (const auto& r : pool) kept += r.kept;
            out << "pool " << pool.size() << " kept " << kept << " -> " << (dir / "pool.tsv").string() << '\n';
        } else if (*viz) {
            const RunConfig cfg = resolve_config(viz_opts);
            const MaskThresholds th{viz_tau_pa.value_or(cfg.tau_pa), viz_tau_pi.value_or(cfg.tau_pi)};
            if (!(th.tau_pa >= 0.0) || !(th.tau_pi >= 0.0)) throw ConfigError("mask thresholds must be >= 0");
            if (!fs::is_directory(scene_dir)) throw InvalidInput("scene not found: " + scene_dir);
            const HdrModel teacher = resolve_model(checkpoint, "teacher");
            const SceneRecord scene = load_kalantari_scene(scene_dir);
            const MaskViz v = build_mask_viz(teacher, scene, cfg.photometric(), cfg.grid(), th, cfg.pool_batch);
            const fs::path dir = fs::path(cfg.run_dir) / "viz";
            write_mask_viz(dir, v, th);
            out << "patches kept " << v.patches_kept << "/" << v.patches_total << ", pixels kept "
                << v.pixel_kept_fraction << " -> " << dir.string() << '\n';
        } else if (*ablate) {
            const RunConfig cfg = resolve_config(ablate_opts);
            const auto rows = run_ablation(cfg, load_datasets(cfg), cfg.run_dir, &err, ablate_rows);
            out << format_ablation_table(rows);
            for (const auto& r : rows)
                if (!r.ok) return kExitFailure;
        } else if (*synth) {
            const SynthOptions opts = [&] {
                SynthOptions o = SynthOptions::from_difficulty(synth_difficulty);
                o.height = synth_h;
                o.width = synth_w;
                return o;
            }();
            for (int i = 0; i < synth_count; ++i) {
                const SceneRecord s = synth_scene(synth_seed + static_cast<std::uint64_t>(i), opts);
                write_scene(fs::path(synth_out) / s.scene_id, s);
            }
            out << "wrote " << synth_count << " scenes to " << synth_out << '\n';
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NumericalError& e) {
        err << "numerical abort: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitOk;
}

}  // namespace hdrssl
