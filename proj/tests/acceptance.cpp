// Acceptance suite: one PASS/FAIL line per criterion. Exit status 1 only if a criterion throws, or with --strict.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "hdrssl/cli.hpp"
#include "hdrssl/config.hpp"
#include "hdrssl/metrics.hpp"
#include "hdrssl/session.hpp"
#include "test_support.hpp"

using namespace hdrssl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    std::string name;
    double budget_seconds;
    std::function<Outcome()> run;
};

// ---------------------------------------------------------------------------

Outcome reproducibility_note() {
    return {true,
            "paper-scale numbers need the full network, VGG-16 features, licensed data and GPU-days; "
            "the property and oracle criteria below stand in for them"};
}

Outcome ema_closed_form() {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<float> u(0.5f, 1.5f);
    const Network net(ModelSpec{"ref-attn", 4, 0});
    ParameterSet t0 = net.layout(), s = net.layout();
    for (auto& p : t0)
        for (auto& v : p.value) v = u(rng);
    for (auto& p : s)
        for (auto& v : p.value) v = u(rng);
    double worst = 0.0;
    for (double alpha : {0.0, 0.9, 0.999, 1.0})
        for (int k : {1, 10, 100}) {
            // The trainer path: teacher copied from the student, then a constant student.
            TrainerState st(HdrModel(std::make_shared<Network>(ModelSpec{"ref-attn", 4, 0}), t0), {}, 0);
            init_teacher(st);
            st.student.parameters() = s;
            for (int i = 0; i < k; ++i) ema_update(st, alpha);
            const ParameterSet& t = st.teacher->parameters();
            const double ak = std::pow(alpha, k);
            for (std::size_t i = 0; i < t.count(); ++i)
                for (std::size_t j = 0; j < t[i].size(); ++j) {
                    const double e = ak * t0[i].value[j] + (1.0 - ak) * s[i].value[j];
                    worst = std::max(worst, std::abs(t[i].value[j] - e) / std::abs(e));
                }
        }
    char buf[96];
    std::snprintf(buf, sizeof buf, "max relative error %.3g over %zu parameters x 12 cases", worst, t0.scalar_count());
    return {worst <= 1e-6, buf};
}

Outcome uncertainty_gradient_check() {
    // Relative error of each gradient tensor, ||analytic - numeric|| / ||numeric||, so that
    // components near zero do not turn summation round-off into a failure.
    const PhotometricConfig cfg;
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.02, 0.98), logs(std::log(1e-3), 0.0);
    double worst = 0.0;
    auto rel = [](const std::vector<double>& a, const std::vector<double>& n) {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            num += (a[i] - n[i]) * (a[i] - n[i]);
            den += n[i] * n[i];
        }
        return std::sqrt(num / den);
    };
    for (int trial = 0; trial < 100; ++trial) {
        TensorD p(1, 3, 4, 4), t(1, 3, 4, 4), s(1, 3, 4, 4);
        for (auto& v : p.values()) v = u(rng);
        for (auto& v : t.values()) v = u(rng);
        for (auto& v : s.values()) v = std::min(std::exp(logs(rng)), 0.999);
        TensorD gp, gs;
        uncertainty_loss(p, t, s, cfg, nullptr, &gp, &gs);
        std::vector<double> np(p.size()), ns(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double hp = 1e-5;
            TensorD a = p, b = p;
            a.data()[i] += hp;
            b.data()[i] -= hp;
            np[i] = (uncertainty_loss(a, t, s, cfg) - uncertainty_loss(b, t, s, cfg)) / (2 * hp);
            // Relative step, kept on the smooth side of the sigma floor.
            const double hs = std::min(1e-6 * s.data()[i], 0.5 * (s.data()[i] - 1e-3));
            a = s;
            b = s;
            a.data()[i] += hs;
            b.data()[i] -= hs;
            ns[i] = (uncertainty_loss(p, t, a, cfg) - uncertainty_loss(p, t, b, cfg)) / (2 * hs);
        }
        worst = std::max({worst, rel(gp.values(), np), rel(gs.values(), ns)});
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "max relative error %.3g over 100 x 2 gradient tensors", worst);
    return {worst < 1e-4, buf};
}

// Reference masking written without any of the library's helpers.
struct BruteForce {
    std::vector<double> patch;
    std::vector<std::vector<double>> pixel;
    std::vector<bool> kept;
    std::vector<std::vector<int>> mask;
};

BruteForce brute_force_mask(const std::vector<double>& raw_patch, const std::vector<std::vector<double>>& raw_pixel,
                            double tau_pa, double tau_pi) {
    const std::size_t n = raw_patch.size();
    double lo = raw_patch[0], hi = raw_patch[0];
    for (std::size_t i = 1; i < n; ++i) {
        if (raw_patch[i] < lo) lo = raw_patch[i];
        if (raw_patch[i] > hi) hi = raw_patch[i];
    }
    double plo = raw_pixel[0][0], phi = raw_pixel[0][0];
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < raw_pixel[i].size(); ++j) {
            if (raw_pixel[i][j] < plo) plo = raw_pixel[i][j];
            if (raw_pixel[i][j] > phi) phi = raw_pixel[i][j];
        }
    BruteForce b;
    for (std::size_t i = 0; i < n; ++i) {
        const double sc = hi == lo ? 0.0 : (raw_patch[i] - lo) / (hi - lo);
        b.patch.push_back(sc);
        b.kept.push_back(sc < tau_pa || (sc == tau_pa && tau_pa != 0.0));
        std::vector<double> px;
        std::vector<int> m;
        for (std::size_t j = 0; j < raw_pixel[i].size(); ++j) {
            const double v = phi == plo ? 0.0 : (raw_pixel[i][j] - plo) / (phi - plo);
            px.push_back(v);
            m.push_back(v < tau_pi || (v == tau_pi && tau_pi != 0.0) ? 1 : 0);
        }
        b.pixel.push_back(px);
        b.mask.push_back(m);
    }
    return b;
}

Outcome masking_oracle() {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int pools = 0, degenerate = 0, ties = 0, mismatches = 0;
    for (int trial = 0; trial < 400; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 200);
        const int h = 1 + static_cast<int>(rng() % 5), w = 1 + static_cast<int>(rng() % 5);
        const int style = trial % 4;  // 0 continuous, 1 on a 0.1 grid (exact ties), 2 constant, 3 two levels
        const double constant = u(rng);
        auto draw = [&] {
            switch (style) {
                case 0: return 0.05 + 0.5 * u(rng);
                case 1: return static_cast<double>(rng() % 11) / 10.0;
                case 2: return constant;
                default: return rng() % 2 ? 0.2 : 0.7;
            }
        };
        std::vector<PseudoLabelRecord> pool(n);
        std::vector<double> raw_patch(n);
        std::vector<std::vector<double>> raw_pixel(n);
        for (int i = 0; i < n; ++i) {
            pool[i].patch_id = i;
            pool[i].hdr = Tensor(1, 3, h, w);
            pool[i].uncertainty = Tensor(1, 3, h, w);
            raw_patch[i] = pool[i].raw_patch_score = draw();
            raw_pixel[i].resize(static_cast<std::size_t>(h) * w);
            for (auto& v : raw_pixel[i]) v = draw();
            pool[i].raw_pixel_scores = raw_pixel[i];
        }
        const double taus[] = {0.0, 0.4, 0.5, 1.0, 1.1, u(rng)};
        const double tau_pa = taus[rng() % 6], tau_pi = taus[rng() % 6];
        const auto got = normalize_and_mask(pool, {tau_pa, tau_pi});
        const BruteForce want = brute_force_mask(raw_patch, raw_pixel, tau_pa, tau_pi);
        for (int i = 0; i < n; ++i) {
            bool ok = got[i].patch_score == want.patch[i] && got[i].kept == want.kept[i];
            ties += got[i].patch_score == tau_pa;
            for (std::size_t j = 0; j < raw_pixel[i].size(); ++j) {
                ok = ok && got[i].pixel_scores[j] == want.pixel[i][j] && got[i].pixel_mask.data()[j] == want.mask[i][j];
                ties += got[i].pixel_scores[j] == tau_pi;
            }
            mismatches += !ok;
        }
        degenerate += style == 2 || n == 1;
        ++pools;
    }
    std::ostringstream d;
    d << pools << " pools (" << degenerate << " degenerate), " << ties << " exact ties, " << mismatches
      << " mismatching records";
    return {mismatches == 0 && degenerate > 0 && ties > 0, d.str()};
}

std::vector<std::vector<double>> read_table(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw InvalidInput("cannot read " + file.string());
    std::vector<std::vector<double>> rows;
    for (std::string line; std::getline(in, line);) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::vector<double> row;
        for (std::string tok; ls >> tok;) row.push_back(std::strtod(tok.c_str(), nullptr));
        rows.push_back(row);
    }
    return rows;
}

Outcome scalar_oracle() {
    const auto rows = read_table(testing::data_dir() / "scalar_oracle.txt");
    double worst = 0.0;
    for (const auto& r : rows) {
        const double gc = gamma_correct_value(r[0], r[1], r[2]);
        const double tm = tonemap_value(r[4], r[3]);
        worst = std::max({worst, std::abs(gc - r[5]) / std::max(1.0, std::abs(r[5])),
                          std::abs(tm - r[6]) / std::max(1.0, std::abs(r[6]))});
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "%zu tuples, max error %.3g", rows.size(), worst);
    return {rows.size() == 1000 && worst <= 1e-10, buf};
}

Outcome metric_oracle() {
    const auto rows = read_table(testing::data_dir() / "metric_oracle.txt");
    double worst_p = 0.0, worst_s = 0.0;
    for (const auto& r : rows) {
        const int i = static_cast<int>(r[0]), h = static_cast<int>(r[1]), w = static_cast<int>(r[2]);
        testing::SplitMix64 g(1000 + i);
        Tensor a = Tensor::image(3, h, w), b = Tensor::image(3, h, w);
        std::vector<int> ka(a.size());
        for (std::size_t k = 0; k < a.size(); ++k) {
            ka[k] = static_cast<int>(g.next() >> 56);
            a.data()[k] = static_cast<float>(ka[k] / 256.0);
        }
        for (std::size_t k = 0; k < b.size(); ++k) {
            int v;
            if (i % 2 == 0)
                v = std::clamp(ka[k] + static_cast<int>((g.next() >> 56) % 41) - 20, 0, 255);
            else
                v = static_cast<int>(g.next() >> 56);
            b.data()[k] = static_cast<float>(v / 256.0);
        }
        worst_p = std::max(worst_p, std::abs(psnr(a, b) - r[3]));
        worst_s = std::max(worst_s, std::abs(ssim(a, b) - r[4]));
    }
    char buf[128];
    std::snprintf(buf, sizeof buf, "%zu pairs, max |dPSNR| %.3g dB, max |dSSIM| %.3g", rows.size(), worst_p, worst_s);
    return {rows.size() == 20 && worst_p <= 1e-6 && worst_s <= 1e-6, buf};
}

// ---------------------------------------------------------------------------
// Ablation trend on the synthetic benchmark

struct Benchmark {
    static constexpr int kScenes = 40;
    static constexpr int kValScenes = 8;
    static constexpr int kSize = 24;     // labeled and unlabeled scenes
    static constexpr int kValSize = 48;
    static constexpr double kDifficulty = 0.5;
};

RunConfig benchmark_config(std::uint64_t seed) {
    RunConfig c;
    c.seed = seed;
    c.n_labeled = 5;
    c.width = 8;
    c.patch = 16;
    c.stride = 8;
    c.batch_size = 8;
    c.steps_per_epoch = 20;
    c.lr = 2e-3;
    c.alpha = 0.999;
    c.ablate_epochs = 300;
    c.ablate_warmup_epochs = 60;
    return c;
}

Datasets benchmark_data(std::uint64_t seed) {
    SynthOptions o = SynthOptions::from_difficulty(Benchmark::kDifficulty);
    o.height = o.width = Benchmark::kSize;
    Datasets d;
    for (int i = 0; i < Benchmark::kScenes; ++i) d.train.push_back(synth_scene(seed * 100000 + i, o));
    o.height = o.width = Benchmark::kValSize;
    for (int i = 0; i < Benchmark::kValScenes; ++i) d.val.push_back(synth_scene(seed * 100000 + 50000 + i, o));
    return d;
}

Outcome ablation_trend() {
    const std::vector<std::string> rows{"bl", "mt", "both", "full"};
    int good = 0;
    std::ostringstream d;
    d.setf(std::ios::fixed);
    d.precision(2);
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto result = run_ablation(benchmark_config(seed), benchmark_data(seed), {}, &std::cerr, rows);
        std::array<double, 4> v{};
        bool ok = true;
        for (int k = 0; k < 4; ++k) {
            ok = ok && result[k].ok;
            v[k] = result[k].scores.psnr_mu;
        }
        const bool trend = ok && v[3] >= v[2] + 0.1 && v[2] >= v[1] + 0.3 && v[3] >= v[0] + 0.5;
        good += trend;
        d << "seed " << seed << ": i " << v[0] << " ii " << v[1] << " vi " << v[2] << " vii " << v[3]
          << (trend ? " ok" : " no") << "; ";
    }
    d << good << "/3 seeds satisfy the trend";
    return {good >= 2, d.str()};
}

// ---------------------------------------------------------------------------

void corrupt(LdrBurst& b, int y0, int x0, int size, std::mt19937_64& rng) {
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (auto& f : b.frames)
        for (int c = 0; c < 3; ++c)
            for (int y = y0; y < y0 + size; ++y)
                for (int x = x0; x < x0 + size; ++x) f.at(c, y, x) = u(rng);
}

Outcome confirmation_bias_guard() {
    SynthOptions o = SynthOptions::from_difficulty(0.5);
    o.height = o.width = 64;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    // Labeled patches: half carry a noise square over all frames while the ground truth stays clean.
    std::vector<Patch> labeled;
    for (int i = 0; i < 5; ++i)
        for (Patch& p : extract_patches(synth_scene(500 + i, o), {32, 16}, PatchMode::Grid)) {
            if (u(rng) < 0.5) {
                const int s = 8 + static_cast<int>(rng() % 7);
                corrupt(p.burst, static_cast<int>(rng() % (32 - s)), static_cast<int>(rng() % (32 - s)), s, rng);
            }
            labeled.push_back(std::move(p));
        }
    // Unlabeled patches: every one is corrupted in a known 12x12 square.
    std::vector<Patch> unlabeled;
    std::vector<std::vector<std::uint8_t>> known;
    for (int i = 0; i < 8; ++i)
        for (Patch& p : extract_patches(synth_scene(600 + i, o), {32, 32}, PatchMode::Grid)) {
            p.gt.reset();
            const int s = 12, y0 = static_cast<int>(rng() % (32 - s)), x0 = static_cast<int>(rng() % (32 - s));
            corrupt(p.burst, y0, x0, s, rng);
            std::vector<std::uint8_t> m(32 * 32, 0);
            for (int y = y0; y < y0 + s; ++y)
                for (int x = x0; x < x0 + s; ++x) m[y * 32 + x] = 1;
            known.push_back(std::move(m));
            unlabeled.push_back(std::move(p));
        }

    TrainerState st(HdrModel(ModelSpec{"ref-attn", 16, 3}), AdamConfig{1e-3}, 3);
    TrainConfig cfg;
    cfg.batch_size = 16;
    cfg.steps_per_epoch = 50;
    const ConvPyramidExtractor fx;
    for (int e = 0; e < 12; ++e) training_epoch(st, labeled, {}, cfg, fx, rng);

    const auto pool = normalize_and_mask(generate_pseudo_pool(st.student, unlabeled, cfg.photo), {0.4, 0.4});
    long bad = 0, bad_rejected = 0, clean = 0, clean_rejected = 0;
    for (std::size_t i = 0; i < pool.size(); ++i)
        for (std::size_t j = 0; j < known[i].size(); ++j) {
            const bool rejected = pool[i].pixel_mask.data()[j] == 0;
            if (known[i][j]) {
                ++bad;
                bad_rejected += rejected;
            } else {
                ++clean;
                clean_rejected += rejected;
            }
        }
    const double fb = static_cast<double>(bad_rejected) / bad, fc = static_cast<double>(clean_rejected) / clean;
    char buf[128];
    std::snprintf(buf, sizeof buf, "corrupted pixels rejected %.3f (need >= 0.70), clean pixels rejected %.3f (need <= 0.30)",
                  fb, fc);
    return {fb >= 0.7 && fc <= 0.3, buf};
}

Outcome determinism() {
    const fs::path root = testing::scratch_dir("acceptance_determinism");
    std::ostringstream out, err;
    if (run_cli({"synth-gen", "--out", (root / "data").string(), "--scenes", "8", "--seed", "900"}, out, err) != 0)
        return {false, "synth-gen failed: " + err.str()};
    std::string logs[2];
    for (int k = 0; k < 2; ++k) {
        const fs::path dir = root / ("run" + std::to_string(k));
        std::ostringstream o2, e2;
        const int code = run_cli({"train", "--data", (root / "data").string(), "--run-dir", dir.string(), "--epochs",
                                  "2", "--warmup-epochs", "1", "--seed", "5"},
                                 o2, e2);
        if (code != 0) return {false, "train failed: " + e2.str()};
        std::ifstream in(dir / "metrics.log", std::ios::binary);
        logs[k].assign(std::istreambuf_iterator<char>(in), {});
    }
    const bool same = !logs[0].empty() && logs[0] == logs[1];
    return {same, same ? "metrics.log identical (" + std::to_string(logs[0].size()) + " bytes)"
                       : "metrics.log differs between runs"};
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<Criterion> criteria{
        {"paper-scale results are not reproduced; substitute suites below", 1, reproducibility_note},
        {"EMA closed form after k steps", 5, ema_closed_form},
        {"uncertainty loss gradient check", 30, uncertainty_gradient_check},
        {"bi-level masking matches brute force", 30, masking_oracle},
        {"gamma correction and tonemap scalar oracle", 5, scalar_oracle},
        {"PSNR/SSIM reference oracle", 30, metric_oracle},
        {"ablation trend on the synthetic benchmark", 3600, ablation_trend},
        {"confirmation-bias guard", 900, confirmation_bias_guard},
        {"determinism of two train runs", 600, determinism},
    };
    // Arguments: substrings of criterion names; --strict makes a FAIL line a non-zero exit.
    std::vector<std::string> only;
    bool strict = false;
    for (int i = 1; i < argc; ++i) {
        if (std::string(argv[i]) == "--strict")
            strict = true;
        else
            only.emplace_back(argv[i]);
    }
    int failed = 0, errors = 0, ran = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && std::none_of(only.begin(), only.end(), [&](const std::string& s) {
                return c.name.find(s) != std::string::npos;
            }))
            continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
            ++errors;
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_budget = secs <= c.budget_seconds;
        const bool pass = o.pass && in_budget;
        failed += !pass;
        ++ran;
        std::printf("%s  %s: %s [%.1f s of %.0f s]\n", pass ? "PASS" : "FAIL", c.name.c_str(), o.detail.c_str(), secs,
                    c.budget_seconds);
        std::fflush(stdout);
    }
    std::printf("%d of %d criteria passed\n", ran - failed, ran);
    // A criterion that throws is a broken harness, not a measured outcome.
    return errors || (strict && failed) ? 1 : 0;
}
