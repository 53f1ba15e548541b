#include "hdrssl/semisup.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hdrssl {

const char* stage_name(Stage s) { return s == Stage::Warmup ? "warmup" : "semi"; }

TrainerState::TrainerState(HdrModel model, AdamConfig adam, std::uint64_t seed)
    : student(std::move(model)), optimizer(student.parameters(), adam), rng_seed(seed) {}

void ema_update(ParameterSet& teacher, const ParameterSet& student, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidInput("EMA alpha must lie in [0,1]");
    teacher.require_compatible(student, "ema_update");
    const double beta = 1.0 - alpha;
    for (std::size_t i = 0; i < teacher.count(); ++i) {
        auto& t = teacher[i].value;
        const auto& s = student[i].value;
        for (std::size_t k = 0; k < t.size(); ++k)
            t[k] = static_cast<float>(alpha * static_cast<double>(t[k]) + beta * static_cast<double>(s[k]));
    }
}

void ema_update(TrainerState& state, double alpha) {
    if (state.stage != Stage::Semi || !state.teacher)
        throw InvalidInput("ema_update: teacher not initialised (warm-up stage)");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidInput("EMA alpha must lie in [0,1]");
    ParameterSet& teacher = state.teacher->parameters();
    const ParameterSet& student = state.student.parameters();
    teacher.require_compatible(student, "ema_update");
    auto& master = state.teacher_master;
    if (master.size() != teacher.count()) {
        master.assign(teacher.count(), {});
        for (std::size_t i = 0; i < teacher.count(); ++i)
            master[i].assign(teacher[i].value.begin(), teacher[i].value.end());
    }
    const double beta = 1.0 - alpha;
    for (std::size_t i = 0; i < teacher.count(); ++i) {
        auto& t = teacher[i].value;
        auto& m = master[i];
        const auto& s = student[i].value;
        for (std::size_t k = 0; k < t.size(); ++k) {
            m[k] = alpha * m[k] + beta * static_cast<double>(s[k]);
            t[k] = static_cast<float>(m[k]);
        }
    }
}

void init_teacher(TrainerState& state) {
    if (state.teacher || state.stage == Stage::Semi) throw InvalidInput("init_teacher: teacher already initialised");
    state.teacher.emplace(state.student.network_ptr(), state.student.parameters());
    state.teacher_master.clear();
    state.stage = Stage::Semi;
}

void MaskThresholds::validate() const {
    if (!(tau_pa >= 0.0 && tau_pa <= 1.0) || !(tau_pi >= 0.0 && tau_pi <= 1.0))
        throw InvalidInput("mask thresholds must lie in [0,1]");
}

std::vector<PseudoLabelRecord> generate_pseudo_pool(const HdrModel& teacher, const std::vector<Patch>& patches,
                                                    const PhotometricConfig& photo, int batch_size) {
    std::vector<PseudoLabelRecord> pool;
    pool.reserve(patches.size());
    batch_size = std::max(1, batch_size);
    for (std::size_t begin = 0; begin < patches.size(); begin += batch_size) {
        const std::size_t end = std::min(patches.size(), begin + batch_size);
        std::vector<Tensor> inputs;
        for (std::size_t i = begin; i < end; ++i) inputs.push_back(assemble_input(patches[i].burst, photo));
        const FullOutput out = teacher.forward_full(stack(inputs));
        for (std::size_t i = begin; i < end; ++i) {
            const int n = static_cast<int>(i - begin);
            PseudoLabelRecord r;
            r.patch_id = static_cast<int>(i);
            r.hdr = take_sample(out.prediction, n);
            r.uncertainty = take_sample(out.uncertainty, n);
            const Tensor& u = r.uncertainty;
            double sum = 0.0;
            for (float v : u.values()) sum += v;
            r.raw_patch_score = sum / static_cast<double>(u.size());
            r.raw_pixel_scores.resize(u.plane());
            for (int y = 0; y < u.h(); ++y)
                for (int x = 0; x < u.w(); ++x) {
                    const double s = static_cast<double>(u.at(0, y, x)) + static_cast<double>(u.at(1, y, x)) +
                                     static_cast<double>(u.at(2, y, x));
                    r.raw_pixel_scores[static_cast<std::size_t>(y) * u.w() + x] = s / 3.0;
                }
            pool.push_back(std::move(r));
        }
    }
    return pool;
}

std::vector<PseudoLabelRecord> normalize_and_mask(std::vector<PseudoLabelRecord> pool, const MaskThresholds& t) {
    if (pool.empty()) return pool;
    double pmin = pool.front().raw_patch_score, pmax = pmin;
    double qmin = std::numeric_limits<double>::infinity(), qmax = -qmin;
    for (const auto& r : pool) {
        pmin = std::min(pmin, r.raw_patch_score);
        pmax = std::max(pmax, r.raw_patch_score);
        for (double s : r.raw_pixel_scores) {
            qmin = std::min(qmin, s);
            qmax = std::max(qmax, s);
        }
    }
    const bool patch_flat = !(pmax > pmin);
    const bool pixel_flat = !(qmax > qmin);
    for (auto& r : pool) {
        r.patch_score = patch_flat ? 0.0 : (r.raw_patch_score - pmin) / (pmax - pmin);
        r.kept = passes_threshold(r.patch_score, t.tau_pa);
        const int h = r.uncertainty.h(), w = r.uncertainty.w();
        if (r.raw_pixel_scores.size() != static_cast<std::size_t>(h) * w)
            throw InvalidInput("normalize_and_mask: pixel score count does not match the uncertainty map");
        r.pixel_scores.resize(r.raw_pixel_scores.size());
        r.pixel_mask = PixelMask(1, 1, h, w);
        for (std::size_t j = 0; j < r.raw_pixel_scores.size(); ++j) {
            r.pixel_scores[j] = pixel_flat ? 0.0 : (r.raw_pixel_scores[j] - qmin) / (qmax - qmin);
            r.pixel_mask.data()[j] = passes_threshold(r.pixel_scores[j], t.tau_pi) ? 1 : 0;
        }
    }
    return pool;
}

// ---------------------------------------------------------------------------

void AugmentationSpec::validate() const {
    for (const auto& step : ops) {
        const bool weak_ok = step.op == AugOp::VFlip || step.op == AugOp::Rot90Cw;
        const bool strong_ok = step.op == AugOp::HFlip || step.op == AugOp::Rot90Ccw || step.op == AugOp::RgbShuffle;
        if (kind == AugKind::WeakLabeled ? !weak_ok : !strong_ok)
            throw InvalidInput("augmentation op not allowed for this augmentation kind");
        if (step.op == AugOp::RgbShuffle) {
            auto p = step.permutation;
            std::sort(p.begin(), p.end());
            if (p != std::array<int, 3>{0, 1, 2}) throw InvalidInput("rgb_shuffle needs a permutation of (0,1,2)");
        }
    }
}

AugmentationSpec sample_augmentation(AugKind kind, std::mt19937_64& rng, const AugmentationProbabilities& p) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    AugmentationSpec spec;
    spec.kind = kind;
    if (kind == AugKind::WeakLabeled) {
        if (u(rng) < p.flip) spec.ops.push_back({AugOp::VFlip, {0, 1, 2}});
        if (u(rng) < p.rotate) spec.ops.push_back({AugOp::Rot90Cw, {0, 1, 2}});
        return spec;
    }
    if (u(rng) < p.flip) spec.ops.push_back({AugOp::HFlip, {0, 1, 2}});
    if (u(rng) < p.rotate) spec.ops.push_back({AugOp::Rot90Ccw, {0, 1, 2}});
    if (u(rng) < p.shuffle) {
        static constexpr std::array<std::array<int, 3>, 5> kPerms{
            {{0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
        std::uniform_int_distribution<int> pick(0, 4);
        spec.ops.push_back({AugOp::RgbShuffle, kPerms[pick(rng)]});
    }
    return spec;
}

Tensor permute_channels(const Tensor& img, const std::array<int, 3>& perm) {
    if (img.c() != 3) throw InvalidInput("permute_channels expects 3 channels");
    Tensor out(img.shape());
    for (int n = 0; n < img.n(); ++n)
        for (int c = 0; c < 3; ++c) {
            auto src = img.channel(n, perm[c]);
            std::copy(src.begin(), src.end(), out.channel(n, c).begin());
        }
    return out;
}

AugmentedSample apply_augmentation(const AugmentationSpec& spec, const LdrBurst& burst, const Tensor& target,
                                   const std::optional<PixelMask>& mask) {
    spec.validate();
    AugmentedSample s{burst, target, mask};
    for (const auto& step : spec.ops) {
        if (step.op == AugOp::RgbShuffle) {
            for (auto& f : s.burst.frames) f = permute_channels(f, step.permutation);
            s.target = permute_channels(s.target, step.permutation);
            continue;
        }
        for (auto& f : s.burst.frames) f = apply_spatial(f, step.op);
        s.target = apply_spatial(s.target, step.op);
        if (s.mask) s.mask = apply_spatial(*s.mask, step.op);
    }
    return s;
}

// ---------------------------------------------------------------------------

void AblationToggle::validate() const {
    if ((enable_patch_mask || enable_pixel_mask) && !enable_unc_loss)
        throw InvalidInput("patch/pixel masking requires the uncertainty loss");
    if (!enable_mt && (enable_unc_loss || enable_patch_mask || enable_pixel_mask || enable_strong_aug))
        throw InvalidInput("uncertainty loss, masks and strong augmentation require the mean teacher");
}

std::vector<PseudoSample> kept_samples(const std::vector<Patch>& patches, const std::vector<PseudoLabelRecord>& pool) {
    std::vector<PseudoSample> out;
    for (const auto& r : pool) {
        if (!r.kept) continue;
        if (r.patch_id < 0 || static_cast<std::size_t>(r.patch_id) >= patches.size())
            throw InvalidInput("pseudo record refers to a missing patch");
        out.push_back({&patches[r.patch_id], &r});
    }
    return out;
}

namespace {

struct Batch {
    Tensor input;
    Tensor target;
    std::optional<PixelMask> mask;
};

Batch build_batch(const std::vector<AugmentedSample>& samples, const PhotometricConfig& photo) {
    std::vector<Tensor> inputs, targets;
    std::vector<PixelMask> masks;
    for (const auto& s : samples) {
        inputs.push_back(assemble_input(s.burst, photo));
        targets.push_back(s.target);
        if (s.mask) masks.push_back(*s.mask);
    }
    Batch b{stack(inputs), stack(targets), std::nullopt};
    if (!masks.empty()) {
        if (masks.size() != samples.size()) throw InvalidInput("pseudo batch mixes masked and unmasked samples");
        PixelMask m(static_cast<int>(masks.size()), 1, masks[0].h(), masks[0].w());
        for (std::size_t i = 0; i < masks.size(); ++i)
            std::copy(masks[i].values().begin(), masks[i].values().end(), m.sample(static_cast<int>(i)).begin());
        b.mask = std::move(m);
    }
    return b;
}

void scale_into(Tensor& acc, const Tensor& g, double scale) {
    if (g.empty() || scale == 0.0) return;
    if (acc.empty()) acc = Tensor(g.shape());
    for (std::size_t i = 0; i < g.size(); ++i) acc.data()[i] += static_cast<float>(scale * g.data()[i]);
}

}  // namespace

EpochMetrics training_epoch(TrainerState& state, const std::vector<Patch>& labeled,
                            const std::vector<PseudoSample>& pseudo, const TrainConfig& cfg,
                            const FeatureExtractor& fx, std::mt19937_64& rng) {
    if (labeled.empty()) throw InvalidInput("training_epoch: no labeled patches");
    if (state.stage == Stage::Warmup && !pseudo.empty())
        throw InvalidInput("training_epoch: pseudo labels supplied during warm-up");
    const int batch = std::max(1, cfg.batch_size);
    const int steps = cfg.steps_per_epoch > 0
                          ? cfg.steps_per_epoch
                          : static_cast<int>((labeled.size() + batch - 1) / static_cast<std::size_t>(batch));
    const bool use_unc = cfg.toggles.enable_unc_loss;
    const bool use_pseudo = state.stage == Stage::Semi && cfg.toggles.enable_mt && !pseudo.empty() &&
                            cfg.weights.lambda_u > 0.0;
    const AugKind pseudo_aug = cfg.toggles.enable_strong_aug ? AugKind::StrongUnlabeled : AugKind::WeakLabeled;
    const Network& net = state.student.network();
    const Network::BackwardOptions opts{cfg.judge_into_features};

    std::vector<std::size_t> order(labeled.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::size_t> pseudo_order(pseudo.size());
    std::iota(pseudo_order.begin(), pseudo_order.end(), 0);
    std::shuffle(pseudo_order.begin(), pseudo_order.end(), rng);

    EpochMetrics m;
    m.epoch = state.epoch;
    m.stage = state.stage;
    std::size_t cursor = 0, pseudo_cursor = 0;
    for (int step = 0; step < steps; ++step) {
        std::vector<AugmentedSample> lab;
        for (int k = 0; k < batch; ++k) {
            const Patch& p = labeled[order[cursor++ % order.size()]];
            if (!p.gt) throw InvalidInput("labeled patch from " + p.scene_id + " has no ground truth");
            lab.push_back(apply_augmentation(sample_augmentation(AugKind::WeakLabeled, rng, cfg.aug), p.burst, *p.gt,
                                             std::nullopt));
        }
        const Batch lb = build_batch(lab, cfg.photo);
        NetworkTape ltape;
        const FullOutput lout = net.forward(state.student.parameters(), lb.input, &ltape);
        LossTerms sup;
        Tensor g_r, g_v, g_kp, g_ks;
        sup.recon = recon_loss(lout.prediction, lb.target, cfg.photo, nullptr, &g_r);
        sup.perceptual = perceptual_loss(lout.prediction, lb.target, cfg.photo, fx, &g_v);
        if (use_unc)
            sup.uncertainty = uncertainty_loss(lout.prediction, lb.target, lout.uncertainty, cfg.photo, nullptr, &g_kp, &g_ks);

        std::optional<LossTerms> unsup;
        Batch pb;
        NetworkTape ptape;
        FullOutput pout;
        Tensor u_r, u_v, u_ks;
        if (use_pseudo) {
            std::vector<AugmentedSample> ps;
            for (int k = 0; k < batch; ++k) {
                const PseudoSample& s = pseudo[pseudo_order[pseudo_cursor++ % pseudo_order.size()]];
                std::optional<PixelMask> mask = s.record->pixel_mask;
                ps.push_back(apply_augmentation(sample_augmentation(pseudo_aug, rng, cfg.aug), s.input->burst,
                                                s.record->hdr, mask));
            }
            pb = build_batch(ps, cfg.photo);
            pout = net.forward(state.student.parameters(), pb.input, &ptape);
            const PixelMask* mask = pb.mask ? &*pb.mask : nullptr;
            LossTerms u;
            u.recon = recon_loss(pout.prediction, pb.target, cfg.photo, mask, &u_r);
            u.perceptual = perceptual_loss(pout.prediction, pb.target, cfg.photo, fx, &u_v);
            // The prediction is treated as a constant here: only the judge learns from pseudo targets.
            if (use_unc)
                u.uncertainty = uncertainty_loss(pout.prediction, pb.target, pout.uncertainty, cfg.photo, mask,
                                                 static_cast<Tensor*>(nullptr), &u_ks);
            unsup = u;
        }

        const double total = total_loss(sup, unsup, cfg.weights);

        ParameterSet& params = state.student.parameters();
        params.zero_grad();
        Tensor d_pred, d_unc;
        scale_into(d_pred, g_r, 1.0);
        scale_into(d_pred, g_v, cfg.weights.lambda_v);
        scale_into(d_pred, g_kp, 1.0);
        scale_into(d_unc, g_ks, 1.0);
        net.backward(params, ltape, lout, d_pred, d_unc, opts);
        if (unsup) {
            const double lu = cfg.weights.lambda_u;
            Tensor pd_pred, pd_unc;
            scale_into(pd_pred, u_r, lu);
            scale_into(pd_pred, u_v, lu * cfg.weights.lambda_v);
            scale_into(pd_unc, u_ks, lu);
            net.backward(params, ptape, pout, pd_pred, pd_unc, opts);
        }
        state.optimizer.step(params);
        if (state.stage == Stage::Semi && state.teacher) ema_update(state, cfg.alpha);
        ++state.step;

        m.supervised.recon += sup.recon;
        m.supervised.perceptual += sup.perceptual;
        m.supervised.uncertainty += sup.uncertainty;
        if (unsup) {
            m.unsupervised.recon += unsup->recon;
            m.unsupervised.perceptual += unsup->perceptual;
            m.unsupervised.uncertainty += unsup->uncertainty;
        }
        m.total += total;
        ++m.steps;
    }
    const double inv = 1.0 / std::max(1, m.steps);
    for (LossTerms* t : {&m.supervised, &m.unsupervised}) {
        t->recon *= inv;
        t->perceptual *= inv;
        t->uncertainty *= inv;
    }
    m.total *= inv;
    return m;
}

}  // namespace hdrssl
