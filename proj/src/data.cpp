#include "hdrssl/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "hdrssl/image_io.hpp"
#include "hdrssl/rgbe.hpp"

namespace hdrssl {

namespace fs = std::filesystem;

void SceneRecord::validate() const {
    burst.validate();
    if (gt) {
        if (gt->n() != 1 || gt->c() != 3 || gt->h() != burst.height() || gt->w() != burst.width())
            throw InvalidInput("scene " + scene_id + ": GT shape " + gt->shape().str() + " does not match frames");
    }
}

SceneRecord load_kalantari_scene(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw InvalidInput("scene directory not found: " + dir.string());
    std::vector<fs::path> tiffs, hdrs;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
        if (ext == ".tif" || ext == ".tiff") tiffs.push_back(entry.path());
        if (ext == ".hdr") hdrs.push_back(entry.path());
    }
    std::sort(tiffs.begin(), tiffs.end());
    std::sort(hdrs.begin(), hdrs.end());
    const std::string id = dir.filename().string();
    if (tiffs.size() != 3)
        throw InvalidInput("scene " + id + ": expected 3 LDR TIFF frames, found " + std::to_string(tiffs.size()));

    const fs::path exposure_file = dir / "exposure.txt";
    std::ifstream ev(exposure_file);
    if (!ev) throw InvalidInput("scene " + id + ": cannot read " + exposure_file.string());
    std::array<double, 3> stops{};
    for (double& s : stops)
        if (!(ev >> s)) throw InvalidInput("scene " + id + ": exposure.txt must hold three stop values");

    SceneRecord scene;
    scene.scene_id = id;
    for (int i = 0; i < 3; ++i) {
        scene.burst.frames[i] = read_ldr_tiff(tiffs[i]);
        scene.burst.exposure_times[i] = exposure_from_stops(stops[i]);
    }
    if (!hdrs.empty()) {
        fs::path gt_file = hdrs.front();
        for (const auto& h : hdrs)
            if (h.filename() == "gt.hdr" || h.filename() == "HDRImg.hdr") gt_file = h;
        scene.gt = clamp01(rgbe::read(gt_file));
    }
    scene.validate();
    return scene;
}

void write_scene(const fs::path& dir, const SceneRecord& scene) {
    scene.validate();
    fs::create_directories(dir);
    for (int i = 0; i < 3; ++i)
        write_ldr_tiff(dir / ("ldr_" + std::to_string(i) + ".tif"), scene.burst.frames[i]);
    std::ofstream ev(dir / "exposure.txt");
    if (!ev) throw InvalidInput("cannot write exposure.txt in " + dir.string());
    for (int i = 0; i < 3; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", std::log2(scene.burst.exposure_times[i]));
        ev << buf << (i < 2 ? " " : "\n");
    }
    if (scene.gt) rgbe::write(dir / "gt.hdr", *scene.gt);
}

SceneRecord quantize_for_storage(const SceneRecord& scene) {
    SceneRecord q = scene;
    for (auto& frame : q.burst.frames)
        for (float& v : frame.values()) v = static_cast<float>(std::lround(std::clamp(v, 0.0f, 1.0f) * 65535.0f)) / 65535.0f;
    for (int i = 0; i < 3; ++i)
        q.burst.exposure_times[i] = exposure_from_stops(std::log2(scene.burst.exposure_times[i]));
    if (q.gt) {
        Tensor& g = *q.gt;
        for (int y = 0; y < g.h(); ++y)
            for (int x = 0; x < g.w(); ++x) {
                const auto v = rgbe::quantize(g.at(0, y, x), g.at(1, y, x), g.at(2, y, x));
                for (int c = 0; c < 3; ++c) g.at(c, y, x) = std::clamp(v[c], 0.0f, 1.0f);
            }
    }
    return q;
}

std::vector<SceneRecord> load_dataset(const fs::path& root) {
    if (!fs::is_directory(root)) throw InvalidInput("dataset root not found: " + root.string());
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory()) dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());
    std::vector<SceneRecord> scenes;
    scenes.reserve(dirs.size());
    for (const auto& d : dirs) scenes.push_back(load_kalantari_scene(d));
    return scenes;
}

DataSplit make_split(const std::vector<SceneRecord>& scenes, const SplitSpec& spec) {
    const int total = static_cast<int>(scenes.size());
    if (spec.n_labeled <= 0 || spec.n_labeled > total)
        throw InvalidInput("n_labeled = " + std::to_string(spec.n_labeled) + " must lie in [1, " +
                           std::to_string(total) + "]");
    std::vector<int> order(total);
    std::iota(order.begin(), order.end(), 0);
    if (spec.policy == SplitPolicy::Random) {
        std::mt19937_64 rng(spec.seed);
        std::shuffle(order.begin(), order.end(), rng);
    }
    DataSplit split;
    for (int k = 0; k < total; ++k) {
        const SceneRecord& s = scenes[order[k]];
        if (k < spec.n_labeled) {
            if (!s.gt) throw InvalidInput("labeled scene " + s.scene_id + " has no ground truth");
            split.labeled.push_back(s);
        } else {
            SceneRecord hidden = s;
            split.hidden_gt.push_back(std::move(hidden.gt));
            hidden.gt.reset();
            split.unlabeled.push_back(std::move(hidden));
        }
    }
    return split;
}

void PatchGrid::validate() const {
    if (patch_size <= 0) throw InvalidInput("patch size must be positive");
    if (stride <= 0 || stride > patch_size) throw InvalidInput("stride must lie in [1, patch size]");
}

std::vector<int> grid_positions(int extent, int patch_size, int stride) {
    if (extent < patch_size) throw InvalidInput("image extent " + std::to_string(extent) + " smaller than patch " +
                                                std::to_string(patch_size));
    std::vector<int> pos;
    for (int p = 0; p + patch_size <= extent; p += stride) pos.push_back(p);
    if (pos.back() + patch_size < extent) pos.push_back(extent - patch_size);
    return pos;
}

namespace {

Patch make_patch(const SceneRecord& scene, int y, int x, int size) {
    Patch p;
    p.scene_id = scene.scene_id;
    p.y = y;
    p.x = x;
    for (int i = 0; i < 3; ++i) p.burst.frames[i] = crop(scene.burst.frames[i], y, x, size, size);
    p.burst.exposure_times = scene.burst.exposure_times;
    if (scene.gt) p.gt = crop(*scene.gt, y, x, size, size);
    return p;
}

}  // namespace

std::vector<Patch> extract_patches(const SceneRecord& scene, const PatchGrid& grid, PatchMode mode,
                                   std::uint64_t seed, int random_count) {
    grid.validate();
    const int h = scene.burst.height(), w = scene.burst.width();
    if (h < grid.patch_size || w < grid.patch_size)
        throw InvalidInput("scene " + scene.scene_id + " (" + std::to_string(h) + "x" + std::to_string(w) +
                           ") is smaller than the patch size " + std::to_string(grid.patch_size));
    const auto ys = grid_positions(h, grid.patch_size, grid.stride);
    const auto xs = grid_positions(w, grid.patch_size, grid.stride);
    std::vector<Patch> out;
    if (mode == PatchMode::Grid) {
        for (int y : ys)
            for (int x : xs) out.push_back(make_patch(scene, y, x, grid.patch_size));
        return out;
    }
    const int count = random_count >= 0 ? random_count : static_cast<int>(ys.size() * xs.size());
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> dy(0, h - grid.patch_size), dx(0, w - grid.patch_size);
    for (int k = 0; k < count; ++k) {
        const int y = dy(rng);
        const int x = dx(rng);
        out.push_back(make_patch(scene, y, x, grid.patch_size));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic scenes

SynthOptions SynthOptions::from_difficulty(double difficulty) {
    const double d = std::clamp(difficulty, 0.0, 1.0);
    SynthOptions o;
    o.motion = 10.0 * d;
    o.noise = 0.008 * d;
    o.foreground_objects = 1 + static_cast<int>(std::lround(2.0 * d));
    return o;
}

namespace {

struct Shape2D {
    bool circle = false;
    double cy = 0, cx = 0, ry = 0, rx = 0;
    std::array<double, 3> color{};
    double stripe_period = 0.0;  // 0 = flat
    double stripe_angle = 0.0;

    bool contains(double y, double x) const {
        if (circle) {
            const double dy = (y - cy) / ry, dx = (x - cx) / rx;
            return dy * dy + dx * dx <= 1.0;
        }
        return std::abs(y - cy) <= ry && std::abs(x - cx) <= rx;
    }
    double texture(double y, double x) const {
        if (stripe_period <= 0.0) return 1.0;
        const double u = x * std::cos(stripe_angle) + y * std::sin(stripe_angle);
        return 0.55 + 0.45 * std::sin(2.0 * M_PI * u / stripe_period);
    }
};

struct SceneLayout {
    std::array<double, 3> bg_color{};
    double bg_level = 0.0, bg_freq = 0.0, bg_angle = 0.0, bg_phase = 0.0;
    std::vector<Shape2D> statics;
    std::vector<Shape2D> movers;
    std::vector<std::array<double, 2>> velocity;  // per mover: displacement of frame 2; frame 0 gets the negative
    bool has_bright = false;
    Shape2D bright;
};

SceneLayout make_layout(std::uint64_t seed, const SynthOptions& o) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double h = o.height, w = o.width;
    auto color = [&] {
        std::array<double, 3> c{};
        for (double& v : c) v = 0.25 + 0.75 * u(rng);
        const double m = std::max({c[0], c[1], c[2]});
        for (double& v : c) v /= m;
        return c;
    };
    SceneLayout L;
    L.bg_color = color();
    L.bg_level = 0.01 + 0.05 * u(rng);
    L.bg_freq = 0.5 + 2.0 * u(rng);
    L.bg_angle = 2.0 * M_PI * u(rng);
    L.bg_phase = 2.0 * M_PI * u(rng);

    auto random_shape = [&](double min_r, double max_r, double lo, double hi) {
        Shape2D s;
        s.circle = u(rng) < 0.5;
        s.cy = h * u(rng);
        s.cx = w * u(rng);
        s.ry = min_r + (max_r - min_r) * u(rng);
        s.rx = min_r + (max_r - min_r) * u(rng);
        const double level = lo + (hi - lo) * u(rng);
        s.color = color();
        for (double& v : s.color) v *= level;
        if (u(rng) < 0.5) {
            s.stripe_period = 4.0 + 8.0 * u(rng);
            s.stripe_angle = M_PI * u(rng);
        }
        return s;
    };
    const int n_static = 3 + static_cast<int>(4 * u(rng));
    for (int i = 0; i < n_static; ++i) L.statics.push_back(random_shape(0.08 * h, 0.25 * h, 0.003, 0.15));
    for (int i = 0; i < o.foreground_objects; ++i) {
        L.movers.push_back(random_shape(0.08 * h, 0.18 * h, 0.01, 0.18));
        const double angle = 2.0 * M_PI * u(rng);
        const double mag = o.motion * (0.5 + 0.5 * u(rng));
        L.velocity.push_back({mag * std::sin(angle), mag * std::cos(angle)});
    }
    L.has_bright = o.bright_region;
    if (L.has_bright) {
        Shape2D b;
        b.circle = false;
        b.ry = (0.1 + 0.1 * u(rng)) * h;
        b.rx = (0.1 + 0.1 * u(rng)) * w;
        b.cy = b.ry + (h - 2 * b.ry) * u(rng);
        b.cx = b.rx + (w - 2 * b.rx) * u(rng);
        const double level = 0.35 + 0.65 * u(rng);
        b.color = color();
        for (double& v : b.color) v = level * (0.85 + 0.15 * v);
        L.bright = b;
    }
    return L;
}

// frame: -1, 0, +1 maps mover offsets to frames 0, 1 (reference), 2.
std::vector<double> render(const SceneLayout& L, const SynthOptions& o, int frame) {
    const int h = o.height, w = o.width;
    std::vector<double> img(static_cast<std::size_t>(3) * h * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double u = (x * std::cos(L.bg_angle) + y * std::sin(L.bg_angle)) / std::max(h, w);
            const double shade = 0.35 + 0.65 * (0.5 + 0.5 * std::sin(2.0 * M_PI * L.bg_freq * u + L.bg_phase));
            std::array<double, 3> v{};
            for (int c = 0; c < 3; ++c) v[c] = L.bg_color[c] * L.bg_level * shade;
            for (const auto& s : L.statics)
                if (s.contains(y, x)) {
                    const double t = s.texture(y, x);
                    for (int c = 0; c < 3; ++c) v[c] = s.color[c] * t;
                }
            for (std::size_t m = 0; m < L.movers.size(); ++m) {
                const double oy = frame * L.velocity[m][0], ox = frame * L.velocity[m][1];
                const auto& s = L.movers[m];
                if (s.contains(y - oy, x - ox)) {
                    const double t = s.texture(y - oy, x - ox);
                    for (int c = 0; c < 3; ++c) v[c] = s.color[c] * t;
                }
            }
            if (L.has_bright && L.bright.contains(y, x))
                for (int c = 0; c < 3; ++c) v[c] = L.bright.color[c];
            for (int c = 0; c < 3; ++c) img[(static_cast<std::size_t>(c) * h + y) * w + x] = v[c];
        }
    return img;
}

}  // namespace

SceneRecord synth_scene(std::uint64_t seed, const SynthOptions& o) {
    if (o.height <= 0 || o.width <= 0) throw InvalidInput("synthetic scene size must be positive");
    const SceneLayout L = make_layout(seed, o);
    std::mt19937_64 noise_rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::normal_distribution<double> gauss(0.0, 1.0);

    SceneRecord scene;
    char id[32];
    std::snprintf(id, sizeof id, "synth_%06llu", static_cast<unsigned long long>(seed));
    scene.scene_id = id;
    const auto gt = render(L, o, 0);
    scene.gt = Tensor::image(3, o.height, o.width);
    for (std::size_t k = 0; k < gt.size(); ++k) scene.gt->data()[k] = static_cast<float>(gt[k]);

    for (int i = 0; i < 3; ++i) {
        const double t = exposure_from_stops(o.stops[i]);
        scene.burst.exposure_times[i] = t;
        const auto radiance = i == LdrBurst::kReference ? gt : render(L, o, i - 1);
        const double sigma = o.noise / t;
        Tensor frame = Tensor::image(3, o.height, o.width);
        for (std::size_t k = 0; k < radiance.size(); ++k) {
            double v = radiance[k] * t;
            if (sigma > 0.0) v += sigma * gauss(noise_rng);
            v = std::clamp(v, 0.0, 1.0);
            frame.data()[k] = static_cast<float>(std::pow(v, 1.0 / o.gamma));
        }
        scene.burst.frames[i] = std::move(frame);
    }
    return scene;
}

SceneRecord synth_scene(std::uint64_t seed, double difficulty) {
    return synth_scene(seed, SynthOptions::from_difficulty(difficulty));
}

std::vector<std::uint8_t> synth_bright_mask(std::uint64_t seed, const SynthOptions& o) {
    const SceneLayout L = make_layout(seed, o);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(o.height) * o.width, 0);
    if (!L.has_bright) return mask;
    for (int y = 0; y < o.height; ++y)
        for (int x = 0; x < o.width; ++x)
            mask[static_cast<std::size_t>(y) * o.width + x] = L.bright.contains(y, x) ? 1 : 0;
    return mask;
}

}  // namespace hdrssl
