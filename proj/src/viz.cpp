#include "hdrssl/viz.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "hdrssl/image_io.hpp"

namespace hdrssl {

namespace {

void tint(Tensor& img, int y, int x) {
    img(0, 0, y, x) = 0.5f * img(0, 0, y, x) + 0.5f;
    img(0, 1, y, x) *= 0.5f;
    img(0, 2, y, x) *= 0.5f;
}

}  // namespace

MaskViz build_mask_viz(const HdrModel& teacher, const SceneRecord& scene, const PhotometricConfig& photo,
                       const PatchGrid& grid, const MaskThresholds& thresholds, int pool_batch) {
    if (!(thresholds.tau_pa >= 0.0) || !(thresholds.tau_pi >= 0.0))
        throw InvalidInput("mask thresholds must be non-negative");
    MaskViz v;
    const FullOutput full = infer_tiled(teacher, scene.burst, photo, {grid.patch_size, grid.stride});
    const int h = full.prediction.h(), w = full.prediction.w();
    v.pseudo_tonemapped = tonemap(full.prediction, photo);

    // Pixel level: the whole frame is the pool.
    PseudoLabelRecord whole;
    whole.hdr = full.prediction;
    whole.uncertainty = full.uncertainty;
    whole.raw_pixel_scores.resize(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            whole.raw_pixel_scores[static_cast<std::size_t>(y) * w + x] =
                (static_cast<double>(full.uncertainty(0, 0, y, x)) + full.uncertainty(0, 1, y, x) +
                 full.uncertainty(0, 2, y, x)) /
                3.0;
    const auto pixel_pool = normalize_and_mask({whole}, thresholds);
    const PseudoLabelRecord& px = pixel_pool.front();
    v.heatmap = Tensor(1, 1, h, w);
    v.heat_min = 1.0;
    v.heat_max = 0.0;
    std::size_t kept_pixels = 0;
    v.pixel_overlay = v.pseudo_tonemapped;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t j = static_cast<std::size_t>(y) * w + x;
            const double s = px.pixel_scores[j];
            v.heatmap(0, 0, y, x) = static_cast<float>(s);
            v.heat_min = std::min(v.heat_min, s);
            v.heat_max = std::max(v.heat_max, s);
            if (px.pixel_mask.data()[j]) ++kept_pixels;
            else tint(v.pixel_overlay, y, x);
        }
    v.pixel_kept_fraction = static_cast<double>(kept_pixels) / static_cast<double>(h * w);

    // Patch level: the scene's grid patches are the pool.
    const auto patches = extract_patches(scene, grid, PatchMode::Grid);
    const auto pool = normalize_and_mask(generate_pseudo_pool(teacher, patches, photo, pool_batch), thresholds);
    std::vector<std::uint8_t> covered(static_cast<std::size_t>(h) * w, 0);
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (!pool[i].kept) continue;
        ++v.patches_kept;
        for (int y = 0; y < grid.patch_size; ++y)
            std::fill_n(&covered[static_cast<std::size_t>(patches[i].y + y) * w + patches[i].x], grid.patch_size, 1);
    }
    v.patches_total = static_cast<int>(pool.size());
    v.patch_overlay = v.pseudo_tonemapped;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (!covered[static_cast<std::size_t>(y) * w + x]) tint(v.patch_overlay, y, x);
    return v;
}

void write_mask_viz(const std::filesystem::path& dir, const MaskViz& viz, const MaskThresholds& thresholds) {
    std::filesystem::create_directories(dir);
    write_png8(dir / "pseudo_hdr.png", viz.pseudo_tonemapped);
    write_png8(dir / "uncertainty.png", viz.heatmap);
    write_png8(dir / "patch_mask.png", viz.patch_overlay);
    write_png8(dir / "pixel_mask.png", viz.pixel_overlay);
    std::ofstream out(dir / "summary.txt");
    out << "tau_pa " << thresholds.tau_pa << "\ntau_pi " << thresholds.tau_pi << "\nheatmap_min " << viz.heat_min
        << "\nheatmap_max " << viz.heat_max << "\npatches_kept " << viz.patches_kept << " / " << viz.patches_total
        << "\npixels_kept_fraction " << viz.pixel_kept_fraction << '\n';
    if (!out) throw InvalidInput("cannot write " + (dir / "summary.txt").string());
}

std::string format_pool_table(const std::vector<Patch>& patches, const std::vector<PseudoLabelRecord>& pool) {
    std::ostringstream out;
    out << "patch_id\tscene\ty\tx\traw_patch_score\tpatch_score\tkept\tunmasked_fraction\n";
    char buf[64];
    for (const auto& r : pool) {
        const Patch& p = patches.at(static_cast<std::size_t>(r.patch_id));
        std::size_t on = 0;
        for (auto m : r.pixel_mask.values()) on += m;
        out << r.patch_id << '\t' << p.scene_id << '\t' << p.y << '\t' << p.x << '\t';
        std::snprintf(buf, sizeof buf, "%.9g\t%.9g\t%d\t%.6f", r.raw_patch_score, r.patch_score, r.kept ? 1 : 0,
                      static_cast<double>(on) / static_cast<double>(r.pixel_mask.size()));
        out << buf << '\n';
    }
    return out.str();
}

}  // namespace hdrssl
