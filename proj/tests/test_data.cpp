#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "hdrssl/data.hpp"
#include "hdrssl/image_io.hpp"
#include "hdrssl/rgbe.hpp"
#include "test_support.hpp"

using namespace hdrssl;
namespace fs = std::filesystem;

namespace {

SceneRecord small_scene(std::uint64_t seed, int h = 24, int w = 20) {
    SynthOptions o = SynthOptions::from_difficulty(0.5);
    o.height = h;
    o.width = w;
    return synth_scene(seed, o);
}

bool same_scene(const SceneRecord& a, const SceneRecord& b) {
    for (int i = 0; i < 3; ++i)
        if (a.burst.frames[i] != b.burst.frames[i] || a.burst.exposure_times[i] != b.burst.exposure_times[i])
            return false;
    if (a.gt.has_value() != b.gt.has_value()) return false;
    return !a.gt || *a.gt == *b.gt;
}

}  // namespace

TEST_CASE("rgbe encoding round trip") {
    std::mt19937_64 rng(1);
    for (int w : {5, 9, 40}) {
        Tensor img = testing::random_image(rng, 1, 3, 7, w, 0.0f, 1.0f);
        img.at(0, 0, 0) = img.at(1, 0, 0) = img.at(2, 0, 0) = 0.0f;
        for (int x = 0; x < w; ++x) img.at(1, 3, x) = 0.25f;  // a run for the RLE path
        const auto dir = testing::scratch_dir("rgbe");
        rgbe::write(dir / "a.hdr", img);
        const Tensor back = rgbe::read(dir / "a.hdr");
        REQUIRE(back.shape() == img.shape());
        for (int y = 0; y < 7; ++y)
            for (int x = 0; x < w; ++x) {
                const auto q = rgbe::quantize(img.at(0, y, x), img.at(1, y, x), img.at(2, y, x));
                const float m = std::max({img.at(0, y, x), img.at(1, y, x), img.at(2, y, x)});
                for (int c = 0; c < 3; ++c) {
                    CHECK(back.at(c, y, x) == q[c]);
                    CHECK(std::abs(back.at(c, y, x) - img.at(c, y, x)) <= m / 128.0f + 1e-30f);
                }
            }
        CHECK(back.at(0, 0, 0) == 0.0f);
    }
    // Re-encoding a decoded value is stable.
    const auto q = rgbe::quantize(0.3f, 0.7f, 0.01f);
    CHECK(rgbe::quantize(q[0], q[1], q[2]) == q);
}

TEST_CASE("rgbe reader rejects malformed files") {
    const auto dir = testing::scratch_dir("rgbe_bad");
    std::ofstream(dir / "a.hdr") << "P6\n";
    CHECK_THROWS_AS(rgbe::read(dir / "a.hdr"), InvalidInput);
    std::ofstream(dir / "b.hdr") << "#?RADIANCE\nFORMAT=32-bit_rle_xyze\n\n-Y 1 +X 1\n";
    CHECK_THROWS_AS(rgbe::read(dir / "b.hdr"), InvalidInput);
    std::ofstream(dir / "c.hdr") << "#?RADIANCE\n\n-Y 2 +X 2\nab";
    CHECK_THROWS_AS(rgbe::read(dir / "c.hdr"), InvalidInput);
    CHECK_THROWS_AS(rgbe::read(dir / "missing.hdr"), InvalidInput);
}

TEST_CASE("16-bit tiff round trip") {
    Tensor img = Tensor::image(3, 5, 6);
    for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] = static_cast<float>((i * 997) % 65536) / 65535.0f;
    const auto dir = testing::scratch_dir("tiff");
    write_ldr_tiff(dir / "a.tif", img);
    const Tensor back = read_ldr_tiff(dir / "a.tif");
    REQUIRE(back.shape() == img.shape());
    for (std::size_t i = 0; i < img.size(); ++i) CHECK(back.data()[i] == img.data()[i]);
    CHECK_THROWS_AS(read_ldr_tiff(dir / "missing.tif"), InvalidInput);
}

TEST_CASE("scene loading") {
    const auto dir = testing::scratch_dir("scene");
    SceneRecord s = small_scene(3);
    s.scene_id = "s0";
    write_scene(dir / "s0", s);
    std::ofstream(dir / "s0" / "exposure.txt") << "-2 0 2\n";
    const SceneRecord loaded = load_kalantari_scene(dir / "s0");
    CHECK(loaded.burst.exposure_times == std::array<double, 3>{0.25, 1.0, 4.0});
    CHECK(loaded.scene_id == "s0");
    REQUIRE(loaded.gt);

    fs::remove(dir / "s0" / "gt.hdr");
    CHECK_FALSE(load_kalantari_scene(dir / "s0").gt.has_value());

    std::ofstream(dir / "s0" / "exposure.txt") << "-2 0\n";
    CHECK_THROWS_AS(load_kalantari_scene(dir / "s0"), InvalidInput);
    std::ofstream(dir / "s0" / "exposure.txt") << "-2 0 2\n";
    fs::remove(dir / "s0" / "ldr_2.tif");
    CHECK_THROWS_WITH_AS(load_kalantari_scene(dir / "s0"), doctest::Contains("found 2"), InvalidInput);
    CHECK_THROWS_AS(load_kalantari_scene(dir / "nope"), InvalidInput);
}

TEST_CASE("written scenes load back bit-exact") {
    const auto dir = testing::scratch_dir("dataset");
    for (int i = 0; i < 3; ++i) {
        SceneRecord s = small_scene(100 + i);
        write_scene(dir / s.scene_id, s);
    }
    const auto scenes = load_dataset(dir);
    REQUIRE(scenes.size() == 3);
    for (int i = 0; i < 3; ++i) {
        const SceneRecord expected = quantize_for_storage(small_scene(100 + i));
        CHECK(scenes[i].scene_id == expected.scene_id);
        CHECK(same_scene(scenes[i], expected));
    }
    CHECK(same_scene(quantize_for_storage(scenes[0]), scenes[0]));
}

TEST_CASE("splits") {
    std::vector<SceneRecord> scenes;
    for (int i = 0; i < 74; ++i) {
        SceneRecord s;
        s.scene_id = "s" + std::to_string(i);
        s.gt = Tensor::image(3, 1, 1);
        scenes.push_back(s);
    }
    const DataSplit a = make_split(scenes, {5, 0, SplitPolicy::FirstN});
    CHECK(a.labeled.size() == 5);
    CHECK(a.unlabeled.size() == 69);
    CHECK(a.hidden_gt.size() == 69);
    for (const auto& u : a.unlabeled) CHECK_FALSE(u.gt.has_value());
    for (const auto& g : a.hidden_gt) CHECK(g.has_value());

    const DataSplit b = make_split(scenes, {10, 0, SplitPolicy::FirstN});
    for (int i = 0; i < 5; ++i) CHECK(a.labeled[i].scene_id == b.labeled[i].scene_id);

    const DataSplit r1 = make_split(scenes, {5, 7, SplitPolicy::Random});
    const DataSplit r2 = make_split(scenes, {5, 7, SplitPolicy::Random});
    std::set<std::string> all;
    for (int i = 0; i < 5; ++i) {
        CHECK(r1.labeled[i].scene_id == r2.labeled[i].scene_id);
        all.insert(r1.labeled[i].scene_id);
    }
    for (const auto& u : r1.unlabeled) all.insert(u.scene_id);
    CHECK(all.size() == 74);

    CHECK(make_split(scenes, {74, 0, SplitPolicy::FirstN}).unlabeled.empty());
    CHECK_THROWS_AS(make_split(scenes, {75, 0, SplitPolicy::FirstN}), InvalidInput);
    CHECK_THROWS_AS(make_split(scenes, {0, 0, SplitPolicy::FirstN}), InvalidInput);
    scenes[2].gt.reset();
    CHECK_THROWS_AS(make_split(scenes, {5, 0, SplitPolicy::FirstN}), InvalidInput);
}

TEST_CASE("patch grid") {
    SceneRecord s;
    for (auto& f : s.burst.frames) f = Tensor::image(3, 64, 64);
    CHECK(extract_patches(s, {64, 32}, PatchMode::Grid).size() == 1);
    for (auto& f : s.burst.frames) f = Tensor::image(3, 128, 128);
    CHECK(extract_patches(s, {64, 32}, PatchMode::Grid).size() == 9);
    for (auto& f : s.burst.frames) f = Tensor::image(3, 100, 70);
    CHECK(grid_positions(100, 64, 32) == std::vector<int>{0, 32, 36});
    CHECK(grid_positions(70, 64, 32) == std::vector<int>{0, 6});
    CHECK(extract_patches(s, {64, 32}, PatchMode::Grid).size() == 6);
    CHECK_THROWS_AS(extract_patches(s, {80, 32}, PatchMode::Grid), InvalidInput);
    CHECK_THROWS_AS(extract_patches(s, {64, 65}, PatchMode::Grid), InvalidInput);

    const auto r1 = extract_patches(s, {16, 8}, PatchMode::Random, 5, 20);
    const auto r2 = extract_patches(s, {16, 8}, PatchMode::Random, 5, 20);
    REQUIRE(r1.size() == 20);
    for (int i = 0; i < 20; ++i) {
        CHECK(r1[i].y == r2[i].y);
        CHECK(r1[i].x == r2[i].x);
        CHECK(r1[i].y + 16 <= 100);
        CHECK(r1[i].x + 16 <= 70);
    }
}

TEST_CASE("patches are aligned across frames and ground truth") {
    SceneRecord s;
    const int h = 40, w = 33;
    Tensor ramp = Tensor::image(3, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            ramp.at(0, y, x) = static_cast<float>(y) / h;
            ramp.at(1, y, x) = static_cast<float>(x) / w;
            ramp.at(2, y, x) = 0.5f;
        }
    for (auto& f : s.burst.frames) f = ramp;
    s.gt = ramp;
    for (PatchMode mode : {PatchMode::Grid, PatchMode::Random})
        for (const Patch& p : extract_patches(s, {16, 8}, mode, 3)) {
            for (int y = 0; y < 16; ++y)
                for (int x = 0; x < 16; ++x) {
                    CHECK(p.gt->at(0, y, x) == static_cast<float>(p.y + y) / h);
                    CHECK(p.gt->at(1, y, x) == static_cast<float>(p.x + x) / w);
                    for (const auto& f : p.burst.frames) {
                        CHECK(f.at(0, y, x) == p.gt->at(0, y, x));
                        CHECK(f.at(1, y, x) == p.gt->at(1, y, x));
                    }
                }
        }
}

TEST_CASE("synthetic scenes") {
    SynthOptions o;
    o.height = 48;
    o.width = 40;
    o.motion = 0.0;
    o.noise = 0.0;
    o.bright_region = false;
    const SceneRecord s = synth_scene(11, o);
    s.validate();
    const auto hdr = gamma_correct(s.burst, {});
    for (std::size_t k = 0; k < s.gt->size(); ++k) CHECK(std::abs(hdr[1].data()[k] - s.gt->data()[k]) <= 1e-6);
    for (int i : {0, 2})
        for (std::size_t k = 0; k < s.gt->size(); ++k)
            CHECK(std::abs(hdr[i].data()[k] - s.gt->data()[k]) <= 1e-5);

    const SceneRecord a = synth_scene(12, 0.7), b = synth_scene(12, 0.7);
    CHECK(same_scene(a, b));
    CHECK_FALSE(same_scene(a, synth_scene(13, 0.7)));
}

TEST_CASE("the long exposure clips exactly inside the bright region") {
    for (std::uint64_t seed = 20; seed < 30; ++seed) {
        SynthOptions o = SynthOptions::from_difficulty(0.8);
        o.height = 48;
        o.width = 56;
        const SceneRecord s = synth_scene(seed, o);
        const auto mask = synth_bright_mask(seed, o);
        const Tensor& longest = s.burst.frames[2];
        int inside = 0;
        for (int y = 0; y < o.height; ++y)
            for (int x = 0; x < o.width; ++x) {
                const bool clipped = longest.at(0, y, x) == 1.0f && longest.at(1, y, x) == 1.0f &&
                                     longest.at(2, y, x) == 1.0f;
                const bool any = longest.at(0, y, x) == 1.0f || longest.at(1, y, x) == 1.0f ||
                                 longest.at(2, y, x) == 1.0f;
                const bool in = mask[static_cast<std::size_t>(y) * o.width + x] != 0;
                inside += in;
                CHECK(clipped == in);
                CHECK(any == in);
            }
        CHECK(inside > 0);
    }
}
