#include <doctest.h>

#include <cmath>
#include <random>

#include "hdrssl/metrics.hpp"
#include "hdrssl/photometric.hpp"
#include "test_support.hpp"

using namespace hdrssl;

TEST_CASE("tensor indexing, crop and stack") {
    Tensor t(2, 3, 4, 5);
    for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = static_cast<float>(i);
    CHECK(t(1, 2, 3, 4) == static_cast<float>(t.size() - 1));
    CHECK(t(0, 1, 0, 0) == 20.0f);
    const Tensor c = crop(take_sample(t, 1), 1, 2, 2, 3);
    CHECK(c.shape() == Shape{1, 3, 2, 3});
    CHECK(c(0, 0, 0, 0) == t(1, 0, 1, 2));
    CHECK(c(0, 2, 1, 2) == t(1, 2, 2, 4));
    const std::vector<Tensor> parts{take_sample(t, 0), take_sample(t, 1)};
    CHECK(stack(parts) == t);
    CHECK_THROWS_AS(crop(t, 0, 0, 5, 5), InvalidInput);
}

TEST_CASE("exposure stops map to linear times") {
    CHECK(exposure_from_stops(-2) == 0.25);
    CHECK(exposure_from_stops(0) == 1.0);
    CHECK(exposure_from_stops(2) == 4.0);
}

TEST_CASE("gamma correction values") {
    CHECK(gamma_correct_value(0.0, 3.0, 2.2) == 0.0);
    CHECK(gamma_correct_value(1.0, 1.0, 2.2) == 1.0);
    // mpmath: 0.5^2.2 / 4
    CHECK(gamma_correct_value(0.5, 4.0, 2.2) == doctest::Approx(0.054409410206007751).epsilon(1e-14));

    LdrBurst b;
    for (auto& f : b.frames) f = Tensor::image(3, 1, 1);
    b.frames[0].fill(0.2f);
    b.frames[1].fill(0.4f);
    b.frames[2].fill(0.8f);
    b.exposure_times = {0.25, 1.0, 4.0};
    const Tensor x = assemble_input(b, {});
    // mpmath on the float32 inputs: 0.2f^2.2/0.25, 0.4f^2.2, 0.8f^2.2/4
    CHECK(x(0, 3, 0, 0) == doctest::Approx(0.115964750).epsilon(1e-6));
    CHECK(x(0, 9, 0, 0) == doctest::Approx(0.133208518).epsilon(1e-6));
    CHECK(x(0, 15, 0, 0) == doctest::Approx(0.153016405).epsilon(1e-6));
}

TEST_CASE("gamma correction of an all-zero burst is zero") {
    LdrBurst b;
    for (auto& f : b.frames) f = Tensor::image(3, 4, 4);
    b.exposure_times = {0.5, 2.0, 8.0};
    for (const auto& g : gamma_correct(b, {}))
        for (float v : g.values()) CHECK(v == 0.0f);
    for (float v : assemble_input(b, {}).values()) CHECK(v == 0.0f);
}

TEST_CASE("gamma correction rejects non-positive exposure and mismatched frames") {
    std::mt19937_64 rng(1);
    LdrBurst b = testing::random_burst(rng, 4, 4);
    b.exposure_times[2] = 0.0;
    CHECK_THROWS_AS(gamma_correct(b, {}), InvalidInput);
    b.exposure_times[2] = 4.0;
    b.frames[1] = Tensor::image(3, 4, 5);
    CHECK_THROWS_AS(assemble_input(b, {}), InvalidInput);
}

TEST_CASE("assemble_input layout and gamma-inverse constants") {
    std::mt19937_64 rng(7);
    LdrBurst b = testing::random_burst(rng, 5, 6);
    const PhotometricConfig cfg;
    const Tensor x = assemble_input(b, cfg);
    REQUIRE(x.shape() == Shape{1, 18, 5, 6});
    for (int f = 0; f < 3; ++f)
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < 5; ++y)
                for (int xx = 0; xx < 6; ++xx) CHECK(x(0, 6 * f + c, y, xx) == b.frames[f](0, c, y, xx));

    // Frames built as (c t)^(1/gamma) correct back to c.
    const std::array<double, 3> consts{0.05, 0.11, 0.2};
    for (int f = 0; f < 3; ++f)
        for (int c = 0; c < 3; ++c)
            for (float& v : b.frames[f].channel(0, c))
                v = static_cast<float>(std::pow(consts[c] * b.exposure_times[f], 1.0 / cfg.gamma));
    const Tensor y = assemble_input(b, cfg);
    for (int f = 0; f < 3; ++f)
        for (int c = 0; c < 3; ++c) CHECK(y(0, 6 * f + 3 + c, 2, 3) == doctest::Approx(consts[c]).epsilon(1e-5));
}

TEST_CASE("doubling the exposure time halves the corrected frame") {
    std::mt19937_64 rng(3);
    LdrBurst a = testing::random_burst(rng, 4, 4);
    LdrBurst b = a;
    for (auto& t : b.exposure_times) t *= 2.0;
    const auto ga = gamma_correct(a, {}), gb = gamma_correct(b, {});
    for (int f = 0; f < 3; ++f)
        for (std::size_t i = 0; i < ga[f].size(); ++i) CHECK(gb[f].data()[i] == ga[f].data()[i] / 2.0f);
}

TEST_CASE("tonemap endpoints, oracle value and monotonicity") {
    CHECK(tonemap_value(0.0, 5000) == 0.0);
    CHECK(std::abs(tonemap_value(1.0, 5000) - 1.0) < 1e-12);
    CHECK(tonemap_value(0.01, 5000) == doctest::Approx(0.46162312266128798).epsilon(1e-14));
    CHECK(tonemap_value(-0.5, 5000) == 0.0);
    CHECK(tonemap_value(3.0, 5000) == tonemap_value(1.0, 5000));
    for (double mu : {1e-3, 0.5, 10.0, 5000.0, 1e6}) {
        CHECK(std::abs(tonemap_value(1.0, mu) - 1.0) < 1e-12);
        double prev = tonemap_value(0.0, mu);
        for (int i = 1; i <= 1000; ++i) {
            const double v = tonemap_value(i / 1000.0, mu);
            CHECK(v > prev);
            prev = v;
        }
    }
}

TEST_CASE("psnr") {
    Tensor a = Tensor::image(3, 8, 8, 0.3f), b = Tensor::image(3, 8, 8, 0.4f);
    CHECK(is_identical_psnr(psnr(a, a)));
    CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-6));
    std::mt19937_64 rng(5);
    const Tensor r = testing::random_image(rng, 1, 3, 8, 8);
    CHECK(psnr(a, r) == psnr(r, a));
    CHECK_THROWS_AS(psnr(a, Tensor::image(3, 8, 9)), InvalidInput);

    // More noise, lower PSNR.
    const Tensor base = testing::random_image(rng, 1, 3, 16, 16, 0.2f, 0.8f);
    const Tensor noise = testing::random_image(rng, 1, 3, 16, 16, -1.0f, 1.0f);
    double prev = kPsnrIdentical;
    for (float amp : {0.01f, 0.02f, 0.05f, 0.1f, 0.2f}) {
        Tensor n = base;
        for (std::size_t i = 0; i < n.size(); ++i) n.data()[i] += amp * noise.data()[i];
        const double p = psnr(base, n);
        CHECK(p < prev);
        prev = p;
    }
}

TEST_CASE("ssim") {
    std::mt19937_64 rng(11);
    const Tensor a = testing::random_image(rng, 1, 3, 16, 20);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));

    // Constant images: only the luminance term survives.
    const Tensor c1 = Tensor::image(3, 12, 12, 0.2f), c2 = Tensor::image(3, 12, 12, 0.6f);
    const double l1 = static_cast<double>(0.2f), l2 = static_cast<double>(0.6f);
    CHECK(ssim(c1, c2) == doctest::Approx((2 * l1 * l2 + 1e-4) / (l1 * l1 + l2 * l2 + 1e-4)).epsilon(1e-12));
    CHECK(ssim(c1, c2) == doctest::Approx(0.60009997500624846).epsilon(1e-6));

    // Binary pattern against its complement; reference from scikit-image.
    Tensor bin = Tensor::image(3, 16, 16);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) bin.at(c, y, x) = (x * 3 + y * 5 + c) % 7 < 3 ? 1.0f : 0.0f;
    Tensor inv = bin;
    for (float& v : inv.values()) v = 1.0f - v;
    CHECK(ssim(bin, inv) == doctest::Approx(-0.95646066180888890).epsilon(1e-9));

    CHECK_THROWS_AS(ssim(Tensor::image(3, 10, 30), Tensor::image(3, 10, 30)), InvalidInput);
}

TEST_CASE("evaluate_quality clamps the linear domain") {
    Tensor p = Tensor::image(3, 12, 12, 1.5f), r = Tensor::image(3, 12, 12, 1.0f);
    const QualityScores q = evaluate_quality(p, r, {});
    CHECK(is_identical_psnr(q.psnr_l));
    CHECK(is_identical_psnr(q.psnr_mu));
    CHECK(q.ssim_l == doctest::Approx(1.0));
}
