#include <algorithm>
#include <cmath>
#include <random>

#include "core/error.hpp"
#include "core/loss.hpp"
#include "core/sketch.hpp"
#include "core/train.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace pg;

namespace {

RasterImage image_from(std::size_t w, std::size_t h, std::vector<double> v) {
    RasterImage img(w, h);
    img.pixels = std::move(v);
    return img;
}

// Per-pixel double loop, straight from the formula.
double brute_force_loss(const RasterImage& x, const RasterImage& xh, double white) {
    double total = 0.0;
    std::size_t n = 0;
    for (std::size_t y = 0; y < x.height; ++y)
        for (std::size_t c = 0; c < x.width; ++c)
            if (x.at(c, y) < white) {
                const double d = x.at(c, y) - xh.at(c, y);
                total += d * d;
                ++n;
            }
    return total / static_cast<double>(n);
}

RasterImage random_drawing(std::mt19937_64& rng, std::size_t w, std::size_t h) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    RasterImage img(w, h);
    for (auto& v : img.pixels) v = u(rng) < 0.6 ? 1.0 : u(rng);
    img.pixels[0] = 0.0;
    return img;
}

}  // namespace

TEST_SUITE("loss") {

TEST_CASE("drawing_mask examples") {
    CHECK(drawing_mask(RasterImage(4, 4, 1.0)).n_drawing == 0);
    RasterImage one(4, 4, 1.0);
    one.at(2, 1) = 0.0;
    const auto m = drawing_mask(one);
    CHECK(m.n_drawing == 1);
    CHECK(m.drawing[1 * 4 + 2] == 1);
    RasterImage edge(2, 1, 1.0);
    edge.at(0, 0) = 0.998;
    CHECK(drawing_mask(edge, 0.999).n_drawing == 1);
}

TEST_CASE("masked_mse examples") {
    const RasterImage x = image_from(2, 1, {0.0, 1.0});
    const RasterImage xh = image_from(2, 1, {0.5, 0.3});
    const auto m = drawing_mask(x, 0.999);
    CHECK(m.n_drawing == 1);
    CHECK(masked_mse(x, xh, m) == 0.25);
    CHECK(masked_mse(x, x, m) == 0.0);

    try {
        masked_mse(RasterImage(3, 3, 1.0), RasterImage(3, 3, 0.0), drawing_mask(RasterImage(3, 3, 1.0)));
        FAIL("expected no-drawing-pixels");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NoDrawingPixels);
    }
    CHECK_THROWS_AS(masked_mse(x, RasterImage(3, 1), m), Error);
}

TEST_CASE("masked_mse matches the brute-force loop and ignores white pixels") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 100; ++t) {
        const RasterImage x = random_drawing(rng, 12, 9);
        RasterImage xh(12, 9);
        for (auto& v : xh.pixels) v = u(rng);
        const auto m = drawing_mask(x);
        const double loss = masked_mse(x, xh, m);
        CHECK(std::abs(loss - brute_force_loss(x, xh, 0.999)) < 1e-10);
        CHECK(loss <= 1.0);

        RasterImage changed = xh;
        for (std::size_t i = 0; i < x.pixels.size(); ++i)
            if (x.pixels[i] >= 0.999) changed.pixels[i] = u(rng);
        CHECK(masked_mse(x, changed, m) == loss);
    }
}

TEST_CASE("differentiable form agrees with the image form") {
    std::mt19937_64 rng(22);
    const RasterImage x = random_drawing(rng, 14, 14);
    Tensor pred = pgtest::random_tensor({4, 49}, rng);
    const auto target = patchify_values(x.pixels, 14, 14, 7);
    const auto m = drawing_mask(x);
    std::vector<double> w(m.drawing.begin(), m.drawing.end());
    const auto weights = patchify_values(w, 14, 14, 7);
    const RasterImage xh = unpatchify(pred.data(), 14, 14, 7);
    CHECK(std::abs(masked_mse(pred, target, weights).item() - masked_mse(x, xh, m)) < 1e-12);
    CHECK(pgtest::max_fd_error({pred}, [&] { return masked_mse(pred, target, weights); }) < 1e-4);
}

TEST_CASE("pixel-set restriction partitions the drawing pixels") {
    std::mt19937_64 rng(23);
    const RasterImage x = random_drawing(rng, 14, 14);
    const auto m = drawing_mask(x);
    const auto mask = sample_mask(4, 0.5, 1);
    const auto all = restrict_to_patches(m, mask, PixelSet::AllDrawing, 14, 14, 7);
    const auto hid = restrict_to_patches(m, mask, PixelSet::DrawingMasked, 14, 14, 7);
    const auto vis = restrict_to_patches(m, mask, PixelSet::DrawingVisible, 14, 14, 7);
    CHECK(all.n_drawing == m.n_drawing);
    CHECK(hid.n_drawing + vis.n_drawing == m.n_drawing);
    for (std::size_t i = 0; i < m.drawing.size(); ++i) CHECK(hid.drawing[i] + vis.drawing[i] == m.drawing[i]);
    CHECK(parse_pixel_set("drawing-masked") == PixelSet::DrawingMasked);
    CHECK_THROWS_AS(parse_pixel_set("everything"), Error);
}

TEST_CASE("score_sample contracts") {
    const MAEParams p = init_params(MAEConfig::desk(), 1);
    const RasterImage x = rasterize(sample_sketch(5));
    ScoringOptions one;
    one.repeats = 1;
    const auto s1 = score_sample(p, x, 0.75, one, 9);
    CHECK(s1.losses.size() == 1);
    CHECK(s1.aggregate == s1.losses[0]);

    ScoringOptions eight;
    const auto a = score_sample(p, x, 0.75, eight, 9, "a");
    const auto b = score_sample(p, x, 0.75, eight, 9, "a");
    CHECK(a.losses == b.losses);
    CHECK(a.aggregate == b.aggregate);
    double mean = 0.0;
    for (double l : a.losses) mean += l / 8.0;
    CHECK(std::abs(a.aggregate - mean) < 1e-15);
    CHECK(a.losses[0] == s1.losses[0]);

    ScoringOptions none;
    none.repeats = 0;
    CHECK_THROWS_AS(score_sample(p, x, 0.75, none, 9), Error);
    try {
        score_sample(p, RasterImage(56, 56, 1.0), 0.75, eight, 9);
        FAIL("expected no-drawing-pixels");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NoDrawingPixels);
    }
}

TEST_CASE("model overfit at p_mask 0 scores its image below other images") {
    const Sketch s = sample_sketch(17);
    const RasterImage x = quantize8(rasterize(s));
    const RasterImage mod2 = quantize8(rasterize(perturb(s, PerturbationLevel::Mod2, 1)));
    const RasterImage other = quantize8(rasterize(sample_sketch(18)));

    MAEConfig mc = MAEConfig::desk();
    mc.p_mask = 0.0;
    TrainConfig tc;
    tc.p_mask = 0.0;
    tc.learning_rate = 1e-3;
    tc.batch_size = 1;
    auto st = init_training(mc, tc);
    const std::vector<RasterImage> data = {x};
    train(st, data, tc, 300);

    ScoringOptions so;
    so.repeats = 1;
    const double own = score_sample(st.params, x, 0.0, so, 0).aggregate;
    CHECK(own < score_sample(st.params, mod2, 0.0, so, 0).aggregate);
    CHECK(own < score_sample(st.params, other, 0.0, so, 0).aggregate);
}

TEST_CASE("calibrate_tau examples") {
    CHECK(calibrate_tau(std::vector<double>{0.2, 0.4}, "f").tau == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(calibrate_tau(std::vector<double>{0.37}, "f").tau == 0.37);
    const auto t = calibrate_tau(std::vector<double>{0.1, 0.2, 0.3, 0.4}, "abc");
    CHECK(std::abs(t.tau - (0.1 + 0.2 + 0.3 + 0.4) / 4.0) < 1e-15);
    CHECK(t.n_samples == 4);
    CHECK(t.config_fingerprint == "abc");
    const std::vector<double> same = {0.1, 0.1, 0.1};
    CHECK(calibrate_tau(same, "").tau <= 0.1);
    try {
        calibrate_tau(std::vector<double>{}, "f");
        FAIL("expected a contract error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Contract);
    }
}

TEST_CASE("threshold file round trip") {
    pgtest::TempDir dir("thr");
    Threshold t = calibrate_tau(std::vector<double>{0.011, 0.0173, 0.02}, "0123456789abcdef");
    t.repeats = 5;
    t.white_threshold = 0.99;
    save_threshold(dir.path() / "threshold.json", t);
    CHECK(load_threshold(dir.path() / "threshold.json") == t);
}

}
