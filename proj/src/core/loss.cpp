#include "core/loss.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace pg {

DrawingMask drawing_mask(const RasterImage& x, double white_threshold) {
    DrawingMask m;
    m.drawing.resize(x.pixels.size());
    for (std::size_t i = 0; i < x.pixels.size(); ++i) {
        m.drawing[i] = x.pixels[i] < white_threshold ? 1 : 0;
        m.n_drawing += m.drawing[i];
    }
    return m;
}

const char* to_string(PixelSet p) noexcept {
    switch (p) {
        case PixelSet::AllDrawing: return "all-drawing";
        case PixelSet::DrawingMasked: return "drawing-masked";
        case PixelSet::DrawingVisible: return "drawing-visible";
    }
    return "?";
}

PixelSet parse_pixel_set(const std::string& name) {
    for (auto p : {PixelSet::AllDrawing, PixelSet::DrawingMasked, PixelSet::DrawingVisible})
        if (name == to_string(p)) return p;
    fail(ErrorKind::Config, "unknown pixel set '" + name + "' (expected all-drawing, drawing-masked or drawing-visible)");
}

DrawingMask restrict_to_patches(const DrawingMask& dmask, const PatchMask& mask, PixelSet set, std::size_t width,
                                std::size_t height, std::size_t patch_size) {
    if (set == PixelSet::AllDrawing) return dmask;
    require(dmask.drawing.size() == width * height, ErrorKind::Dimension, "restrict_to_patches: mask size mismatch");
    const std::size_t gw = width / patch_size;
    require(mask.masked.size() == gw * (height / patch_size), ErrorKind::Contract,
            "restrict_to_patches: patch mask does not cover the image");
    const std::uint8_t want = set == PixelSet::DrawingMasked ? 1 : 0;
    DrawingMask out;
    out.drawing.assign(dmask.drawing.size(), 0);
    for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) {
            const std::size_t i = y * width + x;
            const std::size_t patch = (y / patch_size) * gw + x / patch_size;
            if (dmask.drawing[i] && mask.masked[patch] == want) {
                out.drawing[i] = 1;
                ++out.n_drawing;
            }
        }
    return out;
}

double masked_mse(const RasterImage& x, const RasterImage& x_hat, const DrawingMask& dmask) {
    require(x.width == x_hat.width && x.height == x_hat.height && dmask.drawing.size() == x.pixels.size(),
            ErrorKind::Dimension, "masked_mse: image/mask shapes differ");
    require(dmask.n_drawing > 0, ErrorKind::NoDrawingPixels, "masked_mse: image has no drawing pixels");
    double total = 0.0;
    for (std::size_t i = 0; i < x.pixels.size(); ++i) {
        if (!dmask.drawing[i]) continue;
        const double e = x.pixels[i] - x_hat.pixels[i];
        total += e * e;
    }
    return total / static_cast<double>(dmask.n_drawing);
}

Tensor masked_mse(const Tensor& pred, std::span<const double> target, std::span<const double> weights) {
    require(pred.numel() == target.size() && pred.numel() == weights.size(), ErrorKind::Dimension,
            "masked_mse: prediction, target and weights differ in size");
    double n = 0.0;
    for (double w : weights) n += w;
    require(n > 0.0, ErrorKind::NoDrawingPixels, "masked_mse: image has no drawing pixels");

    Tensor out = detail::make_output({}, {&pred});
    auto p = pred.data();
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (weights[i] == 0.0) continue;
        const double e = p[i] - target[i];
        total += weights[i] * e * e;
    }
    out.mutable_data()[0] = total / n;

    if (out.requires_grad()) {
        Tape::active()->record([pi = pred.handle(), oi = out.handle(), t = std::vector<double>(target.begin(), target.end()),
                                w = std::vector<double>(weights.begin(), weights.end()), n] {
            const double g = oi->grad[0] * 2.0 / n;
            for (std::size_t i = 0; i < t.size(); ++i)
                if (w[i] != 0.0) pi->grad[i] += g * w[i] * (pi->data[i] - t[i]);
        });
    }
    return out;
}

LossScore score_sample(const MAEParams& params, const RasterImage& x, double p_mask, const ScoringOptions& options,
                       std::uint64_t seed, std::string id) {
    require(options.repeats >= 1, ErrorKind::Contract, "score_sample: need at least one repeat");
    const auto& c = params.config;
    const DrawingMask dmask = drawing_mask(x, options.white_threshold);
    require(dmask.n_drawing > 0, ErrorKind::NoDrawingPixels, "score_sample: " + (id.empty() ? "image" : id) +
                                                                  " has no drawing pixels");

    std::vector<PatchMask> masks;
    for (std::size_t k = 0; k < options.repeats; ++k)
        masks.push_back(sample_mask(c.num_patches(), p_mask, derive_seed(SeedStream::Score, {seed, k})));
    const Tensor patches = patchify(x, c.patch_size);
    const std::vector<Tensor> batch(options.repeats, patches);
    const Tensor pred = forward_batch(params, batch, masks);

    LossScore score{std::move(id), {}, 0.0};
    const std::size_t per_image = x.pixels.size();
    for (std::size_t k = 0; k < options.repeats; ++k) {
        RasterImage recon = unpatchify(pred.data().subspan(k * per_image, per_image), x.width, x.height, c.patch_size);
        for (auto& v : recon.pixels) v = std::clamp(v, 0.0, 1.0);
        const auto pixels = restrict_to_patches(dmask, masks[k], options.pixel_set, x.width, x.height, c.patch_size);
        score.losses.push_back(masked_mse(x, recon, pixels));
    }
    double total = 0.0;
    for (double l : score.losses) total += l;
    score.aggregate = total / static_cast<double>(score.losses.size());
    return score;
}

Threshold calibrate_tau(std::span<const double> train_scores, const std::string& config_fingerprint) {
    require(!train_scores.empty(), ErrorKind::Contract, "calibrate_tau: no calibration scores");
    const auto [lo, hi] = std::minmax_element(train_scores.begin(), train_scores.end());
    double total = 0.0;
    for (double s : train_scores) total += s;
    Threshold t;
    // Rounding can push a plain sum/n one ulp outside [min, max].
    t.tau = std::clamp(total / static_cast<double>(train_scores.size()), *lo, *hi);
    t.n_samples = train_scores.size();
    t.config_fingerprint = config_fingerprint;
    return t;
}

void save_threshold(const std::filesystem::path& path, const Threshold& t) {
    nlohmann::json j{{"tau", t.tau},
                     {"n_samples", t.n_samples},
                     {"config_fingerprint", t.config_fingerprint},
                     {"white_threshold", t.white_threshold},
                     {"K", t.repeats}};
    std::ofstream out(path);
    require(out.good(), ErrorKind::Io, "cannot write threshold file " + path.string());
    out << j.dump(2) << '\n';
}

Threshold load_threshold(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::Io, "cannot read threshold file " + path.string());
    try {
        const auto j = nlohmann::json::parse(in);
        Threshold t;
        t.tau = j.at("tau").get<double>();
        t.n_samples = j.at("n_samples").get<std::size_t>();
        t.config_fingerprint = j.at("config_fingerprint").get<std::string>();
        t.white_threshold = j.at("white_threshold").get<double>();
        t.repeats = j.at("K").get<std::size_t>();
        return t;
    } catch (const nlohmann::json::exception& ex) {
        fail(ErrorKind::Config, "malformed threshold file " + path.string() + ": " + ex.what());
    }
}

}  // namespace pg
