#pragma once

// Reconstruction loss restricted to drawing pixels, repeat-averaged sample
// scoring under random patch masks, and threshold calibration.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "core/image.hpp"
#include "core/mae.hpp"
#include "core/tensor.hpp"

namespace pg {

// A pixel is "fully white" at or above this value (255/255 in 8-bit).
constexpr double kDefaultWhiteThreshold = 0.999;

struct DrawingMask {
    std::vector<std::uint8_t> drawing;  // 1 where the original pixel is non-white
    std::size_t n_drawing = 0;
};

DrawingMask drawing_mask(const RasterImage& x, double white_threshold = kDefaultWhiteThreshold);

// Which drawing pixels enter the loss.
enum class PixelSet {
    AllDrawing,     // every non-white pixel of X
    DrawingMasked,  // ... that lies in a masked patch
    DrawingVisible, // ... that lies in a visible patch
};

const char* to_string(PixelSet p) noexcept;
PixelSet parse_pixel_set(const std::string& name);

// Restricts a drawing mask (image layout) to the requested patch subset.
DrawingMask restrict_to_patches(const DrawingMask& dmask, const PatchMask& mask, PixelSet set, std::size_t width,
                                std::size_t height, std::size_t patch_size);

// (1/N_drawing) * sum over drawing pixels of (X_i - Xhat_i)^2.
double masked_mse(const RasterImage& x, const RasterImage& x_hat, const DrawingMask& dmask);

// Differentiable form: `weights` are 0/1 and aligned with `pred`'s values.
Tensor masked_mse(const Tensor& pred, std::span<const double> target, std::span<const double> weights);

struct ScoringOptions {
    std::size_t repeats = 8;  // K
    double white_threshold = kDefaultWhiteThreshold;
    PixelSet pixel_set = PixelSet::AllDrawing;
};

struct LossScore {
    std::string id;
    std::vector<double> losses;  // one per repeat
    double aggregate = 0.0;      // mean of losses
};

// K independent masks drawn from a stream derived from `seed`; each repeat
// scores the clamped reconstruction.
LossScore score_sample(const MAEParams& params, const RasterImage& x, double p_mask, const ScoringOptions& options,
                       std::uint64_t seed, std::string id = {});

struct Threshold {
    double tau = 0.0;
    std::size_t n_samples = 0;
    std::string config_fingerprint;
    double white_threshold = kDefaultWhiteThreshold;
    std::size_t repeats = 8;

    friend bool operator==(const Threshold&, const Threshold&) = default;
};

Threshold calibrate_tau(std::span<const double> train_scores, const std::string& config_fingerprint);

void save_threshold(const std::filesystem::path& path, const Threshold& t);
Threshold load_threshold(const std::filesystem::path& path);

}  // namespace pg
