#pragma once

// Vision-transformer masked autoencoder: patchify, embed, drop masked
// patches, encode the visible ones, then decode the full sequence with a
// learned mask token in place of every hidden patch.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "core/image.hpp"
#include "core/tensor.hpp"

namespace pg {

struct MAEConfig {
    std::size_t image_width = 56;
    std::size_t image_height = 56;
    std::size_t patch_size = 7;
    std::size_t embed_dim = 64;
    std::size_t depth = 2;
    std::size_t num_heads = 4;
    double mlp_ratio = 4.0;
    std::size_t decoder_embed_dim = 32;
    std::size_t decoder_depth = 1;
    std::size_t decoder_num_heads = 4;
    double p_mask = 0.75;

    std::size_t grid_w() const { return image_width / patch_size; }
    std::size_t grid_h() const { return image_height / patch_size; }
    std::size_t num_patches() const { return grid_w() * grid_h(); }
    std::size_t patch_dim() const { return patch_size * patch_size; }

    static MAEConfig desk() { return {}; }
    // ViT-Huge/14 encoder with the standard MAE decoder; valid, never trained here.
    static MAEConfig paper_scale();

    friend bool operator==(const MAEConfig&, const MAEConfig&) = default;
};

void validate(const MAEConfig& config);
std::size_t mlp_hidden(std::size_t dim, double ratio);

struct PatchMask {
    std::size_t num_patches = 0;
    std::vector<std::uint8_t> masked;  // 1 = hidden from the encoder
    std::uint64_t seed = 0;

    std::size_t masked_count() const;
    std::vector<std::size_t> visible() const;
};

std::size_t mask_count(std::size_t num_patches, double p_mask);
PatchMask sample_mask(std::size_t num_patches, double p_mask, std::uint64_t seed);

// (num_patches x patch_size^2) tensor, patches in raster order.
Tensor patchify(const RasterImage& img, std::size_t patch_size);
std::vector<double> patchify_values(std::span<const double> values, std::size_t width, std::size_t height,
                                    std::size_t patch_size);
RasterImage unpatchify(std::span<const double> patches, std::size_t width, std::size_t height, std::size_t patch_size);

struct TransformerBlock {
    Tensor ln1_gain, ln1_bias;
    Tensor qkv_weight, qkv_bias;
    Tensor proj_weight, proj_bias;
    Tensor ln2_gain, ln2_bias;
    Tensor fc1_weight, fc1_bias;
    Tensor fc2_weight, fc2_bias;
};

struct MAEParams {
    MAEConfig config;

    Tensor patch_weight, patch_bias;
    std::vector<TransformerBlock> encoder;
    Tensor encoder_norm_gain, encoder_norm_bias;
    Tensor decoder_embed_weight, decoder_embed_bias;
    Tensor mask_token;
    std::vector<TransformerBlock> decoder;
    Tensor decoder_norm_gain, decoder_norm_bias;
    Tensor pred_weight, pred_bias;

    // Fixed 2-D sin-cos tables, (num_patches x dim).
    std::vector<double> encoder_pos;
    std::vector<double> decoder_pos;

    // Learnable tensors in a fixed order with stable names.
    std::vector<std::pair<std::string, Tensor>> named_parameters() const;
    std::vector<Tensor> parameters() const;
    std::size_t parameter_count() const;

    MAEParams clone() const;
};

MAEParams init_params(const MAEConfig& config, std::uint64_t seed);

// 2-D sin-cos positional table as in the standard MAE construction.
std::vector<double> sincos_pos_embed(std::size_t dim, std::size_t grid_h, std::size_t grid_w);

// Encoder output tokens for the visible patches only, (visible x embed_dim).
Tensor encode(const MAEParams& params, const RasterImage& img, const PatchMask& mask);

// Unclamped per-patch predictions for a batch, ((B * num_patches) x patch_dim).
// Differentiable when called under an active tape.
Tensor forward_batch(const MAEParams& params, std::span<const Tensor> patches, std::span<const PatchMask> masks);

// Full reconstruction clamped to [0,1].
RasterImage reconstruct(const MAEParams& params, const RasterImage& img, const PatchMask& mask);

}  // namespace pg
