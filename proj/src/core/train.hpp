#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "core/image.hpp"
#include "core/loss.hpp"
#include "core/mae.hpp"
#include "core/tensor.hpp"

namespace pg {

constexpr double kWeightDecay = 0.05;

struct TrainConfig {
    std::size_t epochs = 2000;
    std::size_t batch_size = 16;
    double learning_rate = 1.5e-4;
    bool weight_decay_enabled = false;
    bool augmentation_enabled = false;
    double p_mask = 0.75;
    std::uint64_t seed = 0;
    std::size_t checkpoint_every = 500;
    // Loss pixel selection shared with scoring.
    PixelSet pixel_set = PixelSet::AllDrawing;
    double white_threshold = kDefaultWhiteThreshold;

    double weight_decay() const noexcept { return weight_decay_enabled ? kWeightDecay : 0.0; }
};

void validate(const TrainConfig& config);

RasterImage flip_horizontal(const RasterImage& img);
RasterImage flip_vertical(const RasterImage& img);

// Horizontal and vertical flips, each applied independently with p = 1/2.
RasterImage augment(const RasterImage& img, std::uint64_t seed);

struct TrainState {
    MAEParams params;
    AdamWState optimizer;
    std::vector<double> loss_curve;  // mean training loss per completed epoch

    std::size_t epochs_completed() const noexcept { return loss_curve.size(); }
};

TrainState init_training(const MAEConfig& model, const TrainConfig& config);

// Called after every epoch with the 1-based index of the epoch just finished.
using EpochCallback = std::function<void(const TrainState&, std::size_t epoch)>;

// Runs `epochs` more epochs. All randomness is derived from the config seed
// and the absolute epoch index, so resuming from a saved state reproduces an
// uninterrupted run bit for bit.
void train(TrainState& state, std::span<const RasterImage> dataset, const TrainConfig& config, std::size_t epochs,
           const EpochCallback& on_epoch = {});

// Checkpoint I/O for the full training state. The fingerprint identifies the
// run configuration the state belongs to.
void save_train_state(const std::filesystem::path& path, const TrainState& state, const std::string& fingerprint);

struct LoadedState {
    TrainState state;
    std::string fingerprint;
};

LoadedState load_train_state(const std::filesystem::path& path);

void write_loss_curve(const std::filesystem::path& path, std::span<const double> curve);

}  // namespace pg
