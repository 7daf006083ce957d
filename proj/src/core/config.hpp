#pragma once

// Declarative run configuration: one JSON document drives every stage.
//
// {
//   "dataset": {n_train, n_novel, image_width, image_height, stroke_width,
//               min_entities, max_entities, train_seed, novel_seed, perturb_seed},
//   "model":   {patch_size, embed_dim, depth, num_heads, mlp_ratio,
//               decoder_embed_dim, decoder_depth, decoder_num_heads, p_mask},
//   "train":   {epochs, batch_size, learning_rate, weight_decay, augmentation,
//               seed, checkpoint_every},
//   "scoring": {repeats, white_threshold, pixel_set, seed},
//   "output_dir": "run"
// }
//
// Every key is optional (defaults below); unknown keys are rejected. The model
// image size is taken from the dataset section.

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "core/dataset.hpp"
#include "core/loss.hpp"
#include "core/mae.hpp"
#include "core/train.hpp"

namespace pg {

struct ScoringConfig {
    ScoringOptions options;
    std::uint64_t seed = 0;
};

struct RunConfig {
    DatasetConfig dataset;
    MAEConfig model;
    TrainConfig train;
    ScoringConfig scoring;
    std::string output_dir = "run";
};

// Desk-scale defaults with the learning rate used by the bundled configs.
RunConfig default_run_config();

nlohmann::json to_json(const MAEConfig& c);
MAEConfig mae_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const RunConfig& c);
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

// Sets a dotted key ("train.epochs", "model.p_mask", ...) and re-validates.
void apply_override(RunConfig& c, const std::string& dotted_key, const nlohmann::json& value);

// Stable hash of the canonical document. Keys that only control how long or
// where a run goes (output_dir, train.epochs, train.checkpoint_every) are
// excluded so that resumed and relocated runs stay compatible.
std::string config_fingerprint(const RunConfig& c);

void validate(const RunConfig& c);

}  // namespace pg
