#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "core/image.hpp"
#include "core/sketch.hpp"

namespace pg {

enum class Split { Train, Mod1, Mod2, Novel };

inline constexpr Split kAllSplits[] = {Split::Train, Split::Mod1, Split::Mod2, Split::Novel};

const char* to_string(Split split) noexcept;
Split parse_split(const std::string& name);

struct DatasetConfig {
    std::size_t n_train = 64;
    std::size_t n_novel = 64;
    RasterOptions raster;
    Complexity complexity;
    std::uint64_t train_seed = 0;
    std::uint64_t novel_seed = 1'000'000;
    std::uint64_t perturb_seed = 7;
};

struct ManifestEntry {
    Split split = Split::Train;
    std::string filename;  // relative to the dataset root
    std::uint64_t seed = 0;
    std::size_t source_index = 0;
    std::optional<PerturbationLevel> perturbation;

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct SplitCounts {
    std::size_t train = 0, mod1 = 0, mod2 = 0, novel = 0;
};

// The four splits as in-memory images plus their manifest, in manifest order.
struct GeneratedDataset {
    std::vector<ManifestEntry> manifest;
    std::vector<RasterImage> images;
};

void validate(const DatasetConfig& config);
GeneratedDataset generate_dataset(const DatasetConfig& config);

// Writes <root>/<split>/NNNNNN.png for every split and <root>/manifest.jsonl
// (one JSON object per line).
SplitCounts gen_dataset(const DatasetConfig& config, const std::filesystem::path& root);

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& root);

struct Sample {
    std::string id;  // "<split>/<index>"
    std::size_t source_index = 0;
    RasterImage image;
};

std::vector<Sample> load_split(const std::filesystem::path& root, Split split);

}  // namespace pg
