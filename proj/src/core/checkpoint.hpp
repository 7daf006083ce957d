#pragma once

// Binary checkpoint container:
//
//   bytes 0..7   magic "PGCKPT\0\1"
//   u32 (LE)     format version
//   u64 (LE)     header length in bytes
//   header       UTF-8 JSON: {"format_version", "metadata", "tensors": [{"name", "shape"}...]}
//   payload      float64 little-endian values of each tensor, in header order

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "core/tensor.hpp"

namespace pg {

constexpr std::uint32_t kCheckpointFormatVersion = 1;

struct Checkpoint {
    nlohmann::json metadata = nlohmann::json::object();
    std::vector<std::pair<std::string, Tensor>> tensors;

    const Tensor& tensor(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace pg
