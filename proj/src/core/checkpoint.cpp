#include "core/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "core/error.hpp"

namespace pg {

namespace {

constexpr std::array<char, 8> kMagic = {'P', 'G', 'C', 'K', 'P', 'T', '\0', '\1'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_raw(std::ifstream& in, const std::filesystem::path& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    require(in.good(), ErrorKind::Io, "checkpoint " + path.string() + " is truncated");
    return v;
}

}  // namespace

const Tensor& Checkpoint::tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return t;
    fail(ErrorKind::Incompatible, "checkpoint has no tensor named '" + name + "'");
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    nlohmann::json header;
    header["format_version"] = kCheckpointFormatVersion;
    header["metadata"] = ckpt.metadata;
    header["tensors"] = nlohmann::json::array();
    for (const auto& [name, t] : ckpt.tensors) header["tensors"].push_back({{"name", name}, {"shape", t.shape()}});
    const std::string text = header.dump();

    // Write to a sibling file first so a crash never leaves a half-written checkpoint.
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(out.good(), ErrorKind::Io, "cannot write checkpoint " + path.string());
        out.write(kMagic.data(), kMagic.size());
        write_raw(out, kCheckpointFormatVersion);
        write_raw(out, static_cast<std::uint64_t>(text.size()));
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        for (const auto& [name, t] : ckpt.tensors)
            out.write(reinterpret_cast<const char*>(t.data().data()), static_cast<std::streamsize>(t.numel() * sizeof(double)));
        require(out.good(), ErrorKind::Io, "failed while writing checkpoint " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorKind::Io, "cannot open checkpoint " + path.string());
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    require(in.good() && magic == kMagic, ErrorKind::Io, path.string() + " is not a checkpoint file");
    const auto version = read_raw<std::uint32_t>(in, path);
    require(version == kCheckpointFormatVersion, ErrorKind::Incompatible,
            "checkpoint format version " + std::to_string(version) + " is not supported");
    const auto header_len = read_raw<std::uint64_t>(in, path);
    std::string text(header_len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(header_len));
    require(in.good(), ErrorKind::Io, "checkpoint " + path.string() + " is truncated");

    Checkpoint ckpt;
    try {
        const auto header = nlohmann::json::parse(text);
        ckpt.metadata = header.at("metadata");
        for (const auto& entry : header.at("tensors")) {
            Shape shape = entry.at("shape").get<Shape>();
            std::vector<double> data(shape_numel(shape));
            in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
            require(in.good(), ErrorKind::Io, "checkpoint " + path.string() + " is truncated");
            ckpt.tensors.emplace_back(entry.at("name").get<std::string>(), Tensor(std::move(shape), std::move(data)));
        }
    } catch (const nlohmann::json::exception& ex) {
        fail(ErrorKind::Io, "checkpoint " + path.string() + " has a malformed header: " + ex.what());
    }
    return ckpt;
}

}  // namespace pg
