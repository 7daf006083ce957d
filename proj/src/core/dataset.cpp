#include "core/dataset.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace pg {

namespace {

std::string image_name(Split split, std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06zu.png", index);
    return std::string(to_string(split)) + "/" + buf;
}

nlohmann::json to_json(const ManifestEntry& e) {
    return {{"split", to_string(e.split)},
            {"filename", e.filename},
            {"seed", e.seed},
            {"source_index", e.source_index},
            {"perturbation_level", e.perturbation ? to_string(*e.perturbation) : "none"}};
}

ManifestEntry entry_from_json(const nlohmann::json& j) {
    ManifestEntry e;
    e.split = parse_split(j.at("split").get<std::string>());
    e.filename = j.at("filename").get<std::string>();
    e.seed = j.at("seed").get<std::uint64_t>();
    e.source_index = j.at("source_index").get<std::size_t>();
    const auto level = j.at("perturbation_level").get<std::string>();
    if (level == "mod1") {
        e.perturbation = PerturbationLevel::Mod1;
    } else if (level == "mod2") {
        e.perturbation = PerturbationLevel::Mod2;
    } else {
        require(level == "none", ErrorKind::Config, "manifest: unknown perturbation_level '" + level + "'");
    }
    return e;
}

}  // namespace

const char* to_string(Split split) noexcept {
    switch (split) {
        case Split::Train: return "train";
        case Split::Mod1: return "mod1";
        case Split::Mod2: return "mod2";
        case Split::Novel: return "novel";
    }
    return "?";
}

Split parse_split(const std::string& name) {
    for (Split s : kAllSplits)
        if (name == to_string(s)) return s;
    fail(ErrorKind::Config, "unknown split '" + name + "' (expected train, mod1, mod2 or novel)");
}

void validate(const DatasetConfig& c) {
    require(c.n_train >= 1, ErrorKind::Config, "dataset: n_train must be >= 1");
    require(c.n_novel >= 1, ErrorKind::Config, "dataset: n_novel must be >= 1");
    require(c.complexity.min_entities >= 1 && c.complexity.min_entities <= c.complexity.max_entities,
            ErrorKind::Config, "dataset: need 1 <= min_entities <= max_entities");
    const std::uint64_t train_end = c.train_seed + c.n_train;
    const std::uint64_t novel_end = c.novel_seed + c.n_novel;
    require(train_end <= c.novel_seed || novel_end <= c.train_seed, ErrorKind::Config,
            "dataset: novel seed range overlaps the train seed range");
}

GeneratedDataset generate_dataset(const DatasetConfig& config) {
    validate(config);
    GeneratedDataset out;
    std::vector<Sketch> train;
    for (std::size_t i = 0; i < config.n_train; ++i) {
        const std::uint64_t seed = config.train_seed + i;
        train.push_back(sample_sketch(seed, config.complexity));
        out.manifest.push_back({Split::Train, image_name(Split::Train, i), seed, i, std::nullopt});
        out.images.push_back(quantize8(rasterize(train.back(), config.raster)));
    }
    for (auto level : {PerturbationLevel::Mod1, PerturbationLevel::Mod2}) {
        const Split split = level == PerturbationLevel::Mod1 ? Split::Mod1 : Split::Mod2;
        for (std::size_t i = 0; i < config.n_train; ++i) {
            const auto sketch = perturb(train[i], level, derive_seed({config.perturb_seed, i}));
            out.manifest.push_back({split, image_name(split, i), train[i].seed, i, level});
            out.images.push_back(quantize8(rasterize(sketch, config.raster)));
        }
    }
    for (std::size_t i = 0; i < config.n_novel; ++i) {
        const std::uint64_t seed = config.novel_seed + i;
        out.manifest.push_back({Split::Novel, image_name(Split::Novel, i), seed, i, std::nullopt});
        out.images.push_back(quantize8(rasterize(sample_sketch(seed, config.complexity), config.raster)));
    }
    return out;
}

SplitCounts gen_dataset(const DatasetConfig& config, const std::filesystem::path& root) {
    const auto data = generate_dataset(config);
    for (Split s : kAllSplits) std::filesystem::create_directories(root / to_string(s));

    SplitCounts counts;
    std::ofstream manifest(root / "manifest.jsonl");
    require(manifest.good(), ErrorKind::Io, "gen_dataset: cannot write manifest in " + root.string());
    for (std::size_t i = 0; i < data.manifest.size(); ++i) {
        const auto& e = data.manifest[i];
        write_png(root / e.filename, data.images[i]);
        manifest << to_json(e).dump() << '\n';
        switch (e.split) {
            case Split::Train: ++counts.train; break;
            case Split::Mod1: ++counts.mod1; break;
            case Split::Mod2: ++counts.mod2; break;
            case Split::Novel: ++counts.novel; break;
        }
    }
    return counts;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& root) {
    std::ifstream in(root / "manifest.jsonl");
    require(in.good(), ErrorKind::Io, "no manifest.jsonl under " + root.string() + " (run gen-data first)");
    std::vector<ManifestEntry> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            out.push_back(entry_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& ex) {
            fail(ErrorKind::Config, std::string("manifest: malformed line: ") + ex.what());
        }
    }
    return out;
}

std::vector<Sample> load_split(const std::filesystem::path& root, Split split) {
    std::vector<Sample> out;
    for (const auto& e : read_manifest(root)) {
        if (e.split != split) continue;
        out.push_back({e.filename, e.source_index, read_png(root / e.filename)});
    }
    return out;
}

}  // namespace pg
