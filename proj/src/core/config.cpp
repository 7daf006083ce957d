#include "core/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <type_traits>

#include "core/error.hpp"

namespace pg {

namespace {

// Reads known keys from one JSON object and rejects anything else.
class Section {
public:
    Section(const nlohmann::json& j, std::string name) : j_(j), name_(std::move(name)) {
        require(j_.is_object(), ErrorKind::Config, "config: '" + name_ + "' must be an object");
    }

    void allow(const char* key) { known_.insert(key); }

    template <typename T>
    void read(const char* key, T& out) {
        known_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
            require(it->is_number_unsigned() || (it->is_number_integer() && it->template get<std::int64_t>() >= 0),
                    ErrorKind::Config,
                    "config: '" + name_ + "." + key + "' must be a non-negative integer");
        }
        try {
            out = it->template get<T>();
        } catch (const nlohmann::json::exception&) {
            fail(ErrorKind::Config, "config: '" + name_ + "." + key + "' has the wrong type");
        }
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            require(known_.count(it.key()) > 0, ErrorKind::Config,
                    "config: unknown key '" + (name_.empty() ? "" : name_ + ".") + it.key() + "'");
    }

private:
    const nlohmann::json& j_;
    std::string name_;
    std::set<std::string> known_;
};

void read_model_section(Section& s, MAEConfig& c) {
    s.read("patch_size", c.patch_size);
    s.read("embed_dim", c.embed_dim);
    s.read("depth", c.depth);
    s.read("num_heads", c.num_heads);
    s.read("mlp_ratio", c.mlp_ratio);
    s.read("decoder_embed_dim", c.decoder_embed_dim);
    s.read("decoder_depth", c.decoder_depth);
    s.read("decoder_num_heads", c.decoder_num_heads);
    s.read("p_mask", c.p_mask);
}

nlohmann::json model_section(const MAEConfig& c) {
    return {{"patch_size", c.patch_size},
            {"embed_dim", c.embed_dim},
            {"depth", c.depth},
            {"num_heads", c.num_heads},
            {"mlp_ratio", c.mlp_ratio},
            {"decoder_embed_dim", c.decoder_embed_dim},
            {"decoder_depth", c.decoder_depth},
            {"decoder_num_heads", c.decoder_num_heads},
            {"p_mask", c.p_mask}};
}

// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

RunConfig default_run_config() {
    RunConfig c;
    c.train.learning_rate = 1e-3;
    return c;
}

nlohmann::json to_json(const MAEConfig& c) {
    auto j = model_section(c);
    j["image_width"] = c.image_width;
    j["image_height"] = c.image_height;
    return j;
}

MAEConfig mae_config_from_json(const nlohmann::json& j) {
    MAEConfig c;
    Section s(j, "model");
    read_model_section(s, c);
    s.read("image_width", c.image_width);
    s.read("image_height", c.image_height);
    s.finish();
    validate(c);
    return c;
}

nlohmann::json to_json(const RunConfig& c) {
    const auto& d = c.dataset;
    const auto& t = c.train;
    const auto& sc = c.scoring;
    return {{"dataset",
             {{"n_train", d.n_train},
              {"n_novel", d.n_novel},
              {"image_width", d.raster.width},
              {"image_height", d.raster.height},
              {"stroke_width", d.raster.stroke_width},
              {"min_entities", d.complexity.min_entities},
              {"max_entities", d.complexity.max_entities},
              {"train_seed", d.train_seed},
              {"novel_seed", d.novel_seed},
              {"perturb_seed", d.perturb_seed}}},
            {"model", model_section(c.model)},
            {"train",
             {{"epochs", t.epochs},
              {"batch_size", t.batch_size},
              {"learning_rate", t.learning_rate},
              {"weight_decay", t.weight_decay_enabled},
              {"augmentation", t.augmentation_enabled},
              {"seed", t.seed},
              {"checkpoint_every", t.checkpoint_every}}},
            {"scoring",
             {{"repeats", sc.options.repeats},
              {"white_threshold", sc.options.white_threshold},
              {"pixel_set", to_string(sc.options.pixel_set)},
              {"seed", sc.seed}}},
            {"output_dir", c.output_dir}};
}

RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig c = default_run_config();
    Section root(j, "");
    root.read("output_dir", c.output_dir);
    for (const char* key : {"dataset", "model", "train", "scoring"}) root.allow(key);
    root.finish();

    if (j.contains("dataset")) {
        auto& d = c.dataset;
        Section s(j.at("dataset"), "dataset");
        long long n_train = static_cast<long long>(d.n_train), n_novel = static_cast<long long>(d.n_novel);
        s.read("n_train", n_train);
        s.read("n_novel", n_novel);
        require(n_train >= 1, ErrorKind::Config, "dataset: n_train must be >= 1");
        require(n_novel >= 1, ErrorKind::Config, "dataset: n_novel must be >= 1");
        d.n_train = static_cast<std::size_t>(n_train);
        d.n_novel = static_cast<std::size_t>(n_novel);
        s.read("image_width", d.raster.width);
        s.read("image_height", d.raster.height);
        s.read("stroke_width", d.raster.stroke_width);
        s.read("min_entities", d.complexity.min_entities);
        s.read("max_entities", d.complexity.max_entities);
        s.read("train_seed", d.train_seed);
        s.read("novel_seed", d.novel_seed);
        s.read("perturb_seed", d.perturb_seed);
        s.finish();
    }
    if (j.contains("model")) {
        Section s(j.at("model"), "model");
        read_model_section(s, c.model);
        s.finish();
    }
    if (j.contains("train")) {
        auto& t = c.train;
        Section s(j.at("train"), "train");
        s.read("epochs", t.epochs);
        s.read("batch_size", t.batch_size);
        s.read("learning_rate", t.learning_rate);
        s.read("weight_decay", t.weight_decay_enabled);
        s.read("augmentation", t.augmentation_enabled);
        s.read("seed", t.seed);
        s.read("checkpoint_every", t.checkpoint_every);
        s.finish();
    }
    if (j.contains("scoring")) {
        auto& sc = c.scoring;
        Section s(j.at("scoring"), "scoring");
        std::string pixel_set = to_string(sc.options.pixel_set);
        s.read("repeats", sc.options.repeats);
        s.read("white_threshold", sc.options.white_threshold);
        s.read("pixel_set", pixel_set);
        s.read("seed", sc.seed);
        s.finish();
        sc.options.pixel_set = parse_pixel_set(pixel_set);
    }

    c.model.image_width = c.dataset.raster.width;
    c.model.image_height = c.dataset.raster.height;
    c.train.p_mask = c.model.p_mask;
    c.train.pixel_set = c.scoring.options.pixel_set;
    c.train.white_threshold = c.scoring.options.white_threshold;
    validate(c);
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::Io, "cannot read config file " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& ex) {
        fail(ErrorKind::Config, "config file " + path.string() + " is not valid JSON: " + ex.what());
    }
    return run_config_from_json(j);
}

void apply_override(RunConfig& c, const std::string& dotted_key, const nlohmann::json& value) {
    auto doc = to_json(c);
    nlohmann::json* node = &doc;
    std::size_t start = 0;
    for (;;) {
        const auto dot = dotted_key.find('.', start);
        const std::string part = dotted_key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        require(node->is_object() && node->contains(part), ErrorKind::Config, "unknown config key '" + dotted_key + "'");
        node = &(*node)[part];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    *node = value;
    c = run_config_from_json(doc);
}

std::string config_fingerprint(const RunConfig& c) {
    auto doc = to_json(c);
    doc.erase("output_dir");
    doc["train"].erase("epochs");
    doc["train"].erase("checkpoint_every");
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(doc.dump())));
    return buf;
}

void validate(const RunConfig& c) {
    validate(c.dataset);
    validate(c.model);
    validate(c.train);
    require(c.model.image_width == c.dataset.raster.width && c.model.image_height == c.dataset.raster.height,
            ErrorKind::Config, "config: model image size must match the dataset image size");
    require(c.dataset.raster.width >= 16 && c.dataset.raster.height >= 16, ErrorKind::Config,
            "dataset: image_width and image_height must be >= 16");
    require(c.dataset.raster.stroke_width > 0.0, ErrorKind::Config, "dataset: stroke_width must be positive");
    require(c.scoring.options.repeats >= 1, ErrorKind::Config, "scoring: repeats must be >= 1");
    require(c.scoring.options.white_threshold > 0.0 && c.scoring.options.white_threshold <= 1.0, ErrorKind::Config,
            "scoring: white_threshold must lie in (0,1]");
    require(!c.output_dir.empty(), ErrorKind::Config, "config: output_dir must not be empty");
}

}  // namespace pg
