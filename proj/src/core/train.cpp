#include "core/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "core/checkpoint.hpp"
#include "core/config.hpp"
#include "core/error.hpp"
#include "core/rng.hpp"

namespace pg {

namespace {

std::string parameter_norms(const MAEParams& params) {
    std::ostringstream os;
    bool first = true;
    for (const auto& [name, t] : params.named_parameters()) {
        double sq = 0.0;
        for (double v : t.data()) sq += v * v;
        os << (first ? "" : ", ") << name << '=' << std::sqrt(sq);
        first = false;
    }
    return os.str();
}

struct PreparedSample {
    Tensor patches;
    std::vector<double> target;   // patch layout
    std::vector<double> weights;  // patch layout, 0/1
    bool empty = false;
};

PreparedSample prepare(const RasterImage& img, const PatchMask& mask, const MAEConfig& mc, const TrainConfig& cfg) {
    const auto dmask = drawing_mask(img, cfg.white_threshold);
    require(dmask.n_drawing > 0, ErrorKind::NoDrawingPixels, "train: a training image has no drawing pixels");
    const auto selected = restrict_to_patches(dmask, mask, cfg.pixel_set, img.width, img.height, mc.patch_size);
    std::vector<double> w(selected.drawing.begin(), selected.drawing.end());

    PreparedSample s;
    s.patches = patchify(img, mc.patch_size);
    s.target.assign(s.patches.data().begin(), s.patches.data().end());
    s.weights = patchify_values(w, img.width, img.height, mc.patch_size);
    s.empty = selected.n_drawing == 0;
    return s;
}

}  // namespace

void validate(const TrainConfig& c) {
    require(c.epochs >= 1, ErrorKind::Config, "train: epochs must be >= 1");
    require(c.batch_size >= 1, ErrorKind::Config, "train: batch_size must be >= 1");
    require(c.learning_rate > 0.0 && std::isfinite(c.learning_rate), ErrorKind::Config,
            "train: learning_rate must be positive");
    require(c.p_mask >= 0.0 && c.p_mask <= 1.0, ErrorKind::Config, "train: p_mask must lie in [0,1]");
    require(c.checkpoint_every >= 1, ErrorKind::Config, "train: checkpoint_every must be >= 1");
}

RasterImage flip_horizontal(const RasterImage& img) {
    RasterImage out(img.width, img.height);
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x) out.at(img.width - 1 - x, y) = img.at(x, y);
    return out;
}

RasterImage flip_vertical(const RasterImage& img) {
    RasterImage out(img.width, img.height);
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x) out.at(x, img.height - 1 - y) = img.at(x, y);
    return out;
}

RasterImage augment(const RasterImage& img, std::uint64_t seed) {
    Rng rng(seed);
    std::bernoulli_distribution coin(0.5);
    const bool h = coin(rng);
    const bool v = coin(rng);
    RasterImage out = h ? flip_horizontal(img) : img;
    return v ? flip_vertical(out) : out;
}

TrainState init_training(const MAEConfig& model, const TrainConfig& config) {
    validate(model);
    validate(config);
    TrainState st;
    st.params = init_params(model, config.seed);
    AdamWConfig opt;
    opt.learning_rate = config.learning_rate;
    opt.weight_decay = config.weight_decay();
    st.optimizer = AdamWState::zeros_like(st.params.parameters(), opt);
    return st;
}

void train(TrainState& state, std::span<const RasterImage> dataset, const TrainConfig& cfg, std::size_t epochs,
           const EpochCallback& on_epoch) {
    validate(cfg);
    require(!dataset.empty(), ErrorKind::Config, "train: training split is empty");
    const auto& mc = state.params.config;
    for (const auto& img : dataset)
        require(img.width == mc.image_width && img.height == mc.image_height, ErrorKind::Config,
                "train: image size does not match the model configuration");

    const std::size_t n = dataset.size(), np = mc.num_patches(), pd = mc.patch_dim();
    std::vector<Tensor> params = state.params.parameters();
    std::vector<std::size_t> order(n);

    const std::size_t first_epoch = state.epochs_completed();
    for (std::size_t epoch = first_epoch; epoch < first_epoch + epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng(derive_seed(SeedStream::Shuffle, {cfg.seed, epoch}));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double epoch_total = 0.0;
        std::size_t epoch_count = 0;
        for (std::size_t b0 = 0, batch_index = 0; b0 < n; b0 += cfg.batch_size, ++batch_index) {
            const std::size_t b1 = std::min(n, b0 + cfg.batch_size);
            std::vector<PreparedSample> samples;
            std::vector<Tensor> patches;
            std::vector<PatchMask> masks;
            for (std::size_t j = b0; j < b1; ++j) {
                const std::size_t i = order[j];
                const RasterImage img = cfg.augmentation_enabled
                                            ? augment(dataset[i], derive_seed(SeedStream::Augment, {cfg.seed, epoch, i}))
                                            : dataset[i];
                masks.push_back(sample_mask(np, cfg.p_mask, derive_seed(SeedStream::TrainMask, {cfg.seed, epoch, i})));
                samples.push_back(prepare(img, masks.back(), mc, cfg));
                patches.push_back(samples.back().patches);
            }

            Tape tape;
            TapeScope scope(tape);
            const Tensor pred = forward_batch(state.params, patches, masks);
            Tensor total;
            std::size_t terms = 0;
            double batch_sum = 0.0;
            for (std::size_t j = 0; j < samples.size(); ++j) {
                if (samples[j].empty) continue;
                const Tensor l = masked_mse(slice(pred, j * np, np, 0, pd), samples[j].target, samples[j].weights);
                batch_sum += l.item();
                total = total.defined() ? add(total, l) : l;
                ++terms;
            }
            if (terms == 0) continue;
            const Tensor loss = scale(total, 1.0 / static_cast<double>(terms));
            if (!std::isfinite(loss.item())) {
                fail(ErrorKind::Numeric, "non-finite training loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                                             std::to_string(batch_index) + "; parameter norms: " +
                                             parameter_norms(state.params));
            }
            tape.backward(loss);
            adamw_step(params, state.optimizer);
            for (auto& p : params) p.zero_grad();

            epoch_total += batch_sum;
            epoch_count += terms;
        }
        state.loss_curve.push_back(epoch_count ? epoch_total / static_cast<double>(epoch_count) : 0.0);
        if (on_epoch) on_epoch(state, epoch + 1);
    }
}

void save_train_state(const std::filesystem::path& path, const TrainState& state, const std::string& fingerprint) {
    Checkpoint ckpt;
    const auto& opt = state.optimizer.config;
    ckpt.metadata = {{"config_fingerprint", fingerprint},
                     {"epochs_completed", state.epochs_completed()},
                     {"model", to_json(state.params.config)},
                     {"optimizer",
                      {{"learning_rate", opt.learning_rate},
                       {"beta1", opt.beta1},
                       {"beta2", opt.beta2},
                       {"epsilon", opt.epsilon},
                       {"weight_decay", opt.weight_decay},
                       {"step", state.optimizer.step}}},
                     {"loss_curve", state.loss_curve}};
    const auto named = state.params.named_parameters();
    for (const auto& [name, t] : named) ckpt.tensors.emplace_back(name, t);
    for (std::size_t i = 0; i < named.size(); ++i) {
        const auto& shape = named[i].second.shape();
        ckpt.tensors.emplace_back("adam.m/" + named[i].first, Tensor(shape, state.optimizer.first_moment[i]));
        ckpt.tensors.emplace_back("adam.v/" + named[i].first, Tensor(shape, state.optimizer.second_moment[i]));
    }
    save_checkpoint(path, ckpt);
}

LoadedState load_train_state(const std::filesystem::path& path) {
    const Checkpoint ckpt = load_checkpoint(path);
    LoadedState out;
    try {
        const auto& meta = ckpt.metadata;
        out.fingerprint = meta.at("config_fingerprint").get<std::string>();
        const MAEConfig model = mae_config_from_json(meta.at("model"));
        out.state.params = init_params(model, 0);
        const auto& o = meta.at("optimizer");
        AdamWConfig opt;
        opt.learning_rate = o.at("learning_rate").get<double>();
        opt.beta1 = o.at("beta1").get<double>();
        opt.beta2 = o.at("beta2").get<double>();
        opt.epsilon = o.at("epsilon").get<double>();
        opt.weight_decay = o.at("weight_decay").get<double>();
        out.state.optimizer.config = opt;
        out.state.optimizer.step = o.at("step").get<std::uint64_t>();
        out.state.loss_curve = meta.at("loss_curve").get<std::vector<double>>();
        require(out.state.loss_curve.size() == meta.at("epochs_completed").get<std::size_t>(), ErrorKind::Incompatible,
                "checkpoint loss curve does not match its epoch count");
    } catch (const nlohmann::json::exception& ex) {
        fail(ErrorKind::Incompatible, "checkpoint " + path.string() + " has malformed metadata: " + ex.what());
    }

    for (const auto& [name, t] : out.state.params.named_parameters()) {
        const Tensor& stored = ckpt.tensor(name);
        require(stored.shape() == t.shape(), ErrorKind::Incompatible,
                "checkpoint tensor '" + name + "' has shape " + shape_str(stored.shape()) + ", expected " +
                    shape_str(t.shape()));
        Tensor dst = t;
        std::copy(stored.data().begin(), stored.data().end(), dst.mutable_data().begin());
        const Tensor& m = ckpt.tensor("adam.m/" + name);
        const Tensor& v = ckpt.tensor("adam.v/" + name);
        out.state.optimizer.first_moment.emplace_back(m.data().begin(), m.data().end());
        out.state.optimizer.second_moment.emplace_back(v.data().begin(), v.data().end());
    }
    return out;
}

void write_loss_curve(const std::filesystem::path& path, std::span<const double> curve) {
    std::ofstream out(path);
    require(out.good(), ErrorKind::Io, "cannot write loss curve " + path.string());
    out << "epoch,mean_loss\n";
    out.precision(17);
    for (std::size_t i = 0; i < curve.size(); ++i) out << (i + 1) << ',' << curve[i] << '\n';
}

}  // namespace pg
