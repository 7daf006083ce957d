#include "core/mae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace pg {

namespace {

constexpr double kInitStd = 0.02;
constexpr double kLayerNormEps = 1e-6;

class Initializer {
public:
    explicit Initializer(std::uint64_t seed) : rng_(derive_seed(SeedStream::Init, {seed})) {}

    // Normal(0, 0.02) truncated at two standard deviations.
    Tensor trunc_normal(Shape shape) {
        std::normal_distribution<double> dist(0.0, kInitStd);
        std::vector<double> v(shape_numel(shape));
        for (auto& x : v) {
            do {
                x = dist(rng_);
            } while (std::abs(x) > 2.0 * kInitStd);
        }
        return Tensor(std::move(shape), std::move(v), true);
    }

    static Tensor zeros(std::size_t n) { return Tensor::zeros({n}, true); }
    static Tensor ones(std::size_t n) { return Tensor::filled({n}, 1.0, true); }

    TransformerBlock block(std::size_t dim, std::size_t hidden) {
        TransformerBlock b;
        b.ln1_gain = ones(dim);
        b.ln1_bias = zeros(dim);
        b.qkv_weight = trunc_normal({dim, 3 * dim});
        b.qkv_bias = zeros(3 * dim);
        b.proj_weight = trunc_normal({dim, dim});
        b.proj_bias = zeros(dim);
        b.ln2_gain = ones(dim);
        b.ln2_bias = zeros(dim);
        b.fc1_weight = trunc_normal({dim, hidden});
        b.fc1_bias = zeros(hidden);
        b.fc2_weight = trunc_normal({hidden, dim});
        b.fc2_bias = zeros(dim);
        return b;
    }

private:
    Rng rng_;
};

void append_block(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
                  const TransformerBlock& b) {
    out.emplace_back(prefix + ".ln1.gain", b.ln1_gain);
    out.emplace_back(prefix + ".ln1.bias", b.ln1_bias);
    out.emplace_back(prefix + ".attn.qkv.weight", b.qkv_weight);
    out.emplace_back(prefix + ".attn.qkv.bias", b.qkv_bias);
    out.emplace_back(prefix + ".attn.proj.weight", b.proj_weight);
    out.emplace_back(prefix + ".attn.proj.bias", b.proj_bias);
    out.emplace_back(prefix + ".ln2.gain", b.ln2_gain);
    out.emplace_back(prefix + ".ln2.bias", b.ln2_bias);
    out.emplace_back(prefix + ".mlp.fc1.weight", b.fc1_weight);
    out.emplace_back(prefix + ".mlp.fc1.bias", b.fc1_bias);
    out.emplace_back(prefix + ".mlp.fc2.weight", b.fc2_weight);
    out.emplace_back(prefix + ".mlp.fc2.bias", b.fc2_bias);
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) { return add(matmul(x, w), b); }

// Rows of `x` are the tokens of several images stacked back to back;
// attention never crosses image boundaries.
Tensor self_attention(const Tensor& x, const TransformerBlock& blk, std::span<const std::size_t> offsets,
                      std::span<const std::size_t> counts, std::size_t heads) {
    const std::size_t dim = x.shape()[1];
    const std::size_t head_dim = dim / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
    const Tensor qkv = linear(x, blk.qkv_weight, blk.qkv_bias);

    std::vector<std::vector<Tensor>> grid;
    for (std::size_t b = 0; b < counts.size(); ++b) {
        const std::size_t r0 = offsets[b], t = counts[b];
        if (t == 0) continue;
        std::vector<Tensor> row;
        for (std::size_t h = 0; h < heads; ++h) {
            const Tensor q = slice(qkv, r0, t, h * head_dim, head_dim);
            const Tensor k = slice(qkv, r0, t, dim + h * head_dim, head_dim);
            const Tensor v = slice(qkv, r0, t, 2 * dim + h * head_dim, head_dim);
            const Tensor attn = softmax(scale(matmul(q, transpose(k)), inv_sqrt), -1);
            row.push_back(matmul(attn, v));
        }
        grid.push_back(std::move(row));
    }
    return linear(blocks(grid), blk.proj_weight, blk.proj_bias);
}

Tensor transformer_block(const Tensor& x, const TransformerBlock& blk, std::span<const std::size_t> offsets,
                         std::span<const std::size_t> counts, std::size_t heads) {
    Tensor h = add(x, self_attention(layer_norm(x, blk.ln1_gain, blk.ln1_bias, kLayerNormEps), blk, offsets, counts,
                                     heads));
    const Tensor hidden = gelu(linear(layer_norm(h, blk.ln2_gain, blk.ln2_bias, kLayerNormEps), blk.fc1_weight,
                                      blk.fc1_bias));
    return add(h, linear(hidden, blk.fc2_weight, blk.fc2_bias));
}

void check_image(const MAEConfig& c, const RasterImage& img) {
    require(img.width == c.image_width && img.height == c.image_height, ErrorKind::Dimension,
            "image is " + std::to_string(img.width) + "x" + std::to_string(img.height) + ", model expects " +
                std::to_string(c.image_width) + "x" + std::to_string(c.image_height));
}

struct EncoderOutput {
    Tensor tokens;  // (sum visible) x embed_dim; undefined when nothing is visible
    std::vector<std::size_t> offsets, counts;
    std::vector<std::vector<std::size_t>> visible;
};

EncoderOutput run_encoder(const MAEParams& p, std::span<const Tensor> patches, std::span<const PatchMask> masks) {
    const auto& c = p.config;
    const std::size_t n = c.num_patches(), pd = c.patch_dim(), d = c.embed_dim;
    require(patches.size() == masks.size() && !patches.empty(), ErrorKind::Contract,
            "forward: need one mask per image and at least one image");

    EncoderOutput out;
    std::size_t total = 0;
    for (std::size_t b = 0; b < masks.size(); ++b) {
        require(masks[b].num_patches == n && masks[b].masked.size() == n, ErrorKind::Contract,
                "forward: mask covers " + std::to_string(masks[b].masked.size()) + " patches, model has " +
                    std::to_string(n));
        require(patches[b].rank() == 2 && patches[b].shape()[0] == n && patches[b].shape()[1] == pd,
                ErrorKind::Dimension, "forward: patch tensor has shape " + shape_str(patches[b].shape()));
        out.visible.push_back(masks[b].visible());
        out.offsets.push_back(total);
        out.counts.push_back(out.visible.back().size());
        total += out.counts.back();
    }
    if (total == 0) return out;

    std::vector<double> gathered(total * pd), pos(total * d);
    for (std::size_t b = 0; b < masks.size(); ++b) {
        for (std::size_t r = 0; r < out.counts[b]; ++r) {
            const std::size_t src = out.visible[b][r], dst = out.offsets[b] + r;
            std::copy_n(patches[b].data().begin() + static_cast<std::ptrdiff_t>(src * pd), pd,
                        gathered.begin() + static_cast<std::ptrdiff_t>(dst * pd));
            std::copy_n(p.encoder_pos.begin() + static_cast<std::ptrdiff_t>(src * d), d,
                        pos.begin() + static_cast<std::ptrdiff_t>(dst * d));
        }
    }

    Tensor x = linear(Tensor::matrix(total, pd, std::move(gathered)), p.patch_weight, p.patch_bias);
    x = add(x, Tensor::matrix(total, d, std::move(pos)));
    for (const auto& blk : p.encoder) x = transformer_block(x, blk, out.offsets, out.counts, c.num_heads);
    out.tokens = layer_norm(x, p.encoder_norm_gain, p.encoder_norm_bias, kLayerNormEps);
    return out;
}

}  // namespace

MAEConfig MAEConfig::paper_scale() {
    MAEConfig c;
    c.image_width = 224;
    c.image_height = 224;
    c.patch_size = 14;
    c.embed_dim = 1280;
    c.depth = 32;
    c.num_heads = 16;
    c.mlp_ratio = 4.0;
    c.decoder_embed_dim = 512;
    c.decoder_depth = 8;
    c.decoder_num_heads = 16;
    c.p_mask = 0.75;
    return c;
}

void validate(const MAEConfig& c) {
    require(c.patch_size > 0, ErrorKind::Config, "model: patch_size must be positive");
    require(c.image_width > 0 && c.image_height > 0, ErrorKind::Config, "model: image size must be positive");
    require(c.image_width % c.patch_size == 0 && c.image_height % c.patch_size == 0, ErrorKind::Config,
            "model: image dimensions must be divisible by patch_size");
    require(c.num_heads > 0 && c.embed_dim % c.num_heads == 0, ErrorKind::Config,
            "model: embed_dim must be divisible by num_heads");
    require(c.decoder_num_heads > 0 && c.decoder_embed_dim % c.decoder_num_heads == 0, ErrorKind::Config,
            "model: decoder_embed_dim must be divisible by decoder_num_heads");
    require(c.embed_dim % 4 == 0 && c.decoder_embed_dim % 4 == 0, ErrorKind::Config,
            "model: embedding widths must be multiples of 4 for 2-D sin-cos positions");
    require(c.depth >= 1 && c.decoder_depth >= 1, ErrorKind::Config, "model: depth and decoder_depth must be >= 1");
    require(c.mlp_ratio > 0.0, ErrorKind::Config, "model: mlp_ratio must be positive");
    require(c.p_mask >= 0.0 && c.p_mask <= 1.0, ErrorKind::Config, "model: p_mask must lie in [0,1]");
}

std::size_t mlp_hidden(std::size_t dim, double ratio) {
    return static_cast<std::size_t>(std::llround(static_cast<double>(dim) * ratio));
}

// ---- masking ----------------------------------------------------------------

std::size_t PatchMask::masked_count() const {
    return static_cast<std::size_t>(std::count(masked.begin(), masked.end(), std::uint8_t{1}));
}

std::vector<std::size_t> PatchMask::visible() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < masked.size(); ++i)
        if (!masked[i]) out.push_back(i);
    return out;
}

std::size_t mask_count(std::size_t num_patches, double p_mask) {
    // std::round rounds half away from zero.
    return static_cast<std::size_t>(std::round(p_mask * static_cast<double>(num_patches)));
}

PatchMask sample_mask(std::size_t num_patches, double p_mask, std::uint64_t seed) {
    require(p_mask >= 0.0 && p_mask <= 1.0, ErrorKind::Contract, "sample_mask: p_mask must lie in [0,1]");
    PatchMask m{num_patches, std::vector<std::uint8_t>(num_patches, 0), seed};
    std::vector<std::size_t> order(num_patches);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t k = mask_count(num_patches, p_mask);
    for (std::size_t i = 0; i < k; ++i) m.masked[order[i]] = 1;
    return m;
}

// ---- patches ------------------------------------------------------------------

std::vector<double> patchify_values(std::span<const double> values, std::size_t width, std::size_t height,
                                    std::size_t patch_size) {
    require(patch_size > 0 && width % patch_size == 0 && height % patch_size == 0, ErrorKind::Config,
            "patchify: " + std::to_string(width) + "x" + std::to_string(height) + " is not divisible by patch size " +
                std::to_string(patch_size));
    require(values.size() == width * height, ErrorKind::Dimension, "patchify: value count does not match image size");
    const std::size_t gw = width / patch_size, gh = height / patch_size, pd = patch_size * patch_size;
    std::vector<double> out(values.size());
    for (std::size_t py = 0; py < gh; ++py)
        for (std::size_t px = 0; px < gw; ++px) {
            double* dst = out.data() + (py * gw + px) * pd;
            for (std::size_t y = 0; y < patch_size; ++y)
                for (std::size_t x = 0; x < patch_size; ++x)
                    dst[y * patch_size + x] = values[(py * patch_size + y) * width + px * patch_size + x];
        }
    return out;
}

Tensor patchify(const RasterImage& img, std::size_t patch_size) {
    auto v = patchify_values(img.pixels, img.width, img.height, patch_size);
    const std::size_t pd = patch_size * patch_size;
    const std::size_t rows = v.size() / pd;
    return Tensor::matrix(rows, pd, std::move(v));
}

RasterImage unpatchify(std::span<const double> patches, std::size_t width, std::size_t height, std::size_t patch_size) {
    require(patch_size > 0 && width % patch_size == 0 && height % patch_size == 0, ErrorKind::Config,
            "unpatchify: dimensions not divisible by patch size");
    require(patches.size() == width * height, ErrorKind::Dimension, "unpatchify: value count does not match image size");
    const std::size_t gw = width / patch_size, gh = height / patch_size, pd = patch_size * patch_size;
    RasterImage img(width, height);
    for (std::size_t py = 0; py < gh; ++py)
        for (std::size_t px = 0; px < gw; ++px) {
            const double* src = patches.data() + (py * gw + px) * pd;
            for (std::size_t y = 0; y < patch_size; ++y)
                for (std::size_t x = 0; x < patch_size; ++x)
                    img.at(px * patch_size + x, py * patch_size + y) = src[y * patch_size + x];
        }
    return img;
}

// ---- parameters ---------------------------------------------------------------

std::vector<double> sincos_pos_embed(std::size_t dim, std::size_t grid_h, std::size_t grid_w) {
    require(dim % 4 == 0, ErrorKind::Config, "sincos_pos_embed: dim must be a multiple of 4");
    const std::size_t half = dim / 2, quarter = dim / 4;
    std::vector<double> out(grid_h * grid_w * dim);
    for (std::size_t r = 0; r < grid_h; ++r)
        for (std::size_t c = 0; c < grid_w; ++c) {
            double* row = out.data() + (r * grid_w + c) * dim;
            // First half encodes the column, second half the row.
            for (std::size_t i = 0; i < quarter; ++i) {
                const double omega = 1.0 / std::pow(10000.0, static_cast<double>(i) / static_cast<double>(quarter));
                row[i] = std::sin(static_cast<double>(c) * omega);
                row[quarter + i] = std::cos(static_cast<double>(c) * omega);
                row[half + i] = std::sin(static_cast<double>(r) * omega);
                row[half + quarter + i] = std::cos(static_cast<double>(r) * omega);
            }
        }
    return out;
}

MAEParams init_params(const MAEConfig& config, std::uint64_t seed) {
    validate(config);
    Initializer init(seed);
    const std::size_t d = config.embed_dim, dd = config.decoder_embed_dim, pd = config.patch_dim();

    MAEParams p;
    p.config = config;
    p.patch_weight = init.trunc_normal({pd, d});
    p.patch_bias = Initializer::zeros(d);
    for (std::size_t i = 0; i < config.depth; ++i) p.encoder.push_back(init.block(d, mlp_hidden(d, config.mlp_ratio)));
    p.encoder_norm_gain = Initializer::ones(d);
    p.encoder_norm_bias = Initializer::zeros(d);
    p.decoder_embed_weight = init.trunc_normal({d, dd});
    p.decoder_embed_bias = Initializer::zeros(dd);
    p.mask_token = init.trunc_normal({1, dd});
    for (std::size_t i = 0; i < config.decoder_depth; ++i)
        p.decoder.push_back(init.block(dd, mlp_hidden(dd, config.mlp_ratio)));
    p.decoder_norm_gain = Initializer::ones(dd);
    p.decoder_norm_bias = Initializer::zeros(dd);
    p.pred_weight = init.trunc_normal({dd, pd});
    p.pred_bias = Initializer::zeros(pd);

    p.encoder_pos = sincos_pos_embed(d, config.grid_h(), config.grid_w());
    p.decoder_pos = sincos_pos_embed(dd, config.grid_h(), config.grid_w());
    return p;
}

std::vector<std::pair<std::string, Tensor>> MAEParams::named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back("patch_embed.weight", patch_weight);
    out.emplace_back("patch_embed.bias", patch_bias);
    for (std::size_t i = 0; i < encoder.size(); ++i) append_block(out, "encoder." + std::to_string(i), encoder[i]);
    out.emplace_back("encoder.norm.gain", encoder_norm_gain);
    out.emplace_back("encoder.norm.bias", encoder_norm_bias);
    out.emplace_back("decoder_embed.weight", decoder_embed_weight);
    out.emplace_back("decoder_embed.bias", decoder_embed_bias);
    out.emplace_back("mask_token", mask_token);
    for (std::size_t i = 0; i < decoder.size(); ++i) append_block(out, "decoder." + std::to_string(i), decoder[i]);
    out.emplace_back("decoder.norm.gain", decoder_norm_gain);
    out.emplace_back("decoder.norm.bias", decoder_norm_bias);
    out.emplace_back("decoder_pred.weight", pred_weight);
    out.emplace_back("decoder_pred.bias", pred_bias);
    return out;
}

std::vector<Tensor> MAEParams::parameters() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
}

std::size_t MAEParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : parameters()) n += t.numel();
    return n;
}

MAEParams MAEParams::clone() const {
    MAEParams c = *this;
    auto copy_block = [](TransformerBlock& b) {
        for (Tensor* t : {&b.ln1_gain, &b.ln1_bias, &b.qkv_weight, &b.qkv_bias, &b.proj_weight, &b.proj_bias,
                          &b.ln2_gain, &b.ln2_bias, &b.fc1_weight, &b.fc1_bias, &b.fc2_weight, &b.fc2_bias})
            *t = t->clone();
    };
    for (Tensor* t : {&c.patch_weight, &c.patch_bias, &c.encoder_norm_gain, &c.encoder_norm_bias,
                      &c.decoder_embed_weight, &c.decoder_embed_bias, &c.mask_token, &c.decoder_norm_gain,
                      &c.decoder_norm_bias, &c.pred_weight, &c.pred_bias})
        *t = t->clone();
    for (auto& b : c.encoder) copy_block(b);
    for (auto& b : c.decoder) copy_block(b);
    return c;
}

// ---- forward ------------------------------------------------------------------

Tensor encode(const MAEParams& params, const RasterImage& img, const PatchMask& mask) {
    check_image(params.config, img);
    const Tensor patches = patchify(img, params.config.patch_size);
    auto out = run_encoder(params, std::span(&patches, 1), std::span(&mask, 1));
    if (!out.tokens.defined()) return Tensor::zeros({0, params.config.embed_dim});
    return out.tokens;
}

Tensor forward_batch(const MAEParams& params, std::span<const Tensor> patches, std::span<const PatchMask> masks) {
    const auto& c = params.config;
    const std::size_t n = c.num_patches(), dd = c.decoder_embed_dim;
    const auto enc = run_encoder(params, patches, masks);
    const std::size_t batch = masks.size();
    const std::size_t total_visible = enc.counts.empty() ? 0 : enc.offsets.back() + enc.counts.back();

    // Row `total_visible` of the pool is the mask token.
    Tensor pool = params.mask_token;
    if (total_visible > 0)
        pool = concat_rows(linear(enc.tokens, params.decoder_embed_weight, params.decoder_embed_bias), params.mask_token);

    std::vector<std::size_t> index(batch * n, total_visible);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t r = 0; r < enc.counts[b]; ++r) index[b * n + enc.visible[b][r]] = enc.offsets[b] + r;

    std::vector<double> pos(batch * n * dd);
    for (std::size_t b = 0; b < batch; ++b)
        std::copy(params.decoder_pos.begin(), params.decoder_pos.end(),
                  pos.begin() + static_cast<std::ptrdiff_t>(b * n * dd));

    Tensor x = add(gather_rows(pool, index), Tensor::matrix(batch * n, dd, std::move(pos)));
    std::vector<std::size_t> offsets(batch), counts(batch, n);
    for (std::size_t b = 0; b < batch; ++b) offsets[b] = b * n;
    for (const auto& blk : params.decoder) x = transformer_block(x, blk, offsets, counts, c.decoder_num_heads);
    x = layer_norm(x, params.decoder_norm_gain, params.decoder_norm_bias, kLayerNormEps);
    return linear(x, params.pred_weight, params.pred_bias);
}

RasterImage reconstruct(const MAEParams& params, const RasterImage& img, const PatchMask& mask) {
    const auto& c = params.config;
    check_image(c, img);
    require(mask.masked.size() == c.num_patches(), ErrorKind::Contract,
            "reconstruct: mask covers " + std::to_string(mask.masked.size()) + " patches, model has " +
                std::to_string(c.num_patches()));
    const Tensor patches = patchify(img, c.patch_size);
    const Tensor pred = forward_batch(params, std::span(&patches, 1), std::span(&mask, 1));
    RasterImage out = unpatchify(pred.data(), c.image_width, c.image_height, c.patch_size);
    for (auto& v : out.pixels) v = std::clamp(v, 0.0, 1.0);
    return out;
}

}  // namespace pg
