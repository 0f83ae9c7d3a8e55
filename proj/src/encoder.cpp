#include "encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace attrseg {

Tensor positional_encoding(int d, int h, int w) {
    if (d % 4 != 0) throw std::invalid_argument("positional encoding needs d % 4 == 0");
    int quarter = d / 4;  // sin/cos per axis
    std::vector<double> data(static_cast<size_t>(d) * h * w);
    const double temperature = 10000.0;
    for (int q = 0; q < quarter; ++q) {
        double freq = std::pow(temperature, -2.0 * q / (d / 2.0));
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                size_t base = static_cast<size_t>(y) * w + x;
                size_t plane = static_cast<size_t>(h) * w;
                data[(static_cast<size_t>(2 * q) + 0) * plane + base] = std::sin(y * freq);
                data[(static_cast<size_t>(2 * q) + 1) * plane + base] = std::cos(y * freq);
                data[(static_cast<size_t>(2 * quarter + 2 * q) + 0) * plane + base] =
                    std::sin(x * freq);
                data[(static_cast<size_t>(2 * quarter + 2 * q) + 1) * plane + base] =
                    std::cos(x * freq);
            }
    }
    return Tensor::from_data({d, h, w}, std::move(data));
}

Encoder::Encoder(ParamStore& ps, const RunConfig& cfg, Rng& rng)
    : d_(cfg.embed_dim), n_queries_(cfg.num_queries) {
    int base = std::max(4, d_ / 4);
    widths_ = {std::min(d_, base), std::min(d_, base * 2), std::min(d_, base * 4),
               std::min(d_, base * 8)};

    stem_ = Conv(ps, "encoder.stem", 3, widths_[0], 4, 2, 1, rng);
    int cin = widths_[0];
    for (int s = 0; s < 4; ++s) {
        stage_convs_.emplace_back(ps, "encoder.stage" + std::to_string(s) + ".conv1",
                                  cin, widths_[static_cast<size_t>(s)], 3, 1, 1, rng);
        stage_convs_.emplace_back(ps, "encoder.stage" + std::to_string(s) + ".conv2",
                                  widths_[static_cast<size_t>(s)],
                                  widths_[static_cast<size_t>(s)], 4, 2, 1, rng);
        cin = widths_[static_cast<size_t>(s)];
    }
    for (int s = 0; s < 4; ++s) {
        laterals_.emplace_back(ps, "encoder.lateral" + std::to_string(s),
                               widths_[static_cast<size_t>(s)], d_, 1, 1, 0, rng);
        smooths_.emplace_back(ps, "encoder.smooth" + std::to_string(s), d_, d_, 3, 1,
                              1, rng);
    }
    init_w_ = ps.create("encoder.init_conv.w", {n_queries_, d_, 1, 1}, rng,
                        std::sqrt(2.0 / (d_ + n_queries_)));
    q_atr_embed_ = ps.create("encoder.q_atr_embed", {n_queries_, d_}, rng,
                             std::sqrt(1.0 / d_));
}

std::vector<Tensor> Encoder::backbone_forward(const Tensor& image) const {
    if (image.rank() != 3 || image.dim(0) != 3)
        throw std::invalid_argument("backbone expects [3,H,W], got " +
                                    shape_str(image.shape()));
    int h = image.dim(1), w = image.dim(2);
    if (h < 32 || w < 32)
        throw std::invalid_argument("image too small: " + shape_str(image.shape()) +
                                    " (minimum 32x32)");
    if (h % 32 != 0 || w % 32 != 0)
        throw std::invalid_argument("image extents must be multiples of 32, got " +
                                    shape_str(image.shape()));
    Tensor x = relu(stem_.forward(image));
    std::vector<Tensor> raw;
    for (int s = 0; s < 4; ++s) {
        x = relu(stage_convs_[static_cast<size_t>(2 * s)].forward(x));
        x = relu(stage_convs_[static_cast<size_t>(2 * s + 1)].forward(x));
        raw.push_back(x);
    }
    return raw;
}

std::vector<Tensor> Encoder::fpn_fuse(const std::vector<Tensor>& raw) const {
    if (raw.size() != 4) throw std::invalid_argument("fpn_fuse expects 4 raw maps");
    std::vector<Tensor> lat(4);
    for (int s = 0; s < 4; ++s) lat[static_cast<size_t>(s)] = laterals_[static_cast<size_t>(s)].forward(raw[static_cast<size_t>(s)]);

    std::vector<Tensor> td(4);
    td[3] = lat[3];
    for (int s = 2; s >= 0; --s)
        td[static_cast<size_t>(s)] =
            add(lat[static_cast<size_t>(s)],
                bilinear_resize(td[static_cast<size_t>(s) + 1],
                                lat[static_cast<size_t>(s)].dim(1),
                                lat[static_cast<size_t>(s)].dim(2)));
    std::vector<Tensor> out(4);
    for (int s = 0; s < 4; ++s)
        out[static_cast<size_t>(s)] = smooths_[static_cast<size_t>(s)].forward(td[static_cast<size_t>(s)]);
    return out;
}

Tensor Encoder::build_fused(const std::vector<Tensor>& levels) const {
    if (levels.size() != 4) throw std::invalid_argument("build_fused expects 4 levels");
    int h = levels[0].dim(1), w = levels[0].dim(2);
    Tensor sum = levels[0];
    for (int s = 1; s < 4; ++s)
        sum = add(sum, bilinear_resize(levels[static_cast<size_t>(s)], h, w));
    return add(sum, positional_encoding(d_, h, w));
}

EncoderOutputs Encoder::forward(const Tensor& image) const {
    EncoderOutputs out;
    out.pyramid.levels = fpn_fuse(backbone_forward(image));
    out.pyramid.fused = build_fused(out.pyramid.levels);
    out.initial_mask_logits = conv2d(out.pyramid.fused, init_w_, Tensor(), 1, 0);
    out.queries.q_obj = reshape(init_w_, {n_queries_, d_});
    out.queries.q_atr = q_atr_embed_;
    return out;
}

}  // namespace attrseg
