#pragma once

#include "config.hpp"
#include "nn.hpp"
#include "tensor.hpp"

namespace attrseg {

// {X_i} at strides 4/8/16/32 plus the fused stride-4 map
struct FeaturePyramid {
    std::vector<Tensor> levels;  // 4 maps, each [d,Hi,Wi]
    Tensor fused;                // [d,H/4,W/4], positional encoding added
};

struct QueryState {
    Tensor q_obj;  // [N,d]
    Tensor q_atr;  // [N,d]
};

struct EncoderOutputs {
    FeaturePyramid pyramid;
    QueryState queries;
    Tensor initial_mask_logits;  // M_0: [N,H/4,W/4]
};

// Fixed 2-D sine/cosine positional encoding, [d,H,W]; d must be a multiple of 4.
Tensor positional_encoding(int d, int h, int w);

// Tiny strided conv backbone + FPN neck + fused-map/query initialization.
class Encoder {
public:
    Encoder(ParamStore& ps, const RunConfig& cfg, Rng& rng);

    // image: [3,H,W], H and W multiples of 32, at least 32
    std::vector<Tensor> backbone_forward(const Tensor& image) const;
    std::vector<Tensor> fpn_fuse(const std::vector<Tensor>& raw) const;
    Tensor build_fused(const std::vector<Tensor>& levels) const;
    EncoderOutputs forward(const Tensor& image) const;

    Tensor init_conv_weight() const { return init_w_; }

private:
    int d_ = 0, n_queries_ = 0;
    std::vector<int> widths_;          // backbone stage widths
    Conv stem_;
    std::vector<Conv> stage_convs_;    // two per stage
    std::vector<Conv> laterals_;       // 1x1 to d channels
    std::vector<Conv> smooths_;        // 3x3 after top-down add
    Tensor init_w_;                    // [N,d,1,1]; rows double as initial Q_obj
    Tensor q_atr_embed_;               // [N,d]
};

}  // namespace attrseg
