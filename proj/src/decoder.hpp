#pragma once

#include "encoder.hpp"

namespace attrseg {

struct StagePrediction {
    Tensor mask_logits;   // [N,H/4,W/4]
    Tensor class_logits;  // [N,C]
    Tensor attr_logits;   // [N,A]
    QueryState queries_out;
};

// X_obj[n,c] = sum_{u,v} sigmoid(mask_logits[n,u,v]) * x_fuse[c,u,v]
// (unnormalized soft-mask grouping)
Tensor group_object_features(const Tensor& mask_logits, const Tensor& x_fuse);

// elementwise sum; shapes must match
Tensor residual_attribute_query(const Tensor& q_atr, const Tensor& q_obj);

// Query refinement: gating parameters from the grouped features re-weight the
// query, then feature/query gates mix both paths.
struct DynamicConvUpdate {
    DynamicConvUpdate() = default;
    DynamicConvUpdate(ParamStore& ps, const std::string& prefix, int d, Rng& rng);
    Tensor forward(const Tensor& x_u, const Tensor& q_u) const;
    Linear reweight_fc;
    GateUnit gate_x, gate_q;
};

// Grouping of a resized soft mask against each pyramid level, concatenated and
// fused by FC + LayerNorm + ReLU.
struct MultiLayerRender {
    MultiLayerRender() = default;
    MultiLayerRender(ParamStore& ps, const std::string& prefix, int d, int levels,
                     Rng& rng);
    Tensor forward(const Tensor& mask_logits, const std::vector<Tensor>& levels) const;
    Linear fuse;
    LayerNormLayer ln;
    int num_levels = 4;
};

struct PredictionHeads {
    PredictionHeads() = default;
    PredictionHeads(ParamStore& ps, const std::string& prefix, int d, int num_classes,
                    int num_attrs, Rng& rng);
    Tensor class_logits(const Tensor& q_obj) const;
    Tensor mask_logits(const Tensor& q_obj, const Tensor& x_fuse) const;
    Tensor attr_logits(const Tensor& q_atr) const;
    Linear cls1, cls2, mask1, mask2, atr1, atr2;
};

struct DecoderStage {
    DecoderStage() = default;
    DecoderStage(ParamStore& ps, const std::string& prefix, const RunConfig& cfg,
                 Rng& rng);
    // mask_prev: previous-stage mask logits (M_0 for the first stage)
    StagePrediction forward(const Tensor& mask_prev, const QueryState& in,
                            const FeaturePyramid& pyr) const;

    DynamicConvUpdate obj_dc;
    QuerySelfUpdate obj_qsu;
    MultiLayerRender mlr;
    DynamicConvUpdate atr_dc;   // aliases obj_dc in shared-query mode
    QuerySelfUpdate atr_qsu;    // aliases obj_qsu in shared-query mode
    Ffn shared_query_mlp;       // only constructed in shared-query mode
    PredictionHeads heads;
    bool shared_query = false;
};

class Decoder {
public:
    Decoder(ParamStore& ps, const RunConfig& cfg, Rng& rng);
    std::vector<StagePrediction> forward(const EncoderOutputs& enc) const;
    const std::vector<DecoderStage>& stages() const { return stages_; }

private:
    std::vector<DecoderStage> stages_;
};

}  // namespace attrseg
