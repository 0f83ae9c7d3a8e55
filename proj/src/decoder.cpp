#include "decoder.hpp"

#include <stdexcept>

namespace attrseg {

Tensor group_object_features(const Tensor& mask_logits, const Tensor& x_fuse) {
    if (mask_logits.rank() != 3 || x_fuse.rank() != 3 ||
        mask_logits.dim(1) != x_fuse.dim(1) || mask_logits.dim(2) != x_fuse.dim(2))
        throw std::invalid_argument("grouping needs spatially aligned inputs, got " +
                                    shape_str(mask_logits.shape()) + " and " +
                                    shape_str(x_fuse.shape()));
    int n = mask_logits.dim(0), d = x_fuse.dim(0);
    int hw = x_fuse.dim(1) * x_fuse.dim(2);
    Tensor probs = reshape(sigmoid(mask_logits), {n, hw});
    Tensor feat = transpose2d(reshape(x_fuse, {d, hw}));
    return matmul(probs, feat);
}

Tensor residual_attribute_query(const Tensor& q_atr, const Tensor& q_obj) {
    if (q_atr.shape() != q_obj.shape())
        throw std::invalid_argument("query shapes differ: " + shape_str(q_atr.shape()) +
                                    " vs " + shape_str(q_obj.shape()));
    return add(q_atr, q_obj);
}

DynamicConvUpdate::DynamicConvUpdate(ParamStore& ps, const std::string& prefix,
                                     int d, Rng& rng) {
    // start near an identity update on the query: the reweighting is centered
    // at one, the feature gate opens low and the query gate high, so grouped
    // features blend in gradually instead of swamping per-query structure
    reweight_fc = Linear(ps, prefix + ".reweight", d, d, rng, 1.0, 1.0);
    gate_x = GateUnit(ps, prefix + ".gate_x", d, rng, -2.0);
    gate_q = GateUnit(ps, prefix + ".gate_q", d, rng, 2.0);
}

Tensor DynamicConvUpdate::forward(const Tensor& x_u, const Tensor& q_u) const {
    Tensor q_reweighted = mul(reweight_fc.forward(x_u), q_u);
    return add(mul(gate_x.forward(x_u), x_u), mul(gate_q.forward(x_u), q_reweighted));
}

MultiLayerRender::MultiLayerRender(ParamStore& ps, const std::string& prefix, int d,
                                   int levels, Rng& rng)
    : num_levels(levels) {
    fuse = Linear(ps, prefix + ".fuse", levels * d, d, rng);
    ln = LayerNormLayer(ps, prefix + ".ln", d);
}

Tensor MultiLayerRender::forward(const Tensor& mask_logits,
                                 const std::vector<Tensor>& levels) const {
    if (static_cast<int>(levels.size()) < num_levels)
        throw std::invalid_argument("MLR configured for " + std::to_string(num_levels) +
                                    " levels, got " + std::to_string(levels.size()));
    std::vector<Tensor> grouped;
    for (int i = 0; i < num_levels; ++i) {
        const Tensor& xi = levels[static_cast<size_t>(i)];
        Tensor m = bilinear_resize(mask_logits, xi.dim(1), xi.dim(2));
        grouped.push_back(group_object_features(m, xi));
    }
    return relu(ln.forward(fuse.forward(concat(grouped, 1))));
}

PredictionHeads::PredictionHeads(ParamStore& ps, const std::string& prefix, int d,
                                 int num_classes, int num_attrs, Rng& rng) {
    cls1 = Linear(ps, prefix + ".cls1", d, d, rng);
    cls2 = Linear(ps, prefix + ".cls2", d, num_classes, rng);
    mask1 = Linear(ps, prefix + ".mask1", d, d, rng);
    mask2 = Linear(ps, prefix + ".mask2", d, d, rng);
    atr1 = Linear(ps, prefix + ".atr1", d, d, rng);
    atr2 = Linear(ps, prefix + ".atr2", d, num_attrs, rng);
}

Tensor PredictionHeads::class_logits(const Tensor& q_obj) const {
    return cls2.forward(relu(cls1.forward(q_obj)));
}

Tensor PredictionHeads::mask_logits(const Tensor& q_obj, const Tensor& x_fuse) const {
    Tensor kernels = mask2.forward(relu(mask1.forward(q_obj)));  // [N,d]
    int d = x_fuse.dim(0), h = x_fuse.dim(1), w = x_fuse.dim(2);
    Tensor logits = matmul(kernels, reshape(x_fuse, {d, h * w}));
    return reshape(logits, {kernels.dim(0), h, w});
}

Tensor PredictionHeads::attr_logits(const Tensor& q_atr) const {
    return atr2.forward(relu(atr1.forward(q_atr)));
}

DecoderStage::DecoderStage(ParamStore& ps, const std::string& prefix,
                           const RunConfig& cfg, Rng& rng)
    : shared_query(cfg.shared_query) {
    int d = cfg.embed_dim;
    int heads_n = cfg.resolved_heads();
    obj_dc = DynamicConvUpdate(ps, prefix + ".obj.dc", d, rng);
    obj_qsu = QuerySelfUpdate(ps, prefix + ".obj.qsu", d, heads_n, rng);
    mlr = MultiLayerRender(ps, prefix + ".atr.mlr", d, 4, rng);
    if (shared_query) {
        atr_dc = obj_dc;
        atr_qsu = obj_qsu;
        shared_query_mlp = Ffn(ps, prefix + ".atr.query_mlp", d, d, rng);
    } else {
        atr_dc = DynamicConvUpdate(ps, prefix + ".atr.dc", d, rng);
        atr_qsu = QuerySelfUpdate(ps, prefix + ".atr.qsu", d, heads_n, rng);
    }
    heads = PredictionHeads(ps, prefix + ".heads", d, cfg.vocab.num_categories(),
                            cfg.vocab.num_attributes(), rng);
}

StagePrediction DecoderStage::forward(const Tensor& mask_prev, const QueryState& in,
                                      const FeaturePyramid& pyr) const {
    // segmentation stream
    Tensor x_obj = group_object_features(mask_prev, pyr.fused);
    Tensor q_obj = obj_qsu.forward(obj_dc.forward(x_obj, in.q_obj));

    // attribute stream
    Tensor q_atr_in = shared_query ? shared_query_mlp.forward(q_obj)
                                   : residual_attribute_query(in.q_atr, q_obj);
    Tensor x_atr = mlr.forward(mask_prev, pyr.levels);
    Tensor q_atr = atr_qsu.forward(atr_dc.forward(x_atr, q_atr_in));

    StagePrediction pred;
    pred.queries_out = {q_obj, q_atr};
    pred.mask_logits = heads.mask_logits(q_obj, pyr.fused);
    pred.class_logits = heads.class_logits(q_obj);
    pred.attr_logits = heads.attr_logits(q_atr);
    return pred;
}

Decoder::Decoder(ParamStore& ps, const RunConfig& cfg, Rng& rng) {
    for (int j = 0; j < cfg.stages; ++j)
        stages_.emplace_back(ps, "decoder.s" + std::to_string(j), cfg, rng);
}

std::vector<StagePrediction> Decoder::forward(const EncoderOutputs& enc) const {
    std::vector<StagePrediction> preds;
    Tensor mask_prev = enc.initial_mask_logits;
    QueryState q = enc.queries;
    for (const auto& stage : stages_) {
        StagePrediction p = stage.forward(mask_prev, q, enc.pyramid);
        mask_prev = p.mask_logits;
        q = p.queries_out;
        preds.push_back(std::move(p));
    }
    return preds;
}

}  // namespace attrseg
