#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "tensor.hpp"

namespace attrseg {

// Named parameter registry. Creation order is the serialization order.
class ParamStore {
public:
    Tensor create(const std::string& name, Shape shape, Rng& rng, double stddev);
    Tensor create_const(const std::string& name, Shape shape, double fill);

    bool has(const std::string& name) const { return params_.count(name) > 0; }
    Tensor get(const std::string& name) const;
    const std::vector<std::string>& names() const { return order_; }
    size_t size() const { return order_.size(); }

    void zero_grads();
    int total_elements() const;

private:
    std::vector<std::string> order_;
    std::unordered_map<std::string, Tensor> params_;
};

struct Linear {
    Linear() = default;
    // w_scale multiplies the Xavier stddev; b_init fills the bias
    Linear(ParamStore& ps, const std::string& prefix, int in, int out, Rng& rng,
           double w_scale = 1.0, double b_init = 0.0);
    Tensor forward(const Tensor& x) const;  // [R,in] -> [R,out]
    Tensor w, b;
};

struct LayerNormLayer {
    LayerNormLayer() = default;
    LayerNormLayer(ParamStore& ps, const std::string& prefix, int d,
                   double beta_init = 0.0);
    Tensor forward(const Tensor& x) const;
    Tensor gamma, beta;
    double eps = 1e-5;
};

struct Conv {
    Conv() = default;
    Conv(ParamStore& ps, const std::string& prefix, int cin, int cout, int k,
         int stride, int pad, Rng& rng);
    Tensor forward(const Tensor& x) const;
    Tensor w, b;
    int stride = 1, pad = 0;
};

// gate(x) = sigmoid(LN(FC(x))), the query/feature gating unit
struct GateUnit {
    GateUnit() = default;
    // bias_init shifts the pre-sigmoid activation, setting the initial gate level
    GateUnit(ParamStore& ps, const std::string& prefix, int d, Rng& rng,
             double bias_init = 0.0);
    Tensor forward(const Tensor& x) const;
    Linear fc;
    LayerNormLayer ln;
};

struct Mhsa {
    Mhsa() = default;
    Mhsa(ParamStore& ps, const std::string& prefix, int d, int heads, Rng& rng);
    Tensor forward(const Tensor& x) const;  // [N,d] -> [N,d]
    Linear wq, wk, wv, wo;
    int heads = 1, d = 0;
};

struct Ffn {
    Ffn() = default;
    Ffn(ParamStore& ps, const std::string& prefix, int d, int hidden, Rng& rng);
    Tensor forward(const Tensor& x) const;  // FC -> ReLU -> FC
    Linear fc1, fc2;
};

// Post-norm self-attention + FFN block over the query set.
struct QuerySelfUpdate {
    QuerySelfUpdate() = default;
    QuerySelfUpdate(ParamStore& ps, const std::string& prefix, int d, int heads,
                    Rng& rng);
    Tensor forward(const Tensor& q) const;
    Mhsa attn;
    Ffn ffn;
    LayerNormLayer ln1, ln2;
};

}  // namespace attrseg
