#include "nn.hpp"

#include <cmath>
#include <stdexcept>

namespace attrseg {

Tensor ParamStore::create(const std::string& name, Shape shape, Rng& rng,
                          double stddev) {
    if (has(name)) throw std::invalid_argument("duplicate parameter: " + name);
    Tensor t = Tensor::randn(std::move(shape), rng, stddev, true);
    order_.push_back(name);
    params_.emplace(name, t);
    return t;
}

Tensor ParamStore::create_const(const std::string& name, Shape shape, double fill) {
    if (has(name)) throw std::invalid_argument("duplicate parameter: " + name);
    Tensor t(std::move(shape), fill, true);
    order_.push_back(name);
    params_.emplace(name, t);
    return t;
}

Tensor ParamStore::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::invalid_argument("unknown parameter: " + name);
    return it->second;
}

void ParamStore::zero_grads() {
    for (auto& [name, t] : params_) {
        (void)name;
        const_cast<Tensor&>(t).zero_grad();
    }
}

int ParamStore::total_elements() const {
    int n = 0;
    for (const auto& [name, t] : params_) {
        (void)name;
        n += t.numel();
    }
    return n;
}

static double xavier(int fan_in, int fan_out) {
    return std::sqrt(2.0 / (fan_in + fan_out));
}

Linear::Linear(ParamStore& ps, const std::string& prefix, int in, int out, Rng& rng,
               double w_scale, double b_init) {
    w = ps.create(prefix + ".w", {in, out}, rng, w_scale * xavier(in, out));
    b = ps.create_const(prefix + ".b", {out}, b_init);
}

Tensor Linear::forward(const Tensor& x) const {
    return add(matmul(x, w), reshape(b, {1, b.dim(0)}));
}

LayerNormLayer::LayerNormLayer(ParamStore& ps, const std::string& prefix, int d,
                               double beta_init) {
    gamma = ps.create_const(prefix + ".gamma", {d}, 1.0);
    beta = ps.create_const(prefix + ".beta", {d}, beta_init);
}

Tensor LayerNormLayer::forward(const Tensor& x) const {
    return layer_norm(x, gamma, beta, eps);
}

Conv::Conv(ParamStore& ps, const std::string& prefix, int cin, int cout, int k,
           int stride_, int pad_, Rng& rng)
    : stride(stride_), pad(pad_) {
    w = ps.create(prefix + ".w", {cout, cin, k, k}, rng, xavier(cin * k * k, cout));
    b = ps.create_const(prefix + ".b", {cout}, 0.0);
}

Tensor Conv::forward(const Tensor& x) const {
    return conv2d(x, w, b, stride, pad);
}

GateUnit::GateUnit(ParamStore& ps, const std::string& prefix, int d, Rng& rng,
                   double bias_init) {
    fc = Linear(ps, prefix + ".fc", d, d, rng);
    ln = LayerNormLayer(ps, prefix + ".ln", d, bias_init);
}

Tensor GateUnit::forward(const Tensor& x) const {
    return sigmoid(ln.forward(fc.forward(x)));
}

Mhsa::Mhsa(ParamStore& ps, const std::string& prefix, int d_, int heads_, Rng& rng)
    : heads(heads_), d(d_) {
    if (d % heads != 0)
        throw std::invalid_argument("embed dim " + std::to_string(d) +
                                    " not divisible by head count " +
                                    std::to_string(heads));
    wq = Linear(ps, prefix + ".wq", d, d, rng);
    wk = Linear(ps, prefix + ".wk", d, d, rng);
    wv = Linear(ps, prefix + ".wv", d, d, rng);
    // small output projection keeps the residual block near identity at init,
    // so queries are not homogenized before they specialize
    wo = Linear(ps, prefix + ".wo", d, d, rng, 0.1);
}

Tensor Mhsa::forward(const Tensor& x) const {
    int hd = d / heads;
    double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
    Tensor q = wq.forward(x), k = wk.forward(x), v = wv.forward(x);
    std::vector<Tensor> outs;
    outs.reserve(static_cast<size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        Tensor qh = slice(q, 1, h * hd, (h + 1) * hd);
        Tensor kh = slice(k, 1, h * hd, (h + 1) * hd);
        Tensor vh = slice(v, 1, h * hd, (h + 1) * hd);
        Tensor att = softmax(scale(matmul(qh, transpose2d(kh)), inv_sqrt), 1);
        outs.push_back(matmul(att, vh));
    }
    return wo.forward(concat(outs, 1));
}

Ffn::Ffn(ParamStore& ps, const std::string& prefix, int d, int hidden, Rng& rng) {
    fc1 = Linear(ps, prefix + ".fc1", d, hidden, rng);
    fc2 = Linear(ps, prefix + ".fc2", hidden, d, rng, 0.1);
}

Tensor Ffn::forward(const Tensor& x) const {
    return fc2.forward(relu(fc1.forward(x)));
}

QuerySelfUpdate::QuerySelfUpdate(ParamStore& ps, const std::string& prefix, int d,
                                 int heads, Rng& rng) {
    attn = Mhsa(ps, prefix + ".attn", d, heads, rng);
    ffn = Ffn(ps, prefix + ".ffn", d, 2 * d, rng);
    ln1 = LayerNormLayer(ps, prefix + ".ln1", d);
    ln2 = LayerNormLayer(ps, prefix + ".ln2", d);
}

Tensor QuerySelfUpdate::forward(const Tensor& q) const {
    Tensor a = ln1.forward(add(q, attn.forward(q)));
    return ln2.forward(add(a, ffn.forward(a)));
}

}  // namespace attrseg
