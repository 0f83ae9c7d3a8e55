#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "rng.hpp"

namespace attrseg {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
int shape_numel(const Shape& s);

struct TensorNode {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // allocated lazily during backward
    bool requires_grad = false;
    uint64_t seq = 0;  // recording order, strictly increasing
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward_fn;

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

// Dense row-major tensor of doubles with reverse-mode autodiff. Value
// semantics over a shared node; completed tensors are immutable by
// convention (only leaves are mutated, by the optimizer, between steps).
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);

    static Tensor from_data(Shape shape, std::vector<double> data,
                            bool requires_grad = false);
    static Tensor scalar(double v);
    static Tensor randn(Shape shape, Rng& rng, double stddev,
                        bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int numel() const { return static_cast<int>(node_->data.size()); }
    int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
    int rank() const { return static_cast<int>(node_->shape.size()); }

    std::vector<double>& data() { return node_->data; }
    const std::vector<double>& data() const { return node_->data; }
    const std::vector<double>& grad() const;
    bool has_grad() const { return !node_->grad.empty(); }
    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool rg) { node_->requires_grad = rg; }
    void zero_grad() { node_->grad.assign(node_->data.size(), 0.0); }
    void clear_grad() { node_->grad.clear(); }

    double value() const;  // scalar tensors only

    // Same data, cut from the graph, requires_grad off.
    Tensor detach() const;

    std::shared_ptr<TensorNode> node() const { return node_; }
    static Tensor wrap(std::shared_ptr<TensorNode> n);

private:
    std::shared_ptr<TensorNode> node_;
};

// ---- graph ops (all record gradients when an input requires them) ----

Tensor add(const Tensor& a, const Tensor& b);   // numpy-style broadcasting
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);

Tensor matmul(const Tensor& a, const Tensor& b);      // [m,k]x[k,n]
Tensor transpose2d(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& a, int axis, int start, int end);

Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor log_guarded(const Tensor& a);   // clamps input up to >= 1e-300
Tensor pow_scalar(const Tensor& a, double p);  // a >= 0 expected
Tensor clamp(const Tensor& a, double lo, double hi);  // flat-region gradient 0
Tensor softmax(const Tensor& a, int axis);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps);  // normalizes the last axis

Tensor reduce_sum(const Tensor& a);
Tensor reduce_mean(const Tensor& a);

// x: [C,H,W], w: [K,C,s,s], b: [K] (pass undefined Tensor for no bias)
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
              int pad);
// x: [C,H,W] -> [C,h2,w2], align_corners=false; exact copy at equal size
Tensor bilinear_resize(const Tensor& x, int h2, int w2);

// Shared logit clamp used by every loss before exp/log.
inline constexpr double kLogitClamp = 30.0;

void backward(const Tensor& loss);

// Central-difference check of d f / d x against autodiff. Returns the worst
// relative error over all elements of x; f must return a scalar tensor.
double grad_check(const std::function<Tensor(const Tensor&)>& f,
                  const Tensor& x, double h = 1e-6);

}  // namespace attrseg
