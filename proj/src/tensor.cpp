#include "tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <unordered_set>

namespace attrseg {

namespace {

std::atomic<uint64_t> g_seq{1};

std::vector<int> row_major_strides(const Shape& s) {
    std::vector<int> st(s.size());
    int acc = 1;
    for (int i = static_cast<int>(s.size()) - 1; i >= 0; --i) {
        st[static_cast<size_t>(i)] = acc;
        acc *= s[static_cast<size_t>(i)];
    }
    return st;
}

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

void check(bool ok, const std::string& msg) {
    if (!ok) fail(msg);
}

// Strides of `in` viewed against broadcast shape `out` (right-aligned);
// broadcast axes get stride 0.
std::vector<int> broadcast_strides(const Shape& in, const Shape& out) {
    std::vector<int> st(out.size(), 0);
    auto in_st = row_major_strides(in);
    int off = static_cast<int>(out.size()) - static_cast<int>(in.size());
    for (size_t i = 0; i < in.size(); ++i) {
        size_t oi = static_cast<size_t>(off) + i;
        if (in[i] == out[oi])
            st[oi] = in_st[i];
        else if (in[i] == 1)
            st[oi] = 0;
        else
            fail("broadcast mismatch: " + shape_str(in) + " vs " + shape_str(out));
    }
    return st;
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
    size_t r = std::max(a.size(), b.size());
    Shape out(r);
    for (size_t i = 0; i < r; ++i) {
        int da = i < r - a.size() ? 1 : a[i - (r - a.size())];
        int db = i < r - b.size() ? 1 : b[i - (r - b.size())];
        check(da == db || da == 1 || db == 1,
              "incompatible shapes " + shape_str(a) + " and " + shape_str(b));
        out[i] = std::max(da, db);
    }
    return out;
}

using NodePtr = std::shared_ptr<TensorNode>;

Tensor make_node(Shape shape, std::vector<double> data,
                 const std::vector<Tensor>& parents,
                 std::function<void(TensorNode&)> bw) {
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    n->seq = g_seq.fetch_add(1);
    bool rg = false;
    for (const auto& p : parents) rg = rg || p.requires_grad();
    if (rg) {
        n->requires_grad = true;
        for (const auto& p : parents) n->parents.push_back(p.node());
        n->backward_fn = std::move(bw);
    }
    return Tensor::wrap(n);
}

// axis decomposition helpers: shape = [outer, shape[axis], inner]
int outer_count(const Shape& s, int axis) {
    int o = 1;
    for (int i = 0; i < axis; ++i) o *= s[static_cast<size_t>(i)];
    return o;
}
int inner_count(const Shape& s, int axis) {
    int in = 1;
    for (size_t i = static_cast<size_t>(axis) + 1; i < s.size(); ++i) in *= s[i];
    return in;
}

}  // namespace

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

int shape_numel(const Shape& s) {
    int n = 1;
    for (int d : s) {
        check(d > 0, "non-positive extent in " + shape_str(s));
        n *= d;
    }
    return n;
}

Tensor::Tensor(Shape shape, double fill, bool requires_grad) {
    int n = shape_numel(shape);
    node_ = std::make_shared<TensorNode>();
    node_->shape = std::move(shape);
    node_->data.assign(static_cast<size_t>(n), fill);
    node_->requires_grad = requires_grad;
    node_->seq = g_seq.fetch_add(1);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    check(static_cast<size_t>(shape_numel(shape)) == data.size(),
          "data length does not match shape " + shape_str(shape));
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    n->requires_grad = requires_grad;
    n->seq = g_seq.fetch_add(1);
    return wrap(n);
}

Tensor Tensor::scalar(double v) { return from_data({1}, {v}); }

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev, bool requires_grad) {
    int n = shape_numel(shape);
    std::vector<double> d(static_cast<size_t>(n));
    for (auto& v : d) v = rng.normal() * stddev;
    return from_data(std::move(shape), std::move(d), requires_grad);
}

const std::vector<double>& Tensor::grad() const {
    check(!node_->grad.empty(), "grad not populated (run backward first)");
    return node_->grad;
}

double Tensor::value() const {
    check(numel() == 1, "value() requires a scalar tensor, got " + shape_str(shape()));
    return node_->data[0];
}

Tensor Tensor::detach() const {
    return from_data(node_->shape, node_->data, false);
}

Tensor Tensor::wrap(std::shared_ptr<TensorNode> n) {
    Tensor t;
    t.node_ = std::move(n);
    return t;
}

// ---------------------------------------------------------------------------

namespace {

enum class BinOp { Add, Sub, Mul };

Tensor binary(const Tensor& a, const Tensor& b, BinOp op) {
    Shape os = broadcast_shape(a.shape(), b.shape());
    int n = shape_numel(os);
    auto ost = row_major_strides(os);
    auto ast = broadcast_strides(a.shape(), os);
    auto bst = broadcast_strides(b.shape(), os);
    const auto& ad = a.data();
    const auto& bd = b.data();
    std::vector<double> out(static_cast<size_t>(n));

    bool same = a.shape() == b.shape();
    if (same) {
        for (int i = 0; i < n; ++i) {
            double x = ad[static_cast<size_t>(i)], y = bd[static_cast<size_t>(i)];
            out[static_cast<size_t>(i)] =
                op == BinOp::Add ? x + y : (op == BinOp::Sub ? x - y : x * y);
        }
    } else {
        std::vector<int> idx(os.size(), 0);
        for (int i = 0; i < n; ++i) {
            int ao = 0, bo = 0;
            int rem = i;
            for (size_t d = 0; d < os.size(); ++d) {
                int id = rem / ost[d];
                rem %= ost[d];
                ao += id * ast[d];
                bo += id * bst[d];
            }
            double x = ad[static_cast<size_t>(ao)], y = bd[static_cast<size_t>(bo)];
            out[static_cast<size_t>(i)] =
                op == BinOp::Add ? x + y : (op == BinOp::Sub ? x - y : x * y);
        }
    }

    auto an = a.node();
    auto bn = b.node();
    return make_node(os, std::move(out), {a, b}, [an, bn, os, op](TensorNode& o) {
        auto ost2 = row_major_strides(os);
        auto ast2 = broadcast_strides(an->shape, os);
        auto bst2 = broadcast_strides(bn->shape, os);
        int n2 = static_cast<int>(o.data.size());
        bool ga = an->requires_grad, gb = bn->requires_grad;
        if (ga) an->ensure_grad();
        if (gb) bn->ensure_grad();
        for (int i = 0; i < n2; ++i) {
            int ao = 0, bo = 0;
            int rem = i;
            for (size_t d = 0; d < os.size(); ++d) {
                int id = rem / ost2[d];
                rem %= ost2[d];
                ao += id * ast2[d];
                bo += id * bst2[d];
            }
            double g = o.grad[static_cast<size_t>(i)];
            switch (op) {
                case BinOp::Add:
                    if (ga) an->grad[static_cast<size_t>(ao)] += g;
                    if (gb) bn->grad[static_cast<size_t>(bo)] += g;
                    break;
                case BinOp::Sub:
                    if (ga) an->grad[static_cast<size_t>(ao)] += g;
                    if (gb) bn->grad[static_cast<size_t>(bo)] -= g;
                    break;
                case BinOp::Mul:
                    if (ga)
                        an->grad[static_cast<size_t>(ao)] +=
                            g * bn->data[static_cast<size_t>(bo)];
                    if (gb)
                        bn->grad[static_cast<size_t>(bo)] +=
                            g * an->data[static_cast<size_t>(ao)];
                    break;
            }
        }
    });
}

Tensor unary(const Tensor& a, const std::function<double(double)>& f,
             const std::function<double(double, double)>& df /* (x, y) -> dy/dx */) {
    const auto& ad = a.data();
    std::vector<double> out(ad.size());
    for (size_t i = 0; i < ad.size(); ++i) out[i] = f(ad[i]);
    auto an = a.node();
    return make_node(a.shape(), std::move(out), {a}, [an, df](TensorNode& o) {
        an->ensure_grad();
        for (size_t i = 0; i < o.data.size(); ++i)
            an->grad[i] += o.grad[i] * df(an->data[i], o.data[i]);
    });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::Add); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::Sub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::Mul); }

Tensor scale(const Tensor& a, double c) {
    return unary(a, [c](double x) { return c * x; },
                 [c](double, double) { return c; });
}

Tensor add_scalar(const Tensor& a, double c) {
    return unary(a, [c](double x) { return x + c; },
                 [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& a) {
    return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
                 [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
    return unary(a,
                 [](double x) {
                     if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
                     double e = std::exp(x);
                     return e / (1.0 + e);
                 },
                 [](double, double y) { return y * (1.0 - y); });
}

Tensor log_guarded(const Tensor& a) {
    constexpr double kFloor = 1e-300;
    return unary(a, [=](double x) { return std::log(std::max(x, kFloor)); },
                 [=](double x, double) { return x > kFloor ? 1.0 / x : 0.0; });
}

Tensor pow_scalar(const Tensor& a, double p) {
    return unary(a, [p](double x) { return std::pow(x, p); },
                 [p](double x, double) {
                     if (x == 0.0 && p < 1.0) return 0.0;
                     return p * std::pow(x, p - 1.0);
                 });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    return unary(a, [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
                 [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    check(a.rank() == 2 && b.rank() == 2,
          "matmul requires rank-2 inputs, got " + shape_str(a.shape()) + " and " +
              shape_str(b.shape()));
    int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    check(k == k2, "matmul inner extents differ: " + shape_str(a.shape()) + " x " +
                       shape_str(b.shape()));
    const double* ad = a.data().data();
    const double* bd = b.data().data();
    std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
            double av = ad[i * k + p];
            if (av == 0.0) continue;
            const double* brow = bd + p * n;
            double* orow = out.data() + i * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }

    auto an = a.node();
    auto bn = b.node();
    return make_node({m, n}, std::move(out), {a, b}, [an, bn, m, k, n](TensorNode& o) {
        const double* g = o.grad.data();
        if (an->requires_grad) {
            an->ensure_grad();
            const double* bd2 = bn->data.data();
            for (int i = 0; i < m; ++i)
                for (int p = 0; p < k; ++p) {
                    double acc = 0.0;
                    const double* grow = g + i * n;
                    const double* brow = bd2 + p * n;
                    for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    an->grad[static_cast<size_t>(i * k + p)] += acc;
                }
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            const double* ad2 = an->data.data();
            for (int i = 0; i < m; ++i) {
                const double* grow = g + i * n;
                for (int p = 0; p < k; ++p) {
                    double av = ad2[i * k + p];
                    if (av == 0.0) continue;
                    double* brow = bn->grad.data() + p * n;
                    for (int j = 0; j < n; ++j) brow[j] += av * grow[j];
                }
            }
        }
    });
}

Tensor transpose2d(const Tensor& a) {
    check(a.rank() == 2, "transpose2d requires rank 2");
    int m = a.dim(0), n = a.dim(1);
    std::vector<double> out(static_cast<size_t>(m) * n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out[static_cast<size_t>(j * m + i)] = a.data()[static_cast<size_t>(i * n + j)];
    auto an = a.node();
    return make_node({n, m}, std::move(out), {a}, [an, m, n](TensorNode& o) {
        an->ensure_grad();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                an->grad[static_cast<size_t>(i * n + j)] +=
                    o.grad[static_cast<size_t>(j * m + i)];
    });
}

Tensor reshape(const Tensor& a, Shape shape) {
    check(shape_numel(shape) == a.numel(),
          "reshape " + shape_str(a.shape()) + " -> " + shape_str(shape) +
              " changes element count");
    auto an = a.node();
    std::vector<double> out = a.data();
    return make_node(std::move(shape), std::move(out), {a}, [an](TensorNode& o) {
        an->ensure_grad();
        for (size_t i = 0; i < o.data.size(); ++i) an->grad[i] += o.grad[i];
    });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    check(!parts.empty(), "concat of zero tensors");
    Shape s = parts[0].shape();
    check(axis >= 0 && axis < static_cast<int>(s.size()), "concat axis out of range");
    int total_axis = 0;
    for (const auto& p : parts) {
        check(p.rank() == static_cast<int>(s.size()), "concat rank mismatch");
        for (int d = 0; d < p.rank(); ++d)
            check(d == axis || p.dim(d) == s[static_cast<size_t>(d)],
                  "concat shape mismatch off-axis");
        total_axis += p.dim(axis);
    }
    Shape os = s;
    os[static_cast<size_t>(axis)] = total_axis;
    int outer = outer_count(os, axis);
    int inner = inner_count(os, axis);
    std::vector<double> out(static_cast<size_t>(shape_numel(os)));
    int at = 0;
    std::vector<int> offsets;
    for (const auto& p : parts) {
        offsets.push_back(at);
        int pa = p.dim(axis);
        for (int o = 0; o < outer; ++o)
            std::memcpy(out.data() + (static_cast<size_t>(o) * total_axis + at) * inner,
                        p.data().data() + static_cast<size_t>(o) * pa * inner,
                        sizeof(double) * static_cast<size_t>(pa) * inner);
        at += pa;
    }
    std::vector<NodePtr> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    return make_node(os, std::move(out), parts,
                     [nodes, offsets, outer, inner, total_axis](TensorNode& o) {
                         for (size_t pi = 0; pi < nodes.size(); ++pi) {
                             auto& pn = nodes[pi];
                             if (!pn->requires_grad) continue;
                             pn->ensure_grad();
                             int axis_extent =
                                 static_cast<int>(pn->data.size()) / (outer * inner);
                             for (int ou = 0; ou < outer; ++ou) {
                                 const double* src =
                                     o.grad.data() +
                                     (static_cast<size_t>(ou) * total_axis + offsets[pi]) *
                                         inner;
                                 double* dst = pn->grad.data() +
                                               static_cast<size_t>(ou) * axis_extent * inner;
                                 for (int t = 0; t < axis_extent * inner; ++t) dst[t] += src[t];
                             }
                         }
                     });
}

Tensor slice(const Tensor& a, int axis, int start, int end) {
    check(axis >= 0 && axis < a.rank(), "slice axis out of range");
    check(0 <= start && start < end && end <= a.dim(axis), "slice bounds invalid");
    Shape os = a.shape();
    os[static_cast<size_t>(axis)] = end - start;
    int outer = outer_count(a.shape(), axis);
    int inner = inner_count(a.shape(), axis);
    int ae = a.dim(axis), se = end - start;
    std::vector<double> out(static_cast<size_t>(shape_numel(os)));
    for (int o = 0; o < outer; ++o)
        std::memcpy(out.data() + static_cast<size_t>(o) * se * inner,
                    a.data().data() + (static_cast<size_t>(o) * ae + start) * inner,
                    sizeof(double) * static_cast<size_t>(se) * inner);
    auto an = a.node();
    return make_node(os, std::move(out), {a},
                     [an, outer, inner, ae, se, start](TensorNode& o) {
                         an->ensure_grad();
                         for (int ou = 0; ou < outer; ++ou) {
                             const double* src =
                                 o.grad.data() + static_cast<size_t>(ou) * se * inner;
                             double* dst = an->grad.data() +
                                           (static_cast<size_t>(ou) * ae + start) * inner;
                             for (int t = 0; t < se * inner; ++t) dst[t] += src[t];
                         }
                     });
}

Tensor softmax(const Tensor& a, int axis) {
    check(axis >= 0 && axis < a.rank(), "softmax axis out of range");
    int outer = outer_count(a.shape(), axis);
    int inner = inner_count(a.shape(), axis);
    int n = a.dim(axis);
    std::vector<double> out(a.data().size());
    const auto& ad = a.data();
    for (int o = 0; o < outer; ++o)
        for (int in = 0; in < inner; ++in) {
            auto at = [&](int i) { return (static_cast<size_t>(o) * n + i) * inner + in; };
            double mx = ad[at(0)];
            for (int i = 1; i < n; ++i) mx = std::max(mx, ad[at(i)]);
            double sum = 0.0;
            for (int i = 0; i < n; ++i) {
                double e = std::exp(ad[at(i)] - mx);
                out[at(i)] = e;
                sum += e;
            }
            for (int i = 0; i < n; ++i) out[at(i)] /= sum;
        }
    auto an = a.node();
    return make_node(a.shape(), std::move(out), {a},
                     [an, outer, inner, n](TensorNode& o) {
                         an->ensure_grad();
                         for (int ou = 0; ou < outer; ++ou)
                             for (int in = 0; in < inner; ++in) {
                                 auto at = [&](int i) {
                                     return (static_cast<size_t>(ou) * n + i) * inner + in;
                                 };
                                 double dot = 0.0;
                                 for (int i = 0; i < n; ++i)
                                     dot += o.grad[at(i)] * o.data[at(i)];
                                 for (int i = 0; i < n; ++i)
                                     an->grad[at(i)] +=
                                         o.data[at(i)] * (o.grad[at(i)] - dot);
                             }
                     });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
    check(x.rank() >= 1, "layer_norm needs rank >= 1");
    int d = x.dim(x.rank() - 1);
    check(gamma.rank() == 1 && gamma.dim(0) == d, "gamma must be [d]");
    check(beta.rank() == 1 && beta.dim(0) == d, "beta must be [d]");
    int rows = x.numel() / d;
    const auto& xd = x.data();
    const auto& gd = gamma.data();
    const auto& bd = beta.data();
    std::vector<double> out(xd.size());
    std::vector<double> xhat(xd.size());
    std::vector<double> inv_std(static_cast<size_t>(rows));
    for (int r = 0; r < rows; ++r) {
        const double* row = xd.data() + static_cast<size_t>(r) * d;
        double mu = 0.0;
        for (int i = 0; i < d; ++i) mu += row[i];
        mu /= d;
        double var = 0.0;
        for (int i = 0; i < d; ++i) var += (row[i] - mu) * (row[i] - mu);
        var /= d;
        double is = 1.0 / std::sqrt(var + eps);
        inv_std[static_cast<size_t>(r)] = is;
        for (int i = 0; i < d; ++i) {
            double xh = (row[i] - mu) * is;
            xhat[static_cast<size_t>(r) * d + i] = xh;
            out[static_cast<size_t>(r) * d + i] = xh * gd[static_cast<size_t>(i)] +
                                                  bd[static_cast<size_t>(i)];
        }
    }
    auto xn = x.node();
    auto gn = gamma.node();
    auto bn = beta.node();
    return make_node(x.shape(), std::move(out), {x, gamma, beta},
                     [xn, gn, bn, rows, d, xhat = std::move(xhat),
                      inv_std = std::move(inv_std)](TensorNode& o) {
                         if (gn->requires_grad) gn->ensure_grad();
                         if (bn->requires_grad) bn->ensure_grad();
                         if (xn->requires_grad) xn->ensure_grad();
                         for (int r = 0; r < rows; ++r) {
                             const double* g = o.grad.data() + static_cast<size_t>(r) * d;
                             const double* xh = xhat.data() + static_cast<size_t>(r) * d;
                             if (gn->requires_grad || bn->requires_grad)
                                 for (int i = 0; i < d; ++i) {
                                     if (gn->requires_grad)
                                         gn->grad[static_cast<size_t>(i)] += g[i] * xh[i];
                                     if (bn->requires_grad)
                                         bn->grad[static_cast<size_t>(i)] += g[i];
                                 }
                             if (!xn->requires_grad) continue;
                             double m1 = 0.0, m2 = 0.0;
                             for (int i = 0; i < d; ++i) {
                                 double dxh = g[i] * gn->data[static_cast<size_t>(i)];
                                 m1 += dxh;
                                 m2 += dxh * xh[i];
                             }
                             m1 /= d;
                             m2 /= d;
                             double is = inv_std[static_cast<size_t>(r)];
                             for (int i = 0; i < d; ++i) {
                                 double dxh = g[i] * gn->data[static_cast<size_t>(i)];
                                 xn->grad[static_cast<size_t>(r) * d + i] +=
                                     is * (dxh - m1 - xh[i] * m2);
                             }
                         }
                     });
}

Tensor reduce_sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    auto an = a.node();
    return make_node({1}, {s}, {a}, [an](TensorNode& o) {
        an->ensure_grad();
        double g = o.grad[0];
        for (auto& v : an->grad) v += g;
    });
}

Tensor reduce_mean(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    double inv = 1.0 / static_cast<double>(a.numel());
    auto an = a.node();
    return make_node({1}, {s * inv}, {a}, [an, inv](TensorNode& o) {
        an->ensure_grad();
        double g = o.grad[0] * inv;
        for (auto& v : an->grad) v += g;
    });
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
              int pad) {
    check(x.rank() == 3, "conv2d input must be [C,H,W]");
    check(w.rank() == 4, "conv2d weight must be [K,C,s,s]");
    int c = x.dim(0), h = x.dim(1), wd = x.dim(2);
    int k = w.dim(0), wc = w.dim(1), s = w.dim(2);
    check(w.dim(3) == s, "conv2d kernel must be square");
    check(wc == c, "conv2d channel mismatch: input " + shape_str(x.shape()) +
                       " weight " + shape_str(w.shape()));
    check((h + 2 * pad - s) % stride == 0 && (wd + 2 * pad - s) % stride == 0,
          "conv2d output extent not integral");
    int ho = (h + 2 * pad - s) / stride + 1;
    int wo = (wd + 2 * pad - s) / stride + 1;
    check(ho >= 1 && wo >= 1, "conv2d output empty");
    bool has_bias = b.defined();
    if (has_bias) check(b.rank() == 1 && b.dim(0) == k, "conv2d bias must be [K]");

    const double* xd = x.data().data();
    const double* wdp = w.data().data();
    std::vector<double> out(static_cast<size_t>(k) * ho * wo, 0.0);
    for (int oc = 0; oc < k; ++oc) {
        double bias = has_bias ? b.data()[static_cast<size_t>(oc)] : 0.0;
        for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
                double acc = bias;
                for (int ic = 0; ic < c; ++ic)
                    for (int ky = 0; ky < s; ++ky) {
                        int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= h) continue;
                        const double* xrow = xd + (static_cast<size_t>(ic) * h + iy) * wd;
                        const double* wrow =
                            wdp + ((static_cast<size_t>(oc) * c + ic) * s + ky) * s;
                        for (int kx = 0; kx < s; ++kx) {
                            int ix = ox * stride + kx - pad;
                            if (ix < 0 || ix >= wd) continue;
                            acc += xrow[ix] * wrow[kx];
                        }
                    }
                out[(static_cast<size_t>(oc) * ho + oy) * wo + ox] = acc;
            }
    }

    auto xn = x.node();
    auto wn = w.node();
    std::vector<Tensor> parents = {x, w};
    NodePtr bnode;
    if (has_bias) {
        parents.push_back(b);
        bnode = b.node();
    }
    return make_node(
        {k, ho, wo}, std::move(out), parents,
        [xn, wn, bnode, c, h, wd, k, s, stride, pad, ho, wo](TensorNode& o) {
            if (xn->requires_grad) xn->ensure_grad();
            if (wn->requires_grad) wn->ensure_grad();
            if (bnode && bnode->requires_grad) bnode->ensure_grad();
            const double* g = o.grad.data();
            if (bnode && bnode->requires_grad)
                for (int oc = 0; oc < k; ++oc) {
                    double acc = 0.0;
                    const double* gp = g + static_cast<size_t>(oc) * ho * wo;
                    for (int i = 0; i < ho * wo; ++i) acc += gp[i];
                    bnode->grad[static_cast<size_t>(oc)] += acc;
                }
            for (int oc = 0; oc < k; ++oc)
                for (int oy = 0; oy < ho; ++oy)
                    for (int ox = 0; ox < wo; ++ox) {
                        double go = g[(static_cast<size_t>(oc) * ho + oy) * wo + ox];
                        if (go == 0.0) continue;
                        for (int ic = 0; ic < c; ++ic)
                            for (int ky = 0; ky < s; ++ky) {
                                int iy = oy * stride + ky - pad;
                                if (iy < 0 || iy >= h) continue;
                                for (int kx = 0; kx < s; ++kx) {
                                    int ix = ox * stride + kx - pad;
                                    if (ix < 0 || ix >= wd) continue;
                                    size_t xi = (static_cast<size_t>(ic) * h + iy) * wd + ix;
                                    size_t wi =
                                        ((static_cast<size_t>(oc) * c + ic) * s + ky) * s + kx;
                                    if (xn->requires_grad)
                                        xn->grad[xi] += go * wn->data[wi];
                                    if (wn->requires_grad)
                                        wn->grad[wi] += go * xn->data[xi];
                                }
                            }
                    }
        });
}

Tensor bilinear_resize(const Tensor& x, int h2, int w2) {
    check(x.rank() == 3, "bilinear_resize input must be [C,H,W]");
    check(h2 >= 1 && w2 >= 1, "bilinear_resize target must be positive");
    int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    double sy = static_cast<double>(h) / h2;
    double sx = static_cast<double>(w) / w2;
    // per output pixel: two source rows/cols and lerp weights
    struct Tap {
        int a, b;
        double wb;  // weight of b; weight of a = 1 - wb
    };
    auto make_taps = [](int in, int out, double sc) {
        std::vector<Tap> taps(static_cast<size_t>(out));
        for (int i = 0; i < out; ++i) {
            double src = (i + 0.5) * sc - 0.5;
            if (src < 0.0) src = 0.0;
            if (src > in - 1) src = in - 1;
            int a = static_cast<int>(std::floor(src));
            int b = std::min(a + 1, in - 1);
            taps[static_cast<size_t>(i)] = {a, b, src - a};
        }
        return taps;
    };
    auto ty = make_taps(h, h2, sy);
    auto tx = make_taps(w, w2, sx);

    const double* xd = x.data().data();
    std::vector<double> out(static_cast<size_t>(c) * h2 * w2);
    for (int ch = 0; ch < c; ++ch) {
        const double* plane = xd + static_cast<size_t>(ch) * h * w;
        double* op = out.data() + static_cast<size_t>(ch) * h2 * w2;
        for (int oy = 0; oy < h2; ++oy) {
            const Tap& yt = ty[static_cast<size_t>(oy)];
            for (int ox = 0; ox < w2; ++ox) {
                const Tap& xt = tx[static_cast<size_t>(ox)];
                double top = plane[yt.a * w + xt.a] * (1 - xt.wb) +
                             plane[yt.a * w + xt.b] * xt.wb;
                double bot = plane[yt.b * w + xt.a] * (1 - xt.wb) +
                             plane[yt.b * w + xt.b] * xt.wb;
                op[oy * w2 + ox] = top * (1 - yt.wb) + bot * yt.wb;
            }
        }
    }
    auto xn = x.node();
    return make_node({c, h2, w2}, std::move(out), {x},
                     [xn, c, h, w, h2, w2, ty = std::move(ty),
                      tx = std::move(tx)](TensorNode& o) {
                         xn->ensure_grad();
                         for (int ch = 0; ch < c; ++ch) {
                             double* gp = xn->grad.data() + static_cast<size_t>(ch) * h * w;
                             const double* g =
                                 o.grad.data() + static_cast<size_t>(ch) * h2 * w2;
                             for (int oy = 0; oy < h2; ++oy) {
                                 const Tap& yt = ty[static_cast<size_t>(oy)];
                                 for (int ox = 0; ox < w2; ++ox) {
                                     const Tap& xt = tx[static_cast<size_t>(ox)];
                                     double go = g[oy * w2 + ox];
                                     gp[yt.a * w + xt.a] += go * (1 - yt.wb) * (1 - xt.wb);
                                     gp[yt.a * w + xt.b] += go * (1 - yt.wb) * xt.wb;
                                     gp[yt.b * w + xt.a] += go * yt.wb * (1 - xt.wb);
                                     gp[yt.b * w + xt.b] += go * yt.wb * xt.wb;
                                 }
                             }
                         }
                     });
}

void backward(const Tensor& loss) {
    check(loss.numel() == 1,
          "backward requires a scalar loss, got " + shape_str(loss.shape()));
    auto root = loss.node();
    if (!root->requires_grad) return;

    // reverse recording order == valid topological order
    std::vector<NodePtr> order;
    std::unordered_set<TensorNode*> seen;
    std::vector<NodePtr> stack{root};
    seen.insert(root.get());
    while (!stack.empty()) {
        auto n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (auto& p : n->parents)
            if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p);
    }
    std::sort(order.begin(), order.end(),
              [](const NodePtr& a, const NodePtr& b) { return a->seq > b->seq; });

    root->ensure_grad();
    root->grad[0] = 1.0;
    for (auto& n : order)
        if (n->backward_fn) n->backward_fn(*n);
    // consume the graph; leaves keep their grads
    for (auto& n : order) {
        n->backward_fn = nullptr;
        n->parents.clear();
    }
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                  double h) {
    Tensor xr = Tensor::from_data(x.shape(), x.data(), true);
    Tensor y = f(xr);
    backward(y);
    std::vector<double> ad = xr.grad();

    std::vector<double> base = x.data();
    double worst = 0.0;
    for (size_t i = 0; i < base.size(); ++i) {
        std::vector<double> up = base, dn = base;
        up[i] += h;
        dn[i] -= h;
        double fu = f(Tensor::from_data(x.shape(), std::move(up))).value();
        double fd = f(Tensor::from_data(x.shape(), std::move(dn))).value();
        double fdg = (fu - fd) / (2.0 * h);
        double err = std::abs(ad[i] - fdg) /
                     std::max({1.0, std::abs(ad[i]), std::abs(fdg)});
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace attrseg
