#include "losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace attrseg {

namespace {

Tensor ones_like(const Tensor& t) { return Tensor(t.shape(), 1.0); }

double raw_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

double raw_focal_term(double logit, double y, double alpha, double gamma) {
    double x = std::min(std::max(logit, -kLogitClamp), kLogitClamp);
    double p = raw_sigmoid(x);
    double pt = y > 0.5 ? p : 1.0 - p;
    double at = y > 0.5 ? alpha : 1.0 - alpha;
    return -at * std::pow(1.0 - pt, gamma) * std::log(std::max(pt, 1e-300));
}

// e-maxx Kuhn-Munkres with potentials; requires n <= m, assigns every row
std::vector<int> km_assign(const std::vector<std::vector<double>>& a, int n, int m) {
    const double kInf = 1e18;
    std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(m) + 1, 0.0);
    std::vector<int> p(static_cast<size_t>(m) + 1, 0), way(static_cast<size_t>(m) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<size_t>(m) + 1, kInf);
        std::vector<char> used(static_cast<size_t>(m) + 1, 0);
        do {
            used[static_cast<size_t>(j0)] = 1;
            int i0 = p[static_cast<size_t>(j0)], j1 = -1;
            double delta = kInf;
            for (int j = 1; j <= m; ++j)
                if (!used[static_cast<size_t>(j)]) {
                    double cur = a[static_cast<size_t>(i0) - 1][static_cast<size_t>(j) - 1] -
                                 u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
                    if (cur < minv[static_cast<size_t>(j)]) {
                        minv[static_cast<size_t>(j)] = cur;
                        way[static_cast<size_t>(j)] = j0;
                    }
                    if (minv[static_cast<size_t>(j)] < delta) {
                        delta = minv[static_cast<size_t>(j)];
                        j1 = j;
                    }
                }
            for (int j = 0; j <= m; ++j)
                if (used[static_cast<size_t>(j)]) {
                    u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
                    v[static_cast<size_t>(j)] -= delta;
                } else {
                    minv[static_cast<size_t>(j)] -= delta;
                }
            j0 = j1;
        } while (p[static_cast<size_t>(j0)] != 0);
        do {
            int j1 = way[static_cast<size_t>(j0)];
            p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> row_to_col(static_cast<size_t>(n), -1);
    for (int j = 1; j <= m; ++j)
        if (p[static_cast<size_t>(j)] > 0)
            row_to_col[static_cast<size_t>(p[static_cast<size_t>(j)]) - 1] = j - 1;
    return row_to_col;
}

}  // namespace

Tensor focal_loss(const Tensor& logits, const Tensor& targets, double alpha,
                  double gamma) {
    if (logits.shape() != targets.shape())
        throw std::invalid_argument("focal_loss shape mismatch: " +
                                    shape_str(logits.shape()) + " vs " +
                                    shape_str(targets.shape()));
    Tensor ones = ones_like(logits);
    Tensor p = sigmoid(clamp(logits, -kLogitClamp, kLogitClamp));
    Tensor y = targets;  // constants
    Tensor pt = add(mul(p, y), mul(sub(ones, p), sub(ones, y)));
    // alpha_t as a constant tensor
    std::vector<double> at(y.data().size());
    for (size_t i = 0; i < at.size(); ++i)
        at[i] = y.data()[i] > 0.5 ? alpha : 1.0 - alpha;
    Tensor at_t = Tensor::from_data(y.shape(), std::move(at));
    Tensor term = mul(at_t, mul(pow_scalar(sub(ones, pt), gamma), log_guarded(pt)));
    return scale(reduce_mean(term), -1.0);
}

Tensor dice_loss(const Tensor& mask_logits, const Tensor& gt_mask, double eps) {
    if (mask_logits.shape() != gt_mask.shape())
        throw std::invalid_argument("dice_loss shape mismatch: " +
                                    shape_str(mask_logits.shape()) + " vs " +
                                    shape_str(gt_mask.shape()));
    Tensor p = sigmoid(clamp(mask_logits, -kLogitClamp, kLogitClamp));
    Tensor inter = reduce_sum(mul(p, gt_mask));
    Tensor denom = add(reduce_sum(p), reduce_sum(gt_mask));
    Tensor frac = mul(add_scalar(scale(inter, 2.0), eps),
                      pow_scalar(add_scalar(denom, eps), -1.0));
    return add_scalar(scale(frac, -1.0), 1.0);
}

Tensor attribute_bce(const Tensor& attr_logits, const Tensor& gt_attrs) {
    if (attr_logits.shape() != gt_attrs.shape())
        throw std::invalid_argument("attribute_bce shape mismatch");
    Tensor ones = ones_like(attr_logits);
    Tensor p = sigmoid(clamp(attr_logits, -kLogitClamp, kLogitClamp));
    Tensor term = add(mul(gt_attrs, log_guarded(p)),
                      mul(sub(ones, gt_attrs), log_guarded(sub(ones, p))));
    return scale(reduce_mean(term), -1.0);
}

std::vector<std::vector<double>> match_cost(const StagePrediction& stage,
                                            const std::vector<InstanceTarget>& gts,
                                            double lambda_cls, double lambda_mask) {
    int n = stage.mask_logits.dim(0);
    int h = stage.mask_logits.dim(1), w = stage.mask_logits.dim(2);
    int c = stage.class_logits.dim(1);
    const auto& mlog = stage.mask_logits.data();
    const auto& clog = stage.class_logits.data();

    std::vector<std::vector<double>> cost(static_cast<size_t>(n),
                                          std::vector<double>(gts.size(), 0.0));
    for (size_t g = 0; g < gts.size(); ++g) {
        const auto& gt = gts[g];
        if (gt.h != h || gt.w != w)
            throw std::invalid_argument("gt raster extent mismatch in match_cost");
        for (int q = 0; q < n; ++q) {
            double cls_cost = 0.0;
            for (int k = 0; k < c; ++k)
                cls_cost += raw_focal_term(clog[static_cast<size_t>(q * c + k)],
                                           k == gt.category ? 1.0 : 0.0, 0.25, 2.0);
            cls_cost /= c;

            double mask_cost = 0.0;
            double inter = 0.0, psum = 0.0, gsum = 0.0;
            const double* row = mlog.data() + static_cast<size_t>(q) * h * w;
            for (int px = 0; px < h * w; ++px) {
                double y = gt.mask[static_cast<size_t>(px)] ? 1.0 : 0.0;
                mask_cost += raw_focal_term(row[px], y, 0.25, 2.0);
                double p = raw_sigmoid(
                    std::min(std::max(row[px], -kLogitClamp), kLogitClamp));
                inter += p * y;
                psum += p;
                gsum += y;
            }
            mask_cost /= h * w;
            double dice = 1.0 - (2.0 * inter + 1.0) / (psum + gsum + 1.0);
            cost[static_cast<size_t>(q)][g] =
                lambda_cls * cls_cost + lambda_mask * (mask_cost + dice);
        }
    }
    return cost;
}

MatchAssignment hungarian(const std::vector<std::vector<double>>& cost) {
    MatchAssignment out;
    int n = static_cast<int>(cost.size());
    int m = n > 0 ? static_cast<int>(cost[0].size()) : 0;
    if (n == 0 || m == 0) {
        for (int q = 0; q < n; ++q) out.unmatched_queries.push_back(q);
        return out;
    }
    for (const auto& row : cost)
        for (double v : row)
            if (!std::isfinite(v)) throw std::invalid_argument("non-finite cost");

    if (n <= m) {
        auto r2c = km_assign(cost, n, m);
        for (int q = 0; q < n; ++q) out.pairs.emplace_back(q, r2c[static_cast<size_t>(q)]);
    } else {
        std::vector<std::vector<double>> t(static_cast<size_t>(m),
                                           std::vector<double>(static_cast<size_t>(n)));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) t[static_cast<size_t>(j)][static_cast<size_t>(i)] = cost[static_cast<size_t>(i)][static_cast<size_t>(j)];
        auto g2q = km_assign(t, m, n);
        for (int g = 0; g < m; ++g) out.pairs.emplace_back(g2q[static_cast<size_t>(g)], g);
        std::sort(out.pairs.begin(), out.pairs.end());
    }
    std::vector<char> matched(static_cast<size_t>(n), 0);
    for (auto& [q, g] : out.pairs) matched[static_cast<size_t>(q)] = 1;
    for (int q = 0; q < n; ++q)
        if (!matched[static_cast<size_t>(q)]) out.unmatched_queries.push_back(q);
    return out;
}

std::pair<Tensor, LossBreakdown> total_loss(const std::vector<StagePrediction>& stages,
                                            const std::vector<InstanceTarget>& gts,
                                            const RunConfig& cfg) {
    if (stages.empty()) throw std::invalid_argument("total_loss needs >= 1 stage");
    int num_classes = cfg.vocab.num_categories();
    int num_attrs = cfg.vocab.num_attributes();

    // constant target tensors, shared across stages
    std::vector<Tensor> gt_masks, gt_attr_vecs;
    for (const auto& gt : gts) {
        std::vector<double> md(gt.mask.begin(), gt.mask.end());
        gt_masks.push_back(Tensor::from_data({1, gt.h, gt.w}, std::move(md)));
        std::vector<double> av(static_cast<size_t>(num_attrs), 0.0);
        for (int a : gt.attributes) av[static_cast<size_t>(a)] = 1.0;
        gt_attr_vecs.push_back(Tensor::from_data({1, num_attrs}, std::move(av)));
    }

    LossBreakdown bd;
    Tensor total;
    for (const auto& stage : stages) {
        int n = stage.class_logits.dim(0);
        MatchAssignment assign =
            hungarian(match_cost(stage, gts, cfg.lambda_cls, cfg.lambda_mask));

        std::vector<double> cls_target(static_cast<size_t>(n) * num_classes, 0.0);
        for (auto& [q, g] : assign.pairs)
            cls_target[static_cast<size_t>(q) * num_classes +
                       gts[static_cast<size_t>(g)].category] = 1.0;
        Tensor l_cls = focal_loss(
            stage.class_logits,
            Tensor::from_data({n, num_classes}, std::move(cls_target)));
        // renormalize from per-element mean to per-instance mean so the signal
        // that separates matched from unmatched queries does not shrink with N
        l_cls = scale(l_cls, static_cast<double>(n) * num_classes /
                                 std::max<size_t>(1, gts.size()));

        Tensor l_mask, l_atr;
        if (!assign.pairs.empty()) {
            for (auto& [q, g] : assign.pairs) {
                Tensor mrow = slice(stage.mask_logits, 0, q, q + 1);
                Tensor pair_mask = add(focal_loss(mrow, gt_masks[static_cast<size_t>(g)]),
                                       dice_loss(mrow, gt_masks[static_cast<size_t>(g)]));
                Tensor arow = slice(stage.attr_logits, 0, q, q + 1);
                Tensor pair_atr = attribute_bce(arow, gt_attr_vecs[static_cast<size_t>(g)]);
                l_mask = l_mask.defined() ? add(l_mask, pair_mask) : pair_mask;
                l_atr = l_atr.defined() ? add(l_atr, pair_atr) : pair_atr;
            }
            double inv = 1.0 / static_cast<double>(assign.pairs.size());
            l_mask = scale(l_mask, inv);
            l_atr = scale(l_atr, inv);
        } else {
            l_mask = Tensor::scalar(0.0);
            l_atr = Tensor::scalar(0.0);
        }

        bd.l_cls.push_back(l_cls.value());
        bd.l_mask.push_back(l_mask.value());
        bd.l_atr.push_back(l_atr.value());

        Tensor stage_total = add(add(scale(l_cls, cfg.lambda_cls), scale(l_mask, cfg.lambda_mask)),
                                 scale(l_atr, cfg.lambda_atr));
        total = total.defined() ? add(total, stage_total) : stage_total;
    }
    bd.total = total.value();
    return {total, bd};
}

}  // namespace attrseg
