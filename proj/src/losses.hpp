#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "config.hpp"
#include "decoder.hpp"

namespace attrseg {

// Ground truth for one instance, rasterized at the prediction stride.
struct InstanceTarget {
    std::vector<uint8_t> mask;  // h*w binary raster
    int h = 0, w = 0;
    int category = 0;
    std::vector<int> attributes;  // sorted ids
};

struct MatchAssignment {
    std::vector<std::pair<int, int>> pairs;  // (query index, gt index)
    std::vector<int> unmatched_queries;
};

struct LossBreakdown {
    std::vector<double> l_cls, l_mask, l_atr;  // per stage
    double total = 0.0;
};

// mean over elements of -alpha_t (1-p_t)^gamma log p_t, p = sigmoid(logits)
Tensor focal_loss(const Tensor& logits, const Tensor& targets, double alpha = 0.25,
                  double gamma = 2.0);
// 1 - (2 sum(p*g) + eps) / (sum(p) + sum(g) + eps)
Tensor dice_loss(const Tensor& mask_logits, const Tensor& gt_mask, double eps = 1.0);
// mean binary cross-entropy over the attribute vocabulary
Tensor attribute_bce(const Tensor& attr_logits, const Tensor& gt_attrs);

// cost[n][g] = l_cls * focal_cls + l_mask * (focal_mask + dice); plain doubles,
// no gradient flows through the assignment
std::vector<std::vector<double>> match_cost(const StagePrediction& stage,
                                            const std::vector<InstanceTarget>& gts,
                                            double lambda_cls, double lambda_mask);

// Kuhn-Munkres minimum-cost assignment over min(n,m) pairs
MatchAssignment hungarian(const std::vector<std::vector<double>>& cost);

// Per-stage re-matching, per-stage losses combined with the lambda weights and
// summed over stages. Returns the differentiable total plus a value breakdown.
std::pair<Tensor, LossBreakdown> total_loss(const std::vector<StagePrediction>& stages,
                                            const std::vector<InstanceTarget>& gts,
                                            const RunConfig& cfg);

}  // namespace attrseg
