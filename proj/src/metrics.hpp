#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "config.hpp"

namespace attrseg {

struct Detection {
    std::vector<uint8_t> mask;  // h*w binary raster
    int h = 0, w = 0;
    int image_id = 0;
    int category = 0;
    double score = 0.0;
    std::vector<int> attributes;  // ids with sigmoid prob > 0.5
};

struct GtInstance {
    std::vector<uint8_t> mask;
    int h = 0, w = 0;
    int image_id = 0;
    int category = 0;
    std::vector<int> attributes;
};

struct EvalReport {
    double ap_iou = 0.0;
    double ap_iou_f1 = 0.0;
    double gap_g = 0.0;
    double ap50 = 0.0, ap75 = 0.0;
    double ap_small = 0.0, ap_medium = 0.0, ap_large = 0.0;
    double mean_matched_f1 = 0.0;  // attribute F1 over IoU-0.5-matched pairs
    std::map<std::string, double> per_category_ap;

    std::string to_table() const;
    std::string to_kv() const;
};

struct EvalOptions {
    // false: average over the 0.50:0.05:0.95 grids; true: single thresholds below
    bool single_threshold = false;
    double iou_thr = 0.5;
    double f1_thr = 0.5;
};

// |a&b| / |a|b|; 0 when both empty
double mask_iou(const std::vector<uint8_t>& a, const std::vector<uint8_t>& b);

// 2PR/(P+R) over id sets; 1 when both empty, 0 when exactly one is
double attribute_f1(const std::vector<int>& pred, const std::vector<int>& gt);

struct TpRule {
    double t_iou = 0.5;
    double t_f1 = 0.0;
    bool use_f1 = false;
};

// COCO-style AP over a single category with 101-point interpolation; greedy
// score-order matching, each ground truth usable once.
double average_precision(std::vector<Detection> dets,
                         const std::vector<GtInstance>& gts, const TpRule& rule);

EvalReport eval_report(const std::vector<Detection>& dets,
                       const std::vector<GtInstance>& gts, const Vocab& vocab,
                       const EvalOptions& opt = {});

}  // namespace attrseg
