#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace attrseg {

double mask_iou(const std::vector<uint8_t>& a, const std::vector<uint8_t>& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("mask_iou raster extent mismatch");
    long inter = 0, uni = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        bool x = a[i] != 0, y = b[i] != 0;
        inter += x && y;
        uni += x || y;
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double attribute_f1(const std::vector<int>& pred, const std::vector<int>& gt) {
    if (pred.empty() && gt.empty()) return 1.0;
    if (pred.empty() || gt.empty()) return 0.0;
    std::set<int> ps(pred.begin(), pred.end()), gs(gt.begin(), gt.end());
    int tp = 0;
    for (int a : ps) tp += gs.count(a);
    double p = static_cast<double>(tp) / static_cast<double>(ps.size());
    double r = static_cast<double>(tp) / static_cast<double>(gs.size());
    return (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

double average_precision(std::vector<Detection> dets,
                         const std::vector<GtInstance>& gts, const TpRule& rule) {
    if (gts.empty() || dets.empty()) return 0.0;
    std::stable_sort(dets.begin(), dets.end(),
                     [](const Detection& a, const Detection& b) { return a.score > b.score; });

    std::vector<char> gt_used(gts.size(), 0);
    std::vector<char> is_tp(dets.size(), 0);
    for (size_t di = 0; di < dets.size(); ++di) {
        const auto& d = dets[di];
        int best = -1;
        double best_iou = 0.0;
        for (size_t gi = 0; gi < gts.size(); ++gi) {
            const auto& g = gts[gi];
            if (gt_used[gi] || g.image_id != d.image_id) continue;
            if (g.mask.size() != d.mask.size()) continue;
            double iou = mask_iou(d.mask, g.mask);
            if (iou < rule.t_iou) continue;
            if (rule.use_f1 && attribute_f1(d.attributes, g.attributes) < rule.t_f1)
                continue;
            if (iou > best_iou || best < 0) {
                best_iou = iou;
                best = static_cast<int>(gi);
            }
        }
        if (best >= 0) {
            gt_used[static_cast<size_t>(best)] = 1;
            is_tp[di] = 1;
        }
    }

    // precision at each rank, then 101-point interpolated AP
    size_t nd = dets.size();
    std::vector<double> prec(nd), rec(nd);
    int tp = 0;
    for (size_t i = 0; i < nd; ++i) {
        tp += is_tp[i];
        prec[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
        rec[i] = static_cast<double>(tp) / static_cast<double>(gts.size());
    }
    double ap = 0.0;
    for (int k = 0; k <= 100; ++k) {
        double r = k / 100.0;
        double best_p = 0.0;
        for (size_t i = 0; i < nd; ++i)
            if (rec[i] >= r - 1e-12) best_p = std::max(best_p, prec[i]);
        ap += best_p;
    }
    return ap / 101.0;
}

namespace {

const std::vector<double>& threshold_grid() {
    static const std::vector<double> g = {0.50, 0.55, 0.60, 0.65, 0.70,
                                          0.75, 0.80, 0.85, 0.90, 0.95};
    return g;
}

template <typename T>
std::vector<T> of_category(const std::vector<T>& xs, int cat) {
    std::vector<T> out;
    for (const auto& x : xs)
        if (x.category == cat) out.push_back(x);
    return out;
}

double mask_area(const std::vector<uint8_t>& m) {
    double a = 0;
    for (uint8_t v : m) a += v != 0;
    return a;
}

}  // namespace

EvalReport eval_report(const std::vector<Detection>& dets,
                       const std::vector<GtInstance>& gts, const Vocab& vocab,
                       const EvalOptions& opt) {
    EvalReport rep;
    int num_cats = vocab.num_categories();

    std::vector<double> iou_grid =
        opt.single_threshold ? std::vector<double>{opt.iou_thr} : threshold_grid();
    std::vector<double> f1_grid =
        opt.single_threshold ? std::vector<double>{opt.f1_thr} : threshold_grid();

    auto ap_for = [&](const std::vector<Detection>& ds, const std::vector<GtInstance>& gs,
                      bool joint) {
        double acc = 0.0;
        int cnt = 0;
        for (double ti : iou_grid) {
            if (!joint) {
                acc += average_precision(ds, gs, {ti, 0.0, false});
                ++cnt;
            } else {
                for (double tf : f1_grid) {
                    acc += average_precision(ds, gs, {ti, tf, true});
                    ++cnt;
                }
            }
        }
        return cnt ? acc / cnt : 0.0;
    };

    double sum_iou = 0.0, sum_joint = 0.0, sum50 = 0.0, sum75 = 0.0;
    int cats_with_gt = 0, joint_cats = 0;
    for (int c = 0; c < num_cats; ++c) {
        auto ds = of_category(dets, c);
        auto gs = of_category(gts, c);
        if (gs.empty()) continue;
        ++cats_with_gt;
        double ap = ap_for(ds, gs, false);
        rep.per_category_ap[vocab.categories[static_cast<size_t>(c)]] = ap;
        sum_iou += ap;
        sum50 += average_precision(ds, gs, {0.50, 0.0, false});
        sum75 += average_precision(ds, gs, {0.75, 0.0, false});
        // categories without attribute annotations are excluded from the joint metric
        if (!vocab.applicability[static_cast<size_t>(c)].empty()) {
            sum_joint += ap_for(ds, gs, true);
            ++joint_cats;
        }
    }
    if (cats_with_gt) {
        rep.ap_iou = sum_iou / cats_with_gt;
        rep.ap50 = sum50 / cats_with_gt;
        rep.ap75 = sum75 / cats_with_gt;
    }
    if (joint_cats) rep.ap_iou_f1 = sum_joint / joint_cats;
    rep.gap_g = rep.ap_iou - rep.ap_iou_f1;

    // size buckets; COCO's 32^2 / 96^2 boundaries scaled from 640^2 rasters
    double img_area = gts.empty() ? 0.0 : static_cast<double>(gts[0].h) * gts[0].w;
    double s_thr = 32.0 * 32.0 * img_area / (640.0 * 640.0);
    double m_thr = 96.0 * 96.0 * img_area / (640.0 * 640.0);
    auto bucket_ap = [&](double lo, double hi) {
        double acc = 0.0;
        int cnt = 0;
        for (int c = 0; c < num_cats; ++c) {
            std::vector<GtInstance> gs;
            for (const auto& g : of_category(gts, c)) {
                double a = mask_area(g.mask);
                if (a >= lo && a < hi) gs.push_back(g);
            }
            if (gs.empty()) continue;
            std::vector<Detection> ds;
            for (const auto& d : of_category(dets, c)) {
                double a = mask_area(d.mask);
                if (a >= lo && a < hi) ds.push_back(d);
            }
            acc += ap_for(ds, gs, false);
            ++cnt;
        }
        return cnt ? acc / cnt : 0.0;
    };
    rep.ap_small = bucket_ap(0.0, s_thr);
    rep.ap_medium = bucket_ap(s_thr, m_thr);
    rep.ap_large = bucket_ap(m_thr, 1e18);

    // diagnostic: mean attribute F1 over pairs greedily matched at IoU 0.5
    {
        std::vector<Detection> ds = dets;
        std::stable_sort(ds.begin(), ds.end(), [](const Detection& a, const Detection& b) {
            return a.score > b.score;
        });
        std::vector<char> used(gts.size(), 0);
        double f1_sum = 0.0;
        int f1_cnt = 0;
        for (const auto& d : ds) {
            int best = -1;
            double best_iou = 0.5;
            for (size_t gi = 0; gi < gts.size(); ++gi) {
                const auto& g = gts[gi];
                if (used[gi] || g.image_id != d.image_id || g.category != d.category)
                    continue;
                if (g.mask.size() != d.mask.size()) continue;
                double iou = mask_iou(d.mask, g.mask);
                if (iou >= best_iou) {
                    best_iou = iou;
                    best = static_cast<int>(gi);
                }
            }
            if (best >= 0) {
                used[static_cast<size_t>(best)] = 1;
                f1_sum += attribute_f1(d.attributes, gts[static_cast<size_t>(best)].attributes);
                ++f1_cnt;
            }
        }
        rep.mean_matched_f1 = f1_cnt ? f1_sum / f1_cnt : 0.0;
    }
    return rep;
}

std::string EvalReport::to_table() const {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(4);
    os << "metric        value\n";
    os << "AP_IoU        " << ap_iou << "\n";
    os << "AP_IoU+F1     " << ap_iou_f1 << "\n";
    os << "G             " << gap_g << "\n";
    os << "AP50          " << ap50 << "\n";
    os << "AP75          " << ap75 << "\n";
    os << "APs           " << ap_small << "\n";
    os << "APm           " << ap_medium << "\n";
    os << "APl           " << ap_large << "\n";
    os << "matched_F1    " << mean_matched_f1 << "\n";
    for (const auto& [cat, ap] : per_category_ap)
        os << "AP[" << cat << "]  " << ap << "\n";
    return os.str();
}

std::string EvalReport::to_kv() const {
    std::ostringstream os;
    os.precision(17);
    os << "ap_iou=" << ap_iou << "\n";
    os << "ap_iou_f1=" << ap_iou_f1 << "\n";
    os << "gap_g=" << gap_g << "\n";
    os << "ap50=" << ap50 << "\n";
    os << "ap75=" << ap75 << "\n";
    os << "ap_small=" << ap_small << "\n";
    os << "ap_medium=" << ap_medium << "\n";
    os << "ap_large=" << ap_large << "\n";
    os << "mean_matched_f1=" << mean_matched_f1 << "\n";
    for (const auto& [cat, ap] : per_category_ap)
        os << "ap_category." << cat << "=" << ap << "\n";
    return os.str();
}

}  // namespace attrseg
