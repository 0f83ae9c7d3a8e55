// Acceptance harness: one criterion per invocation, selected by argv[1].
// Prints a single "criterion N: PASS/FAIL" line and exits nonzero on failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <sstream>

#include "data.hpp"
#include "train.hpp"

using namespace attrseg;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---- criterion 1: finite-difference audit of every op and the full model ----

bool criterion_gradients(std::string& detail) {
    auto t0 = Clock::now();
    auto entries = run_gradcheck(0);
    double worst = 0.0;
    bool all = true;
    for (const auto& e : entries) {
        worst = std::max(worst, e.err);
        all = all && e.pass;
    }
    double secs = seconds_since(t0);
    std::ostringstream os;
    os << entries.size() << " entries, worst err " << worst << ", " << secs << "s";
    detail = os.str();
    return all && worst < 1e-4 && secs < 60.0;
}

// ---- criterion 2: assignment vs brute force ----

double brute_force_min(const std::vector<std::vector<double>>& cost) {
    int n = static_cast<int>(cost.size());
    int m = static_cast<int>(cost[0].size());
    double best = 1e18;
    if (n <= m) {
        std::vector<int> cols(static_cast<size_t>(m));
        std::iota(cols.begin(), cols.end(), 0);
        do {
            double s = 0;
            for (int i = 0; i < n; ++i) s += cost[static_cast<size_t>(i)][static_cast<size_t>(cols[static_cast<size_t>(i)])];
            best = std::min(best, s);
        } while (std::next_permutation(cols.begin(), cols.end()));
    } else {
        std::vector<int> rows(static_cast<size_t>(n));
        std::iota(rows.begin(), rows.end(), 0);
        do {
            double s = 0;
            for (int j = 0; j < m; ++j) s += cost[static_cast<size_t>(rows[static_cast<size_t>(j)])][static_cast<size_t>(j)];
            best = std::min(best, s);
        } while (std::next_permutation(rows.begin(), rows.end()));
    }
    return best;
}

bool criterion_assignment(std::string& detail) {
    auto t0 = Clock::now();
    Rng rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        int n = 1 + static_cast<int>(rng.uniform_int(7));
        int m = 1 + static_cast<int>(rng.uniform_int(7));
        std::vector<std::vector<double>> cost(static_cast<size_t>(n),
                                              std::vector<double>(static_cast<size_t>(m)));
        for (auto& row : cost)
            for (auto& v : row) v = rng.uniform(-10.0, 10.0);
        auto a = hungarian(cost);
        double total = 0;
        for (auto& [q, g] : a.pairs) total += cost[static_cast<size_t>(q)][static_cast<size_t>(g)];
        if (std::abs(total - brute_force_min(cost)) > 1e-9) {
            detail = "mismatch at trial " + std::to_string(trial);
            return false;
        }
    }
    double secs = seconds_since(t0);
    detail = "200 trials, " + std::to_string(secs) + "s";
    return secs < 10.0;
}

// ---- criterion 3: closed-form loss fixtures ----

bool criterion_loss_fixtures(std::string& detail) {
    double focal = focal_loss(Tensor::scalar(0.0), Tensor::scalar(1.0)).value();
    double focal_want = 0.25 * 0.25 * std::log(2.0);

    Tensor gt = Tensor::from_data({1, 1, 4}, {1, 1, 0, 0});
    Tensor pred = Tensor::from_data({1, 1, 4}, {-60, 60, 60, -60});
    double dice = dice_loss(pred, gt, 0.0).value();

    double bce = attribute_bce(Tensor({1, 4}, 0.0),
                               Tensor::from_data({1, 4}, {1, 0, 1, 0})).value();

    std::ostringstream os;
    os << "focal " << focal << " dice " << dice << " bce " << bce;
    detail = os.str();
    return std::abs(focal - focal_want) < 1e-9 && std::abs(dice - 0.5) < 1e-6 &&
           std::abs(bce - std::log(2.0)) < 1e-9;
}

// ---- criterion 4: AP against an independent PR oracle ----

std::vector<uint8_t> block(int h, int w, int y0, int x0, int bh, int bw) {
    std::vector<uint8_t> m(static_cast<size_t>(h) * w, 0);
    for (int y = y0; y < y0 + bh; ++y)
        for (int x = x0; x < x0 + bw; ++x) m[static_cast<size_t>(y * w + x)] = 1;
    return m;
}

double oracle_ap(std::vector<Detection> dets, const std::vector<GtInstance>& gts,
                 const TpRule& rule) {
    if (dets.empty() || gts.empty()) return 0.0;
    std::stable_sort(dets.begin(), dets.end(),
                     [](const Detection& a, const Detection& b) { return a.score > b.score; });
    std::vector<char> used(gts.size(), 0), tp(dets.size(), 0);
    for (size_t i = 0; i < dets.size(); ++i) {
        double best_iou = -1.0;
        int best = -1;
        for (size_t j = 0; j < gts.size(); ++j) {
            if (used[j] || gts[j].image_id != dets[i].image_id) continue;
            if (gts[j].mask.size() != dets[i].mask.size()) continue;
            double iou = mask_iou(dets[i].mask, gts[j].mask);
            bool ok = iou >= rule.t_iou &&
                      (!rule.use_f1 ||
                       attribute_f1(dets[i].attributes, gts[j].attributes) >= rule.t_f1);
            if (ok && iou > best_iou) {
                best_iou = iou;
                best = static_cast<int>(j);
            }
        }
        if (best >= 0) {
            used[static_cast<size_t>(best)] = 1;
            tp[i] = 1;
        }
    }
    size_t nd = dets.size();
    std::vector<double> prec(nd), rec(nd);
    int acc = 0;
    for (size_t i = 0; i < nd; ++i) {
        acc += tp[i];
        prec[i] = static_cast<double>(acc) / static_cast<double>(i + 1);
        rec[i] = static_cast<double>(acc) / static_cast<double>(gts.size());
    }
    std::vector<double> suffix(nd);
    double run = 0.0;
    for (size_t i = nd; i-- > 0;) {
        run = std::max(run, prec[i]);
        suffix[i] = run;
    }
    double ap = 0.0;
    for (int k = 0; k <= 100; ++k) {
        double r = k / 100.0;
        double p = 0.0;
        for (size_t i = 0; i < nd; ++i)
            if (rec[i] >= r - 1e-12) {
                p = suffix[i];
                break;
            }
        ap += p;
    }
    return ap / 101.0;
}

Detection make_det(std::vector<uint8_t> mask, int img, int cat, double score,
                   std::vector<int> attrs = {}) {
    Detection d;
    d.mask = std::move(mask);
    d.h = 8;
    d.w = 8;
    d.image_id = img;
    d.category = cat;
    d.score = score;
    d.attributes = std::move(attrs);
    return d;
}

GtInstance make_gt(std::vector<uint8_t> mask, int img, int cat,
                   std::vector<int> attrs = {}) {
    GtInstance g;
    g.mask = std::move(mask);
    g.h = 8;
    g.w = 8;
    g.image_id = img;
    g.category = cat;
    g.attributes = std::move(attrs);
    return g;
}

bool criterion_metric_oracle(std::string& detail) {
    auto m = block(8, 8, 1, 1, 4, 4);
    std::vector<GtInstance> one_gt = {make_gt(m, 0, 0)};

    // crafted scenarios
    if (std::abs(average_precision({make_det(m, 0, 0, 0.4)}, one_gt, {0.5, 0, false}) -
                 1.0) > 1e-9) {
        detail = "perfect scenario";
        return false;
    }
    if (average_precision({}, one_gt, {0.5, 0, false}) != 0.0) {
        detail = "empty scenario";
        return false;
    }
    std::vector<Detection> fp_tp = {make_det(block(8, 8, 5, 5, 2, 2), 0, 0, 0.9),
                                    make_det(m, 0, 0, 0.8)};
    if (std::abs(average_precision(fp_tp, one_gt, {0.5, 0, false}) - 0.5) > 1e-9) {
        detail = "FP-above-TP scenario";
        return false;
    }

    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        int ng = 1 + static_cast<int>(rng.uniform_int(4));
        int nd = 1 + static_cast<int>(rng.uniform_int(10));
        std::vector<GtInstance> gts;
        std::vector<Detection> dets;
        for (int g = 0; g < ng; ++g) {
            std::vector<int> attrs;
            if (rng.uniform() < 0.7) attrs.push_back(static_cast<int>(rng.uniform_int(4)));
            gts.push_back(make_gt(block(8, 8, static_cast<int>(rng.uniform_int(5)),
                                        static_cast<int>(rng.uniform_int(5)), 3, 3),
                                  0, 0, attrs));
        }
        for (int d = 0; d < nd; ++d) {
            std::vector<int> attrs;
            if (rng.uniform() < 0.7) attrs.push_back(static_cast<int>(rng.uniform_int(4)));
            dets.push_back(make_det(block(8, 8, static_cast<int>(rng.uniform_int(5)),
                                          static_cast<int>(rng.uniform_int(5)), 3, 3),
                                    0, 0, rng.uniform(), attrs));
        }
        for (double t : {0.5, 0.7, 0.9}) {
            TpRule iou_rule{t, 0.0, false};
            TpRule joint_rule{t, 0.5, true};
            double ap = average_precision(dets, gts, iou_rule);
            double apj = average_precision(dets, gts, joint_rule);
            if (std::abs(ap - oracle_ap(dets, gts, iou_rule)) > 1e-9 ||
                std::abs(apj - oracle_ap(dets, gts, joint_rule)) > 1e-9) {
                detail = "oracle mismatch at trial " + std::to_string(trial);
                return false;
            }
            if (apj > ap + 1e-12) {
                detail = "joint metric exceeded the mask metric at trial " +
                         std::to_string(trial);
                return false;
            }
        }
    }
    detail = "3 crafted + 50 random fixtures";
    return true;
}

// ---- criterion 5: overfit 8 synthetic images ----

bool criterion_overfit(std::string& detail) {
    auto t0 = Clock::now();
    std::string dir = (fs::temp_directory_path() / "attrseg_acceptance_overfit").string();
    fs::remove_all(dir);

    SynthConfig scfg;
    scfg.image_size = 128;
    scfg.num_images = 8;
    scfg.shapes_min = 1;
    scfg.shapes_max = 1;
    scfg.seed = 0;
    save_dataset(synth_generate(scfg), dir);

    RunConfig cfg;  // N=10, d=32, 3 stages, C=3, A=6 defaults
    cfg.image_size = 128;
    cfg.seed = 0;
    cfg.steps = 2000;
    Model model(cfg);
    AdamW opt;
    opt.weight_decay = cfg.weight_decay;
    TrainData data = load_train_data(dir);
    auto result = train_model(model, opt, data);

    EvalOptions eopt;
    eopt.single_threshold = true;
    eopt.iou_thr = 0.5;
    EvalReport rep = evaluate_model(model, dir, eopt);
    double secs = seconds_since(t0);
    fs::remove_all(dir);

    std::ostringstream os;
    os << "AP@0.5 " << rep.ap_iou << ", matched F1 " << rep.mean_matched_f1
       << ", final loss " << result.log.back().total << ", " << secs << "s";
    detail = os.str();
    return rep.ap_iou >= 0.90 && rep.mean_matched_f1 >= 0.90 && secs < 600.0;
}

// ---- criterion 6: structural ablation checks ----

bool criterion_ablations(std::string& detail) {
    RunConfig cfg;
    cfg.image_size = 32;
    cfg.embed_dim = 8;
    cfg.num_queries = 3;
    cfg.seed = 6;

    // (a) disjoint stream parameters, and segmentation losses leave the
    // attribute stream untouched
    Model model(cfg);
    for (const auto& name : model.params().names())
        if (name.find(".obj.") != std::string::npos &&
            name.find(".atr.") != std::string::npos) {
            detail = "stream overlap in " + name;
            return false;
        }
    Rng irng(6);
    Tensor image = Tensor::randn({3, 32, 32}, irng, 0.3);
    std::vector<InstanceTarget> gts(1);
    gts[0].h = 8;
    gts[0].w = 8;
    gts[0].category = 0;
    gts[0].attributes = {0, 2, 4};
    gts[0].mask.assign(64, 0);
    for (int i = 0; i < 20; ++i) gts[0].mask[static_cast<size_t>(i)] = 1;

    RunConfig seg_cfg = cfg;
    seg_cfg.lambda_atr = 0.0;
    auto [seg_loss, bd] = total_loss(model.forward(image), gts, seg_cfg);
    backward(seg_loss);
    for (const auto& name : model.params().names()) {
        Tensor t = model.params().get(name);
        if (!t.has_grad()) continue;
        if (name.find(".atr.") == std::string::npos &&
            name.find(".heads.atr") == std::string::npos)
            continue;
        for (double g : t.grad())
            if (g != 0.0) {
                detail = "segmentation gradient leaked into " + name;
                return false;
            }
    }

    // (b) one stage, one prediction
    RunConfig one = cfg;
    one.stages = 1;
    if (Model(one).forward(image).size() != 1) {
        detail = "stage-count=1 emitted multiple predictions";
        return false;
    }

    // (c) shared-query mode runs end-to-end, including a training step
    RunConfig shared = cfg;
    shared.shared_query = true;
    Model sm(shared);
    sm.params().zero_grads();
    auto [loss, sbd] = total_loss(sm.forward(image), gts, shared);
    backward(loss);
    AdamW opt;
    opt.update(sm.params(), 1e-3);
    auto preds = sm.forward(image);
    for (double v : preds.back().attr_logits.data())
        if (!std::isfinite(v)) {
            detail = "shared-query forward produced non-finite logits";
            return false;
        }
    detail = "disjoint params, zero cross-gradients, 1-stage and shared-query modes run";
    return true;
}

// ---- criterion 7: permutation equivariance at N=3 ----

bool criterion_permutation(std::string& detail) {
    RunConfig cfg;
    cfg.image_size = 32;
    cfg.embed_dim = 8;
    cfg.num_queries = 3;
    cfg.seed = 7;
    Rng irng(7);
    Tensor image = Tensor::randn({3, 32, 32}, irng, 0.3);

    std::vector<InstanceTarget> gts(2);
    for (int g = 0; g < 2; ++g) {
        gts[static_cast<size_t>(g)].h = 8;
        gts[static_cast<size_t>(g)].w = 8;
        gts[static_cast<size_t>(g)].category = g;
        gts[static_cast<size_t>(g)].attributes = {g, 2 + g};
        gts[static_cast<size_t>(g)].mask.assign(64, 0);
        for (int i = 0; i < 16; ++i)
            gts[static_cast<size_t>(g)].mask[static_cast<size_t>(g * 40 + i)] = 1;
    }

    Model base(cfg);
    auto base_preds = base.forward(image);
    double base_loss = total_loss(base_preds, gts, cfg).second.total;

    std::vector<int> perm = {0, 1, 2};
    double worst = 0.0;
    do {
        Model pm(cfg);
        Tensor w = pm.params().get("encoder.init_conv.w");
        Tensor e = pm.params().get("encoder.q_atr_embed");
        std::vector<double> w0 = w.data(), e0 = e.data();
        for (int n = 0; n < 3; ++n)
            for (int c = 0; c < 8; ++c) {
                w.data()[static_cast<size_t>(n * 8 + c)] = w0[static_cast<size_t>(perm[static_cast<size_t>(n)] * 8 + c)];
                e.data()[static_cast<size_t>(n * 8 + c)] = e0[static_cast<size_t>(perm[static_cast<size_t>(n)] * 8 + c)];
            }
        auto preds = pm.forward(image);
        for (size_t s = 0; s < preds.size(); ++s) {
            auto diff_rows = [&](const Tensor& got, const Tensor& want) {
                int cols = got.numel() / 3;
                for (int n = 0; n < 3; ++n)
                    for (int j = 0; j < cols; ++j)
                        worst = std::max(
                            worst,
                            std::abs(got.data()[static_cast<size_t>(n * cols + j)] -
                                     want.data()[static_cast<size_t>(perm[static_cast<size_t>(n)] * cols + j)]));
            };
            diff_rows(preds[s].mask_logits, base_preds[s].mask_logits);
            diff_rows(preds[s].class_logits, base_preds[s].class_logits);
            diff_rows(preds[s].attr_logits, base_preds[s].attr_logits);
        }
        worst = std::max(worst,
                         std::abs(total_loss(preds, gts, cfg).second.total - base_loss));
    } while (std::next_permutation(perm.begin(), perm.end()));

    std::ostringstream os;
    os << "worst deviation " << worst;
    detail = os.str();
    return worst < 1e-9;
}

// ---- criterion 8: persistence round trips ----

bool criterion_persistence(std::string& detail) {
    // checkpoint: bitwise-identical forward after save/load
    RunConfig cfg;
    cfg.image_size = 32;
    cfg.embed_dim = 8;
    cfg.num_queries = 3;
    cfg.seed = 8;
    Model model(cfg);
    Rng irng(8);
    Tensor image = Tensor::randn({3, 32, 32}, irng, 0.3);
    auto before = model.forward(image);

    std::string path = (fs::temp_directory_path() / "attrseg_acceptance.qsl1").string();
    AdamW opt;
    model.params().zero_grads();
    opt.update(model.params(), 0.0);  // populate optimizer state
    save_checkpoint(model, &opt, path);
    auto loaded = load_checkpoint(path);
    fs::remove(path);
    if (!loaded.has_opt || loaded.opt.step != opt.step) {
        detail = "optimizer state lost";
        return false;
    }
    auto after = loaded.model->forward(image);
    for (size_t s = 0; s < before.size(); ++s)
        if (before[s].mask_logits.data() != after[s].mask_logits.data() ||
            before[s].class_logits.data() != after[s].class_logits.data() ||
            before[s].attr_logits.data() != after[s].attr_logits.data()) {
            detail = "forward outputs changed after checkpoint round trip";
            return false;
        }

    // RLE: 100 random rasters
    Rng rng(88);
    for (int trial = 0; trial < 100; ++trial) {
        int h = 1 + static_cast<int>(rng.uniform_int(24));
        int w = 1 + static_cast<int>(rng.uniform_int(24));
        std::vector<uint8_t> mask(static_cast<size_t>(h) * w);
        for (auto& v : mask) v = rng.uniform() < 0.5 ? 1 : 0;
        if (rle_decode(rle_encode(mask, h, w), h, w) != mask) {
            detail = "RLE round trip failed at trial " + std::to_string(trial);
            return false;
        }
    }

    // annotations: save -> load equality
    SynthConfig scfg;
    scfg.image_size = 64;
    scfg.num_images = 2;
    scfg.seed = 8;
    Dataset ds = synth_generate(scfg).dataset;
    std::string apath = (fs::temp_directory_path() / "attrseg_acceptance_ann.json").string();
    save_annotations(ds, apath);
    Dataset back = load_annotations(apath);
    fs::remove(apath);
    bool same = back.instances.size() == ds.instances.size();
    for (size_t i = 0; same && i < back.instances.size(); ++i)
        same = back.instances[i].category == ds.instances[i].category &&
               back.instances[i].attributes == ds.instances[i].attributes &&
               back.instances[i].rle.counts == ds.instances[i].rle.counts;
    if (!same) {
        detail = "annotation round trip changed instances";
        return false;
    }
    detail = "checkpoint bitwise, RLE x100, annotations lossless";
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: acceptance <criterion 1..8>\n";
        return 2;
    }
    int n = std::atoi(argv[1]);
    static const char* names[] = {
        "gradient correctness",     "assignment oracle",       "loss fixtures",
        "metric oracle",            "overfit run",             "structural ablations",
        "permutation equivariance", "persistence round trips"};
    using Fn = bool (*)(std::string&);
    static const Fn fns[] = {criterion_gradients,   criterion_assignment,
                             criterion_loss_fixtures, criterion_metric_oracle,
                             criterion_overfit,     criterion_ablations,
                             criterion_permutation, criterion_persistence};
    if (n < 1 || n > 8) {
        std::cerr << "criterion out of range\n";
        return 2;
    }
    std::string detail;
    bool ok = false;
    try {
        ok = fns[n - 1](detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    std::cout << "criterion " << n << " (" << names[n - 1] << "): "
              << (ok ? "PASS" : "FAIL") << " [" << detail << "]\n";
    return ok ? 0 : 1;
}
