#include "train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "losses.hpp"

namespace attrseg {

namespace fs = std::filesystem;
using nlohmann::json;

void AdamW::update(ParamStore& params, double lr) {
    ++step;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (const auto& name : params.names()) {
        Tensor p = params.get(name);
        auto& [m, v] = state[name];
        if (m.empty()) {
            m.assign(p.data().size(), 0.0);
            v.assign(p.data().size(), 0.0);
        }
        const auto& g = p.grad();
        auto& w = p.data();
        for (size_t i = 0; i < w.size(); ++i) {
            w[i] -= lr * weight_decay * w[i];  // decoupled decay
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            w[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
        }
    }
}

double lr_at(const RunConfig& cfg, int step) {
    int warm = std::max(1, static_cast<int>(cfg.warmup_frac * cfg.steps));
    if (step < warm) return cfg.lr * (step + 1) / warm;
    double progress = cfg.steps > warm
                          ? static_cast<double>(step - warm) / (cfg.steps - warm)
                          : 0.0;
    return cfg.lr * 0.5 * (1.0 + std::cos(3.141592653589793 * progress));
}

TrainData prepare_train_data(const Dataset& ds, const std::vector<ImageU8>& images) {
    TrainData td;
    for (size_t i = 0; i < ds.images.size(); ++i) {
        td.images.push_back(image_to_tensor(images[i]));
        td.targets.push_back(rasterize_targets(ds, ds.images[i].id, 4));
    }
    return td;
}

TrainData load_train_data(const std::string& data_dir) {
    Dataset ds = load_annotations((fs::path(data_dir) / "annotations.json").string());
    std::vector<ImageU8> imgs;
    for (const auto& rec : ds.images)
        imgs.push_back(read_png((fs::path(ds.root) / rec.file).string()));
    return prepare_train_data(ds, imgs);
}

namespace {

void check_finite(const LossBreakdown& bd, int step) {
    auto bad = [&](const std::vector<double>& xs, const char* term) {
        for (size_t j = 0; j < xs.size(); ++j)
            if (!std::isfinite(xs[j]))
                throw std::runtime_error("non-finite loss at step " +
                                         std::to_string(step) + ": stage " +
                                         std::to_string(j + 1) + " term " + term);
    };
    bad(bd.l_cls, "l_cls");
    bad(bd.l_mask, "l_mask");
    bad(bd.l_atr, "l_atr");
}

double sum(const std::vector<double>& xs) {
    double s = 0;
    for (double x : xs) s += x;
    return s;
}

}  // namespace

TrainResult train_model(Model& model, AdamW& opt, const TrainData& data,
                        std::ostream* log_stream) {
    const RunConfig& cfg = model.config();
    if (data.images.empty()) throw std::invalid_argument("empty training set");
    Rng rng(cfg.seed ^ 0x747261696eULL);  // batch-sampling stream
    int n = static_cast<int>(data.images.size());

    TrainResult res;
    for (int step = 0; step < cfg.steps; ++step) {
        double lr = lr_at(cfg, step);
        model.params().zero_grads();

        Tensor batch_total;
        LossLogEntry entry;
        entry.step = step;
        entry.lr = lr;
        for (int b = 0; b < cfg.batch_size; ++b) {
            int idx = rng.uniform_int(n);
            auto preds = model.forward(data.images[static_cast<size_t>(idx)]);
            auto [loss, bd] = total_loss(preds, data.targets[static_cast<size_t>(idx)], cfg);
            check_finite(bd, step);
            entry.l_cls += sum(bd.l_cls);
            entry.l_mask += sum(bd.l_mask);
            entry.l_atr += sum(bd.l_atr);
            batch_total = batch_total.defined() ? add(batch_total, loss) : loss;
        }
        double inv = 1.0 / cfg.batch_size;
        entry.l_cls *= inv;
        entry.l_mask *= inv;
        entry.l_atr *= inv;
        Tensor scaled = scale(batch_total, inv);
        entry.total = scaled.value();
        backward(scaled);
        opt.update(model.params(), lr);

        if (log_stream)
            *log_stream << "step=" << entry.step << " lr=" << entry.lr
                        << " l_cls=" << entry.l_cls << " l_mask=" << entry.l_mask
                        << " l_atr=" << entry.l_atr << " total=" << entry.total << "\n";
        res.log.push_back(entry);
    }
    return res;
}

// ---------------------------------------------------------------------------
// checkpoint

namespace {

void w_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void w_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void w_f64s(std::ostream& os, const std::vector<double>& v) {
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
}
uint32_t r_u32(std::istream& is) {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
uint64_t r_u64(std::istream& is) {
    uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
}
void r_f64s(std::istream& is, std::vector<double>& v) {
    is.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

}  // namespace

void save_checkpoint(const Model& model, const AdamW* opt, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
    os.write("QSL1", 4);
    w_u32(os, 1);  // format version
    std::string cfg = model.config().to_json_text();
    w_u64(os, cfg.size());
    os.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));

    const ParamStore& ps = model.params();
    w_u64(os, ps.size());
    for (const auto& name : ps.names()) {
        Tensor t = ps.get(name);
        w_u32(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        w_u32(os, static_cast<uint32_t>(t.rank()));
        for (int i = 0; i < t.rank(); ++i) w_u32(os, static_cast<uint32_t>(t.dim(i)));
        w_f64s(os, t.data());
    }

    os.put(opt ? 1 : 0);
    if (opt) {
        w_u64(os, opt->step);
        for (const auto& name : ps.names()) {
            auto it = opt->state.find(name);
            size_t n = static_cast<size_t>(ps.get(name).numel());
            std::vector<double> zero(n, 0.0);
            const auto& m = it != opt->state.end() ? it->second.first : zero;
            const auto& v = it != opt->state.end() ? it->second.second : zero;
            w_f64s(os, m);
            w_f64s(os, v);
        }
    }
    if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (std::memcmp(magic, "QSL1", 4) != 0)
        throw std::runtime_error(path + ": not a checkpoint (bad magic)");
    uint32_t version = r_u32(is);
    if (version != 1)
        throw std::runtime_error(path + ": unsupported checkpoint version " +
                                 std::to_string(version));
    std::string cfg_text(r_u64(is), '\0');
    is.read(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));

    LoadedCheckpoint out;
    out.model = std::make_unique<Model>(RunConfig::from_json_text(cfg_text));
    ParamStore& ps = out.model->params();

    uint64_t n_tensors = r_u64(is);
    if (n_tensors != ps.size())
        throw std::runtime_error(path + ": tensor count mismatch");
    for (uint64_t i = 0; i < n_tensors; ++i) {
        std::string name(r_u32(is), '\0');
        is.read(name.data(), static_cast<std::streamsize>(name.size()));
        if (!ps.has(name)) throw std::runtime_error(path + ": unknown tensor " + name);
        Tensor t = ps.get(name);
        uint32_t rank = r_u32(is);
        Shape shape(rank);
        for (uint32_t d = 0; d < rank; ++d) shape[d] = static_cast<int>(r_u32(is));
        if (shape != t.shape())
            throw std::runtime_error(path + ": shape mismatch for " + name);
        r_f64s(is, t.data());
    }
    out.has_opt = is.get() == 1;
    if (out.has_opt) {
        out.opt.weight_decay = out.model->config().weight_decay;
        out.opt.step = r_u64(is);
        for (const auto& name : ps.names()) {
            size_t n = static_cast<size_t>(ps.get(name).numel());
            auto& [m, v] = out.opt.state[name];
            m.resize(n);
            v.resize(n);
            r_f64s(is, m);
            r_f64s(is, v);
        }
    }
    if (!is) throw std::runtime_error(path + ": truncated checkpoint");
    return out;
}

// ---------------------------------------------------------------------------
// inference / evaluation

namespace {

Tensor pad_to_multiple_of_32(const Tensor& image, int& out_h, int& out_w) {
    int h = image.dim(1), w = image.dim(2);
    out_h = (h + 31) / 32 * 32;
    out_w = (w + 31) / 32 * 32;
    if (out_h == h && out_w == w) return image;
    std::vector<double> data(static_cast<size_t>(3) * out_h * out_w, 0.0);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                data[(static_cast<size_t>(c) * out_h + y) * out_w + x] =
                    image.data()[(static_cast<size_t>(c) * h + y) * w + x];
    return Tensor::from_data({3, out_h, out_w}, std::move(data));
}

}  // namespace

std::vector<Detection> predict_image(const Model& model, const Tensor& image,
                                     int image_id) {
    int full_h = image.dim(1), full_w = image.dim(2);
    int pad_h = 0, pad_w = 0;
    Tensor padded = pad_to_multiple_of_32(image, pad_h, pad_w);
    auto preds = model.forward(padded);
    const StagePrediction& last = preds.back();

    int n = last.class_logits.dim(0);
    int c = last.class_logits.dim(1);
    int a = last.attr_logits.dim(1);

    Tensor probs = sigmoid(last.mask_logits).detach();
    Tensor up = bilinear_resize(probs, pad_h, pad_w);

    std::vector<Detection> dets;
    for (int q = 0; q < n; ++q) {
        Detection d;
        d.image_id = image_id;
        d.h = full_h;
        d.w = full_w;
        double best = -1e18;
        for (int k = 0; k < c; ++k) {
            double logit = last.class_logits.data()[static_cast<size_t>(q * c + k)];
            if (logit > best) {
                best = logit;
                d.category = k;
            }
        }
        d.score = 1.0 / (1.0 + std::exp(-best));
        for (int k = 0; k < a; ++k) {
            double logit = last.attr_logits.data()[static_cast<size_t>(q * a + k)];
            if (logit > 0.0) d.attributes.push_back(k);  // sigmoid > 0.5
        }
        d.mask.assign(static_cast<size_t>(full_h) * full_w, 0);
        for (int y = 0; y < full_h; ++y)
            for (int x = 0; x < full_w; ++x)
                if (up.data()[(static_cast<size_t>(q) * pad_h + y) * pad_w + x] > 0.5)
                    d.mask[static_cast<size_t>(y) * full_w + x] = 1;
        dets.push_back(std::move(d));
    }
    return dets;
}

EvalReport evaluate_model(const Model& model, const std::string& data_dir,
                          const EvalOptions& opt) {
    Dataset ds = load_annotations((fs::path(data_dir) / "annotations.json").string());
    const Vocab& mv = model.config().vocab;
    if (ds.vocab.categories != mv.categories ||
        ds.vocab.num_attributes() != mv.num_attributes())
        throw std::runtime_error("vocabulary mismatch between checkpoint and dataset");

    std::vector<Detection> dets;
    for (const auto& rec : ds.images) {
        Tensor img = image_to_tensor(read_png((fs::path(ds.root) / rec.file).string()));
        auto d = predict_image(model, img, rec.id);
        dets.insert(dets.end(), d.begin(), d.end());
    }
    return eval_report(dets, dataset_gts(ds), ds.vocab, opt);
}

std::vector<InferInstance> infer_image(const Model& model,
                                       const std::string& image_path,
                                       const std::string& out_dir, double score_thr) {
    ImageU8 img = read_png(image_path);
    Tensor t = image_to_tensor(img);
    auto dets = predict_image(model, t, 0);

    // recover attribute probabilities for the dump
    int pad_h = 0, pad_w = 0;
    Tensor padded = pad_to_multiple_of_32(t, pad_h, pad_w);
    auto preds = model.forward(padded);
    const Tensor& attr_logits = preds.back().attr_logits;
    int a = attr_logits.dim(1);

    const Vocab& vocab = model.config().vocab;
    fs::create_directories(out_dir);

    static const uint8_t palette[10][3] = {
        {230, 25, 75},  {60, 180, 75},   {255, 225, 25}, {0, 130, 200},
        {245, 130, 48}, {145, 30, 180},  {70, 240, 240}, {240, 50, 230},
        {210, 245, 60}, {250, 190, 190}};

    std::vector<InferInstance> out;
    ImageU8 overlay = img;
    std::ostringstream txt;
    json jinst = json::array();
    int kept = 0;
    for (size_t q = 0; q < dets.size(); ++q) {
        const Detection& d = dets[q];
        if (d.score < score_thr) continue;
        InferInstance inst;
        inst.category = d.category;
        inst.score = d.score;
        inst.attributes = d.attributes;
        for (int k = 0; k < a; ++k) {
            double logit = attr_logits.data()[q * static_cast<size_t>(a) + static_cast<size_t>(k)];
            inst.attr_probs.push_back(1.0 / (1.0 + std::exp(-logit)));
        }
        inst.mask_rle = rle_encode(d.mask, d.h, d.w);

        const uint8_t* col = palette[static_cast<size_t>(kept) % 10];
        for (int p = 0; p < d.h * d.w; ++p)
            if (d.mask[static_cast<size_t>(p)])
                for (int ch = 0; ch < 3; ++ch)
                    overlay.rgb[static_cast<size_t>(p) * 3 + static_cast<size_t>(ch)] =
                        static_cast<uint8_t>(
                            0.5 * overlay.rgb[static_cast<size_t>(p) * 3 + static_cast<size_t>(ch)] +
                            0.5 * col[ch]);

        txt << "instance " << kept << ": " << vocab.categories[static_cast<size_t>(d.category)]
            << " score=" << d.score << " attributes=[";
        for (size_t i = 0; i < d.attributes.size(); ++i) {
            if (i) txt << ", ";
            txt << vocab.attributes[static_cast<size_t>(d.attributes[i])].name;
        }
        txt << "]\n";

        jinst.push_back({{"category", d.category},
                         {"category_name", vocab.categories[static_cast<size_t>(d.category)]},
                         {"score", d.score},
                         {"attributes", d.attributes},
                         {"attr_probs", inst.attr_probs},
                         {"rle", {{"counts", inst.mask_rle.counts}}}});
        out.push_back(std::move(inst));
        ++kept;
    }

    write_png((fs::path(out_dir) / "overlay.png").string(), overlay);
    std::ofstream((fs::path(out_dir) / "instances.txt").string()) << txt.str();
    std::ofstream((fs::path(out_dir) / "instances.json").string())
        << json{{"h", img.h}, {"w", img.w}, {"instances", jinst}}.dump(2);
    return out;
}

// ---------------------------------------------------------------------------
// gradient-check suite

namespace {

// finite differences against autodiff over model parameters, sampling up to
// coords_per_param coordinates of each tensor
double grad_check_model(Model& model, const std::function<Tensor()>& loss_fn,
                        double h, int coords_per_param, Rng& rng) {
    ParamStore& ps = model.params();
    ps.zero_grads();
    Tensor loss = loss_fn();
    backward(loss);
    std::map<std::string, std::vector<double>> ad;
    for (const auto& name : ps.names()) ad[name] = ps.get(name).grad();

    // value-only evaluations: switch grad recording off
    for (const auto& name : ps.names()) ps.get(name).set_requires_grad(false);
    double worst = 0.0;
    for (const auto& name : ps.names()) {
        Tensor p = ps.get(name);
        int n = p.numel();
        std::vector<int> coords;
        if (n <= coords_per_param) {
            for (int i = 0; i < n; ++i) coords.push_back(i);
        } else {
            for (int i = 0; i < coords_per_param; ++i) coords.push_back(rng.uniform_int(n));
        }
        for (int i : coords) {
            double orig = p.data()[static_cast<size_t>(i)];
            p.data()[static_cast<size_t>(i)] = orig + h;
            double fu = loss_fn().value();
            p.data()[static_cast<size_t>(i)] = orig - h;
            double fd = loss_fn().value();
            p.data()[static_cast<size_t>(i)] = orig;
            double fdg = (fu - fd) / (2.0 * h);
            double g = ad[name][static_cast<size_t>(i)];
            double err = std::abs(g - fdg) / std::max({1.0, std::abs(g), std::abs(fdg)});
            worst = std::max(worst, err);
        }
    }
    for (const auto& name : ps.names()) ps.get(name).set_requires_grad(true);
    return worst;
}

}  // namespace

std::vector<GradcheckEntry> run_gradcheck(uint64_t seed, bool inject_fault) {
    std::vector<GradcheckEntry> report;
    const double h = 1e-6, tol = 1e-4;
    Rng rng(seed);

    auto check = [&](const std::string& name,
                     const std::function<Tensor(const Tensor&)>& f, const Tensor& x) {
        double err = grad_check(f, x, h);
        report.push_back({name, err, err < tol});
    };

    Tensor x = Tensor::randn({2, 3, 4}, rng, 1.0);
    for (auto& v : x.data())
        if (std::abs(v) < 1e-3) v += 0.01;
    Tensor m = Tensor::randn({3, 4}, rng, 1.0);
    Tensor w = Tensor::randn({2, 2, 3, 3}, rng, 0.5);
    Tensor g1 = Tensor::randn({4}, rng, 0.3);
    Tensor b1 = Tensor::randn({4}, rng, 0.3);
    Tensor img34 = Tensor::randn({2, 4, 4}, rng, 1.0);

    check("add", [](const Tensor& t) { return reduce_sum(sigmoid(add(t, scale(t, 0.5)))); }, x);
    check("mul", [](const Tensor& t) { return reduce_mean(mul(t, t)); }, x);
    check("broadcast", [&](const Tensor& t) {
        return reduce_sum(sigmoid(add(t, reshape(g1, {1, 1, 4}))));
    }, x);
    check("relu", [](const Tensor& t) { return reduce_sum(relu(t)); }, x);
    check("sigmoid", [](const Tensor& t) { return reduce_mean(sigmoid(t)); }, x);
    check("softmax", [&](const Tensor& t) {
        return reduce_sum(mul(softmax(t, 2), reshape(x, t.shape())));
    }, x);
    check("matmul", [&](const Tensor& t) {
        return reduce_sum(sigmoid(matmul(reshape(t, {6, 4}), transpose2d(m))));
    }, x);
    check("transpose", [](const Tensor& t) {
        return reduce_sum(mul(transpose2d(t), transpose2d(t)));
    }, m);
    check("conv2d", [&](const Tensor& t) {
        return reduce_mean(sigmoid(conv2d(t, w, Tensor(), 1, 1)));
    }, img34);
    check("conv2d_weights", [&](const Tensor& t) {
        return reduce_mean(sigmoid(conv2d(img34, t, Tensor(), 1, 1)));
    }, w);
    check("layer_norm", [&](const Tensor& t) {
        return reduce_sum(sigmoid(layer_norm(t, g1, b1, 1e-5)));
    }, x);
    check("bilinear_resize", [](const Tensor& t) {
        Tensor r = bilinear_resize(t, 5, 7);
        return reduce_mean(mul(r, r));
    }, img34);
    check("concat_slice", [](const Tensor& t) {
        return reduce_sum(sigmoid(slice(concat({t, scale(t, 2.0)}, 1), 1, 1, 5)));
    }, x);
    check("reduce_mean", [](const Tensor& t) { return reduce_mean(t); }, x);
    check("pow_log", [](const Tensor& t) {
        Tensor p = sigmoid(t);
        return reduce_mean(mul(pow_scalar(p, 2.0), log_guarded(p)));
    }, x);

    // loss composites
    Tensor tgt = Tensor::from_data({2, 3}, {1, 0, 0, 0, 1, 0});
    check("focal_loss", [&](const Tensor& t) { return focal_loss(t, tgt); },
          Tensor::randn({2, 3}, rng, 1.5));
    Tensor gt_mask = Tensor::from_data({1, 2, 3}, {1, 1, 0, 0, 1, 0});
    check("dice_loss", [&](const Tensor& t) { return dice_loss(t, gt_mask); },
          Tensor::randn({1, 2, 3}, rng, 1.5));
    Tensor gt_attr = Tensor::from_data({1, 4}, {1, 0, 1, 0});
    check("attribute_bce", [&](const Tensor& t) { return attribute_bce(t, gt_attr); },
          Tensor::randn({1, 4}, rng, 1.5));

    // composite decoder blocks, checked through their input
    {
        RunConfig tiny;
        tiny.embed_dim = 8;
        tiny.num_queries = 2;
        tiny.image_size = 32;
        tiny.seed = seed;
        ParamStore ps;
        Rng prng(seed + 1);
        QuerySelfUpdate qsu(ps, "qsu", 8, 4, prng);
        check("query_self_update", [&](const Tensor& t) {
            return reduce_sum(sigmoid(qsu.forward(t)));
        }, Tensor::randn({3, 8}, rng, 1.0));
        DynamicConvUpdate dc(ps, "dc", 8, prng);
        Tensor q0 = Tensor::randn({3, 8}, rng, 1.0);
        check("dynamic_conv_update", [&](const Tensor& t) {
            return reduce_sum(sigmoid(dc.forward(t, q0)));
        }, Tensor::randn({3, 8}, rng, 1.0));
        Tensor fuse_map = Tensor::randn({8, 4, 4}, rng, 1.0);
        check("group_object_features", [&](const Tensor& t) {
            return reduce_sum(sigmoid(group_object_features(t, fuse_map)));
        }, Tensor::randn({3, 4, 4}, rng, 1.0));
    }

    // full 3-stage model loss on a 2-query / 2-ground-truth fixture
    {
        RunConfig cfg;
        cfg.image_size = 32;
        cfg.embed_dim = 8;
        cfg.num_queries = 2;
        cfg.stages = 3;
        cfg.seed = seed;
        Model model(cfg);
        Rng irng(seed + 2);
        Tensor image = Tensor::randn({3, 32, 32}, irng, 0.3);
        for (auto& v : image.data()) v = std::abs(v);

        std::vector<InstanceTarget> gts(2);
        for (int g = 0; g < 2; ++g) {
            gts[static_cast<size_t>(g)].h = 8;
            gts[static_cast<size_t>(g)].w = 8;
            gts[static_cast<size_t>(g)].category = g;
            gts[static_cast<size_t>(g)].attributes = g == 0 ? std::vector<int>{0, 2, 4}
                                                            : std::vector<int>{1, 3, 5};
            gts[static_cast<size_t>(g)].mask.assign(64, 0);
        }
        for (int y = 1; y < 5; ++y)
            for (int xx = 1; xx < 4; ++xx) gts[0].mask[static_cast<size_t>(y * 8 + xx)] = 1;
        for (int y = 4; y < 8; ++y)
            for (int xx = 5; xx < 8; ++xx) gts[1].mask[static_cast<size_t>(y * 8 + xx)] = 1;

        auto loss_fn = [&] {
            auto preds = model.forward(image);
            return total_loss(preds, gts, cfg).first;
        };
        Rng crng(seed + 3);
        double err = grad_check_model(model, loss_fn, h, 12, crng);
        report.push_back({"full_model_loss", err, err < tol});
    }

    if (inject_fault) {
        // gradient path deliberately cut: autodiff sees 1, differences see 1.5
        double err = grad_check(
            [](const Tensor& t) { return reduce_sum(add(t, scale(t.detach(), 0.5))); },
            Tensor::randn({4}, rng, 1.0), h);
        report.push_back({"injected_wrong_gradient", err, err < tol});
    }
    return report;
}

}  // namespace attrseg
