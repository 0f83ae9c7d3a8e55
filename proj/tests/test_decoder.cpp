#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "model.hpp"

using namespace attrseg;

namespace {

RunConfig tiny_cfg() {
    RunConfig cfg;
    cfg.image_size = 32;
    cfg.embed_dim = 8;
    cfg.num_queries = 3;
    cfg.seed = 21;
    return cfg;
}

bool approx_equal(const std::vector<double>& a, const std::vector<double>& b,
                  double tol) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (std::abs(a[i] - b[i]) > tol) return false;
    return true;
}

}  // namespace

TEST_CASE("mask grouping selects and sums features") {
    // saturated one-hot mask picks out a single pixel column
    Tensor x = Tensor::from_data({2, 1, 3}, {1, 2, 3, 10, 20, 30});
    Tensor onehot = Tensor::from_data({1, 1, 3}, {-60, 60, -60});
    Tensor row = group_object_features(onehot, x);
    CHECK(row.data()[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(row.data()[1] == doctest::Approx(20.0).epsilon(1e-12));

    // all-on mask over a constant map sums to c * H * W
    Tensor xc = Tensor({2, 4, 5}, 0.5);
    Tensor allon = Tensor({1, 4, 5}, 60.0);
    Tensor sum = group_object_features(allon, xc);
    CHECK(sum.data()[0] == doctest::Approx(0.5 * 20).epsilon(1e-12));

    // fully suppressed mask gives near-zero features
    Tensor alloff = Tensor({1, 4, 5}, -60.0);
    Tensor off_row = group_object_features(alloff, xc);
    for (double v : off_row.data()) CHECK(std::abs(v) < 1e-12);

    CHECK_THROWS_AS(group_object_features(Tensor({1, 2, 2}, 0.0), xc),
                    std::invalid_argument);
}

TEST_CASE("attribute query residual is the elementwise sum") {
    Tensor q = Tensor::from_data({2, 2}, {1, 2, 3, 4});
    Tensor z = Tensor({2, 2}, 0.0);
    CHECK(residual_attribute_query(z, q).data() == q.data());
    CHECK(residual_attribute_query(q, z).data() == q.data());
    CHECK(residual_attribute_query(q, q).data() == std::vector<double>{2, 4, 6, 8});
    CHECK_THROWS_AS(residual_attribute_query(q, Tensor({3, 2}, 0.0)),
                    std::invalid_argument);
}

TEST_CASE("zeroed gates mix feature and reweighted query equally") {
    ParamStore ps;
    Rng rng(3);
    DynamicConvUpdate dc(ps, "dc", 4, rng);
    for (Tensor t : {dc.gate_x.fc.w, dc.gate_x.fc.b, dc.gate_x.ln.beta,
                     dc.gate_q.fc.w, dc.gate_q.fc.b, dc.gate_q.ln.beta})
        std::fill(t.data().begin(), t.data().end(), 0.0);

    Tensor x = Tensor::randn({2, 4}, rng, 1.0);
    Tensor q = Tensor::randn({2, 4}, rng, 1.0);
    Tensor got = dc.forward(x, q);
    Tensor rw = mul(dc.reweight_fc.forward(x), q);
    for (int i = 0; i < 8; ++i)
        CHECK(got.data()[static_cast<size_t>(i)] ==
              doctest::Approx(0.5 * x.data()[static_cast<size_t>(i)] +
                              0.5 * rw.data()[static_cast<size_t>(i)])
                  .epsilon(1e-12));
}

TEST_CASE("single-query self-attention reduces to the value path") {
    ParamStore ps;
    Rng rng(4);
    Mhsa attn(ps, "attn", 8, 4, rng);
    Tensor q = Tensor::randn({1, 8}, rng, 1.0);
    Tensor got = attn.forward(q);
    Tensor want = attn.wo.forward(attn.wv.forward(q));
    CHECK(approx_equal(got.data(), want.data(), 1e-12));

    CHECK_THROWS_AS(Mhsa(ps, "bad", 10, 4, rng), std::invalid_argument);
}

TEST_CASE("single-level rendering equals grouping plus the fusion MLP") {
    ParamStore ps;
    Rng rng(5);
    MultiLayerRender mlr(ps, "mlr", 6, 1, rng);
    Tensor level = Tensor::randn({6, 4, 4}, rng, 1.0);
    Tensor mask = Tensor::randn({2, 8, 8}, rng, 1.0);

    Tensor got = mlr.forward(mask, {level});
    Tensor resized = bilinear_resize(mask, 4, 4);
    Tensor want = relu(mlr.ln.forward(mlr.fuse.forward(group_object_features(resized, level))));
    CHECK(approx_equal(got.data(), want.data(), 1e-12));
}

TEST_CASE("multi-level rendering output shape") {
    ParamStore ps;
    Rng rng(6);
    MultiLayerRender mlr(ps, "mlr", 6, 4, rng);
    CHECK(mlr.fuse.w.shape() == Shape{24, 6});  // concat width 4d before fusion
    std::vector<Tensor> levels = {
        Tensor::randn({6, 8, 8}, rng, 1.0), Tensor::randn({6, 4, 4}, rng, 1.0),
        Tensor::randn({6, 2, 2}, rng, 1.0), Tensor::randn({6, 1, 1}, rng, 1.0)};
    Tensor out = mlr.forward(Tensor::randn({3, 8, 8}, rng, 1.0), levels);
    CHECK(out.shape() == Shape{3, 6});
    CHECK_THROWS_AS(mlr.forward(Tensor({3, 8, 8}, 0.0), {levels[0]}),
                    std::invalid_argument);
}

TEST_CASE("mask head is linear in the feature map") {
    ParamStore ps;
    Rng rng(7);
    PredictionHeads heads(ps, "h", 8, 3, 6, rng);
    Tensor q = Tensor::randn({2, 8}, rng, 1.0);
    Tensor x = Tensor::randn({8, 4, 4}, rng, 1.0);
    Tensor m1 = heads.mask_logits(q, x);
    Tensor m2 = heads.mask_logits(q, scale(x, 2.0));
    CHECK(m1.shape() == Shape{2, 4, 4});
    for (size_t i = 0; i < m1.data().size(); ++i)
        CHECK(m2.data()[i] == doctest::Approx(2.0 * m1.data()[i]).epsilon(1e-10));

    CHECK(heads.class_logits(q).shape() == Shape{2, 3});
    CHECK(heads.attr_logits(q).shape() == Shape{2, 6});
}

TEST_CASE("decoder emits one prediction per stage") {
    RunConfig cfg = tiny_cfg();
    Model model(cfg);
    Rng irng(8);
    Tensor image = Tensor::randn({3, 32, 32}, irng, 0.5);
    auto preds = model.forward(image);
    REQUIRE(preds.size() == 3);
    for (const auto& p : preds) {
        CHECK(p.mask_logits.shape() == Shape{3, 8, 8});
        CHECK(p.class_logits.shape() == Shape{3, 3});
        CHECK(p.attr_logits.shape() == Shape{3, 6});
        for (double v : p.mask_logits.data()) CHECK(std::isfinite(v));
    }

    cfg.stages = 1;
    Model one(cfg);
    CHECK(one.forward(image).size() == 1);
}

TEST_CASE("permuting the initial queries permutes every stage output") {
    RunConfig cfg = tiny_cfg();
    Rng irng(9);
    Tensor image = Tensor::randn({3, 32, 32}, irng, 0.5);

    Model model(cfg);
    auto base = model.forward(image);

    std::vector<int> perm = {0, 1, 2};
    do {
        Model permuted(cfg);  // same seed, same weights
        Tensor w = permuted.params().get("encoder.init_conv.w");
        Tensor e = permuted.params().get("encoder.q_atr_embed");
        std::vector<double> w0 = w.data(), e0 = e.data();
        for (int n = 0; n < 3; ++n)
            for (int c = 0; c < 8; ++c) {
                w.data()[static_cast<size_t>(n * 8 + c)] =
                    w0[static_cast<size_t>(perm[static_cast<size_t>(n)] * 8 + c)];
                e.data()[static_cast<size_t>(n * 8 + c)] =
                    e0[static_cast<size_t>(perm[static_cast<size_t>(n)] * 8 + c)];
            }
        auto got = permuted.forward(image);
        for (size_t s = 0; s < base.size(); ++s)
            for (int n = 0; n < 3; ++n) {
                int src = perm[static_cast<size_t>(n)];
                for (int p = 0; p < 64; ++p)
                    CHECK(got[s].mask_logits.data()[static_cast<size_t>(n * 64 + p)] ==
                          doctest::Approx(base[s].mask_logits.data()[static_cast<size_t>(src * 64 + p)])
                              .epsilon(0).scale(1.0).epsilon(1e-9));
                for (int k = 0; k < 3; ++k)
                    CHECK(got[s].class_logits.data()[static_cast<size_t>(n * 3 + k)] ==
                          doctest::Approx(base[s].class_logits.data()[static_cast<size_t>(src * 3 + k)])
                              .epsilon(1e-9));
                for (int k = 0; k < 6; ++k)
                    CHECK(got[s].attr_logits.data()[static_cast<size_t>(n * 6 + k)] ==
                          doctest::Approx(base[s].attr_logits.data()[static_cast<size_t>(src * 6 + k)])
                              .epsilon(1e-9));
            }
    } while (std::next_permutation(perm.begin(), perm.end()));
}

TEST_CASE("attribute-stream parameters do not influence masks or classes") {
    RunConfig cfg = tiny_cfg();
    Rng irng(10);
    Tensor image = Tensor::randn({3, 32, 32}, irng, 0.5);

    Model a(cfg), b(cfg);
    for (const auto& name : b.params().names())
        if (name.find(".atr.") != std::string::npos || name.find(".heads.atr") != std::string::npos)
            for (auto& v : b.params().get(name).data()) v += 0.37;

    auto pa = a.forward(image), pb = b.forward(image);
    for (size_t s = 0; s < pa.size(); ++s) {
        CHECK(pa[s].mask_logits.data() == pb[s].mask_logits.data());   // bitwise
        CHECK(pa[s].class_logits.data() == pb[s].class_logits.data());
        CHECK(pa[s].attr_logits.data() != pb[s].attr_logits.data());
    }
}

TEST_CASE("segmentation losses send no gradient into the attribute stream") {
    RunConfig cfg = tiny_cfg();
    Model model(cfg);
    Rng irng(11);
    auto preds = model.forward(Tensor::randn({3, 32, 32}, irng, 0.5));
    Tensor seg_only;
    for (const auto& p : preds) {
        Tensor s = add(reduce_sum(sigmoid(p.mask_logits)), reduce_sum(sigmoid(p.class_logits)));
        seg_only = seg_only.defined() ? add(seg_only, s) : s;
    }
    backward(seg_only);
    for (const auto& name : model.params().names()) {
        Tensor t = model.params().get(name);
        if (!t.has_grad()) continue;
        if (name.find(".atr.") != std::string::npos ||
            name.find(".heads.atr") != std::string::npos)
            for (double g : t.grad()) CHECK(g == 0.0);
    }
}

TEST_CASE("copied stage weights reproduce the previous stage bitwise") {
    RunConfig cfg = tiny_cfg();
    Model model(cfg);
    auto& ps = model.params();
    for (const auto& name : ps.names()) {
        if (name.rfind("decoder.s0.", 0) != 0) continue;
        std::string twin = "decoder.s1." + name.substr(11);
        REQUIRE(ps.has(twin));
        ps.get(twin).data() = ps.get(name).data();
    }
    Rng irng(12);
    EncoderOutputs enc = model.encode(Tensor::randn({3, 32, 32}, irng, 0.5));
    const auto& stages = model.decoder().stages();
    auto p0 = stages[0].forward(enc.initial_mask_logits, enc.queries, enc.pyramid);
    auto p1 = stages[1].forward(enc.initial_mask_logits, enc.queries, enc.pyramid);
    CHECK(p0.mask_logits.data() == p1.mask_logits.data());
    CHECK(p0.class_logits.data() == p1.class_logits.data());
    CHECK(p0.attr_logits.data() == p1.attr_logits.data());
}

TEST_CASE("shared-query mode drops the separate attribute path") {
    RunConfig cfg = tiny_cfg();
    cfg.shared_query = true;
    Model model(cfg);
    CHECK_FALSE(model.params().has("decoder.s0.atr.dc.reweight.w"));
    CHECK(model.params().has("decoder.s0.atr.query_mlp.fc1.w"));
    Rng irng(13);
    auto preds = model.forward(Tensor::randn({3, 32, 32}, irng, 0.5));
    REQUIRE(preds.size() == 3);
    for (double v : preds.back().attr_logits.data()) CHECK(std::isfinite(v));
}
