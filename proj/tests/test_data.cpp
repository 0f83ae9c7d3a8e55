#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "data.hpp"
#include "rng.hpp"

using namespace attrseg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir(const char* name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("run-length codec") {
    // all zeros: one run covering everything
    std::vector<uint8_t> zeros(12, 0);
    CHECK(rle_encode(zeros, 3, 4).counts == std::vector<int>{12});
    // all ones: leading empty zero-run
    std::vector<uint8_t> ones(12, 1);
    CHECK(rle_encode(ones, 3, 4).counts == std::vector<int>{0, 12});

    // column-major order: pixel (row 1, col 0) of a 2x3 raster is the second bit
    std::vector<uint8_t> single(6, 0);
    single[3] = 1;  // row 1, col 0 in row-major
    CHECK(rle_encode(single, 2, 3).counts == std::vector<int>{1, 1, 4});

    CHECK_THROWS_AS(rle_decode(Rle{{5, 5}}, 3, 4), std::invalid_argument);

    Rng rng(41);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<uint8_t> mask(256);
        for (auto& v : mask) v = rng.uniform() < 0.4 ? 1 : 0;
        CHECK(rle_decode(rle_encode(mask, 16, 16), 16, 16) == mask);
    }
}

TEST_CASE("generation is deterministic per seed") {
    SynthConfig cfg;
    cfg.image_size = 64;
    cfg.num_images = 3;
    cfg.seed = 5;
    auto a = synth_generate(cfg);
    auto b = synth_generate(cfg);
    REQUIRE(a.images.size() == 3);
    for (size_t i = 0; i < a.images.size(); ++i)
        CHECK(a.images[i].rgb == b.images[i].rgb);
    REQUIRE(a.dataset.instances.size() == b.dataset.instances.size());
    for (size_t i = 0; i < a.dataset.instances.size(); ++i) {
        CHECK(a.dataset.instances[i].rle.counts == b.dataset.instances[i].rle.counts);
        CHECK(a.dataset.instances[i].attributes == b.dataset.instances[i].attributes);
    }

    cfg.seed = 6;
    auto c = synth_generate(cfg);
    CHECK(a.images[0].rgb != c.images[0].rgb);
}

TEST_CASE("zero shapes per image yields empty annotation lists") {
    SynthConfig cfg;
    cfg.image_size = 64;
    cfg.num_images = 2;
    cfg.shapes_min = 0;
    cfg.shapes_max = 0;
    auto out = synth_generate(cfg);
    CHECK(out.dataset.images.size() == 2);
    CHECK(out.dataset.instances.empty());
}

TEST_CASE("generated annotations respect their own contract") {
    SynthConfig cfg;
    cfg.image_size = 96;
    cfg.num_images = 12;
    cfg.shapes_max = 4;
    cfg.seed = 9;
    auto out = synth_generate(cfg);
    const Vocab& v = out.dataset.vocab;
    double area_thr = synth_large_area_threshold(96);
    REQUIRE_FALSE(out.dataset.instances.empty());

    for (const auto& ann : out.dataset.instances) {
        CHECK(ann.category >= 0);
        CHECK(ann.category < v.num_categories());
        CHECK(std::is_sorted(ann.attributes.begin(), ann.attributes.end()));
        const auto& ok = v.applicability[static_cast<size_t>(ann.category)];
        for (int a : ann.attributes)
            CHECK(std::find(ok.begin(), ok.end(), a) != ok.end());

        auto mask = rle_decode(ann.rle, 96, 96);
        double area = 0;
        for (uint8_t px : mask) area += px != 0;
        CHECK(area >= 25);  // tiny occluded fragments are dropped

        // the size attribute is labeled from the realized visible area
        bool small = std::count(ann.attributes.begin(), ann.attributes.end(), 2) > 0;
        bool large = std::count(ann.attributes.begin(), ann.attributes.end(), 3) > 0;
        CHECK(small != large);
        if (large) CHECK(area > area_thr);
        if (small) CHECK(area <= area_thr);
    }
}

TEST_CASE("annotation files round trip") {
    TempDir tmp("attrseg_data_rt");
    SynthConfig cfg;
    cfg.image_size = 64;
    cfg.num_images = 2;
    cfg.seed = 3;
    auto out = synth_generate(cfg);

    std::string path = (tmp.path / "annotations.json").string();
    save_annotations(out.dataset, path);
    Dataset back = load_annotations(path);

    CHECK(back.vocab.categories == out.dataset.vocab.categories);
    CHECK(back.vocab.applicability == out.dataset.vocab.applicability);
    REQUIRE(back.images.size() == out.dataset.images.size());
    for (size_t i = 0; i < back.images.size(); ++i) {
        CHECK(back.images[i].id == out.dataset.images[i].id);
        CHECK(back.images[i].file == out.dataset.images[i].file);
    }
    REQUIRE(back.instances.size() == out.dataset.instances.size());
    for (size_t i = 0; i < back.instances.size(); ++i) {
        CHECK(back.instances[i].category == out.dataset.instances[i].category);
        CHECK(back.instances[i].attributes == out.dataset.instances[i].attributes);
        CHECK(back.instances[i].rle.counts == out.dataset.instances[i].rle.counts);
    }
}

TEST_CASE("schema violations name the offending element") {
    TempDir tmp("attrseg_data_bad");
    auto write = [&](const char* name, const std::string& body) {
        std::string p = (tmp.path / name).string();
        std::ofstream(p) << body;
        return p;
    };
    const std::string vocab =
        R"("vocab":{"categories":["a","b"],)"
        R"("attributes":[{"name":"x","group":0},{"name":"y","group":0}],)"
        R"("applicability":[[0,1],[0]]})";

    // empty dataset is valid
    Dataset empty = load_annotations(
        write("empty.json", "{" + vocab + R"(,"images":[],"instances":[]})"));
    CHECK(empty.images.empty());
    CHECK(empty.instances.empty());

    // unknown attribute id
    std::string bad_attr = "{" + vocab +
        R"(,"images":[{"id":0,"file":"f.png","h":2,"w":2}],)"
        R"("instances":[{"image_id":0,"category":0,"attributes":[9],"rle":{"counts":[4]}}]})";
    CHECK_THROWS_WITH_AS(load_annotations(write("bad_attr.json", bad_attr)),
                         doctest::Contains("instances[0].attributes"), std::runtime_error);

    // attribute outside the category's applicability
    std::string bad_app = "{" + vocab +
        R"(,"images":[{"id":0,"file":"f.png","h":2,"w":2}],)"
        R"("instances":[{"image_id":0,"category":1,"attributes":[1],"rle":{"counts":[4]}}]})";
    CHECK_THROWS_WITH_AS(load_annotations(write("bad_app.json", bad_app)),
                         doctest::Contains("not applicable"), std::runtime_error);

    // counts that do not cover the raster
    std::string bad_rle = "{" + vocab +
        R"(,"images":[{"id":0,"file":"f.png","h":2,"w":2}],)"
        R"("instances":[{"image_id":0,"category":0,"attributes":[],"rle":{"counts":[3]}}]})";
    CHECK_THROWS_WITH_AS(load_annotations(write("bad_rle.json", bad_rle)),
                         doctest::Contains("instances[0].rle"), std::runtime_error);

    // reference to a missing image
    std::string bad_img = "{" + vocab +
        R"(,"images":[],"instances":[{"image_id":7,"category":0,"attributes":[],"rle":{"counts":[4]}}]})";
    CHECK_THROWS_WITH_AS(load_annotations(write("bad_img.json", bad_img)),
                         doctest::Contains("instances[0].image_id"), std::runtime_error);
}

TEST_CASE("saved datasets reload with readable images") {
    TempDir tmp("attrseg_data_full");
    SynthConfig cfg;
    cfg.image_size = 64;
    cfg.num_images = 2;
    cfg.seed = 13;
    auto out = synth_generate(cfg);
    save_dataset(out, tmp.path.string());

    Dataset back = load_annotations((tmp.path / "annotations.json").string());
    REQUIRE(back.images.size() == 2);
    for (size_t i = 0; i < back.images.size(); ++i) {
        ImageU8 img = read_png((fs::path(back.root) / back.images[i].file).string());
        CHECK(img.h == 64);
        CHECK(img.w == 64);
        CHECK(img.rgb == out.images[i].rgb);  // lossless PNG round trip
    }
}

TEST_CASE("target rasterization keeps thin structures via max pooling") {
    Dataset ds;
    ds.vocab = Vocab::desk_default();
    ds.images.push_back({0, "x.png", 16, 16});
    // one-pixel-wide vertical line at x=5
    std::vector<uint8_t> line(256, 0);
    for (int y = 0; y < 16; ++y) line[static_cast<size_t>(y * 16 + 5)] = 1;
    InstanceAnnotation ann;
    ann.image_id = 0;
    ann.category = 0;
    ann.attributes = {0, 2, 4};
    ann.rle = rle_encode(line, 16, 16);
    ds.instances.push_back(ann);

    auto targets = rasterize_targets(ds, 0, 4);
    REQUIRE(targets.size() == 1);
    CHECK(targets[0].h == 4);
    CHECK(targets[0].w == 4);
    CHECK(targets[0].category == 0);
    CHECK(targets[0].attributes == std::vector<int>{0, 2, 4});
    // the line lands in cell column 1 of every row
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
            CHECK(targets[0].mask[static_cast<size_t>(y * 4 + x)] == (x == 1 ? 1 : 0));

    auto gts = dataset_gts(ds);
    REQUIRE(gts.size() == 1);
    CHECK(gts[0].mask == line);
    CHECK(gts[0].h == 16);
}
