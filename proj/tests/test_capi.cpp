#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <string>

#include "attrseg.h"

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

TEST_CASE("null arguments are rejected with a message") {
    CHECK(attrseg_synth("{}", nullptr) == ATTRSEG_ERR_INVALID_ARGUMENT);
    CHECK(std::strlen(attrseg_last_error()) > 0);
    CHECK(attrseg_train("{}", nullptr, nullptr) == ATTRSEG_ERR_INVALID_ARGUMENT);
    CHECK(attrseg_model_load(nullptr, nullptr) == ATTRSEG_ERR_INVALID_ARGUMENT);
    CHECK(attrseg_evaluate(nullptr, "x", 0, nullptr, 0) == ATTRSEG_ERR_INVALID_ARGUMENT);
    CHECK(attrseg_infer(nullptr, "x", "y", 0.5) == ATTRSEG_ERR_INVALID_ARGUMENT);
}

TEST_CASE("malformed configuration fails cleanly") {
    TempDir tmp("attrseg_capi_badcfg");
    CHECK(attrseg_synth("not json", tmp.path.c_str()) != ATTRSEG_OK);
    CHECK(std::strlen(attrseg_last_error()) > 0);
    CHECK(attrseg_train("{\"stages\": 0}", tmp.path.c_str(), tmp.path.c_str()) ==
          ATTRSEG_ERR_INVALID_ARGUMENT);
}

TEST_CASE("loading a missing checkpoint reports an I/O error") {
    attrseg_model* model = nullptr;
    CHECK(attrseg_model_load("/nonexistent/model.qsl1", &model) == ATTRSEG_ERR_IO);
    CHECK(model == nullptr);
}

TEST_CASE("synth, train, evaluate and infer through the shared library") {
    TempDir data("attrseg_capi_data");
    TempDir run("attrseg_capi_run");
    TempDir inf("attrseg_capi_infer");

    const char* synth_cfg = R"({"image_size": 64, "num_images": 3, "seed": 2})";
    REQUIRE(attrseg_synth(synth_cfg, data.path.c_str()) == ATTRSEG_OK);
    CHECK(fs::exists(data.path / "annotations.json"));
    CHECK(fs::exists(data.path / "images" / "img_00000.png"));

    const char* train_cfg =
        R"({"image_size": 64, "embed_dim": 8, "num_queries": 4, "stages": 2,
            "steps": 4, "batch_size": 1, "seed": 2})";
    REQUIRE(attrseg_train(train_cfg, data.path.c_str(), run.path.c_str()) == ATTRSEG_OK);
    CHECK(fs::exists(run.path / "model.qsl1"));
    CHECK(fs::file_size(run.path / "loss_log.txt") > 0);

    attrseg_model* model = nullptr;
    REQUIRE(attrseg_model_load((run.path / "model.qsl1").c_str(), &model) == ATTRSEG_OK);

    char buf[4096];
    REQUIRE(attrseg_evaluate(model, data.path.c_str(), 0, buf, sizeof buf) == ATTRSEG_OK);
    std::string report(buf);
    CHECK(report.find("ap_iou=") != std::string::npos);
    CHECK(report.find("ap_iou_f1=") != std::string::npos);
    CHECK(report.find("gap_g=") != std::string::npos);

    REQUIRE(attrseg_infer(model, (data.path / "images" / "img_00000.png").c_str(),
                          inf.path.c_str(), 0.0) == ATTRSEG_OK);
    CHECK(fs::exists(inf.path / "overlay.png"));
    CHECK(fs::exists(inf.path / "instances.txt"));
    CHECK(fs::exists(inf.path / "instances.json"));

    // an unreadable image is rejected
    CHECK(attrseg_infer(model, (data.path / "annotations.json").c_str(),
                        inf.path.c_str(), 0.5) != ATTRSEG_OK);

    attrseg_model_free(model);
    attrseg_model_free(nullptr);  // harmless
}

TEST_CASE("gradient audit reports per-entry results and flags failures") {
    char buf[16384];
    CHECK(attrseg_gradcheck(3, 1, buf, sizeof buf) == ATTRSEG_ERR_CHECK_FAILED);
    std::string report(buf);
    CHECK(report.find("conv2d err=") != std::string::npos);
    CHECK(report.find("full_model_loss err=") != std::string::npos);
    CHECK(report.find("injected_wrong_gradient err=") != std::string::npos);
    CHECK(report.find("FAIL") != std::string::npos);
    // only the injected entry fails
    CHECK(report.find("FAIL") == report.rfind("FAIL"));
}
