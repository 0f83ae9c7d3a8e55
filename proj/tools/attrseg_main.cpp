#include <CLI11.hpp>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>

#include "attrseg.h"

using nlohmann::json;

namespace {

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream is(path);
    if (!is) throw CLI::ValidationError("--config", "cannot open " + path);
    json j;
    is >> j;
    return j;
}

int report(attrseg_status st) {
    if (st == ATTRSEG_OK) return 0;
    std::cerr << "error: " << attrseg_last_error() << "\n";
    return static_cast<int>(st);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"query-based instance segmentation with per-instance attributes"};
    app.require_subcommand(1);

    std::string config_path, data_dir, out_dir, checkpoint, image_path;
    std::optional<uint64_t> seed;
    std::optional<int> steps, num_images, image_size;
    double score_thr = 0.5;
    bool single_threshold = false, inject_fault = false;

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    synth->add_option("--config", config_path, "JSON config file");
    synth->add_option("--out", out_dir, "output directory")->required();
    synth->add_option("--seed", seed, "override the config seed");
    synth->add_option("--images", num_images, "override the image count");
    synth->add_option("--size", image_size, "override the image size");

    auto* train = app.add_subcommand("train", "train a model on a dataset");
    train->add_option("--config", config_path, "JSON config file");
    train->add_option("--data", data_dir, "dataset directory")->required();
    train->add_option("--out", out_dir, "output directory")->required();
    train->add_option("--seed", seed, "override the config seed");
    train->add_option("--steps", steps, "override the step count");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    eval->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    eval->add_option("--data", data_dir, "dataset directory")->required();
    eval->add_flag("--single-threshold", single_threshold,
                   "fixed-threshold diagnostic instead of threshold-averaged metrics");

    auto* infer = app.add_subcommand("infer", "run a checkpoint on one image");
    infer->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    infer->add_option("--image", image_path, "input PNG")->required();
    infer->add_option("--out", out_dir, "output directory")->required();
    infer->add_option("--threshold", score_thr, "score threshold")->capture_default_str();

    auto* gradcheck = app.add_subcommand("gradcheck", "audit gradients by finite differences");
    gradcheck->add_option("--seed", seed, "randomization seed");
    gradcheck->add_flag("--inject-fault", inject_fault,
                        "add a deliberately broken entry");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            json cfg = load_config(config_path);
            if (seed) cfg["seed"] = *seed;
            if (num_images) cfg["num_images"] = *num_images;
            if (image_size) cfg["image_size"] = *image_size;
            return report(attrseg_synth(cfg.dump().c_str(), out_dir.c_str()));
        }
        if (train->parsed()) {
            json cfg = load_config(config_path);
            if (seed) cfg["seed"] = *seed;
            if (steps) cfg["steps"] = *steps;
            return report(
                attrseg_train(cfg.dump().c_str(), data_dir.c_str(), out_dir.c_str()));
        }
        if (eval->parsed()) {
            attrseg_model* model = nullptr;
            if (int rc = report(attrseg_model_load(checkpoint.c_str(), &model))) return rc;
            std::string buf(1 << 16, '\0');
            attrseg_status st = attrseg_evaluate(model, data_dir.c_str(),
                                                 single_threshold ? 1 : 0, buf.data(),
                                                 buf.size());
            attrseg_model_free(model);
            if (st == ATTRSEG_OK) std::cout << buf.c_str();
            return report(st);
        }
        if (infer->parsed()) {
            attrseg_model* model = nullptr;
            if (int rc = report(attrseg_model_load(checkpoint.c_str(), &model))) return rc;
            attrseg_status st =
                attrseg_infer(model, image_path.c_str(), out_dir.c_str(), score_thr);
            attrseg_model_free(model);
            return report(st);
        }
        if (gradcheck->parsed()) {
            std::string buf(1 << 16, '\0');
            attrseg_status st = attrseg_gradcheck(seed.value_or(0),
                                                  inject_fault ? 1 : 0, buf.data(),
                                                  buf.size());
            std::cout << buf.c_str();
            return report(st);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
