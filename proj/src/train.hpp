#pragma once

#include <map>
#include <memory>
#include <optional>
#include <ostream>

#include "data.hpp"
#include "model.hpp"

namespace attrseg {

// Adam with decoupled weight decay.
struct AdamW {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double weight_decay = 1e-4;
    uint64_t step = 0;
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> state;

    void update(ParamStore& params, double lr);
};

// linear warmup then cosine decay
double lr_at(const RunConfig& cfg, int step);

struct LossLogEntry {
    int step = 0;
    double lr = 0, l_cls = 0, l_mask = 0, l_atr = 0, total = 0;
};

struct TrainResult {
    std::vector<LossLogEntry> log;
};

// In-memory training set: image tensors plus stride-4 targets.
struct TrainData {
    std::vector<Tensor> images;
    std::vector<std::vector<InstanceTarget>> targets;
};

TrainData prepare_train_data(const Dataset& ds, const std::vector<ImageU8>& images);
TrainData load_train_data(const std::string& data_dir);

TrainResult train_model(Model& model, AdamW& opt, const TrainData& data,
                        std::ostream* log_stream = nullptr);

// ---- checkpoint ("QSL1", little-endian) ----

void save_checkpoint(const Model& model, const AdamW* opt, const std::string& path);

struct LoadedCheckpoint {
    std::unique_ptr<Model> model;
    AdamW opt;
    bool has_opt = false;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

// ---- inference / evaluation drivers ----

std::vector<Detection> predict_image(const Model& model, const Tensor& image,
                                     int image_id);

EvalReport evaluate_model(const Model& model, const std::string& data_dir,
                          const EvalOptions& opt = {});

struct InferInstance {
    int category = 0;
    double score = 0.0;
    std::vector<int> attributes;
    std::vector<double> attr_probs;  // all A sigmoid outputs
    Rle mask_rle;
};
std::vector<InferInstance> infer_image(const Model& model,
                                       const std::string& image_path,
                                       const std::string& out_dir,
                                       double score_thr = 0.5);

// ---- gradient-check suite ----

struct GradcheckEntry {
    std::string name;
    double err = 0.0;
    bool pass = false;
};
// inject_fault adds a deliberately broken entry, for exercising the reporting
std::vector<GradcheckEntry> run_gradcheck(uint64_t seed, bool inject_fault = false);

}  // namespace attrseg
