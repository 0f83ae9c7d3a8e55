#include "attrseg.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "train.hpp"

namespace fs = std::filesystem;

struct attrseg_model {
    std::unique_ptr<attrseg::Model> model;
};

namespace {

thread_local std::string g_last_error;

attrseg_status fail(attrseg_status code, const std::string& msg) {
    g_last_error = msg;
    return code;
}

template <typename Fn>
attrseg_status guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const std::invalid_argument& e) {
        return fail(ATTRSEG_ERR_INVALID_ARGUMENT, e.what());
    } catch (const std::exception& e) {
        return fail(ATTRSEG_ERR_RUNTIME, e.what());
    }
}

void copy_out(const std::string& text, char* buf, size_t buf_len) {
    if (!buf || buf_len == 0) return;
    size_t n = std::min(text.size(), buf_len - 1);
    std::memcpy(buf, text.data(), n);
    buf[n] = '\0';
}

}  // namespace

extern "C" {

const char* attrseg_last_error(void) { return g_last_error.c_str(); }

attrseg_status attrseg_synth(const char* config_json, const char* out_dir) {
    if (!out_dir) return fail(ATTRSEG_ERR_INVALID_ARGUMENT, "out_dir is null");
    return guarded([&] {
        auto cfg = attrseg::SynthConfig::from_json_text(config_json ? config_json : "{}");
        auto out = attrseg::synth_generate(cfg);
        attrseg::save_dataset(out, out_dir);
        return ATTRSEG_OK;
    });
}

attrseg_status attrseg_train(const char* config_json, const char* data_dir,
                             const char* out_dir) {
    if (!data_dir || !out_dir)
        return fail(ATTRSEG_ERR_INVALID_ARGUMENT, "data_dir/out_dir is null");
    return guarded([&] {
        auto cfg = attrseg::RunConfig::from_json_text(config_json ? config_json : "{}");
        cfg.validate();
        auto data = attrseg::load_train_data(data_dir);
        attrseg::Model model(cfg);
        attrseg::AdamW opt;
        opt.weight_decay = cfg.weight_decay;
        fs::create_directories(out_dir);
        std::ofstream log((fs::path(out_dir) / "loss_log.txt").string());
        attrseg::train_model(model, opt, data, &log);
        attrseg::save_checkpoint(model, &opt, (fs::path(out_dir) / "model.qsl1").string());
        return ATTRSEG_OK;
    });
}

attrseg_status attrseg_model_load(const char* checkpoint_path, attrseg_model** out) {
    if (!checkpoint_path || !out)
        return fail(ATTRSEG_ERR_INVALID_ARGUMENT, "checkpoint_path/out is null");
    *out = nullptr;
    return guarded([&] {
        if (!fs::exists(checkpoint_path))
            return fail(ATTRSEG_ERR_IO,
                        std::string("no such checkpoint: ") + checkpoint_path);
        auto loaded = attrseg::load_checkpoint(checkpoint_path);
        *out = new attrseg_model{std::move(loaded.model)};
        return ATTRSEG_OK;
    });
}

void attrseg_model_free(attrseg_model* model) { delete model; }

attrseg_status attrseg_evaluate(attrseg_model* model, const char* data_dir,
                                int single_threshold, char* buf, size_t buf_len) {
    if (!model || !data_dir)
        return fail(ATTRSEG_ERR_INVALID_ARGUMENT, "model/data_dir is null");
    return guarded([&] {
        attrseg::EvalOptions opt;
        opt.single_threshold = single_threshold != 0;
        auto report = attrseg::evaluate_model(*model->model, data_dir, opt);
        copy_out(report.to_kv(), buf, buf_len);
        return ATTRSEG_OK;
    });
}

attrseg_status attrseg_infer(attrseg_model* model, const char* image_path,
                             const char* out_dir, double score_threshold) {
    if (!model || !image_path || !out_dir)
        return fail(ATTRSEG_ERR_INVALID_ARGUMENT, "model/image_path/out_dir is null");
    return guarded([&] {
        attrseg::infer_image(*model->model, image_path, out_dir, score_threshold);
        return ATTRSEG_OK;
    });
}

attrseg_status attrseg_gradcheck(uint64_t seed, int inject_fault, char* buf,
                                 size_t buf_len) {
    return guarded([&] {
        auto entries = attrseg::run_gradcheck(seed, inject_fault != 0);
        std::ostringstream os;
        bool all_pass = true;
        for (const auto& e : entries) {
            os << e.name << " err=" << e.err << (e.pass ? " pass" : " FAIL") << "\n";
            all_pass = all_pass && e.pass;
        }
        copy_out(os.str(), buf, buf_len);
        if (!all_pass) return fail(ATTRSEG_ERR_CHECK_FAILED, "gradient check failed");
        return ATTRSEG_OK;
    });
}

}  // extern "C"
