#pragma once

#include <memory>

#include "decoder.hpp"

namespace attrseg {

class Model {
public:
    explicit Model(const RunConfig& cfg);

    std::vector<StagePrediction> forward(const Tensor& image) const;
    EncoderOutputs encode(const Tensor& image) const;

    const RunConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    const Encoder& encoder() const { return *encoder_; }
    const Decoder& decoder() const { return *decoder_; }

private:
    RunConfig cfg_;
    ParamStore params_;
    std::unique_ptr<Encoder> encoder_;
    std::unique_ptr<Decoder> decoder_;
};

}  // namespace attrseg
