#include "model.hpp"

namespace attrseg {

Model::Model(const RunConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(cfg_.seed);
    encoder_ = std::make_unique<Encoder>(params_, cfg_, rng);
    decoder_ = std::make_unique<Decoder>(params_, cfg_, rng);
}

EncoderOutputs Model::encode(const Tensor& image) const {
    return encoder_->forward(image);
}

std::vector<StagePrediction> Model::forward(const Tensor& image) const {
    return decoder_->forward(encoder_->forward(image));
}

}  // namespace attrseg
