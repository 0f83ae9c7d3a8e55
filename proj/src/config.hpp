#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace attrseg {

struct AttributeDef {
    std::string name;
    int group = 0;
};

struct Vocab {
    std::vector<std::string> categories;
    std::vector<AttributeDef> attributes;
    // per category: sorted list of applicable attribute ids (empty list means
    // the category carries no attribute annotations and is skipped by the
    // joint metric)
    std::vector<std::vector<int>> applicability;

    int num_categories() const { return static_cast<int>(categories.size()); }
    int num_attributes() const { return static_cast<int>(attributes.size()); }

    // C=3 shape categories, A=6 attributes in 3 groups
    static Vocab desk_default();
};

struct RunConfig {
    int image_size = 128;
    int num_queries = 10;  // N
    int embed_dim = 32;    // d
    int stages = 3;
    int heads = 0;  // 0 = auto: 8 when d >= 32, else 4
    bool decoupled = true;       // individual query learning per stream
    bool shared_query = false;   // ablation: attribute path = MLP(Q_obj), shared params
    double lambda_cls = 1.0, lambda_mask = 1.0, lambda_atr = 1.0;
    double lr = 1e-3;
    double weight_decay = 1e-4;
    int steps = 2000;
    int batch_size = 2;
    double warmup_frac = 0.1;
    uint64_t seed = 0;
    Vocab vocab = Vocab::desk_default();

    int resolved_heads() const {
        if (heads > 0) return heads;
        return embed_dim >= 32 ? 8 : 4;
    }

    void validate() const;  // throws std::invalid_argument

    static RunConfig from_json_text(const std::string& text);  // merge over defaults
    std::string to_json_text() const;
};

struct SynthConfig {
    int image_size = 128;
    int num_images = 8;
    int shapes_min = 1;
    int shapes_max = 3;
    uint64_t seed = 0;
    Vocab vocab = Vocab::desk_default();

    static SynthConfig from_json_text(const std::string& text);
    std::string to_json_text() const;
};

}  // namespace attrseg
