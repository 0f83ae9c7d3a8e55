#include "config.hpp"

#include <json.hpp>
#include <stdexcept>

namespace attrseg {

using nlohmann::json;

Vocab Vocab::desk_default() {
    Vocab v;
    v.categories = {"circle", "rectangle", "triangle"};
    v.attributes = {{"solid", 0},  {"striped", 0}, {"small", 1},
                    {"large", 1},  {"warm", 2},    {"cool", 2}};
    v.applicability = {{0, 1, 2, 3, 4, 5}, {0, 1, 2, 3, 4, 5}, {0, 1, 2, 3, 4, 5}};
    return v;
}

void RunConfig::validate() const {
    if (stages < 1) throw std::invalid_argument("stages must be >= 1");
    if (lambda_cls < 0 || lambda_mask < 0 || lambda_atr < 0)
        throw std::invalid_argument("loss weights must be >= 0");
    if (num_queries < 1) throw std::invalid_argument("num_queries must be >= 1");
    if (embed_dim % 4 != 0)
        throw std::invalid_argument("embed_dim must be a multiple of 4");
    if (embed_dim % resolved_heads() != 0)
        throw std::invalid_argument("embed_dim not divisible by head count");
    if (vocab.num_attributes() < 2) throw std::invalid_argument("need A >= 2");
    if (vocab.applicability.size() != vocab.categories.size())
        throw std::invalid_argument("applicability table must cover every category");
}

namespace {

json vocab_to_json(const Vocab& v) {
    json attrs = json::array();
    for (const auto& a : v.attributes) attrs.push_back({{"name", a.name}, {"group", a.group}});
    return json{{"categories", v.categories},
                {"attributes", attrs},
                {"applicability", v.applicability}};
}

Vocab vocab_from_json(const json& j) {
    Vocab v;
    v.categories = j.at("categories").get<std::vector<std::string>>();
    for (const auto& a : j.at("attributes"))
        v.attributes.push_back({a.at("name").get<std::string>(), a.at("group").get<int>()});
    v.applicability = j.at("applicability").get<std::vector<std::vector<int>>>();
    return v;
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
    json j = json::parse(text);
    RunConfig c;
    maybe(j, "image_size", c.image_size);
    maybe(j, "num_queries", c.num_queries);
    maybe(j, "embed_dim", c.embed_dim);
    maybe(j, "stages", c.stages);
    maybe(j, "heads", c.heads);
    maybe(j, "decoupled", c.decoupled);
    maybe(j, "shared_query", c.shared_query);
    maybe(j, "lambda_cls", c.lambda_cls);
    maybe(j, "lambda_mask", c.lambda_mask);
    maybe(j, "lambda_atr", c.lambda_atr);
    maybe(j, "lr", c.lr);
    maybe(j, "weight_decay", c.weight_decay);
    maybe(j, "steps", c.steps);
    maybe(j, "batch_size", c.batch_size);
    maybe(j, "warmup_frac", c.warmup_frac);
    maybe(j, "seed", c.seed);
    if (j.contains("vocab")) c.vocab = vocab_from_json(j.at("vocab"));
    c.validate();
    return c;
}

std::string RunConfig::to_json_text() const {
    json j{{"image_size", image_size},
           {"num_queries", num_queries},
           {"embed_dim", embed_dim},
           {"stages", stages},
           {"heads", heads},
           {"decoupled", decoupled},
           {"shared_query", shared_query},
           {"lambda_cls", lambda_cls},
           {"lambda_mask", lambda_mask},
           {"lambda_atr", lambda_atr},
           {"lr", lr},
           {"weight_decay", weight_decay},
           {"steps", steps},
           {"batch_size", batch_size},
           {"warmup_frac", warmup_frac},
           {"seed", seed},
           {"vocab", vocab_to_json(vocab)}};
    return j.dump(2);
}

SynthConfig SynthConfig::from_json_text(const std::string& text) {
    json j = json::parse(text);
    SynthConfig c;
    maybe(j, "image_size", c.image_size);
    maybe(j, "num_images", c.num_images);
    maybe(j, "shapes_min", c.shapes_min);
    maybe(j, "shapes_max", c.shapes_max);
    maybe(j, "seed", c.seed);
    if (j.contains("vocab")) c.vocab = vocab_from_json(j.at("vocab"));
    if (c.image_size < 32) throw std::invalid_argument("image_size must be >= 32");
    if (c.shapes_min < 0 || c.shapes_max < c.shapes_min)
        throw std::invalid_argument("bad shapes range");
    return c;
}

std::string SynthConfig::to_json_text() const {
    json j{{"image_size", image_size}, {"num_images", num_images},
           {"shapes_min", shapes_min}, {"shapes_max", shapes_max},
           {"seed", seed},             {"vocab", vocab_to_json(vocab)}};
    return j.dump(2);
}

}  // namespace attrseg
