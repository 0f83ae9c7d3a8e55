#include "data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

#include "rng.hpp"

namespace attrseg {

using nlohmann::json;
namespace fs = std::filesystem;

Rle rle_encode(const std::vector<uint8_t>& mask, int h, int w) {
    if (mask.size() != static_cast<size_t>(h) * w)
        throw std::invalid_argument("rle_encode raster size mismatch");
    Rle out;
    int run = 0;
    uint8_t cur = 0;  // first run counts zeros
    for (int x = 0; x < w; ++x)
        for (int y = 0; y < h; ++y) {
            uint8_t v = mask[static_cast<size_t>(y) * w + x] ? 1 : 0;
            if (v == cur) {
                ++run;
            } else {
                out.counts.push_back(run);
                cur = v;
                run = 1;
            }
        }
    out.counts.push_back(run);
    return out;
}

std::vector<uint8_t> rle_decode(const Rle& rle, int h, int w) {
    long total = 0;
    for (int c : rle.counts) {
        if (c < 0) throw std::invalid_argument("negative RLE count");
        total += c;
    }
    if (total != static_cast<long>(h) * w)
        throw std::invalid_argument("RLE counts sum to " + std::to_string(total) +
                                    ", expected " + std::to_string(static_cast<long>(h) * w));
    std::vector<uint8_t> mask(static_cast<size_t>(h) * w, 0);
    long pos = 0;
    uint8_t cur = 0;
    for (int c : rle.counts) {
        for (int i = 0; i < c; ++i, ++pos) {
            int x = static_cast<int>(pos / h);
            int y = static_cast<int>(pos % h);
            mask[static_cast<size_t>(y) * w + x] = cur;
        }
        cur = cur ? 0 : 1;
    }
    return mask;
}

double synth_large_area_threshold(int image_size) {
    return 0.045 * image_size * image_size;
}

namespace {

struct ShapeDraw {
    int category;       // 0 circle, 1 rectangle, 2 triangle
    double cx, cy, r;   // characteristic radius
    double aspect;      // rectangles only
    bool striped;
    bool warm;
    uint8_t color[3];
};

bool inside_shape(const ShapeDraw& s, double x, double y) {
    double dx = x - s.cx, dy = y - s.cy;
    switch (s.category) {
        case 0:
            return dx * dx + dy * dy <= s.r * s.r;
        case 1: {
            double hx = s.r * s.aspect, hy = s.r / s.aspect;
            return std::abs(dx) <= hx && std::abs(dy) <= hy;
        }
        default: {
            // upward triangle with vertices (cx,cy-r), (cx-r,cy+r), (cx+r,cy+r)
            if (dy < -s.r || dy > s.r) return false;
            double half_width = (dy + s.r) / 2.0;
            return std::abs(dx) <= half_width;
        }
    }
}

}  // namespace

SynthOutput synth_generate(const SynthConfig& cfg) {
    SynthOutput out;
    out.dataset.vocab = cfg.vocab;
    const int S = cfg.image_size;
    const double area_thr = synth_large_area_threshold(S);
    const int stripe_period = std::max(3, S / 16);

    Rng base(cfg.seed);
    for (int img_id = 0; img_id < cfg.num_images; ++img_id) {
        Rng rng = base.split();
        ImageU8 img;
        img.h = S;
        img.w = S;
        img.rgb.resize(static_cast<size_t>(S) * S * 3);
        uint8_t bg = static_cast<uint8_t>(100 + rng.uniform_int(40));
        for (int p = 0; p < S * S; ++p) {
            int noise = rng.uniform_int(17) - 8;
            uint8_t v = static_cast<uint8_t>(std::clamp(bg + noise, 0, 255));
            img.rgb[static_cast<size_t>(p) * 3 + 0] = v;
            img.rgb[static_cast<size_t>(p) * 3 + 1] = v;
            img.rgb[static_cast<size_t>(p) * 3 + 2] = v;
        }

        int count = cfg.shapes_min + rng.uniform_int(cfg.shapes_max - cfg.shapes_min + 1);
        std::vector<ShapeDraw> shapes;
        for (int i = 0; i < count; ++i) {
            ShapeDraw s;
            s.category = rng.uniform_int(3);
            bool large = rng.uniform() < 0.5;
            s.r = (large ? rng.uniform(0.14, 0.20) : rng.uniform(0.06, 0.10)) * S;
            s.aspect = rng.uniform(0.75, 1.33);
            s.cx = rng.uniform(s.r, S - s.r);
            s.cy = rng.uniform(s.r, S - s.r);
            s.striped = rng.uniform() < 0.5;
            s.warm = rng.uniform() < 0.5;
            if (s.warm) {
                s.color[0] = static_cast<uint8_t>(180 + rng.uniform_int(76));
                s.color[1] = static_cast<uint8_t>(60 + rng.uniform_int(120));
                s.color[2] = static_cast<uint8_t>(rng.uniform_int(60));
            } else {
                s.color[0] = static_cast<uint8_t>(rng.uniform_int(60));
                s.color[1] = static_cast<uint8_t>(80 + rng.uniform_int(120));
                s.color[2] = static_cast<uint8_t>(150 + rng.uniform_int(106));
            }
            shapes.push_back(s);
        }

        // later shapes overdraw earlier ones; owner map yields occluded masks
        std::vector<int> owner(static_cast<size_t>(S) * S, -1);
        for (size_t si = 0; si < shapes.size(); ++si) {
            const ShapeDraw& s = shapes[si];
            for (int y = 0; y < S; ++y)
                for (int x = 0; x < S; ++x) {
                    if (!inside_shape(s, x + 0.5, y + 0.5)) continue;
                    size_t p = static_cast<size_t>(y) * S + x;
                    owner[p] = static_cast<int>(si);
                    uint8_t c0 = s.color[0], c1 = s.color[1], c2 = s.color[2];
                    if (s.striped && (x / stripe_period) % 2 == 1) {
                        c0 = static_cast<uint8_t>(c0 * 0.45);
                        c1 = static_cast<uint8_t>(c1 * 0.45);
                        c2 = static_cast<uint8_t>(c2 * 0.45);
                    }
                    img.rgb[p * 3 + 0] = c0;
                    img.rgb[p * 3 + 1] = c1;
                    img.rgb[p * 3 + 2] = c2;
                }
        }

        for (size_t si = 0; si < shapes.size(); ++si) {
            const ShapeDraw& s = shapes[si];
            std::vector<uint8_t> mask(static_cast<size_t>(S) * S, 0);
            long area = 0;
            for (size_t p = 0; p < mask.size(); ++p)
                if (owner[p] == static_cast<int>(si)) {
                    mask[p] = 1;
                    ++area;
                }
            if (area < 25) continue;  // fully or nearly fully occluded

            InstanceAnnotation ann;
            ann.image_id = img_id;
            ann.category = s.category;
            // attribute ids: 0 solid, 1 striped, 2 small, 3 large, 4 warm, 5 cool
            std::vector<int> attrs = {s.striped ? 1 : 0,
                                      area > area_thr ? 3 : 2,
                                      s.warm ? 4 : 5};
            const auto& applicable = cfg.vocab.applicability[static_cast<size_t>(s.category)];
            for (int a : attrs)
                if (std::find(applicable.begin(), applicable.end(), a) != applicable.end())
                    ann.attributes.push_back(a);
            std::sort(ann.attributes.begin(), ann.attributes.end());
            ann.rle = rle_encode(mask, S, S);
            out.dataset.instances.push_back(std::move(ann));
        }

        char name[64];
        std::snprintf(name, sizeof(name), "images/img_%05d.png", img_id);
        out.dataset.images.push_back({img_id, name, S, S});
        out.images.push_back(std::move(img));
    }
    return out;
}

namespace {

json vocab_json(const Vocab& v) {
    json attrs = json::array();
    for (const auto& a : v.attributes)
        attrs.push_back({{"name", a.name}, {"group", a.group}});
    return json{{"categories", v.categories},
                {"attributes", attrs},
                {"applicability", v.applicability}};
}

Vocab vocab_parse(const json& j) {
    Vocab v;
    v.categories = j.at("categories").get<std::vector<std::string>>();
    for (const auto& a : j.at("attributes"))
        v.attributes.push_back({a.at("name").get<std::string>(), a.at("group").get<int>()});
    v.applicability = j.at("applicability").get<std::vector<std::vector<int>>>();
    return v;
}

}  // namespace

void save_annotations(const Dataset& ds, const std::string& path) {
    json images = json::array();
    for (const auto& im : ds.images)
        images.push_back({{"id", im.id}, {"file", im.file}, {"h", im.h}, {"w", im.w}});
    json instances = json::array();
    for (const auto& ann : ds.instances)
        instances.push_back({{"image_id", ann.image_id},
                             {"category", ann.category},
                             {"attributes", ann.attributes},
                             {"rle", {{"counts", ann.rle.counts}}}});
    json j{{"vocab", vocab_json(ds.vocab)}, {"images", images}, {"instances", instances}};
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << j.dump();
}

Dataset load_annotations(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error(path + ": invalid JSON: " + e.what());
    }

    Dataset ds;
    ds.root = fs::path(path).parent_path().string();
    try {
        ds.vocab = vocab_parse(j.at("vocab"));
    } catch (const std::exception& e) {
        throw std::runtime_error(path + ": vocab: " + e.what());
    }
    int c_count = ds.vocab.num_categories();
    int a_count = ds.vocab.num_attributes();

    std::vector<int> image_ids;
    for (size_t i = 0; i < j.at("images").size(); ++i) {
        const auto& im = j.at("images")[i];
        auto loc = [&] { return path + ": images[" + std::to_string(i) + "]"; };
        ImageRecord rec;
        try {
            rec.id = im.at("id").get<int>();
            rec.file = im.at("file").get<std::string>();
            rec.h = im.at("h").get<int>();
            rec.w = im.at("w").get<int>();
        } catch (const std::exception& e) {
            throw std::runtime_error(loc() + ": " + e.what());
        }
        if (rec.h < 1 || rec.w < 1) throw std::runtime_error(loc() + ": bad extents");
        image_ids.push_back(rec.id);
        ds.images.push_back(std::move(rec));
    }

    for (size_t i = 0; i < j.at("instances").size(); ++i) {
        const auto& in = j.at("instances")[i];
        auto loc = [&] { return path + ": instances[" + std::to_string(i) + "]"; };
        InstanceAnnotation ann;
        try {
            ann.image_id = in.at("image_id").get<int>();
            ann.category = in.at("category").get<int>();
            ann.attributes = in.at("attributes").get<std::vector<int>>();
            ann.rle.counts = in.at("rle").at("counts").get<std::vector<int>>();
        } catch (const std::exception& e) {
            throw std::runtime_error(loc() + ": " + e.what());
        }
        auto img_it = std::find(image_ids.begin(), image_ids.end(), ann.image_id);
        if (img_it == image_ids.end())
            throw std::runtime_error(loc() + ".image_id: unknown image " +
                                     std::to_string(ann.image_id));
        if (ann.category < 0 || ann.category >= c_count)
            throw std::runtime_error(loc() + ".category: id " +
                                     std::to_string(ann.category) + " out of range");
        const auto& applicable =
            ds.vocab.applicability[static_cast<size_t>(ann.category)];
        for (int a : ann.attributes) {
            if (a < 0 || a >= a_count)
                throw std::runtime_error(loc() + ".attributes: unknown attribute id " +
                                         std::to_string(a));
            if (std::find(applicable.begin(), applicable.end(), a) == applicable.end())
                throw std::runtime_error(loc() + ".attributes: attribute " +
                                         std::to_string(a) +
                                         " not applicable to category " +
                                         std::to_string(ann.category));
        }
        const auto& rec = ds.images[static_cast<size_t>(img_it - image_ids.begin())];
        try {
            rle_decode(ann.rle, rec.h, rec.w);
        } catch (const std::exception& e) {
            throw std::runtime_error(loc() + ".rle: " + e.what());
        }
        ds.instances.push_back(std::move(ann));
    }
    return ds;
}

void save_dataset(const SynthOutput& out, const std::string& dir) {
    fs::create_directories(fs::path(dir) / "images");
    for (size_t i = 0; i < out.images.size(); ++i)
        write_png((fs::path(dir) / out.dataset.images[i].file).string(), out.images[i]);
    Dataset ds = out.dataset;
    ds.root = dir;
    save_annotations(ds, (fs::path(dir) / "annotations.json").string());
}

std::vector<InstanceTarget> rasterize_targets(const Dataset& ds, int image_id,
                                              int stride) {
    const ImageRecord* rec = nullptr;
    for (const auto& im : ds.images)
        if (im.id == image_id) rec = &im;
    if (!rec) throw std::invalid_argument("unknown image id");
    int h2 = rec->h / stride, w2 = rec->w / stride;

    std::vector<InstanceTarget> out;
    for (const auto& ann : ds.instances) {
        if (ann.image_id != image_id) continue;
        auto full = rle_decode(ann.rle, rec->h, rec->w);
        InstanceTarget t;
        t.h = h2;
        t.w = w2;
        t.category = ann.category;
        t.attributes = ann.attributes;
        t.mask.assign(static_cast<size_t>(h2) * w2, 0);
        // max-pool keeps thin structures that plain subsampling would drop
        for (int y = 0; y < rec->h; ++y)
            for (int x = 0; x < rec->w; ++x)
                if (full[static_cast<size_t>(y) * rec->w + x]) {
                    int ys = std::min(y / stride, h2 - 1);
                    int xs = std::min(x / stride, w2 - 1);
                    t.mask[static_cast<size_t>(ys) * w2 + xs] = 1;
                }
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<GtInstance> dataset_gts(const Dataset& ds) {
    std::vector<GtInstance> out;
    for (const auto& ann : ds.instances) {
        const ImageRecord* rec = nullptr;
        for (const auto& im : ds.images)
            if (im.id == ann.image_id) rec = &im;
        GtInstance g;
        g.h = rec->h;
        g.w = rec->w;
        g.image_id = ann.image_id;
        g.category = ann.category;
        g.attributes = ann.attributes;
        g.mask = rle_decode(ann.rle, rec->h, rec->w);
        out.push_back(std::move(g));
    }
    return out;
}

}  // namespace attrseg
