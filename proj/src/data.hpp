#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "config.hpp"
#include "losses.hpp"
#include "metrics.hpp"
#include "png_io.hpp"

namespace attrseg {

// Column-major run-length encoding, first count covers zeros (COCO convention).
struct Rle {
    std::vector<int> counts;
};

Rle rle_encode(const std::vector<uint8_t>& mask, int h, int w);
std::vector<uint8_t> rle_decode(const Rle& rle, int h, int w);  // throws on bad sum

struct InstanceAnnotation {
    int image_id = 0;
    int category = 0;
    std::vector<int> attributes;  // sorted ids
    Rle rle;                      // at image resolution
};

struct ImageRecord {
    int id = 0;
    std::string file;
    int h = 0, w = 0;
};

struct Dataset {
    Vocab vocab;
    std::vector<ImageRecord> images;
    std::vector<InstanceAnnotation> instances;
    std::string root;  // directory that image file paths are relative to
};

struct SynthOutput {
    Dataset dataset;
    std::vector<ImageU8> images;  // parallel to dataset.images
};

// Deterministic per seed; attributes are realized in pixels (stripes drawn,
// size labeled from the visible mask area) and occluded masks are clipped.
SynthOutput synth_generate(const SynthConfig& cfg);

// visible-area threshold separating the "small"/"large" attributes
double synth_large_area_threshold(int image_size);

void save_dataset(const SynthOutput& out, const std::string& dir);
Dataset load_annotations(const std::string& path);
void save_annotations(const Dataset& ds, const std::string& path);

// Stride-downsampled (max-pool) training targets for one image.
std::vector<InstanceTarget> rasterize_targets(const Dataset& ds, int image_id,
                                              int stride);
// Full-resolution evaluation ground truth for the whole dataset.
std::vector<GtInstance> dataset_gts(const Dataset& ds);

}  // namespace attrseg
