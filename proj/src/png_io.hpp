#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace attrseg {

struct ImageU8 {
    int h = 0, w = 0;
    std::vector<uint8_t> rgb;  // row-major, 3 bytes per pixel
};

ImageU8 read_png(const std::string& path);
void write_png(const std::string& path, const ImageU8& img);

// [3,H,W], values in [0,1]
Tensor image_to_tensor(const ImageU8& img);

}  // namespace attrseg
