#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lba/common.hpp"

// 8-bit image I/O: PGM (binary P5, maxval 255), PPM (binary P6) and PNG
// (8-bit grayscale or RGB, non-interlaced). Decoding dispatches on the file
// magic, not the extension. Each malformed-input class raises a distinct
// message (bad magic, unsupported maxval/bit depth, truncated payload...).

namespace lba::imageio {

struct ImagePlane {
    i64 w = 0, h = 0;
    std::vector<std::uint8_t> samples; // row-major, w*h
};

struct LoadedImage {
    i64 w = 0, h = 0;
    int channels = 0;                  // 1 or 3
    std::vector<std::uint8_t> samples; // interleaved, w*h*channels
};

LoadedImage load_image(const std::string& path);
// Convenience for the metric pipeline: requires a single-channel image.
ImagePlane load_plane(const std::string& path);

ImagePlane load_pgm(const std::string& path);
void save_pgm(const std::string& path, const ImagePlane& img);

LoadedImage load_png(const std::string& path);
void save_png_gray(const std::string& path, const ImagePlane& img);

} // namespace lba::imageio
