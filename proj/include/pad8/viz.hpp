#pragma once

#include <array>
#include <string>
#include <vector>

#include "pad8/image.hpp"
#include "pad8/model.hpp"

namespace pad8 {

// deep blue (0,0,139) at 0 linearly blended to bright red (255,0,0) at 1
std::array<uint8_t, 3> heat_color(double v);

struct HeatmapOptions {
    double window_frac = 0.35;   // window side as a fraction of min(w,h)
    double stride_frac = 0.25;   // stride as a fraction of the window
    double alpha = 0.5;          // overlay blend weight
    int random_crops = 0;        // > 0: seeded random crops instead of the grid
    uint64_t seed = 0;           // for random-crop mode
    std::string csv_path;        // optional per-window similarity dump
};

struct HeatmapResult {
    RgbImage overlay;           // original resolution
    std::vector<double> heat;   // per-pixel normalized value in [0,1], w*h
    std::vector<long> coverage; // windows covering each pixel
};

// Slides windows over the image, encodes each crop, scores it against the
// text embedding, and averages per pixel. The sliding grid always includes
// edge-aligned positions so every pixel is covered at least once.
HeatmapResult saliency_heatmap(const RgbImage& img, const std::string& text, const Model& model,
                               const HeatmapOptions& opts = {});

struct AttentionMapResult {
    RgbImage overlay;           // model resolution M x M
    std::vector<double> heat;   // per-pixel normalized value, M*M
};

// class-token row of the final block's attention, averaged over heads,
// nearest-neighbor upsampled from the patch grid
AttentionMapResult attention_map(const RgbImage& img, const Model& model, double alpha = 0.5);

}  // namespace pad8
