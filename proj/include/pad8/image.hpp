#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pad8/common.hpp"
#include "pad8/tensor.hpp"

namespace pad8 {

// 8-bit RGB image, samples row-major, interleaved r,g,b.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> data;

    RgbImage() = default;
    RgbImage(int w, int h) : width(w), height(h) {
        if (w < 1 || h < 1) {
            throw IoError("image dimensions must be positive, got " + std::to_string(w) + "x" +
                          std::to_string(h));
        }
        data.assign(static_cast<size_t>(3) * w * h, 0);
    }

    uint8_t& at(int x, int y, int ch) { return data[(static_cast<size_t>(y) * width + x) * 3 + ch]; }
    uint8_t at(int x, int y, int ch) const { return data[(static_cast<size_t>(y) * width + x) * 3 + ch]; }
};

// binary PPM (P6, maxval 255)
RgbImage load_ppm(const std::string& path);
void save_ppm(const RgbImage& img, const std::string& path);

// dispatches on extension; only .ppm is built in
RgbImage load_image(const std::string& path);

RgbImage bilinear_resize(const RgbImage& img, int out_w, int out_h);

// resize to M x M, scale samples to [0,1], then (x - 0.5) / 0.5 per channel.
// Output layout is [3 x M x M], channel-major.
Tensor preprocess(const RgbImage& img, int model_size);

// patch geometry of Eq.-style tiling: side M split into (M/c)^2 patches
struct PatchConfig {
    int model_size;   // M
    int patch_size;   // c
    int patch_count;  // N = M*M / c^2

    PatchConfig(int m, int c) : model_size(m), patch_size(c) {
        if (m < 1 || c < 1 || m % c != 0) {
            throw ConfigError("patch configuration invalid: model size " + std::to_string(m) +
                              " not divisible by patch size " + std::to_string(c));
        }
        patch_count = (m / c) * (m / c);
    }
};

// element index map from [3 x M x M] into [N x 3c^2]; patches in raster
// order, each flattened channel-major
std::vector<size_t> patch_index_map(const PatchConfig& cfg);

// differentiable patch extraction
template <typename S>
TensorT<S> patchify(const TensorT<S>& t, const PatchConfig& cfg) {
    const int m = cfg.model_size;
    if (t.rank() != 3 || t.dim(0) != 3 || t.dim(1) != m || t.dim(2) != m) {
        throw ConfigError("patchify: tensor shape " + detail::shape_str(t.shape()) +
                          " inconsistent with model size " + std::to_string(m));
    }
    const int c = cfg.patch_size;
    return gather_elems(t, patch_index_map(cfg), {cfg.patch_count, 3 * c * c});
}

struct EraseParams {
    double prob = 0.5;
    double area_lo = 0.02;
    double area_hi = 0.2;
    double aspect_lo = 0.3;
    double aspect_hi = 3.3;
};

struct AugmentPolicy {
    double horizontal_flip_prob = 0.5;
    EraseParams random_erase;

    void validate() const;
};

// at most one horizontal flip and one rectangular erase, filled with the
// per-image channel mean; never crops, never jitters color
Tensor augment(const Tensor& t, const AugmentPolicy& policy, Rng& rng);

}  // namespace pad8
