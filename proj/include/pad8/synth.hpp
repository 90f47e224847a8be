#pragma once

#include <cstdint>
#include <string>

#include "pad8/common.hpp"
#include "pad8/image.hpp"

namespace pad8 {

// Deterministic procedural stand-in for an eight-category liveness corpus.
// Every pixel is a pure function of (seed, class, index, image_size). Each
// class carries a machine-checkable motif:
//   (a) face blob on a varied soft gradient
//   (b) white card rectangle with text-like bars and a number strip
//   (c) paper-grain background, gray border, desaturated printed face
//   (d) portrait on a uniform white background, heavy black hair
//   (e) portrait on a saturated red or blue background, dark suit
//   (f) class-(a) content with a thin dark device bezel along the top and
//       right edges plus a periodic glare band (rows [5S/8, 7S/8), period S/8)
//   (g) class-(a) content with one locally warped, color-shifted patch
//   (h) class-(a) content at very low exposure (mean luminance < 10%)
struct SynthSpec {
    int per_class = 200;
    int image_size = 64;
    uint64_t seed = 7;

    void validate() const {
        if (per_class < 1) throw ConfigError("synth: per_class must be >= 1");
        if (image_size < 16) throw ConfigError("synth: image_size must be >= 16");
    }
};

// render one sample; class_index in [0,8)
RgbImage render_synthetic(const SynthSpec& spec, int class_index, int sample_index);

// glare band geometry for class (f); used by the stripe oracle
struct StripeBand {
    int row_begin;  // 5S/8
    int row_end;    // 7S/8 (exclusive)
    int col_begin;  // 0
    int col_end;    // S (exclusive)
    int period;     // S/8
};
StripeBand stripe_band(int image_size);

// per-pixel mask of the class-(f) border motif: the top and right rows of
// patch cells, where the device bezel sits; row-major, 1 = motif pixel
std::vector<uint8_t> border_motif_mask(int image_size, int patch_size);

// writes <out_dir>/class_<letter>/NNNN.ppm for all 8 classes plus a
// stratified 80/20 train/test manifest; returns the manifest path
std::string synth_dataset(const SynthSpec& spec, const std::string& out_dir);

}  // namespace pad8
