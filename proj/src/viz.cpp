#include "pad8/viz.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace pad8 {

std::array<uint8_t, 3> heat_color(double v) {
    v = std::clamp(v, 0.0, 1.0);
    const auto r = static_cast<uint8_t>(std::lround(255.0 * v));
    const auto b = static_cast<uint8_t>(std::lround(139.0 * (1.0 - v)));
    return {r, 0, b};
}

namespace {

void blend_overlay(RgbImage& img, const std::vector<double>& heat, double alpha) {
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const auto color = heat_color(heat[static_cast<size_t>(y) * img.width + x]);
            for (int ch = 0; ch < 3; ++ch) {
                const double v = (1.0 - alpha) * img.at(x, y, ch) + alpha * color[static_cast<size_t>(ch)];
                img.at(x, y, ch) = static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
            }
        }
    }
}

// grid positions 0, s, 2s, ... with the edge-aligned position appended
std::vector<int> window_positions(int extent, int win, int stride) {
    std::vector<int> pos;
    for (int p = 0; p + win <= extent; p += stride) pos.push_back(p);
    if (pos.empty() || pos.back() + win < extent) pos.push_back(extent - win);
    return pos;
}

// min-max normalize; a flat field maps to mid-scale
void normalize_heat(std::vector<double>& heat, const std::vector<long>& coverage) {
    double lo = 1e300, hi = -1e300;
    for (size_t i = 0; i < heat.size(); ++i) {
        if (coverage[i] > 0) {
            lo = std::min(lo, heat[i]);
            hi = std::max(hi, heat[i]);
        }
    }
    if (hi - lo < 1e-6) {
        for (size_t i = 0; i < heat.size(); ++i) heat[i] = coverage[i] > 0 ? 0.5 : 0.0;
        return;
    }
    for (size_t i = 0; i < heat.size(); ++i) {
        heat[i] = coverage[i] > 0 ? (heat[i] - lo) / (hi - lo) : 0.0;
    }
}

}  // namespace

HeatmapResult saliency_heatmap(const RgbImage& img, const std::string& text, const Model& model,
                               const HeatmapOptions& opts) {
    if (text.empty()) throw PromptError("saliency_heatmap: empty text");
    const int short_side = std::min(img.width, img.height);
    const int win = std::max(1, static_cast<int>(std::lround(opts.window_frac * short_side)));
    if (win > short_side) {
        throw ConfigError("saliency_heatmap: window " + std::to_string(win) + " larger than image side " +
                          std::to_string(short_side));
    }
    const int stride = std::max(1, static_cast<int>(std::lround(opts.stride_frac * win)));

    const Tensor text_row = model.text.encode({text});  // [1 x d_e]
    const int d = text_row.dim(1);

    std::vector<std::pair<int, int>> origins;
    if (opts.random_crops > 0) {
        Rng rng = Rng::substream(opts.seed, "heatmap-crops");
        for (int i = 0; i < opts.random_crops; ++i) {
            origins.emplace_back(rng.uniform_int(0, img.width - win), rng.uniform_int(0, img.height - win));
        }
    } else {
        const auto xs = window_positions(img.width, win, stride);
        const auto ys = window_positions(img.height, win, stride);
        for (int y : ys)
            for (int x : xs) origins.emplace_back(x, y);
    }

    std::ofstream csv;
    if (!opts.csv_path.empty()) {
        csv.open(opts.csv_path, std::ios::trunc);
        if (!csv) throw IoError("cannot write similarity csv: " + opts.csv_path);
        csv << "x,y,window,similarity\n";
    }

    std::vector<double> sum(static_cast<size_t>(img.width) * img.height, 0.0);
    std::vector<long> coverage(sum.size(), 0);
    for (const auto& [x0, y0] : origins) {
        RgbImage crop(win, win);
        for (int y = 0; y < win; ++y)
            for (int x = 0; x < win; ++x)
                for (int ch = 0; ch < 3; ++ch) crop.at(x, y, ch) = img.at(x0 + x, y0 + y, ch);
        const auto enc = model.image.encode(preprocess(crop, model.spec.image_size));
        double sim = 0.0;
        for (int j = 0; j < d; ++j) {
            sim += static_cast<double>(enc.embedding.data()[j]) * text_row.data()[j];
        }
        if (csv) csv << x0 << "," << y0 << "," << win << "," << sim << "\n";
        for (int y = y0; y < y0 + win; ++y) {
            for (int x = x0; x < x0 + win; ++x) {
                sum[static_cast<size_t>(y) * img.width + x] += sim;
                coverage[static_cast<size_t>(y) * img.width + x] += 1;
            }
        }
    }

    HeatmapResult res;
    res.coverage = coverage;
    res.heat.assign(sum.size(), 0.0);
    for (size_t i = 0; i < sum.size(); ++i) {
        if (coverage[i] > 0) res.heat[i] = sum[i] / coverage[i];
    }
    normalize_heat(res.heat, coverage);
    res.overlay = img;
    blend_overlay(res.overlay, res.heat, opts.alpha);
    return res;
}

AttentionMapResult attention_map(const RgbImage& img, const Model& model, double alpha) {
    const int m = model.spec.image_size;
    const int grid = m / model.spec.patch_size;
    const int n = grid * grid;

    const auto enc = model.image.encode(preprocess(img, m));
    const auto& attn = enc.attn_last;  // [heads x (n+1) x (n+1)]
    const int heads = attn.dim(0);
    const int seq = attn.dim(1);

    // class-token row, averaged over heads, over the N patch positions
    std::vector<double> patch_heat(static_cast<size_t>(n), 0.0);
    for (int h = 0; h < heads; ++h) {
        const float* row = attn.data() + static_cast<size_t>(h) * seq * seq;  // row 0 of head h
        for (int p = 0; p < n; ++p) patch_heat[static_cast<size_t>(p)] += row[p + 1];
    }
    for (auto& v : patch_heat) v /= heads;

    // nearest-neighbor upsample to M x M
    AttentionMapResult res;
    res.heat.assign(static_cast<size_t>(m) * m, 0.0);
    const int cell = model.spec.patch_size;
    for (int y = 0; y < m; ++y) {
        for (int x = 0; x < m; ++x) {
            const int p = (y / cell) * grid + (x / cell);
            res.heat[static_cast<size_t>(y) * m + x] = patch_heat[static_cast<size_t>(p)];
        }
    }
    std::vector<long> coverage(res.heat.size(), 1);
    normalize_heat(res.heat, coverage);

    res.overlay = bilinear_resize(img, m, m);
    blend_overlay(res.overlay, res.heat, alpha);
    return res;
}

}  // namespace pad8
