#include "pad8/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace pad8 {

namespace {

// skip whitespace and '#' comments between PPM header tokens
int read_ppm_int(std::istream& in, const std::string& path) {
    int ch = in.peek();
    while (ch == '#' || std::isspace(ch)) {
        if (ch == '#') {
            std::string comment;
            std::getline(in, comment);
        } else {
            in.get();
        }
        ch = in.peek();
    }
    int v = -1;
    in >> v;
    if (!in || v < 0) throw IoError("malformed PPM header in " + path);
    return v;
}

}  // namespace

RgbImage load_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image: " + path);
    std::string magic;
    in >> magic;
    if (magic != "P6") throw IoError("not a binary PPM (P6): " + path);
    const int w = read_ppm_int(in, path);
    const int h = read_ppm_int(in, path);
    const int maxval = read_ppm_int(in, path);
    if (maxval != 255) throw IoError("unsupported PPM maxval " + std::to_string(maxval) + " in " + path);
    in.get();  // single whitespace after maxval
    if (w < 1 || h < 1) throw IoError("image dimensions must be positive in " + path);
    RgbImage img(w, h);
    in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.data.size())) {
        throw IoError("truncated PPM payload in " + path);
    }
    return img;
}

void save_ppm(const RgbImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write image: " + path);
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (!out) throw IoError("failed writing image payload: " + path);
}

RgbImage load_image(const std::string& path) {
    auto dot = path.rfind('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot);
    for (auto& c : ext) c = static_cast<char>(std::tolower(c));
    if (ext == ".ppm") return load_ppm(path);
    throw IoError("unsupported image format '" + ext + "' (only .ppm is built in): " + path);
}

RgbImage bilinear_resize(const RgbImage& img, int out_w, int out_h) {
    if (out_w < 1 || out_h < 1) throw IoError("resize target must be positive");
    if (out_w == img.width && out_h == img.height) return img;
    RgbImage out(out_w, out_h);
    const double sx = static_cast<double>(img.width) / out_w;
    const double sy = static_cast<double>(img.height) / out_h;
    for (int y = 0; y < out_h; ++y) {
        // pixel-center convention: src = (dst + 0.5) * scale - 0.5
        double fy = (y + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(img.height - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, img.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(img.width - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, img.width - 1);
            const double wx = fx - x0;
            for (int ch = 0; ch < 3; ++ch) {
                const double top = img.at(x0, y0, ch) * (1.0 - wx) + img.at(x1, y0, ch) * wx;
                const double bot = img.at(x0, y1, ch) * (1.0 - wx) + img.at(x1, y1, ch) * wx;
                const double v = top * (1.0 - wy) + bot * wy;
                out.at(x, y, ch) = static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
            }
        }
    }
    return out;
}

Tensor preprocess(const RgbImage& img, int model_size) {
    if (img.width < 1 || img.height < 1 || img.data.size() != static_cast<size_t>(3) * img.width * img.height) {
        throw IoError("preprocess: invalid input image");
    }
    const RgbImage resized = bilinear_resize(img, model_size, model_size);
    const int m = model_size;
    auto t = Tensor::zeros({3, m, m});
    float* out = t.data();
    for (int ch = 0; ch < 3; ++ch) {
        for (int y = 0; y < m; ++y) {
            for (int x = 0; x < m; ++x) {
                const float v = static_cast<float>(resized.at(x, y, ch)) / 255.0f;
                out[(static_cast<size_t>(ch) * m + y) * m + x] = (v - 0.5f) / 0.5f;
            }
        }
    }
    return t;
}

std::vector<size_t> patch_index_map(const PatchConfig& cfg) {
    const int m = cfg.model_size, c = cfg.patch_size;
    const int grid = m / c;
    std::vector<size_t> map;
    map.reserve(static_cast<size_t>(cfg.patch_count) * 3 * c * c);
    for (int pr = 0; pr < grid; ++pr) {
        for (int pc = 0; pc < grid; ++pc) {
            for (int ch = 0; ch < 3; ++ch) {
                for (int dy = 0; dy < c; ++dy) {
                    for (int dx = 0; dx < c; ++dx) {
                        const size_t y = static_cast<size_t>(pr) * c + dy;
                        const size_t x = static_cast<size_t>(pc) * c + dx;
                        map.push_back((static_cast<size_t>(ch) * m + y) * m + x);
                    }
                }
            }
        }
    }
    return map;
}

void AugmentPolicy::validate() const {
    if (horizontal_flip_prob < 0.0 || horizontal_flip_prob > 1.0) {
        throw ConfigError("flip probability must be in [0,1]");
    }
    if (random_erase.prob < 0.0 || random_erase.prob > 1.0) {
        throw ConfigError("erase probability must be in [0,1]");
    }
    if (random_erase.area_lo <= 0.0 || random_erase.area_hi >= 1.0 ||
        random_erase.area_lo > random_erase.area_hi) {
        throw ConfigError("erase area range must satisfy 0 < lo <= hi < 1");
    }
    if (random_erase.aspect_lo <= 0.0 || random_erase.aspect_lo > random_erase.aspect_hi) {
        throw ConfigError("erase aspect range must satisfy 0 < lo <= hi");
    }
}

Tensor augment(const Tensor& t, const AugmentPolicy& policy, Rng& rng) {
    policy.validate();
    if (t.rank() != 3 || t.dim(0) != 3 || t.dim(1) != t.dim(2)) {
        throw ShapeError("augment expects a [3 x M x M] tensor, got " + detail::shape_str(t.shape()));
    }
    const int m = t.dim(1);
    auto out = t.detach();
    float* d = out.data();

    if (rng.bernoulli(policy.horizontal_flip_prob)) {
        for (int ch = 0; ch < 3; ++ch) {
            for (int y = 0; y < m; ++y) {
                float* row = d + (static_cast<size_t>(ch) * m + y) * m;
                std::reverse(row, row + m);
            }
        }
    }

    if (rng.bernoulli(policy.random_erase.prob)) {
        const auto& e = policy.random_erase;
        const double total = static_cast<double>(m) * m;
        // per-channel mean fill
        float mean[3];
        for (int ch = 0; ch < 3; ++ch) {
            double acc = 0.0;
            const float* base = d + static_cast<size_t>(ch) * m * m;
            for (int i = 0; i < m * m; ++i) acc += base[i];
            mean[ch] = static_cast<float>(acc / total);
        }
        const int min_area = static_cast<int>(std::ceil(e.area_lo * total));
        const int max_area = static_cast<int>(std::floor(e.area_hi * total));
        for (int attempt = 0; attempt < 100; ++attempt) {
            const double area = rng.uniform(e.area_lo, e.area_hi) * total;
            const double aspect = std::exp(rng.uniform(std::log(e.aspect_lo), std::log(e.aspect_hi)));
            const int eh = static_cast<int>(std::lround(std::sqrt(area * aspect)));
            const int ew = static_cast<int>(std::lround(std::sqrt(area / aspect)));
            if (eh < 1 || ew < 1 || eh > m || ew > m) continue;
            if (eh * ew < min_area || eh * ew > max_area) continue;
            const int y0 = rng.uniform_int(0, m - eh);
            const int x0 = rng.uniform_int(0, m - ew);
            for (int ch = 0; ch < 3; ++ch) {
                for (int y = y0; y < y0 + eh; ++y) {
                    float* row = d + (static_cast<size_t>(ch) * m + y) * m;
                    for (int x = x0; x < x0 + ew; ++x) row[x] = mean[ch];
                }
            }
            break;
        }
    }
    return out;
}

}  // namespace pad8
