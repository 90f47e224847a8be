#include "pad8/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <vector>

#include "pad8/prompts.hpp"

namespace fs = std::filesystem;

namespace pad8 {

namespace {

// float RGB canvas in [0,255]; quantized once at the end
struct Canvas {
    int s;
    std::vector<float> px;  // interleaved rgb

    explicit Canvas(int size) : s(size), px(static_cast<size_t>(3) * size * size, 0.0f) {}

    float* at(int x, int y) { return px.data() + (static_cast<size_t>(y) * s + x) * 3; }

    void set(int x, int y, float r, float g, float b) {
        if (x < 0 || y < 0 || x >= s || y >= s) return;
        float* p = at(x, y);
        p[0] = r;
        p[1] = g;
        p[2] = b;
    }

    RgbImage quantize() const {
        RgbImage img(s, s);
        for (size_t i = 0; i < px.size(); ++i) {
            img.data[i] = static_cast<uint8_t>(std::lround(std::clamp(px[i], 0.0f, 255.0f)));
        }
        return img;
    }
};

struct Color {
    float r, g, b;
};

void fill_gradient(Canvas& c, Color top, Color bot) {
    for (int y = 0; y < c.s; ++y) {
        const float t = static_cast<float>(y) / (c.s - 1);
        const float r = top.r + (bot.r - top.r) * t;
        const float g = top.g + (bot.g - top.g) * t;
        const float b = top.b + (bot.b - top.b) * t;
        for (int x = 0; x < c.s; ++x) c.set(x, y, r, g, b);
    }
}

void fill_rect(Canvas& c, int x0, int y0, int x1, int y1, Color col) {
    for (int y = std::max(0, y0); y < std::min(c.s, y1); ++y)
        for (int x = std::max(0, x0); x < std::min(c.s, x1); ++x) c.set(x, y, col.r, col.g, col.b);
}

void fill_ellipse(Canvas& c, float cx, float cy, float rx, float ry, Color col) {
    const int x0 = static_cast<int>(cx - rx) - 1, x1 = static_cast<int>(cx + rx) + 2;
    const int y0 = static_cast<int>(cy - ry) - 1, y1 = static_cast<int>(cy + ry) + 2;
    for (int y = std::max(0, y0); y < std::min(c.s, y1); ++y) {
        for (int x = std::max(0, x0); x < std::min(c.s, x1); ++x) {
            const float dx = (x - cx) / rx, dy = (y - cy) / ry;
            if (dx * dx + dy * dy <= 1.0f) c.set(x, y, col.r, col.g, col.b);
        }
    }
}

void add_noise(Canvas& c, Rng& rng, float sigma, bool grayscale) {
    for (int y = 0; y < c.s; ++y) {
        for (int x = 0; x < c.s; ++x) {
            float* p = c.at(x, y);
            if (grayscale) {
                const float n = static_cast<float>(rng.normal() * sigma);
                p[0] += n;
                p[1] += n;
                p[2] += n;
            } else {
                p[0] += static_cast<float>(rng.normal() * sigma);
                p[1] += static_cast<float>(rng.normal() * sigma);
                p[2] += static_cast<float>(rng.normal() * sigma);
            }
        }
    }
}

struct FaceStyle {
    Color skin;
    Color hair;
    float desaturate = 0.0f;  // 0 = natural, 1 = fully gray
};

Color desat(Color c, float amount) {
    const float gray = 0.299f * c.r + 0.587f * c.g + 0.114f * c.b;
    return {c.r + (gray - c.r) * amount, c.g + (gray - c.g) * amount, c.b + (gray - c.b) * amount};
}

// head ellipse with hair cap, two eyes and a mouth bar
void draw_face(Canvas& c, Rng& rng, float cx, float cy, float radius, const FaceStyle& style) {
    const float rx = radius * (0.72f + 0.06f * static_cast<float>(rng.uniform()));
    const float ry = radius;
    const Color skin = desat(style.skin, style.desaturate);
    const Color hair = desat(style.hair, style.desaturate);
    fill_ellipse(c, cx, cy, rx, ry, skin);
    // hair cap: upper band of the head
    const int y0 = static_cast<int>(cy - ry), y1 = static_cast<int>(cy - 0.42f * ry);
    for (int y = std::max(0, y0); y < std::min(c.s, y1); ++y) {
        for (int x = std::max(0, static_cast<int>(cx - rx) - 1); x < std::min(c.s, static_cast<int>(cx + rx) + 2); ++x) {
            const float dx = (x - cx) / rx, dy = (y - cy) / ry;
            if (dx * dx + dy * dy <= 1.0f) c.set(x, y, hair.r, hair.g, hair.b);
        }
    }
    const Color eye = desat({35, 28, 25}, style.desaturate);
    const float er = std::max(1.0f, radius * 0.09f);
    fill_ellipse(c, cx - 0.34f * rx, cy - 0.08f * ry, er, er, eye);
    fill_ellipse(c, cx + 0.34f * rx, cy - 0.08f * ry, er, er, eye);
    const Color mouth = desat({120, 55, 50}, style.desaturate);
    fill_rect(c, static_cast<int>(cx - 0.3f * rx), static_cast<int>(cy + 0.45f * ry),
              static_cast<int>(cx + 0.3f * rx), static_cast<int>(cy + 0.45f * ry) + std::max(1, c.s / 48),
              mouth);
}

FaceStyle natural_face(Rng& rng) {
    FaceStyle f;
    f.skin = {static_cast<float>(rng.uniform(198, 216)), static_cast<float>(rng.uniform(158, 176)),
              static_cast<float>(rng.uniform(132, 150))};
    f.hair = {static_cast<float>(rng.uniform(42, 70)), static_cast<float>(rng.uniform(28, 50)),
              static_cast<float>(rng.uniform(22, 42))};
    return f;
}

// shared photographic content: soft gradient background plus one face
void paint_portrait(Canvas& c, Rng& rng) {
    const float base_r = static_cast<float>(rng.uniform(60, 125));
    const float base_g = static_cast<float>(rng.uniform(70, 135));
    const float base_b = static_cast<float>(rng.uniform(60, 125));
    const Color top{base_r, base_g, base_b};
    const Color bot{std::clamp(base_r + static_cast<float>(rng.uniform(-28, 28)), 0.0f, 255.0f),
                    std::clamp(base_g + static_cast<float>(rng.uniform(-28, 28)), 0.0f, 255.0f),
                    std::clamp(base_b + static_cast<float>(rng.uniform(-28, 28)), 0.0f, 255.0f)};
    fill_gradient(c, top, bot);
    const float s = static_cast<float>(c.s);
    const float cx = s * (0.5f + 0.06f * static_cast<float>(rng.uniform(-1, 1)));
    const float cy = s * (0.46f + 0.05f * static_cast<float>(rng.uniform(-1, 1)));
    const float radius = s * static_cast<float>(rng.uniform(0.24, 0.30));
    draw_face(c, rng, cx, cy, radius, natural_face(rng));
}

void render_normal(Canvas& c, Rng& rng) {
    paint_portrait(c, rng);
    add_noise(c, rng, 3.0f, false);
}

void render_id_card(Canvas& c, Rng& rng) {
    const float bg = static_cast<float>(rng.uniform(68, 100));
    fill_rect(c, 0, 0, c.s, c.s, {bg, bg * 1.02f, bg * 1.08f});
    const int s = c.s;
    const int x0 = static_cast<int>(s * rng.uniform(0.06, 0.10));
    const int y0 = static_cast<int>(s * rng.uniform(0.20, 0.26));
    const int x1 = s - static_cast<int>(s * rng.uniform(0.06, 0.10));
    const int y1 = s - static_cast<int>(s * rng.uniform(0.20, 0.26));
    const float card = static_cast<float>(rng.uniform(228, 246));
    fill_rect(c, x0 - 1, y0 - 1, x1 + 1, y1 + 1, {150, 150, 155});
    fill_rect(c, x0, y0, x1, y1, {card, card, card * 0.98f});
    // portrait pane on the left of the card
    FaceStyle face = natural_face(rng);
    face.desaturate = 0.2f;
    draw_face(c, rng, x0 + 0.22f * (x1 - x0), 0.5f * (y0 + y1), 0.26f * (y1 - y0), face);
    // address-like bars
    const int bar_h = std::max(1, s / 40);
    const int tx0 = x0 + static_cast<int>(0.42f * (x1 - x0));
    const int tx1 = x1 - s / 16;
    for (int line = 0; line < 3; ++line) {
        const int ty = y0 + static_cast<int>((0.22f + 0.18f * line) * (y1 - y0));
        const float ink = static_cast<float>(rng.uniform(60, 90));
        fill_rect(c, tx0, ty, tx1 - rng.uniform_int(0, s / 10), ty + bar_h, {ink, ink, ink});
    }
    // id-number strip: dashes along the card bottom
    const int ny = y1 - static_cast<int>(0.2f * (y1 - y0));
    const int dash_w = std::max(2, s / 22);
    for (int x = x0 + s / 16; x + dash_w < x1 - s / 16; x += dash_w + std::max(1, s / 44)) {
        fill_rect(c, x, ny, x + dash_w, ny + bar_h, {45, 45, 50});
    }
    add_noise(c, rng, 2.0f, false);
}

void render_printed_paper(Canvas& c, Rng& rng) {
    const float paper = static_cast<float>(rng.uniform(236, 248));
    fill_rect(c, 0, 0, c.s, c.s, {paper, paper, paper * 0.99f});
    // printed portrait: clearly desaturated
    FaceStyle face = natural_face(rng);
    face.desaturate = 0.55f;
    const float s = static_cast<float>(c.s);
    draw_face(c, rng, s * 0.5f, s * 0.48f, s * static_cast<float>(rng.uniform(0.24, 0.30)), face);
    // horizontal print banding
    for (int y = 0; y < c.s; y += 4) {
        for (int x = 0; x < c.s; ++x) {
            float* p = c.at(x, y);
            p[0] *= 0.94f;
            p[1] *= 0.94f;
            p[2] *= 0.94f;
        }
    }
    // paper edge border
    const int inset = std::max(1, c.s / 24);
    const int w = std::max(1, c.s / 40);
    const float ink = static_cast<float>(rng.uniform(118, 150));
    fill_rect(c, inset, inset, c.s - inset, inset + w, {ink, ink, ink});
    fill_rect(c, inset, c.s - inset - w, c.s - inset, c.s - inset, {ink, ink, ink});
    fill_rect(c, inset, inset, inset + w, c.s - inset, {ink, ink, ink});
    fill_rect(c, c.s - inset - w, inset, c.s - inset, c.s - inset, {ink, ink, ink});
    add_noise(c, rng, 10.0f, true);  // paper grain
}

void render_online_verification(Canvas& c, Rng& rng) {
    const float white = static_cast<float>(rng.uniform(248, 255));
    fill_rect(c, 0, 0, c.s, c.s, {white, white, white});
    const float s = static_cast<float>(c.s);
    FaceStyle face = natural_face(rng);
    face.hair = {static_cast<float>(rng.uniform(12, 30)), static_cast<float>(rng.uniform(10, 26)),
                 static_cast<float>(rng.uniform(10, 26))};  // black hair
    draw_face(c, rng, s * 0.5f, s * 0.44f, s * static_cast<float>(rng.uniform(0.26, 0.31)), face);
    // shoulders
    const float shirt = static_cast<float>(rng.uniform(90, 150));
    fill_ellipse(c, s * 0.5f, s * 1.05f, s * 0.42f, s * 0.3f, {shirt, shirt, shirt * 1.05f});
    add_noise(c, rng, 1.0f, false);
}

void render_personal_id(Canvas& c, Rng& rng) {
    const bool red = rng.bernoulli(0.5);
    const Color bg = red ? Color{static_cast<float>(rng.uniform(185, 215)), static_cast<float>(rng.uniform(24, 46)),
                                 static_cast<float>(rng.uniform(28, 52))}
                         : Color{static_cast<float>(rng.uniform(28, 52)), static_cast<float>(rng.uniform(52, 78)),
                                 static_cast<float>(rng.uniform(182, 215))};
    fill_rect(c, 0, 0, c.s, c.s, bg);
    const float s = static_cast<float>(c.s);
    draw_face(c, rng, s * 0.5f, s * 0.42f, s * static_cast<float>(rng.uniform(0.24, 0.29)), natural_face(rng));
    // suit
    const float suit = static_cast<float>(rng.uniform(26, 46));
    fill_ellipse(c, s * 0.5f, s * 1.08f, s * 0.44f, s * 0.34f, {suit, suit, suit * 1.1f});
    // collar
    fill_ellipse(c, s * 0.5f, s * 0.86f, s * 0.08f, s * 0.07f, {235, 235, 235});
    add_noise(c, rng, 2.0f, false);
}

void render_screen_recapture(Canvas& c, Rng& rng) {
    paint_portrait(c, rng);
    // slight screen dimming
    for (auto& v : c.px) v *= 0.92f;
    // moire glare band: content dims behind a strong periodic stripe
    const StripeBand band = stripe_band(c.s);
    const float amp = static_cast<float>(rng.uniform(16, 22));
    const float phase = static_cast<float>(rng.uniform(0.0, 6.283185307));
    const float lift = static_cast<float>(rng.uniform(55, 70));
    for (int y = band.row_begin; y < band.row_end; ++y) {
        const float wave = lift + amp * std::sin(6.2831853f * static_cast<float>(y) / band.period + phase);
        for (int x = band.col_begin; x < band.col_end; ++x) {
            float* p = c.at(x, y);
            p[0] = 0.4f * p[0] + wave;
            p[1] = 0.4f * p[1] + wave;
            p[2] = 0.4f * p[2] + wave;
        }
    }
    // thin dark device bezel along the top and right edges (the frame is
    // partially in view, as when a held phone clips the photo corner)
    const int w = std::max(2, c.s / 32);
    const float bz = static_cast<float>(rng.uniform(10, 22));
    fill_rect(c, 0, 0, c.s, w, {bz, bz, bz + 4});
    fill_rect(c, c.s - w, 0, c.s, c.s, {bz, bz, bz + 4});
    add_noise(c, rng, 3.0f, false);
}

void render_tampered(Canvas& c, Rng& rng) {
    paint_portrait(c, rng);
    // one warped patch with a heavy magenta cast and bright seams; nothing
    // like the muted solid rectangle a random erase leaves behind
    const int s = c.s;
    const int pw = static_cast<int>(s * rng.uniform(0.30, 0.42));
    const int ph = static_cast<int>(s * rng.uniform(0.30, 0.42));
    const int px0 = static_cast<int>(s * rng.uniform(0.30, 0.70)) - pw / 2;
    const int py0 = static_cast<int>(s * rng.uniform(0.30, 0.70)) - ph / 2;
    const int x0 = std::clamp(px0, 0, s - pw);
    const int y0 = std::clamp(py0, 0, s - ph);
    const float amp = static_cast<float>(s) * static_cast<float>(rng.uniform(0.06, 0.10));
    std::vector<float> patch(static_cast<size_t>(pw) * ph * 3);
    for (int y = 0; y < ph; ++y) {
        const int shift = static_cast<int>(std::lround(amp * std::sin(2.0 * 6.2831853 * y / ph)));
        for (int x = 0; x < pw; ++x) {
            const int sx = x0 + ((x + shift) % pw + pw) % pw;  // circular shift inside the patch
            const float* src = c.at(sx, y0 + y);
            float* dst = patch.data() + (static_cast<size_t>(y) * pw + x) * 3;
            dst[0] = std::clamp(src[0] + 34.0f, 0.0f, 255.0f);
            dst[1] = std::clamp(src[1] - 12.0f, 0.0f, 255.0f);
            dst[2] = std::clamp(src[2] - 34.0f, 0.0f, 255.0f);
        }
    }
    for (int y = 0; y < ph; ++y) {
        for (int x = 0; x < pw; ++x) {
            const float* src = patch.data() + (static_cast<size_t>(y) * pw + x) * 3;
            c.set(x0 + x, y0 + y, src[0], src[1], src[2]);
        }
    }
    // sloppy-edit seam
    const float seam = 42.0f;
    for (int x = x0; x < x0 + pw; ++x) {
        for (int yy : {y0, y0 + ph - 1}) {
            float* p = c.at(x, yy);
            p[0] = std::min(255.0f, p[0] + seam);
            p[1] = std::min(255.0f, p[1] + seam);
            p[2] = std::min(255.0f, p[2] + seam);
        }
    }
    for (int y = y0; y < y0 + ph; ++y) {
        for (int xx : {x0, x0 + pw - 1}) {
            float* p = c.at(xx, y);
            p[0] = std::min(255.0f, p[0] + seam);
            p[1] = std::min(255.0f, p[1] + seam);
            p[2] = std::min(255.0f, p[2] + seam);
        }
    }
    add_noise(c, rng, 3.0f, false);
}

void render_dark(Canvas& c, Rng& rng) {
    paint_portrait(c, rng);
    const float exposure = static_cast<float>(rng.uniform(0.045, 0.075));
    for (auto& v : c.px) v *= exposure;
    add_noise(c, rng, 1.5f, false);
    for (auto& v : c.px) v = std::max(v, 0.0f);
}

}  // namespace

StripeBand stripe_band(int image_size) {
    return {5 * image_size / 8, 7 * image_size / 8, 0, image_size, std::max(4, image_size / 8)};
}

std::vector<uint8_t> border_motif_mask(int image_size, int patch_size) {
    const int s = image_size;
    std::vector<uint8_t> mask(static_cast<size_t>(s) * s, 0);
    for (int y = 0; y < s; ++y) {
        for (int x = 0; x < s; ++x) {
            // top and right rows of patch cells, where the bezel lives
            if (y < patch_size || x >= s - patch_size) {
                mask[static_cast<size_t>(y) * s + x] = 1;
            }
        }
    }
    return mask;
}

RgbImage render_synthetic(const SynthSpec& spec, int class_index, int sample_index) {
    spec.validate();
    if (class_index < 0 || class_index >= PromptSet::kNumClasses) {
        throw LabelError("synth class index " + std::to_string(class_index) + " outside [0,8)");
    }
    Rng rng = Rng::substream(spec.seed, "data", static_cast<uint64_t>(class_index),
                             static_cast<uint64_t>(sample_index));
    Canvas canvas(spec.image_size);
    switch (class_index) {
        case 0: render_normal(canvas, rng); break;
        case 1: render_id_card(canvas, rng); break;
        case 2: render_printed_paper(canvas, rng); break;
        case 3: render_online_verification(canvas, rng); break;
        case 4: render_personal_id(canvas, rng); break;
        case 5: render_screen_recapture(canvas, rng); break;
        case 6: render_tampered(canvas, rng); break;
        case 7: render_dark(canvas, rng); break;
        default: break;
    }
    return canvas.quantize();
}

std::string synth_dataset(const SynthSpec& spec, const std::string& out_dir) {
    spec.validate();
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());

    std::vector<std::string> rows;
    for (int k = 0; k < PromptSet::kNumClasses; ++k) {
        const std::string cls_dir = "class_" + std::string(1, static_cast<char>('a' + k));
        fs::create_directories(fs::path(out_dir) / cls_dir, ec);
        if (ec) throw IoError("cannot create class directory: " + ec.message());

        // stratified 80/20 split, seeded
        std::vector<int> indices(static_cast<size_t>(spec.per_class));
        std::iota(indices.begin(), indices.end(), 0);
        Rng split_rng = Rng::substream(spec.seed, "split", static_cast<uint64_t>(k));
        for (size_t i = indices.size(); i > 1; --i) {
            std::swap(indices[i - 1], indices[static_cast<size_t>(split_rng.uniform_int(0, static_cast<int>(i) - 1))]);
        }
        const int train_count = (spec.per_class * 4) / 5;
        std::vector<bool> is_train(static_cast<size_t>(spec.per_class), false);
        for (int i = 0; i < train_count; ++i) is_train[static_cast<size_t>(indices[static_cast<size_t>(i)])] = true;

        for (int i = 0; i < spec.per_class; ++i) {
            const RgbImage img = render_synthetic(spec, k, i);
            char name[32];
            std::snprintf(name, sizeof(name), "%04d.ppm", i);
            const std::string rel = cls_dir + "/" + name;
            save_ppm(img, (fs::path(out_dir) / rel).string());
            rows.push_back(rel + "," + std::to_string(k) + "," + (is_train[static_cast<size_t>(i)] ? "train" : "test"));
        }
    }

    const std::string manifest_path = (fs::path(out_dir) / "manifest.csv").string();
    std::ofstream manifest(manifest_path, std::ios::trunc);
    if (!manifest) throw IoError("cannot write manifest: " + manifest_path);
    manifest << "path,label,split\n";
    for (const auto& r : rows) manifest << r << "\n";
    if (!manifest) throw IoError("failed writing manifest: " + manifest_path);
    return manifest_path;
}

}  // namespace pad8
