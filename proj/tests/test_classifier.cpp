#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>

#include "json.hpp"
#include "oracles.hpp"
#include "pad8/classifier.hpp"
#include "pad8/synth.hpp"

using namespace pad8;

namespace {

Tensor random_unit_rows(int rows, int d, Rng& rng) {
    std::vector<float> flat;
    flat.reserve(static_cast<size_t>(rows) * d);
    for (int r = 0; r < rows; ++r) {
        const auto v = oracles::random_unit_vector(rng, d);
        for (double x : v) flat.push_back(static_cast<float>(x));
    }
    return Tensor::from_data({rows, d}, flat);
}

ModelSpec tiny_spec() {
    ModelSpec s;
    s.image_size = 32;
    s.patch_size = 8;
    s.image_blocks = 1;
    s.image_heads = 2;
    s.image_width = 32;
    s.text_blocks = 1;
    s.text_heads = 2;
    s.text_width = 32;
    s.embed_dim = 16;
    s.context_length = 64;
    return s;
}

}  // namespace

TEST_CASE("similarity self, antipodal and scale invariance") {
    Rng rng(19);
    auto t = random_unit_rows(8, 16, rng);

    auto row_of = [&](int k, float mul) {
        std::vector<float> v(16);
        for (int j = 0; j < 16; ++j) v[static_cast<size_t>(j)] = mul * t.data()[static_cast<size_t>(k) * 16 + j];
        return Tensor::from_data({16}, v);
    };

    auto s3 = similarity(row_of(3, 1.0f), t);
    CHECK(s3.s[3] == doctest::Approx(1.0).epsilon(1e-6));
    auto s5 = similarity(row_of(5, -1.0f), t);
    CHECK(s5.s[5] == doctest::Approx(-1.0).epsilon(1e-6));

    // positive rescale leaves every similarity unchanged
    auto base = similarity(row_of(2, 1.0f), t);
    for (float k : {0.01f, 0.5f, 42.0f}) {
        auto scaled = similarity(row_of(2, k), t);
        for (int i = 0; i < 8; ++i) {
            CHECK(scaled.s[static_cast<size_t>(i)] ==
                  doctest::Approx(base.s[static_cast<size_t>(i)]).epsilon(1e-5));
        }
    }
    CHECK_THROWS_AS(similarity(Tensor::zeros({16}), t), NormError);
}

TEST_CASE("similarity magnitudes never exceed one") {
    Rng rng(23);
    auto t = random_unit_rows(8, 16, rng);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<float> v(16);
        for (auto& x : v) x = static_cast<float>(rng.normal() * 3.0);
        auto row = similarity(Tensor::from_data({16}, v), t);
        for (float s : row.s) CHECK(std::abs(s) <= 1.0f + 1e-6f);
    }
}

TEST_CASE("verdict follows the decision rule") {
    SimilarityRow dominant{{0.9f, 0.1f, 0.1f, 0.1f, 0.1f, 0.1f, 0.1f, 0.1f}};
    auto v = verdict_from_similarity(dominant, 0);
    CHECK(v.is_real);
    CHECK(v.predicted_class == 0);
    CHECK(std::string(v.label()) == "Real");
    int argmax_prob = 0;
    for (int i = 1; i < 8; ++i) {
        if (v.probabilities.c[static_cast<size_t>(i)] > v.probabilities.c[static_cast<size_t>(argmax_prob)]) argmax_prob = i;
    }
    CHECK(argmax_prob == 0);

    SimilarityRow recapture{{0.1f, 0.1f, 0.1f, 0.1f, 0.1f, 0.8f, 0.1f, 0.1f}};
    auto f = verdict_from_similarity(recapture, 0);
    CHECK_FALSE(f.is_real);
    CHECK(f.predicted_class == 5);
    CHECK(std::string(f.label()) == "Fake");
}

TEST_CASE("softmax argmax equals similarity argmax over random rows") {
    Rng rng(29);
    for (int trial = 0; trial < 1000; ++trial) {
        SimilarityRow row{};
        for (auto& s : row.s) s = static_cast<float>(rng.uniform(-1.0, 1.0));
        auto v = verdict_from_similarity(row, 0);
        int am_s = 0, am_c = 0;
        double psum = 0.0;
        for (int i = 0; i < 8; ++i) {
            if (row.s[static_cast<size_t>(i)] > row.s[static_cast<size_t>(am_s)]) am_s = i;
            if (v.probabilities.c[static_cast<size_t>(i)] > v.probabilities.c[static_cast<size_t>(am_c)]) am_c = i;
            psum += v.probabilities.c[static_cast<size_t>(i)];
        }
        CHECK(v.predicted_class == am_s);
        CHECK(am_c == am_s);
        CHECK(psum == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("exact ties break toward the lowest class index") {
    SimilarityRow tied{};
    for (auto& s : tied.s) s = 0.25f;
    auto v = verdict_from_similarity(tied, 0);
    CHECK(v.predicted_class == 0);
    SimilarityRow pair{{0.1f, 0.7f, 0.2f, 0.7f, 0.0f, 0.0f, 0.0f, 0.0f}};
    CHECK(verdict_from_similarity(pair, 0).predicted_class == 1);
}

TEST_CASE("classify_batch on an empty list is empty") {
    Model model(tiny_spec(), 7);
    auto res = classify_batch({}, model, PromptSet::descriptive_default());
    CHECK(res.verdicts.empty());
    CHECK(res.failures.empty());
}

TEST_CASE("classify_batch matches per-image classify and isolates failures") {
    const std::string dir = "clf_batch_imgs";
    std::filesystem::create_directories(dir);
    SynthSpec sp;
    sp.per_class = 1;
    sp.image_size = 32;
    sp.seed = 4;
    std::vector<std::string> paths;
    for (int k = 0; k < 3; ++k) {
        const std::string p = dir + "/img" + std::to_string(k) + ".ppm";
        save_ppm(render_synthetic(sp, k, 0), p);
        paths.push_back(p);
    }
    paths.insert(paths.begin() + 1, dir + "/no_such_file.ppm");

    Model model(tiny_spec(), 7);
    const auto prompts = PromptSet::descriptive_default();
    auto res = classify_batch(paths, model, prompts);
    REQUIRE(res.verdicts.size() == 4);
    CHECK_FALSE(res.verdicts[1].has_value());
    REQUIRE(res.failures.size() == 1);
    CHECK(res.failures[0].index == 1);

    const Tensor text = encode_prompt_set(model, prompts);
    for (size_t i : {size_t{0}, size_t{2}, size_t{3}}) {
        REQUIRE(res.verdicts[i].has_value());
        auto single = classify(load_image(paths[i]), model, text, prompts);
        CHECK(single.predicted_class == res.verdicts[i]->predicted_class);
        for (int j = 0; j < 8; ++j) {
            CHECK(single.similarities.s[static_cast<size_t>(j)] ==
                  res.verdicts[i]->similarities.s[static_cast<size_t>(j)]);
        }
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("verdict serializes to a single json line with all fields") {
    SimilarityRow row{{0.5f, 0.1f, 0.0f, -0.2f, 0.1f, 0.3f, 0.2f, 0.1f}};
    auto v = verdict_from_similarity(row, 0);
    const std::string line = verdict_json_line("some/image.ppm", v);
    CHECK(line.find('\n') == std::string::npos);
    auto j = nlohmann::json::parse(line);
    CHECK(j["path"] == "some/image.ppm");
    CHECK(j["predicted_class"] == 0);
    CHECK(j["label"] == "Real");
    CHECK(j["probabilities"].size() == 8);
    CHECK(j["similarities"].size() == 8);
}
