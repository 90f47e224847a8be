#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "pad8/checkpoint.hpp"
#include "pad8/synth.hpp"
#include "pad8/trainer.hpp"

using namespace pad8;

namespace {

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::string text_param_bytes(const Model& model) {
    std::string out;
    for (const auto& [name, t] : model.params()) {
        if (name.rfind("text.", 0) != 0) continue;
        const size_t n = t.size() * sizeof(float);
        const size_t at = out.size();
        out.resize(at + n);
        std::memcpy(out.data() + at, t.data(), n);
    }
    return out;
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

// samples for both splits of a freshly generated miniature dataset
std::pair<std::vector<TrainSample>, std::vector<TrainSample>> tiny_dataset(const std::string& dir) {
    SynthSpec spec;
    spec.per_class = 5;
    spec.image_size = 32;
    spec.seed = 11;
    const std::string manifest = synth_dataset(spec, dir);
    std::vector<TrainSample> train, test;
    std::ifstream in(manifest);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        TrainSample s;
        s.image_path = dir + "/" + line.substr(0, c1);
        s.class_index = std::stoi(line.substr(c1 + 1, c2 - c1 - 1));
        if (line.substr(c2 + 1) == "train") {
            train.push_back(s);
        } else {
            test.push_back(s);
        }
    }
    return {train, test};
}

}  // namespace

TEST_CASE("cosine schedule endpoints, floor and restarts") {
    TrainConfig cfg;
    cfg.lr_init = 4e-6;
    cfg.lr_min_fraction = 0.01;
    cfg.cycle_epochs = 10;
    CHECK(lr_at(0.0, cfg) == doctest::Approx(4e-6).epsilon(1e-12));
    CHECK(lr_at(9.9999, cfg) == doctest::Approx(4e-8).epsilon(1e-3));
    CHECK(lr_at(10.0, cfg) == doctest::Approx(4e-6).epsilon(1e-12));  // restart
    // lr_min is the stated fraction of lr_init
    const double lr_min = cfg.lr_min_fraction * cfg.lr_init;
    CHECK(lr_min == doctest::Approx(4e-8));
    // strictly decreasing inside a cycle
    double prev = lr_at(0.0, cfg);
    for (double t = 0.25; t < 10.0; t += 0.25) {
        const double cur = lr_at(t, cfg);
        CHECK(cur < prev);
        prev = cur;
    }
    CHECK_THROWS_AS(lr_at(-1.0, cfg), ConfigError);
}

TEST_CASE("train config validation") {
    TrainConfig cfg;
    cfg.lr_init = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.lr_min_fraction = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.cycle_epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("adam first step with constant gradient approximates -lr * sign(g)") {
    auto x = Tensor::from_data({4}, {1.0f, -0.5f, 2.0f, 0.25f}, true);
    NamedParams<float> params{{"x", x}};
    OptimizerState state = OptimizerState::init(params);
    const std::vector<float> g{0.8f, -1.5f, 0.3f, -0.2f};
    x.node_->ensure_grad();
    for (int i = 0; i < 4; ++i) x.node_->grad[static_cast<size_t>(i)] = g[static_cast<size_t>(i)];
    const std::vector<float> before = x.value();
    const double lr = 1e-3;
    adam_step(params, state, lr, 0.0);
    for (int i = 0; i < 4; ++i) {
        const double delta = static_cast<double>(x.value()[static_cast<size_t>(i)]) - before[static_cast<size_t>(i)];
        const double expected = -lr * (g[static_cast<size_t>(i)] > 0 ? 1.0 : -1.0);
        CHECK(delta == doctest::Approx(expected).epsilon(1e-4));
    }
}

TEST_CASE("adam leaves parameters alone with zero gradient and zero decay") {
    auto x = Tensor::from_data({3}, {0.5f, -0.25f, 4.0f}, true);
    NamedParams<float> params{{"x", x}};
    OptimizerState state = OptimizerState::init(params);
    const std::vector<float> before = x.value();
    for (int step = 0; step < 200; ++step) adam_step(params, state, 0.05, 0.0);
    CHECK(x.value() == before);
}

TEST_CASE("adam with lr zero is a no-op even with gradients") {
    auto x = Tensor::from_data({2}, {1.0f, -2.0f}, true);
    NamedParams<float> params{{"x", x}};
    OptimizerState state = OptimizerState::init(params);
    const std::vector<float> before = x.value();
    for (int step = 0; step < 50; ++step) {
        x.node_->ensure_grad();
        x.node_->grad = {0.3f, -0.7f};
        adam_step(params, state, 0.0, 0.0);
    }
    CHECK(x.value() == before);
}

TEST_CASE("adam drives a scalar quadratic to its optimum") {
    auto x = Tensor::from_data({1}, {0.0f}, true);
    auto target = Tensor::from_data({1}, {-3.0f}, false);  // loss = (x - 3)^2
    NamedParams<float> params{{"x", x}};
    OptimizerState state = OptimizerState::init(params);
    for (int step = 0; step < 200; ++step) {
        Tape tape;
        auto diff = add(x, target);
        auto loss = mul_scalar(diff, diff);
        tape.backward(loss);
        adam_step(params, state, 0.05, 0.0);
        x.clear_grad();
    }
    CHECK(std::abs(x.value()[0] - 3.0f) < 1e-3);
}

TEST_CASE("adam halts on NaN gradient naming the step") {
    auto x = Tensor::from_data({1}, {1.0f}, true);
    NamedParams<float> params{{"x", x}};
    OptimizerState state = OptimizerState::init(params);
    x.node_->ensure_grad();
    x.node_->grad[0] = std::nanf("");
    try {
        adam_step(params, state, 0.01, 0.0);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("step 1") != std::string::npos);
    }
}

TEST_CASE("decoupled weight decay shrinks matrices but not rank-1 parameters") {
    auto w = Tensor::from_data({1, 1}, {2.0f}, true);
    auto b = Tensor::from_data({1}, {2.0f}, true);
    NamedParams<float> params{{"w", w}, {"b", b}};
    OptimizerState state = OptimizerState::init(params);
    adam_step(params, state, 0.1, 0.5);
    // zero gradient: only the decay term applies, and only to the matrix
    CHECK(w.value()[0] == doctest::Approx(2.0f * (1.0f - 0.1f * 0.5f)));
    CHECK(b.value()[0] == doctest::Approx(2.0f));
}

TEST_CASE("contrastive loss closed forms") {
    // orthonormal anchors: T = I8 in d_e = 8
    std::vector<float> eye(64, 0.0f);
    for (int i = 0; i < 8; ++i) eye[static_cast<size_t>(i) * 8 + i] = 1.0f;
    auto t = Tensor::from_data({8, 8}, eye);
    auto scale30 = Tensor::from_data({1}, {30.0f});

    SUBCASE("perfect alignment gives vanishing loss") {
        std::vector<float> rows(2 * 8, 0.0f);
        rows[3] = 1.0f;       // row 0 = e3
        rows[8 + 6] = 1.0f;   // row 1 = e6
        auto i = Tensor::from_data({2, 8}, rows);
        auto loss = contrastive_loss(i, t, {3, 6}, scale30);
        CHECK(loss.item() < 1e-9);
    }
    SUBCASE("orthogonal embedding gives the uniform loss ln 8") {
        // nine dimensions: anchors span the first eight, image sits on the ninth
        std::vector<float> t9(8 * 9, 0.0f);
        for (int k = 0; k < 8; ++k) t9[static_cast<size_t>(k) * 9 + k] = 1.0f;
        std::vector<float> i9(9, 0.0f);
        i9[8] = 1.0f;
        auto loss = contrastive_loss(Tensor::from_data({1, 9}, i9), Tensor::from_data({8, 9}, t9),
                                     {4}, scale30);
        CHECK(loss.item() == doctest::Approx(std::log(8.0)).epsilon(1e-6));
    }
    SUBCASE("non-normalized rows violate the contract") {
        auto bad = Tensor::from_data({1, 8}, std::vector<float>(8, 0.5f));
        CHECK_THROWS_AS(contrastive_loss(bad, t, {0}, scale30), ContractError);
    }
}

TEST_CASE("contrastive loss equals the brute-force oracle") {
    Rng rng(77);
    for (int trial = 0; trial < 25; ++trial) {
        const int b = rng.uniform_int(1, 6);
        const int d = 16;
        std::vector<std::vector<double>> img_rows, txt_rows;
        std::vector<double> iflat, tflat;
        std::vector<int> labels;
        for (int r = 0; r < b; ++r) {
            img_rows.push_back(oracles::random_unit_vector(rng, d));
            iflat.insert(iflat.end(), img_rows.back().begin(), img_rows.back().end());
            labels.push_back(rng.uniform_int(0, 7));
        }
        for (int r = 0; r < 8; ++r) {
            txt_rows.push_back(oracles::random_unit_vector(rng, d));
            tflat.insert(tflat.end(), txt_rows.back().begin(), txt_rows.back().end());
        }
        const double scale = rng.uniform(1.0, 50.0);
        auto loss = contrastive_loss(TensorT<double>::from_data({b, d}, iflat),
                                     TensorT<double>::from_data({8, d}, tflat), labels,
                                     TensorT<double>::from_data({1}, {scale}));
        const double expected = oracles::brute_force_class_loss<double>(img_rows, txt_rows, labels, scale);
        CHECK(loss.item() == doctest::Approx(expected).epsilon(1e-6));
    }
}

TEST_CASE("loss on random unit embeddings is finite and inside the coarse bounds") {
    Rng rng(91);
    for (int trial = 0; trial < 20; ++trial) {
        const int b = rng.uniform_int(1, 8), d = 12;
        std::vector<double> iflat, tflat;
        std::vector<int> labels;
        for (int r = 0; r < b; ++r) {
            auto v = oracles::random_unit_vector(rng, d);
            iflat.insert(iflat.end(), v.begin(), v.end());
            labels.push_back(rng.uniform_int(0, 7));
        }
        for (int r = 0; r < 8; ++r) {
            auto v = oracles::random_unit_vector(rng, d);
            tflat.insert(tflat.end(), v.begin(), v.end());
        }
        const double scale = rng.uniform(1.0, 100.0);
        auto loss = contrastive_loss(TensorT<double>::from_data({b, d}, iflat),
                                     TensorT<double>::from_data({8, d}, tflat), labels,
                                     TensorT<double>::from_data({1}, {scale}));
        CHECK(std::isfinite(loss.item()));
        CHECK(loss.item() >= 0.0);
        CHECK(loss.item() <= std::log(8.0) + scale);
    }
}

TEST_CASE("contrastive loss gradient matches finite differences") {
    Rng rng(81);
    const int b = 3, d = 8;
    std::vector<double> iflat, tflat;
    for (int r = 0; r < b; ++r) {
        auto v = oracles::random_unit_vector(rng, d);
        iflat.insert(iflat.end(), v.begin(), v.end());
    }
    for (int r = 0; r < 8; ++r) {
        auto v = oracles::random_unit_vector(rng, d);
        tflat.insert(tflat.end(), v.begin(), v.end());
    }
    auto i = TensorT<double>::from_data({b, d}, iflat, true);
    auto t = TensorT<double>::from_data({8, d}, tflat);
    auto s = TensorT<double>::from_data({1}, {7.0}, true);
    std::vector<TensorT<double>> inputs{i, s};
    auto loss = [&] { return contrastive_loss(i, t, {1, 4, 6}, s); };
    // perturbation knocks rows slightly off unit norm; stay inside the 1e-3 contract
    CHECK(oracles::max_grad_rel_err<double>(inputs, loss, 1e-6) < 1e-5);
}

TEST_CASE("two identically seeded runs produce byte-identical checkpoints") {
    const std::string dir = "tiny_synth_det";
    auto [train_set, test_set] = tiny_dataset(dir);
    const auto prompts = PromptSet::descriptive_default();
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 8;
    cfg.seed = 7;

    auto run = [&](const std::string& out) {
        Model model(tiny_spec(), cfg.seed, cfg.logit_scale_init);
        train(model, train_set, {}, prompts, cfg);
        CheckpointMeta meta{tiny_spec(), prompts.digest(), cfg.seed, static_cast<uint32_t>(cfg.epochs)};
        save_checkpoint(model, meta, out);
    };
    run("det_a.c8");
    run("det_b.c8");
    CHECK(file_bytes("det_a.c8") == file_bytes("det_b.c8"));
    std::filesystem::remove_all(dir);
    std::filesystem::remove("det_a.c8");
    std::filesystem::remove("det_b.c8");
}

TEST_CASE("text encoder parameters are bit-frozen across training") {
    const std::string dir = "tiny_synth_frozen";
    auto [train_set, test_set] = tiny_dataset(dir);
    const auto prompts = PromptSet::descriptive_default();
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 8;
    cfg.seed = 3;

    Model model(tiny_spec(), cfg.seed, cfg.logit_scale_init);
    const std::string before = text_param_bytes(model);
    auto result = train(model, train_set, test_set, prompts, cfg);
    CHECK(result.total_steps > 0);
    CHECK(text_param_bytes(model) == before);
    // image side did move
    bool image_changed = false;
    Model reference(tiny_spec(), cfg.seed, cfg.logit_scale_init);
    auto trained = model.params();
    auto fresh = reference.params();
    for (size_t i = 0; i < trained.size(); ++i) {
        if (trained[i].first.rfind("image.", 0) == 0 &&
            trained[i].second.value() != fresh[i].second.value()) {
            image_changed = true;
        }
    }
    CHECK(image_changed);
    std::filesystem::remove_all(dir);
}

TEST_CASE("train rejects an empty dataset") {
    Model model(tiny_spec(), 1);
    TrainConfig cfg;
    CHECK_THROWS_AS(train(model, {}, {}, PromptSet::descriptive_default(), cfg), ConfigError);
}

TEST_CASE("train reports unreadable images with their path") {
    Model model(tiny_spec(), 1);
    TrainConfig cfg;
    cfg.epochs = 1;
    std::vector<TrainSample> data{{"missing_image.ppm", 0}};
    try {
        train(model, data, {}, PromptSet::descriptive_default(), cfg);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("missing_image.ppm") != std::string::npos);
    }
}

TEST_CASE("run log carries the documented CSV columns") {
    const std::string dir = "tiny_synth_log";
    auto [train_set, test_set] = tiny_dataset(dir);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 8;
    Model model(tiny_spec(), 5);
    train(model, train_set, test_set, PromptSet::descriptive_default(), cfg, {}, "run_log.csv");
    std::ifstream log("run_log.csv");
    std::string header;
    std::getline(log, header);
    CHECK(header == "epoch,step,loss,lr,heldout_real_rate,heldout_fake_rate");
    std::string row;
    CHECK(static_cast<bool>(std::getline(log, row)));
    CHECK(row.find("0,") == 0);
    std::filesystem::remove_all(dir);
    std::filesystem::remove("run_log.csv");
}
