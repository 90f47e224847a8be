#include "pad8/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>

namespace pad8 {

double lr_at(double epoch, const TrainConfig& cfg) {
    cfg.validate();
    if (epoch < 0.0) throw ConfigError("lr_at: epoch must be >= 0");
    const double lr_min = cfg.lr_min_fraction * cfg.lr_init;
    const double t = std::fmod(epoch, static_cast<double>(cfg.cycle_epochs));
    const double cosine = std::cos(3.14159265358979323846 * t / cfg.cycle_epochs);
    return lr_min + 0.5 * (cfg.lr_init - lr_min) * (1.0 + cosine);
}

OptimizerState OptimizerState::init(const NamedParams<float>& params) {
    OptimizerState s;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const auto& [name, t] : params) {
        (void)name;
        s.m.emplace_back(t.size(), 0.0f);
        s.v.emplace_back(t.size(), 0.0f);
    }
    return s;
}

void adam_step(NamedParams<float>& params, OptimizerState& state, double lr, double weight_decay) {
    if (params.size() != state.m.size()) {
        throw ConfigError("adam_step: optimizer state does not match parameter count");
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (size_t p = 0; p < params.size(); ++p) {
        auto& tensor = params[p].second;
        auto& m = state.m[p];
        auto& v = state.v[p];
        if (m.size() != tensor.size()) {
            throw ShapeError("adam_step: moment shape mismatch for " + params[p].first);
        }
        const bool has_grad = tensor.has_grad();
        const float* g = has_grad ? tensor.grad().data() : nullptr;
        float* x = tensor.data();
        // matrices and embeddings decay; biases, norm affines and the logit
        // scale are exempt
        const double decay = tensor.rank() >= 2 ? weight_decay : 0.0;
        for (size_t i = 0; i < m.size(); ++i) {
            const double gi = has_grad ? static_cast<double>(g[i]) : 0.0;
            if (std::isnan(gi)) {
                throw NumericError("training diverged: NaN gradient in " + params[p].first +
                                   " at step " + std::to_string(state.step));
            }
            const double mi = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
            const double vi = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
            m[i] = static_cast<float>(mi);
            v[i] = static_cast<float>(vi);
            const double mhat = mi / bc1;
            const double vhat = vi / bc2;
            double xi = static_cast<double>(x[i]) - lr * mhat / (std::sqrt(vhat) + state.eps);
            xi -= lr * decay * xi;  // decoupled decay
            x[i] = static_cast<float>(xi);
        }
    }
}

namespace {

struct CachedSample {
    Tensor preprocessed;  // [3 x M x M]
    int label;
};

// heldout detection rates as percentages: positives passed, negatives rejected
std::pair<double, double> heldout_rates(const Model& model, const std::vector<CachedSample>& samples,
                                        const Tensor& text, const PromptSet& prompts) {
    long real_total = 0, real_pass = 0, fake_total = 0, fake_reject = 0;
    for (const auto& s : samples) {
        auto enc = model.image.encode(s.preprocessed);
        auto verdict = classify_embedding(enc.embedding, text, prompts);
        if (s.label == prompts.real_index()) {
            ++real_total;
            if (verdict.is_real) ++real_pass;
        } else {
            ++fake_total;
            if (!verdict.is_real) ++fake_reject;
        }
    }
    const double real_rate = real_total ? 100.0 * real_pass / real_total : -1.0;
    const double fake_rate = fake_total ? 100.0 * fake_reject / fake_total : -1.0;
    return {real_rate, fake_rate};
}

std::vector<CachedSample> load_samples(const std::vector<TrainSample>& samples, int model_size,
                                       bool skip_bad) {
    std::vector<CachedSample> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        if (s.class_index < 0 || s.class_index >= PromptSet::kNumClasses) {
            throw LabelError("train sample " + s.image_path + " has class " +
                             std::to_string(s.class_index) + " outside [0,8)");
        }
        try {
            out.push_back({preprocess(load_image(s.image_path), model_size), s.class_index});
        } catch (const Error& e) {
            if (skip_bad) {
                std::cerr << "warning: skipping unreadable image " << s.image_path << ": " << e.what()
                          << "\n";
            } else {
                throw IoError("failed to load training image " + s.image_path + ": " + e.what());
            }
        }
    }
    return out;
}

}  // namespace

TrainResult train(Model& model, const std::vector<TrainSample>& train_samples,
                  const std::vector<TrainSample>& heldout_samples, const PromptSet& prompts,
                  const TrainConfig& cfg, const AugmentPolicy& policy, const std::string& log_path,
                  bool verbose) {
    cfg.validate();
    policy.validate();
    if (train_samples.empty()) throw ConfigError("train: empty dataset");

    const auto cached = load_samples(train_samples, model.spec.image_size, cfg.skip_bad_images);
    const auto heldout = load_samples(heldout_samples, model.spec.image_size, cfg.skip_bad_images);
    if (cached.empty()) throw ConfigError("train: no readable training images");

    std::array<int, PromptSet::kNumClasses> class_counts{};
    for (const auto& s : cached) class_counts[static_cast<size_t>(s.label)]++;
    for (int k = 0; k < PromptSet::kNumClasses; ++k) {
        if (class_counts[static_cast<size_t>(k)] == 0) {
            std::cerr << "warning: class " << PromptSet::class_name(k) << " absent from training data\n";
        }
    }

    // frozen anchors, computed once per run
    const Tensor text = encode_prompt_set(model, prompts);

    auto trainable = model.trainable_params();
    OptimizerState opt = OptimizerState::init(trainable);

    std::ofstream log;
    if (!log_path.empty()) {
        log.open(log_path, std::ios::app);
        if (!log) throw IoError("cannot open run log: " + log_path);
        log << "epoch,step,loss,lr,heldout_real_rate,heldout_fake_rate\n";
    }

    TrainResult result;
    Rng shuffle_rng = Rng::substream(cfg.seed, "shuffle");
    std::vector<size_t> order(cached.size());
    std::iota(order.begin(), order.end(), size_t{0});
    const long steps_per_epoch = (static_cast<long>(cached.size()) + cfg.batch_size - 1) / cfg.batch_size;
    long global_step = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates with the shuffle substream
        for (size_t i = order.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(shuffle_rng.uniform_int(0, static_cast<int>(i) - 1));
            std::swap(order[i - 1], order[j]);
        }
        double loss_sum = 0.0;
        long batches = 0;
        double lr = cfg.lr_init;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
            const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
            std::vector<int> labels;
            labels.reserve(end - start);

            Tape tape;
            std::vector<Tensor> rows;
            rows.reserve(end - start);
            for (size_t i = start; i < end; ++i) {
                const auto& sample = cached[order[i]];
                Rng aug_rng = Rng::substream(cfg.seed, "augment", static_cast<uint64_t>(epoch), order[i]);
                auto img = augment(sample.preprocessed, policy, aug_rng);
                auto enc = model.image.encode(img);
                rows.push_back(reshape(enc.embedding, {1, model.spec.embed_dim}));
                labels.push_back(sample.label);
            }
            auto image_batch = concat_rows(rows);
            auto scale_val = clamp_max(exp_elem(model.logit_scale), 100.0f);
            auto loss = contrastive_loss(image_batch, text, labels, scale_val);
            tape.backward(loss);

            const double frac_epoch = epoch + static_cast<double>(batches) / steps_per_epoch;
            lr = lr_at(frac_epoch, cfg);
            adam_step(trainable, opt, lr, cfg.weight_decay);
            for (auto& [name, t] : trainable) {
                (void)name;
                t.clear_grad();
            }
            loss_sum += loss.item();
            ++batches;
            ++global_step;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.step = global_step;
        stats.mean_loss = loss_sum / std::max<long>(1, batches);
        stats.lr = lr;
        if (!heldout.empty()) {
            auto [rr, fr] = heldout_rates(model, heldout, text, prompts);
            stats.heldout_real_rate = rr;
            stats.heldout_fake_rate = fr;
        }
        if (log) {
            log << stats.epoch << "," << stats.step << "," << stats.mean_loss << "," << stats.lr << ","
                << stats.heldout_real_rate << "," << stats.heldout_fake_rate << "\n";
            log.flush();
        }
        if (verbose) {
            std::cerr << "epoch " << epoch << " loss " << stats.mean_loss << " lr " << stats.lr;
            if (!heldout.empty()) {
                std::cerr << " heldout real " << stats.heldout_real_rate << "% fake "
                          << stats.heldout_fake_rate << "%";
            }
            std::cerr << "\n";
        }
        result.epochs.push_back(stats);
    }
    result.total_steps = global_step;
    return result;
}

}  // namespace pad8
