#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pad8/classifier.hpp"
#include "pad8/image.hpp"
#include "pad8/model.hpp"
#include "pad8/prompts.hpp"
#include "pad8/tensor.hpp"

namespace pad8 {

struct TrainConfig {
    int epochs = 100;
    int batch_size = 16;
    double lr_init = 3e-4;          // desk default; 4e-6 at paper scale
    double weight_decay = 0.05;
    int cycle_epochs = 10;          // cosine annealing restart period
    double lr_min_fraction = 0.01;  // lr_min = fraction * lr_init
    uint64_t seed = 7;
    // sharper than the usual 1/0.07: the frozen random-init text anchors sit
    // in a narrow cone, so logits need a high inverse temperature before the
    // class margins are trainable
    double logit_scale_init = std::log(30.0);
    bool skip_bad_images = false;   // abort on load failure by default

    void validate() const {
        if (epochs < 1) throw ConfigError("train config: epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
        if (lr_init <= 0.0) throw ConfigError("train config: lr_init must be positive");
        if (weight_decay < 0.0) throw ConfigError("train config: weight_decay must be >= 0");
        if (cycle_epochs < 1) throw ConfigError("train config: cycle_epochs must be >= 1");
        if (lr_min_fraction <= 0.0 || lr_min_fraction > 1.0) {
            throw ConfigError("train config: lr_min_fraction must be in (0,1]");
        }
    }
};

// cosine annealing with restarts every cycle_epochs:
// lr(t) = lr_min + (lr_init - lr_min) * (1 + cos(pi * t / cycle)) / 2
double lr_at(double epoch, const TrainConfig& cfg);

// Adam first/second moment buffers, one slot per trainable parameter
struct OptimizerState {
    std::vector<std::vector<float>> m;
    std::vector<std::vector<float>> v;
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static OptimizerState init(const NamedParams<float>& params);
};

// bias-corrected Adam with decoupled weight decay; parameters without an
// accumulated gradient are treated as zero-gradient
void adam_step(NamedParams<float>& params, OptimizerState& state, double lr, double weight_decay);

// cross_entropy(scale * I . T^t, labels); rows of I and T must be unit norm
template <typename S>
TensorT<S> contrastive_loss(const TensorT<S>& image_embeddings, const TensorT<S>& text_embeddings,
                            const std::vector<int>& labels, const TensorT<S>& logit_scale) {
    if (image_embeddings.rank() != 2 || text_embeddings.rank() != 2 ||
        image_embeddings.dim(1) != text_embeddings.dim(1)) {
        throw ShapeError("contrastive_loss: embedding shape mismatch " +
                         detail::shape_str(image_embeddings.shape()) + " vs " +
                         detail::shape_str(text_embeddings.shape()));
    }
    auto check_unit = [](const TensorT<S>& t, const char* which) {
        const int rows = t.dim(0), d = t.dim(1);
        for (int r = 0; r < rows; ++r) {
            double sq = 0.0;
            for (int j = 0; j < d; ++j) {
                const double v = t.data()[static_cast<size_t>(r) * d + j];
                sq += v * v;
            }
            if (std::abs(std::sqrt(sq) - 1.0) > 1e-3) {
                throw ContractError(std::string("contrastive_loss: ") + which + " row " +
                                    std::to_string(r) + " is not unit norm");
            }
        }
    };
    check_unit(image_embeddings, "image");
    check_unit(text_embeddings, "text");
    auto logits = mul_scalar(matmul(image_embeddings, transpose(text_embeddings)), logit_scale);
    return cross_entropy(logits, labels);
}

struct TrainSample {
    std::string image_path;
    int class_index = 0;  // in [0,8)
};

struct EpochStats {
    int epoch = 0;
    long step = 0;          // cumulative optimizer steps
    double mean_loss = 0.0;
    double lr = 0.0;
    double heldout_real_rate = -1.0;  // percentages; -1 when no heldout set
    double heldout_fake_rate = -1.0;
};

struct TrainResult {
    std::vector<EpochStats> epochs;
    long total_steps = 0;
};

// Trains the image encoder against frozen text anchors. Text anchors are
// computed once up front; the text encoder never receives gradients. The
// run log (CSV: epoch,step,loss,lr,heldout_real_rate,heldout_fake_rate) is
// appended to log_path when non-empty.
TrainResult train(Model& model, const std::vector<TrainSample>& train_samples,
                  const std::vector<TrainSample>& heldout_samples, const PromptSet& prompts,
                  const TrainConfig& cfg, const AugmentPolicy& policy = {},
                  const std::string& log_path = "", bool verbose = false);

}  // namespace pad8
