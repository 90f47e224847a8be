#include "pad8/classifier.hpp"

#include <cmath>
#include <iostream>

#include "json.hpp"

namespace pad8 {

SimilarityRow similarity(const Tensor& image_embedding, const Tensor& text_embeddings) {
    if (image_embedding.rank() != 1) {
        throw ShapeError("similarity: image embedding must be rank 1, got " +
                         detail::shape_str(image_embedding.shape()));
    }
    const int d = image_embedding.dim(0);
    if (text_embeddings.rank() != 2 || text_embeddings.dim(0) != PromptSet::kNumClasses ||
        text_embeddings.dim(1) != d) {
        throw ShapeError("similarity: text embeddings must be [8x" + std::to_string(d) + "], got " +
                         detail::shape_str(text_embeddings.shape()));
    }
    double inorm = 0.0;
    for (int j = 0; j < d; ++j) {
        const double v = image_embedding.data()[j];
        inorm += v * v;
    }
    inorm = std::sqrt(inorm);
    if (inorm < 1e-12) throw NormError("similarity: zero-norm image embedding");

    SimilarityRow row{};
    for (int i = 0; i < PromptSet::kNumClasses; ++i) {
        const float* t = text_embeddings.data() + static_cast<size_t>(i) * d;
        double dot = 0.0, tnorm = 0.0;
        for (int j = 0; j < d; ++j) {
            dot += static_cast<double>(image_embedding.data()[j]) * t[j];
            tnorm += static_cast<double>(t[j]) * t[j];
        }
        tnorm = std::sqrt(tnorm);
        if (tnorm < 1e-12) throw NormError("similarity: zero-norm text embedding at row " + std::to_string(i));
        row.s[static_cast<size_t>(i)] = static_cast<float>(dot / (inorm * tnorm));
    }
    return row;
}

LivenessVerdict verdict_from_similarity(const SimilarityRow& sim, int real_index) {
    LivenessVerdict v;
    v.similarities = sim;

    // softmax over exactly eight entries
    float mx = sim.s[0];
    for (float x : sim.s) mx = std::max(mx, x);
    double sum = 0.0;
    std::array<double, 8> e{};
    for (int i = 0; i < 8; ++i) {
        e[static_cast<size_t>(i)] = std::exp(static_cast<double>(sim.s[static_cast<size_t>(i)] - mx));
        sum += e[static_cast<size_t>(i)];
    }
    int best = 0;
    bool tie = false;
    for (int i = 0; i < 8; ++i) {
        v.probabilities.c[static_cast<size_t>(i)] = static_cast<float>(e[static_cast<size_t>(i)] / sum);
        if (i > 0) {
            if (sim.s[static_cast<size_t>(i)] > sim.s[static_cast<size_t>(best)]) {
                best = i;
            } else if (sim.s[static_cast<size_t>(i)] == sim.s[static_cast<size_t>(best)]) {
                tie = true;  // keep the lower index
            }
        }
    }
    if (tie) {
        std::cerr << "warning: similarity tie broken toward class " << PromptSet::class_name(best)
                  << "\n";
    }
    v.predicted_class = best;
    v.is_real = best == real_index;
    return v;
}

LivenessVerdict classify_embedding(const Tensor& image_embedding, const Tensor& text_embeddings,
                                   const PromptSet& prompts) {
    return verdict_from_similarity(similarity(image_embedding, text_embeddings), prompts.real_index());
}

Tensor encode_prompt_set(const Model& model, const PromptSet& prompts) {
    std::vector<std::string> texts(prompts.texts().begin(), prompts.texts().end());
    return model.text.encode(texts);
}

LivenessVerdict classify(const RgbImage& img, const Model& model, const Tensor& text_embeddings,
                         const PromptSet& prompts) {
    auto t = preprocess(img, model.spec.image_size);
    auto enc = model.image.encode(t);
    return classify_embedding(enc.embedding, text_embeddings, prompts);
}

BatchResult classify_batch(const std::vector<std::string>& image_paths, const Model& model,
                           const PromptSet& prompts) {
    BatchResult result;
    result.verdicts.resize(image_paths.size());
    const Tensor text = encode_prompt_set(model, prompts);
    for (size_t i = 0; i < image_paths.size(); ++i) {
        try {
            const RgbImage img = load_image(image_paths[i]);
            result.verdicts[i] = classify(img, model, text, prompts);
        } catch (const Error& e) {
            result.failures.push_back({i, e.what()});
        }
    }
    return result;
}

std::string verdict_json_line(const std::string& path, const LivenessVerdict& v) {
    nlohmann::json j;
    j["path"] = path;
    j["predicted_class"] = v.predicted_class;
    j["label"] = v.label();
    j["probabilities"] = v.probabilities.c;
    j["similarities"] = v.similarities.s;
    return j.dump();
}

}  // namespace pad8
