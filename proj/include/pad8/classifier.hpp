#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "pad8/image.hpp"
#include "pad8/model.hpp"
#include "pad8/prompts.hpp"
#include "pad8/tensor.hpp"

namespace pad8 {

// cosine similarities against the eight category anchors
struct SimilarityRow {
    std::array<float, 8> s;
};

// softmax of the similarity row; sums to one
struct ProbRow {
    std::array<float, 8> c;
};

struct LivenessVerdict {
    int predicted_class = 0;
    bool is_real = false;
    ProbRow probabilities{};
    SimilarityRow similarities{};

    const char* label() const { return is_real ? "Real" : "Fake"; }
};

// cos(I, T_i) per anchor row; inputs are re-normalized defensively so the
// result is scale-invariant even for non-unit embeddings
SimilarityRow similarity(const Tensor& image_embedding, const Tensor& text_embeddings);

// softmax over the eight similarities, argmax with lowest-index tie break,
// Real iff the winning index is the prompt set's real index
LivenessVerdict verdict_from_similarity(const SimilarityRow& sim, int real_index);

LivenessVerdict classify_embedding(const Tensor& image_embedding, const Tensor& text_embeddings,
                                   const PromptSet& prompts);

// full pipeline for one image: preprocess, encode, score
LivenessVerdict classify(const RgbImage& img, const Model& model, const Tensor& text_embeddings,
                         const PromptSet& prompts);

struct BatchFailure {
    size_t index;
    std::string message;
};

struct BatchResult {
    std::vector<std::optional<LivenessVerdict>> verdicts;  // one slot per input
    std::vector<BatchFailure> failures;
};

// text embeddings computed once; per-image failures are reported with their
// index and the remainder still runs
BatchResult classify_batch(const std::vector<std::string>& image_paths, const Model& model,
                           const PromptSet& prompts);

// {path, predicted_class, label, probabilities[8], similarities[8]} on one line
std::string verdict_json_line(const std::string& path, const LivenessVerdict& v);

// helper shared by classifier/trainer/eval: encode the eight prompts once
Tensor encode_prompt_set(const Model& model, const PromptSet& prompts);

}  // namespace pad8
