#pragma once

#include <array>
#include <string>

#include "pad8/common.hpp"

namespace pad8 {

// The eight ordered category texts with the designated genuine-person index.
class PromptSet {
public:
    static constexpr int kNumClasses = 8;

    PromptSet(std::array<std::string, kNumClasses> texts, int real_index, std::string id);

    // built-in descriptive category texts; real class at index 0
    static PromptSet descriptive_default();

    // the labels "1".."8", for the prompt ablation
    static PromptSet numeric();

    // one prompt per line, exactly 8 non-empty lines, optional first line
    // "real_index=<k>"
    static PromptSet load_file(const std::string& path);

    const std::string& text(int i) const { return texts_.at(static_cast<size_t>(i)); }
    const std::array<std::string, kNumClasses>& texts() const { return texts_; }
    int real_index() const { return real_index_; }
    const std::string& id() const { return id_; }

    // content hash over texts and real_index; stored in checkpoints
    uint64_t digest() const;

    // conventional single-letter class names (a).. (h)
    static std::string class_name(int i);

private:
    std::array<std::string, kNumClasses> texts_;
    int real_index_;
    std::string id_;
};

}  // namespace pad8
