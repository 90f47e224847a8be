#include "pad8/prompts.hpp"

#include <fstream>
#include <vector>

namespace pad8 {

PromptSet::PromptSet(std::array<std::string, kNumClasses> texts, int real_index, std::string id)
    : texts_(std::move(texts)), real_index_(real_index), id_(std::move(id)) {
    if (real_index_ < 0 || real_index_ >= kNumClasses) {
        throw PromptError("real_index " + std::to_string(real_index_) + " outside [0,8)");
    }
    for (int i = 0; i < kNumClasses; ++i) {
        if (texts_[static_cast<size_t>(i)].empty()) {
            throw PromptError("prompt " + class_name(i) + " is empty");
        }
    }
}

PromptSet PromptSet::descriptive_default() {
    return PromptSet(
        {
            "A normal selfie photo of a person taken with the front camera of a mobile phone "
            "under well-lit conditions, and the image has not been altered.",
            "Partial or complete photos of identification cards, with visible address and "
            "identification number information in the photos.",
            "A face photo printed on paper, a person wearing a face mask, and partial "
            "information of the hands may be visible in the photo.",
            "Online verification of citizens photo with a white background, the person in the "
            "photo is not wearing a hat and has black hair.",
            "A person's work identification photo, usually with a person in a suit and a "
            "white, blue or red background.",
            "Displaying personal photos or identification card photos on a mobile phone, "
            "where the attack samples may reveal the borders of the phone or computer, moire "
            "patterns, and partial information of the hands.",
            "The photo has been manipulated using PS, resulting in distorted details in "
            "certain areas.",
            "The photo was taken in a dark environment, making it impossible to discern "
            "facial details. The entire frame is dominated by black, providing no visible "
            "information.",
        },
        0, "default");
}

PromptSet PromptSet::numeric() {
    return PromptSet({"1", "2", "3", "4", "5", "6", "7", "8"}, 0, "numeric-1-8");
}

PromptSet PromptSet::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open prompt file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    int real_index = 0;
    size_t first = 0;
    if (!lines.empty() && lines[0].rfind("real_index=", 0) == 0) {
        try {
            real_index = std::stoi(lines[0].substr(11));
        } catch (const std::exception&) {
            throw PromptError("bad real_index header in " + path + ": " + lines[0]);
        }
        first = 1;
    }
    // trailing blank lines are tolerated, interior ones are not
    while (lines.size() > first && lines.back().empty()) lines.pop_back();
    if (lines.size() - first != kNumClasses) {
        throw PromptError("prompt file " + path + " must contain exactly 8 prompt lines, found " +
                          std::to_string(lines.size() - first));
    }
    std::array<std::string, kNumClasses> texts;
    for (int i = 0; i < kNumClasses; ++i) texts[static_cast<size_t>(i)] = lines[first + static_cast<size_t>(i)];
    return PromptSet(std::move(texts), real_index, "file:" + path);
}

uint64_t PromptSet::digest() const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& t : texts_) {
        h = fnv1a64(t.data(), t.size(), h);
        const char sep = '\n';
        h = fnv1a64(&sep, 1, h);
    }
    h = fnv1a64(&real_index_, sizeof(real_index_), h);
    return h;
}

std::string PromptSet::class_name(int i) {
    if (i < 0 || i >= kNumClasses) throw LabelError("class index " + std::to_string(i) + " outside [0,8)");
    return std::string("(") + static_cast<char>('a' + i) + ")";
}

}  // namespace pad8
