#include "pad8/tokenizer.hpp"

namespace pad8 {

Tokenizer::Tokenizer(int context_length) : context_length_(context_length) {
    if (context_length < 3) {
        throw ConfigError("tokenizer context length must be >= 3, got " + std::to_string(context_length));
    }
}

std::vector<int> Tokenizer::encode(const std::string& text) const {
    const size_t max_bytes = static_cast<size_t>(context_length_) - 2;
    const size_t n = std::min(text.size(), max_bytes);
    std::vector<int> ids;
    ids.reserve(n + 2);
    ids.push_back(kBos);
    for (size_t i = 0; i < n; ++i) {
        ids.push_back(static_cast<int>(static_cast<unsigned char>(text[i])) + 3);
    }
    ids.push_back(kEos);
    return ids;
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) {
        if (id == kBos || id == kPad) continue;
        if (id == kEos) break;
        if (id < 3 || id >= kVocabSize) {
            throw LabelError("tokenizer: id " + std::to_string(id) + " outside vocabulary");
        }
        out.push_back(static_cast<char>(id - 3));
    }
    return out;
}

}  // namespace pad8
