#pragma once

#include <string>
#include <vector>

#include "pad8/common.hpp"

namespace pad8 {

// Byte-level tokenizer: 0 = PAD, 1 = BOS, 2 = EOS, 3..258 = raw byte + 3.
// No learned merges; any byte string round-trips as long as it fits the
// context window.
class Tokenizer {
public:
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;
    static constexpr int kVocabSize = 259;

    explicit Tokenizer(int context_length = 64);

    // [BOS, bytes+3 ..., EOS]; texts longer than context-2 bytes are
    // truncated to context-1 ids and EOS is appended.
    std::vector<int> encode(const std::string& text) const;

    std::string decode(const std::vector<int>& ids) const;

    int context_length() const { return context_length_; }

private:
    int context_length_;
};

}  // namespace pad8
