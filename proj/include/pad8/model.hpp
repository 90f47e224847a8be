#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "pad8/common.hpp"
#include "pad8/image.hpp"
#include "pad8/tensor.hpp"
#include "pad8/tokenizer.hpp"

namespace pad8 {

// All architecture hyperparameters. Desk-scale defaults; full-scale values
// are expressible through the same fields.
struct ModelSpec {
    int image_size = 64;      // M
    int patch_size = 8;       // c
    int image_blocks = 4;     // L_v
    int image_heads = 4;
    int image_width = 128;    // d_v
    int text_blocks = 2;      // L_t
    int text_heads = 4;
    int text_width = 128;     // d_t
    int embed_dim = 64;       // d_e
    int context_length = 64;

    void validate() const {
        auto positive = [](int v, const char* name) {
            if (v < 1) throw ConfigError(std::string("model spec: ") + name + " must be positive");
        };
        positive(image_size, "image_size");
        positive(patch_size, "patch_size");
        positive(image_blocks, "image_blocks");
        positive(image_heads, "image_heads");
        positive(image_width, "image_width");
        positive(text_blocks, "text_blocks");
        positive(text_heads, "text_heads");
        positive(text_width, "text_width");
        positive(embed_dim, "embed_dim");
        positive(context_length, "context_length");
        if (image_size % patch_size != 0) {
            throw ConfigError("model spec: image_size " + std::to_string(image_size) +
                              " not divisible by patch_size " + std::to_string(patch_size));
        }
        if (image_width % image_heads != 0) {
            throw ConfigError("model spec: image_width not divisible by image_heads");
        }
        if (text_width % text_heads != 0) {
            throw ConfigError("model spec: text_width not divisible by text_heads");
        }
    }

    int patch_count() const { return (image_size / patch_size) * (image_size / patch_size); }

    bool operator==(const ModelSpec&) const = default;
};

constexpr int kMlpRatio = 4;
constexpr double kInitStd = 0.02;

template <typename S>
using NamedParams = std::vector<std::pair<std::string, TensorT<S>>>;

template <typename S>
struct LinearT {
    TensorT<S> w;  // [in x out]
    TensorT<S> b;  // [out]

    static LinearT init(int in, int out, Rng& rng, bool requires_grad) {
        LinearT l;
        l.w = TensorT<S>::randn({in, out}, rng, kInitStd, requires_grad);
        l.b = TensorT<S>::zeros({out}, requires_grad);
        return l;
    }

    TensorT<S> forward(const TensorT<S>& x) const { return add_rowvec(matmul(x, w), b); }

    void collect(const std::string& prefix, NamedParams<S>& out) const {
        out.emplace_back(prefix + ".w", w);
        out.emplace_back(prefix + ".b", b);
    }
};

template <typename S>
struct LayerNormT {
    TensorT<S> gamma;
    TensorT<S> beta;

    static LayerNormT init(int d, bool requires_grad) {
        LayerNormT ln;
        ln.gamma = TensorT<S>::filled({d}, S(1), requires_grad);
        ln.beta = TensorT<S>::zeros({d}, requires_grad);
        return ln;
    }

    TensorT<S> forward(const TensorT<S>& x) const { return layer_norm(x, gamma, beta, S(1e-5)); }

    void collect(const std::string& prefix, NamedParams<S>& out) const {
        out.emplace_back(prefix + ".gamma", gamma);
        out.emplace_back(prefix + ".beta", beta);
    }
};

// pre-norm transformer block: x + MSA(LN(x)), then y + MLP(LN(y))
template <typename S>
struct BlockT {
    LayerNormT<S> ln1;
    MhaParams<S> attn;
    LayerNormT<S> ln2;
    LinearT<S> fc1;
    LinearT<S> fc2;

    static BlockT init(int width, int heads, Rng& rng, bool requires_grad) {
        BlockT b;
        b.ln1 = LayerNormT<S>::init(width, requires_grad);
        b.attn.wq = TensorT<S>::randn({width, width}, rng, kInitStd, requires_grad);
        b.attn.bq = TensorT<S>::zeros({width}, requires_grad);
        b.attn.wk = TensorT<S>::randn({width, width}, rng, kInitStd, requires_grad);
        b.attn.bk = TensorT<S>::zeros({width}, requires_grad);
        b.attn.wv = TensorT<S>::randn({width, width}, rng, kInitStd, requires_grad);
        b.attn.bv = TensorT<S>::zeros({width}, requires_grad);
        b.attn.wo = TensorT<S>::randn({width, width}, rng, kInitStd, requires_grad);
        b.attn.bo = TensorT<S>::zeros({width}, requires_grad);
        b.attn.heads = heads;
        b.ln2 = LayerNormT<S>::init(width, requires_grad);
        b.fc1 = LinearT<S>::init(width, width * kMlpRatio, rng, requires_grad);
        b.fc2 = LinearT<S>::init(width * kMlpRatio, width, rng, requires_grad);
        return b;
    }

    // returns block output and this block's attention weights
    MhaResult<S> forward(const TensorT<S>& x) const {
        auto attn_res = multi_head_attention(ln1.forward(x), attn);
        auto y = add(x, attn_res.out);
        auto h = fc2.forward(gelu(fc1.forward(ln2.forward(y))));
        return {add(y, h), attn_res.attn};
    }

    void collect(const std::string& prefix, NamedParams<S>& out) const {
        ln1.collect(prefix + ".ln1", out);
        out.emplace_back(prefix + ".attn.wq", attn.wq);
        out.emplace_back(prefix + ".attn.bq", attn.bq);
        out.emplace_back(prefix + ".attn.wk", attn.wk);
        out.emplace_back(prefix + ".attn.bk", attn.bk);
        out.emplace_back(prefix + ".attn.wv", attn.wv);
        out.emplace_back(prefix + ".attn.bv", attn.bv);
        out.emplace_back(prefix + ".attn.wo", attn.wo);
        out.emplace_back(prefix + ".attn.bo", attn.bo);
        ln2.collect(prefix + ".ln2", out);
        fc1.collect(prefix + ".mlp.fc1", out);
        fc2.collect(prefix + ".mlp.fc2", out);
    }
};

template <typename S>
struct ImageEncodingT {
    TensorT<S> embedding;  // [d_e], unit norm
    TensorT<S> attn_last;  // [heads x (N+1) x (N+1)], detached
};

// ViT image encoder: patch projection, class token, positional table,
// pre-norm blocks, final LN, projection to the shared embedding space.
template <typename S>
struct VitEncoderT {
    int image_size = 0;
    int patch_size = 0;
    int heads = 0;
    TensorT<S> patch_proj;   // [3c^2 x d_v]
    TensorT<S> class_token;  // [1 x d_v]
    TensorT<S> pos_embed;    // [(N+1) x d_v]
    std::vector<BlockT<S>> blocks;
    LayerNormT<S> final_ln;
    TensorT<S> out_proj;     // [d_v x d_e]

    static VitEncoderT init(const ModelSpec& spec, Rng& rng, bool requires_grad = true) {
        spec.validate();
        VitEncoderT v;
        v.image_size = spec.image_size;
        v.patch_size = spec.patch_size;
        v.heads = spec.image_heads;
        const int c = spec.patch_size;
        const int n = spec.patch_count();
        v.patch_proj = TensorT<S>::randn({3 * c * c, spec.image_width}, rng, kInitStd, requires_grad);
        v.class_token = TensorT<S>::randn({1, spec.image_width}, rng, kInitStd, requires_grad);
        v.pos_embed = TensorT<S>::randn({n + 1, spec.image_width}, rng, kInitStd, requires_grad);
        for (int i = 0; i < spec.image_blocks; ++i) {
            v.blocks.push_back(BlockT<S>::init(spec.image_width, spec.image_heads, rng, requires_grad));
        }
        v.final_ln = LayerNormT<S>::init(spec.image_width, requires_grad);
        v.out_proj = TensorT<S>::randn({spec.image_width, spec.embed_dim}, rng, kInitStd, requires_grad);
        return v;
    }

    // x: [3 x M x M] -> unit embedding [d_e] plus last block attention
    ImageEncodingT<S> encode(const TensorT<S>& x) const {
        const PatchConfig cfg(image_size, patch_size);
        auto patches = patchify(x, cfg);                       // [N x 3c^2]
        auto tokens = matmul(patches, patch_proj);             // [N x d_v]
        auto seq = add(concat_rows<S>({class_token, tokens}), pos_embed);
        TensorT<S> attn_last;
        for (const auto& block : blocks) {
            auto res = block.forward(seq);
            seq = res.out;
            attn_last = res.attn;
        }
        auto cls = slice_rows(final_ln.forward(seq), 0, 1);    // [1 x d_v]
        auto emb = l2_normalize(matmul(cls, out_proj));        // [1 x d_e]
        return {reshape(emb, {emb.dim(1)}), attn_last};
    }

    void collect(NamedParams<S>& out) const {
        out.emplace_back("image.patch_proj", patch_proj);
        out.emplace_back("image.class_token", class_token);
        out.emplace_back("image.pos_embed", pos_embed);
        for (size_t i = 0; i < blocks.size(); ++i) {
            blocks[i].collect("image.block" + std::to_string(i), out);
        }
        final_ln.collect("image.final_ln", out);
        out.emplace_back("image.out_proj", out_proj);
    }
};

// Text transformer over byte tokens; pooled at the EOS position. Frozen
// after initialization: none of its tensors require gradients.
template <typename S>
struct TextEncoderT {
    Tokenizer tokenizer{64};
    TensorT<S> tok_embed;  // [vocab x d_t]
    TensorT<S> pos_embed;  // [context x d_t]
    std::vector<BlockT<S>> blocks;
    LayerNormT<S> final_ln;
    TensorT<S> out_proj;   // [d_t x d_e]

    static TextEncoderT init(const ModelSpec& spec, Rng& rng) {
        spec.validate();
        TextEncoderT t;
        t.tokenizer = Tokenizer(spec.context_length);
        t.tok_embed = TensorT<S>::randn({Tokenizer::kVocabSize, spec.text_width}, rng, kInitStd, false);
        t.pos_embed = TensorT<S>::randn({spec.context_length, spec.text_width}, rng, kInitStd, false);
        for (int i = 0; i < spec.text_blocks; ++i) {
            t.blocks.push_back(BlockT<S>::init(spec.text_width, spec.text_heads, rng, false));
        }
        t.final_ln = LayerNormT<S>::init(spec.text_width, false);
        t.out_proj = TensorT<S>::randn({spec.text_width, spec.embed_dim}, rng, kInitStd, false);
        return t;
    }

    // each row L2-normalized; pooled at the EOS hidden state
    TensorT<S> encode(const std::vector<std::string>& texts) const {
        if (texts.empty()) throw PromptError("encode_text: no texts given");
        std::vector<TensorT<S>> rows;
        rows.reserve(texts.size());
        for (const auto& text : texts) {
            if (text.empty()) throw PromptError("encode_text: empty text");
            const auto ids = tokenizer.encode(text);
            const int len = static_cast<int>(ids.size());
            auto emb = embedding_lookup(tok_embed, ids);          // [len x d_t]
            auto seq = add(emb, slice_rows(pos_embed, 0, len));
            for (const auto& block : blocks) seq = block.forward(seq).out;
            auto eos = slice_rows(final_ln.forward(seq), len - 1, 1);
            rows.push_back(l2_normalize(matmul(eos, out_proj)));  // [1 x d_e]
        }
        return concat_rows(rows);  // [n x d_e]
    }

    void collect(NamedParams<S>& out) const {
        out.emplace_back("text.tok_embed", tok_embed);
        out.emplace_back("text.pos_embed", pos_embed);
        for (size_t i = 0; i < blocks.size(); ++i) {
            blocks[i].collect("text.block" + std::to_string(i), out);
        }
        final_ln.collect("text.final_ln", out);
        out.emplace_back("text.out_proj", out_proj);
    }
};

// Full model: trainable image encoder, frozen text encoder, learnable
// inverse-temperature for the training objective.
template <typename S>
struct ModelT {
    ModelSpec spec;
    VitEncoderT<S> image;
    TextEncoderT<S> text;
    TensorT<S> logit_scale;  // [1], log of the inverse temperature

    ModelT(const ModelSpec& s, uint64_t seed, double logit_scale_init = std::log(1.0 / 0.07))
        : spec(s) {
        spec.validate();
        Rng rng = Rng::substream(seed, "init");
        image = VitEncoderT<S>::init(spec, rng, true);
        text = TextEncoderT<S>::init(spec, rng);
        logit_scale = TensorT<S>::filled({1}, static_cast<S>(logit_scale_init), true);
    }

    // canonical (name, tensor) list; ordering is part of the checkpoint format
    NamedParams<S> params() const {
        NamedParams<S> out;
        image.collect(out);
        text.collect(out);
        out.emplace_back("logit_scale", logit_scale);
        return out;
    }

    // everything the optimizer may touch; text stays out entirely
    NamedParams<S> trainable_params() const {
        NamedParams<S> out;
        image.collect(out);
        out.emplace_back("logit_scale", logit_scale);
        return out;
    }
};

using Model = ModelT<float>;
using VitEncoder = VitEncoderT<float>;
using TextEncoder = TextEncoderT<float>;

}  // namespace pad8
