#include "pad8/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

namespace pad8 {

namespace {

constexpr char kMagic[4] = {'C', '8', 'C', 'K'};
constexpr uint32_t kVersion = 1;
constexpr uint8_t kDtypeF32 = 0;

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float f) {
    uint32_t v = 0;
    std::memcpy(&v, &f, 4);
    put_u32(out, v);
}

// sequential little-endian reads over an in-memory byte buffer
class Reader {
public:
    Reader(const std::string& bytes, const std::string& path) : bytes_(bytes), path_(path) {}

    uint8_t u8() { return static_cast<uint8_t>(take(1)[0]); }

    uint32_t u32() {
        const char* p = take(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
        return v;
    }

    uint64_t u64() {
        const char* p = take(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
        return v;
    }

    std::string str(size_t len) { return std::string(take(len), len); }

    size_t offset() const { return pos_; }

private:
    const char* take(size_t n) {
        if (pos_ + n > bytes_.size()) {
            throw CheckpointTruncatedError("checkpoint " + path_ + " truncated at byte " +
                                           std::to_string(pos_));
        }
        const char* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }

    const std::string& bytes_;
    const std::string& path_;
    size_t pos_ = 0;
};

void put_spec(std::string& out, const ModelSpec& s) {
    for (int v : {s.image_size, s.patch_size, s.image_blocks, s.image_heads, s.image_width,
                  s.text_blocks, s.text_heads, s.text_width, s.embed_dim, s.context_length}) {
        put_u32(out, static_cast<uint32_t>(v));
    }
}

ModelSpec read_spec(Reader& r) {
    ModelSpec s;
    s.image_size = static_cast<int>(r.u32());
    s.patch_size = static_cast<int>(r.u32());
    s.image_blocks = static_cast<int>(r.u32());
    s.image_heads = static_cast<int>(r.u32());
    s.image_width = static_cast<int>(r.u32());
    s.text_blocks = static_cast<int>(r.u32());
    s.text_heads = static_cast<int>(r.u32());
    s.text_width = static_cast<int>(r.u32());
    s.embed_dim = static_cast<int>(r.u32());
    s.context_length = static_cast<int>(r.u32());
    return s;
}

}  // namespace

void save_checkpoint(const Model& model, const CheckpointMeta& meta, const std::string& path) {
    const auto params = model.params();

    std::string header;
    header.append(kMagic, 4);
    put_u32(header, kVersion);
    put_spec(header, meta.spec);
    put_u64(header, meta.prompt_digest);
    put_u64(header, meta.seed);
    put_u32(header, meta.epoch);
    put_u32(header, static_cast<uint32_t>(params.size()));

    std::string table;
    std::string payload;
    for (const auto& [name, t] : params) {
        put_u32(table, static_cast<uint32_t>(name.size()));
        table.append(name);
        table.push_back(static_cast<char>(kDtypeF32));
        put_u32(table, static_cast<uint32_t>(t.rank()));
        for (int i = 0; i < t.rank(); ++i) put_u32(table, static_cast<uint32_t>(t.dim(i)));
        put_u64(table, static_cast<uint64_t>(payload.size()));
        for (float v : t.value()) put_f32(payload, v);
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(table.data(), static_cast<std::streamsize>(table.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw IoError("failed writing checkpoint payload: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Reader r(bytes, path);

    const std::string magic = r.str(4);
    if (std::memcmp(magic.data(), kMagic, 4) != 0) {
        throw CheckpointMagicError("bad checkpoint magic in " + path);
    }
    const uint32_t version = r.u32();
    if (version != kVersion) {
        throw CheckpointVersionError("checkpoint " + path + " has format version " +
                                     std::to_string(version) + ", expected " + std::to_string(kVersion));
    }
    CheckpointMeta meta;
    meta.spec = read_spec(r);
    meta.spec.validate();
    meta.prompt_digest = r.u64();
    meta.seed = r.u64();
    meta.epoch = r.u32();
    const uint32_t count = r.u32();

    struct Entry {
        std::vector<int> shape;
        uint64_t offset = 0;
    };
    std::map<std::string, Entry> entries;
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t name_len = r.u32();
        std::string name = r.str(name_len);
        const uint8_t dtype = r.u8();
        if (dtype != kDtypeF32) {
            throw CheckpointTensorError("tensor " + name + " in " + path + " has unsupported dtype " +
                                        std::to_string(dtype));
        }
        const uint32_t rank = r.u32();
        Entry e;
        for (uint32_t k = 0; k < rank; ++k) e.shape.push_back(static_cast<int>(r.u32()));
        e.offset = r.u64();
        if (!entries.emplace(std::move(name), std::move(e)).second) {
            throw CheckpointTensorError("duplicate tensor name in " + path);
        }
    }
    const size_t payload_start = r.offset();

    LoadedCheckpoint result{meta, Model(meta.spec, meta.seed)};
    auto params = result.model.params();
    if (params.size() != entries.size()) {
        throw CheckpointTensorError("checkpoint " + path + " holds " + std::to_string(entries.size()) +
                                    " tensors, model expects " + std::to_string(params.size()));
    }
    for (auto& [name, tensor] : params) {
        auto it = entries.find(name);
        if (it == entries.end()) {
            throw CheckpointTensorError("checkpoint " + path + " is missing tensor " + name);
        }
        if (it->second.shape != tensor.shape()) {
            throw CheckpointTensorError("tensor " + name + " in " + path + " has shape " +
                                        detail::shape_str(it->second.shape) + ", model expects " +
                                        detail::shape_str(tensor.shape()));
        }
        const size_t at = payload_start + static_cast<size_t>(it->second.offset);
        const size_t need = tensor.size() * 4;
        if (at + need > bytes.size()) {
            throw CheckpointTruncatedError("checkpoint " + path + " payload truncated for tensor " + name);
        }
        for (size_t i = 0; i < tensor.size(); ++i) {
            uint32_t bits = 0;
            for (int b = 0; b < 4; ++b) {
                bits |= static_cast<uint32_t>(static_cast<unsigned char>(bytes[at + i * 4 + b])) << (8 * b);
            }
            float f = 0;
            std::memcpy(&f, &bits, 4);
            tensor.data()[i] = f;
        }
        tensor.clear_grad();
    }
    return result;
}

}  // namespace pad8
