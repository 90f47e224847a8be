#pragma once

#include <cstdint>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pad8 {

// ---------------------------------------------------------------------------
// Error hierarchy. Every failure surfaces as a subclass of Error with a
// message that names the offending values (shapes, paths, indices).
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// dimension mismatch between tensors
class ShapeError : public Error {
public:
    using Error::Error;
};

// invalid model / training / policy configuration
class ConfigError : public Error {
public:
    using Error::Error;
};

// NaN inputs, training divergence
class NumericError : public Error {
public:
    using Error::Error;
};

// class index or lookup id out of range
class LabelError : public Error {
public:
    using Error::Error;
};

// zero or near-zero vector where a norm is required
class NormError : public Error {
public:
    using Error::Error;
};

// empty prompt, malformed prompt file
class PromptError : public Error {
public:
    using Error::Error;
};

// caller violated a documented precondition (e.g. non-unit rows)
class ContractError : public Error {
public:
    using Error::Error;
};

// unreadable file, malformed manifest, bad image
class IoError : public Error {
public:
    using Error::Error;
};

// tape misuse (backward twice, non-scalar root)
class TapeError : public Error {
public:
    using Error::Error;
};

class CheckpointError : public Error {
public:
    using Error::Error;
};
class CheckpointMagicError : public CheckpointError {
public:
    using CheckpointError::CheckpointError;
};
class CheckpointVersionError : public CheckpointError {
public:
    using CheckpointError::CheckpointError;
};
class CheckpointTruncatedError : public CheckpointError {
public:
    using CheckpointError::CheckpointError;
};
class CheckpointTensorError : public CheckpointError {
public:
    using CheckpointError::CheckpointError;
};

// ---------------------------------------------------------------------------
// FNV-1a 64-bit hash; used for prompt-set digests and rng substream derivation.
// ---------------------------------------------------------------------------

inline uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a64(std::string_view s, uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a64(s.data(), s.size(), h);
}

// ---------------------------------------------------------------------------
// Deterministic rng. splitmix64 core with Box-Muller normals; identical
// sequences on every platform, unlike <random> distributions. All randomness
// in the artifact flows from one root seed through named substreams.
// ---------------------------------------------------------------------------

class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    // derive an independent stream from (seed, name, indices...)
    static Rng substream(uint64_t seed, std::string_view name) {
        uint64_t h = fnv1a64(name);
        h = fnv1a64(&seed, sizeof(seed), h);
        return Rng(h);
    }
    static Rng substream(uint64_t seed, std::string_view name, uint64_t a) {
        uint64_t h = fnv1a64(name);
        h = fnv1a64(&seed, sizeof(seed), h);
        h = fnv1a64(&a, sizeof(a), h);
        return Rng(h);
    }
    static Rng substream(uint64_t seed, std::string_view name, uint64_t a, uint64_t b) {
        uint64_t h = fnv1a64(name);
        h = fnv1a64(&seed, sizeof(seed), h);
        h = fnv1a64(&a, sizeof(a), h);
        h = fnv1a64(&b, sizeof(b), h);
        return Rng(h);
    }

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // inclusive integer range
    int uniform_int(int lo, int hi) {
        if (hi < lo) return lo;
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(next_u64() % span);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // standard normal, Box-Muller
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 1e-300);
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double t = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

private:
    uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace pad8
