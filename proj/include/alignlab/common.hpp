#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace alignlab {

// Error taxonomy. CLI maps UsageError/DimError/IndexError -> exit 1,
// FormatError -> exit 2, NumericError -> exit 2.
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& m) : std::runtime_error(m) {}
};
struct DimError : std::runtime_error {
    explicit DimError(const std::string& m) : std::runtime_error(m) {}
};
struct IndexError : std::runtime_error {
    explicit IndexError(const std::string& m) : std::runtime_error(m) {}
};
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& m) : std::runtime_error(m) {}
};
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& m) : std::runtime_error(m) {}
};

// Plain row-major float matrix for non-differentiable data
// (attention captures, score matrices, references).
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<float> v;

    Mat() = default;
    Mat(int r, int c, float fill = 0.f) : rows(r), cols(c), v(size_t(r) * c, fill) {}

    float& at(int r, int c) { return v[size_t(r) * cols + c]; }
    float at(int r, int c) const { return v[size_t(r) * cols + c]; }
    const float* row(int r) const { return v.data() + size_t(r) * cols; }
    float* row(int r) { return v.data() + size_t(r) * cols; }
};

// Deterministic RNG. Distributions are implemented here rather than with
// std::*_distribution, whose output is implementation-defined.
class Rng {
  public:
    explicit Rng(uint64_t seed) : s_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    uint64_t next_u64() {
        // splitmix64
        uint64_t z = (s_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n)
    uint64_t uniform_int(uint64_t n) { return next_u64() % n; }

    bool bernoulli(double p) { return uniform() < p; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0, u2 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 1e-300);
        u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    template <typename T>
    void shuffle(std::vector<T>& xs) {
        for (size_t i = xs.size(); i > 1; --i) {
            size_t j = uniform_int(i);
            std::swap(xs[i - 1], xs[j]);
        }
    }

  private:
    uint64_t s_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// FNV-1a, used for input-file digests in run manifests.
uint64_t fnv1a64(const void* data, size_t n);
uint64_t fnv1a64_file(const std::string& path);

}  // namespace alignlab
