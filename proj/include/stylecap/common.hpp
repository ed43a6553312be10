#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace stylecap {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// splitmix64; used to derive independent sub-seeds from a user seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic RNG wrapper. Distributions in <random> are
// implementation-defined, so uniform/normal draws are derived from raw
// mt19937_64 output directly.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1) with 53-bit resolution
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    std::size_t index(std::size_t n) {
        if (n == 0) throw std::invalid_argument("Rng::index: n must be positive");
        // rejection sampling to avoid modulo bias
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do { x = engine_(); } while (x >= limit);
        return static_cast<std::size_t>(x % n);
    }

    // standard normal via Box-Muller; stateless per call
    double normal() {
        const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    Vec normal_vec(Eigen::Index n) {
        Vec v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
        return v;
    }

    template <typename T>
    void shuffle(std::vector<T>& xs) {
        for (std::size_t i = xs.size(); i > 1; --i) {
            std::swap(xs[i - 1], xs[index(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// FNV-1a over bytes; used for vocabulary content hashes in checkpoints.
inline std::uint64_t fnv1a(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Named view over one parameter tensor and its gradient buffer. All trainable
// state is exposed through these so the optimizer, checkpoint writer and
// gradient checks can treat parameters uniformly.
struct TensorRef {
    std::string name;
    double* value = nullptr;
    double* grad = nullptr;
    std::ptrdiff_t size = 0;
};

inline void zero_grads(std::vector<TensorRef>& refs) {
    for (auto& r : refs) std::fill(r.grad, r.grad + r.size, 0.0);
}

inline bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace stylecap
