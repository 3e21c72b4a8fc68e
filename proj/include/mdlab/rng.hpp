#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace mdlab {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// mt19937_64 with hand-rolled draws. std::uniform_real_distribution and
// friends are not bit-identical across standard libraries; these are.
class Rng {
  public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Strictly inside (0,1): ((x >> 11) + 0.5) * 2^-53.
    double uniform() {
        return (static_cast<double>(gen_() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }

    // In [0, n). Modulo bias is irrelevant for n << 2^64.
    uint64_t below(uint64_t n) { return gen_() % n; }

    // Box-Muller, spare value cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Independent stream keyed by (seed, a, b). Used for per-sequence masking
// streams so parallel data preparation stays order-independent.
inline Rng derive_stream(uint64_t seed, uint64_t a, uint64_t b = 0) {
    return Rng(splitmix64(seed ^ splitmix64(a + 0x632be59bd9b4e019ull) ^ splitmix64(b + 0x9e6c63d0876a9a47ull)));
}

}  // namespace mdlab
