#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace synthdata {

// 64-bit mixing (splitmix64 finalizer). Used for stream derivation.
inline uint64_t mix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) {
    return mix64(a ^ (mix64(b) + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2)));
}

// Self-contained deterministic random stream (splitmix64 core).
// Platform-independent: no std::* distributions anywhere in the library,
// so identical seeds give identical draws on any build.
class RandomStream {
public:
    explicit RandomStream(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1), 53-bit resolution
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    uint64_t below(uint64_t n) {
        if (n == 0) throw std::invalid_argument("RandomStream::below: n must be positive");
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    // standard normal, Box-Muller with cached spare
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u = 1.0 - uniform();  // (0, 1]
        const double v = uniform();
        const double r = std::sqrt(-2.0 * std::log(u));
        const double theta = 6.283185307179586476925286766559 * v;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mu, double sigma) { return mu + sigma * normal(); }

    // index sampled proportionally to nonnegative weights (need not sum to 1)
    size_t categorical(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        if (!(total > 0.0)) throw std::invalid_argument("categorical: weights sum to zero");
        double u = uniform() * total;
        double acc = 0.0;
        for (size_t i = 0; i + 1 < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return i;
        }
        return weights.size() - 1;
    }

    // gumbel(0,1) noise for the softmax reparameterization
    double gumbel() {
        double u = uniform();
        if (u <= 0.0) u = 0x1.0p-53;
        return -std::log(-std::log(u));
    }

    // Poisson draw: inversion by sequential search for small means, additive
    // splitting (Poisson(a+b) = Poisson(a)+Poisson(b)) for large ones.
    uint64_t poisson(double mean) {
        if (!(mean >= 0.0)) throw std::invalid_argument("poisson: mean must be >= 0");
        if (mean > 60.0) return poisson(mean / 2.0) + poisson(mean / 2.0);
        double p = std::exp(-mean);
        double cum = p;
        const double u = uniform();
        uint64_t k = 0;
        while (u > cum && k < 10000) {
            ++k;
            p *= mean / static_cast<double>(k);
            cum += p;
        }
        return k;
    }

    // independent stream derived from a tag; does not consume parent state
    RandomStream child(uint64_t tag) const { return RandomStream(hash_combine(state_, tag)); }

    // Fisher-Yates shuffle
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace synthdata
