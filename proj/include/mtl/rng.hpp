#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace mtl {

// Deterministic RNG. All distribution transforms are implemented here rather
// than with std:: distributions, whose output is implementation-defined;
// identical seeds must give identical streams on every build.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // [0, 1), 53-bit resolution
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; the spare value is cached
    double normal(double mean, double sd) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + sd * spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return mean + sd * r * std::cos(a);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // [0, n), unbiased via rejection
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) return 0;
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return x % n;
    }

    int uniform_int(int lo, int hi_exclusive) {
        return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi_exclusive - lo)));
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Independent substream, e.g. one per training run
    Rng fork(std::uint64_t stream) {
        std::uint64_t s = next_u64();
        // splitmix64 over (state, stream)
        std::uint64_t z = s + 0x9e3779b97f4a7c15ULL * (stream + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return Rng(z ^ (z >> 31));
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace mtl
