#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace phenoseq {

// Deterministic random source. std::mt19937_64 has a fully specified output
// sequence, and all distributions below are hand-rolled so that streams are
// bit-identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n). n must be > 0.
    std::uint64_t uniform_int(std::uint64_t n) { return gen_() % n; }

    // Standard normal via Box-Muller. No cached spare, so the number of
    // underlying draws per call is fixed.
    double normal() {
        const double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return r * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    // Exponential inter-arrival time with the given rate.
    double exponential(double rate) { return -std::log1p(-uniform01()) / rate; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Independent stream derived from a base seed, e.g. one per episode.
    static Rng derive(std::uint64_t base_seed, std::uint64_t stream) {
        return Rng(splitmix64(base_seed + 0x9E3779B97F4A7C15ull * (stream + 1)));
    }

    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ull;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
        return x ^ (x >> 31);
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace phenoseq
