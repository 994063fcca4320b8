#pragma once

// Seeded random streams. std::mt19937_64 output is fixed by the standard but
// the std distributions are not, so the conversions below are done here to keep
// results identical across standard libraries.

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace tdiff {

// Derives an independent seed for a named substream of a master seed.
std::uint64_t substream_seed(std::uint64_t master, std::string_view name);

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    Rng(std::uint64_t master, std::string_view stream) : engine_(substream_seed(master, stream)) {}

    std::uint64_t next() { return engine_(); }
    double uniform();                            // [0, 1)
    std::uint64_t below(std::uint64_t bound);    // [0, bound), unbiased
    double normal();                             // standard normal
    double normal(double mean, double sd) { return mean + sd * normal(); }
    bool coin() { return (engine_() >> 63) != 0; }

    template <class T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(values[i - 1], values[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace tdiff
