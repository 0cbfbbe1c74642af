#ifndef GREENWAVE_COMMON_H
#define GREENWAVE_COMMON_H

#include <charconv>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace greenwave {

// Input file could not be tokenized/typed; message carries file:line context.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Structurally well-formed input that violates a model invariant.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Deterministic RNG used everywhere randomness is needed. All draws go
// through the helpers below so results do not depend on the standard
// library's distribution implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen(seed) {}

    uint64_t next() { return gen(); }

    // uniform double in [0, 1)
    double uniform() { return (gen() >> 11) * 0x1.0p-53; }

    // uniform double in [a, b)
    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    // uniform integer in [a, b], inclusive
    int64_t uniformInt(int64_t a, int64_t b) {
        uint64_t span = static_cast<uint64_t>(b - a) + 1;
        return a + static_cast<int64_t>(gen() % span);
    }

    // derived child stream, stable in (parent seed, salt)
    Rng fork(uint64_t salt) {
        uint64_t s = gen() ^ (salt * 0x9E3779B97F4A7C15ULL);
        s ^= s >> 31;
        return Rng(s * 0xBF58476D1CE4E5B9ULL);
    }

private:
    std::mt19937_64 gen;
};

// Shortest round-trip representation, locale independent. All file output
// goes through this so saved files are canonical and diffable.
inline std::string formatDouble(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string formatDouble(double v, int precision) {
    char buf[48];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, precision);
    return std::string(buf, res.ptr);
}

double parseDouble(const std::string& token, const std::string& context);
long parseLong(const std::string& token, const std::string& context);

} // namespace greenwave

#endif
