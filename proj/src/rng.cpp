#include "autoloss/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "autoloss/error.hpp"

namespace autoloss {

double RngStream::gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform01_open();
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

std::size_t RngStream::uniform_below(std::size_t n) {
    if (n == 0) {
        throw ConfigError("uniform_below: bound must be positive");
    }
    // Rejection sampling to avoid modulo bias.
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = gen_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % n);
}

namespace {

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t RngStream::derive(std::uint64_t seed, std::string_view tag) {
    return splitmix64(seed ^ fnv1a64(tag));
}

std::string RngStream::serialize_state() const {
    std::ostringstream os;
    os << gen_;
    os << ' ' << (has_spare_ ? 1 : 0);
    if (has_spare_) {
        os.precision(17);
        os << ' ' << spare_;
    }
    return os.str();
}

void RngStream::restore_state(const std::string& text) {
    std::istringstream is(text);
    is >> gen_;
    int flag = 0;
    is >> flag;
    has_spare_ = flag != 0;
    spare_ = 0.0;
    if (has_spare_) {
        is >> spare_;
    }
    if (is.fail()) {
        throw DataError("RngStream: malformed serialized state");
    }
}

}  // namespace autoloss
