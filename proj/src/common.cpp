#include "fedsim/common.hpp"

#include <iostream>

namespace fedsim {

std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose,
                          std::uint64_t a, std::uint64_t b) {
    // FNV-1a over the purpose tag, then splitmix rounds folding in the
    // numeric lanes. Stable across platforms and standard library versions.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : purpose) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::uint64_t s = mix64(master ^ h);
    s = mix64(s ^ mix64(a));
    s = mix64(s ^ mix64(b ^ 0x5851f42d4c957f2dULL));
    return s;
}

std::mt19937_64 make_rng(std::uint64_t master, std::string_view purpose,
                         std::uint64_t a, std::uint64_t b) {
    return std::mt19937_64(derive_seed(master, purpose, a, b));
}

void warn(const std::string& message) {
    std::cerr << "[fedsim] warning: " << message << "\n";
}

}  // namespace fedsim
