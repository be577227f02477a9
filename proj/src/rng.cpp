#include "dvote/rng.hpp"

#include "dvote/sha256.hpp"

namespace dvote {

static uint64_t digest_to_u64(const Digest& d) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(d[i]) << (8 * i);
    return v;
}

uint64_t derive_seed(const std::string& label, uint64_t seed) {
    std::vector<uint8_t> buf;
    buf.insert(buf.end(), label.begin(), label.end());
    put_u64le(buf, seed);
    return digest_to_u64(sha256(buf));
}

uint64_t derive_seed(const std::string& label, uint64_t seed, uint64_t index) {
    std::vector<uint8_t> buf;
    buf.insert(buf.end(), label.begin(), label.end());
    put_u64le(buf, seed);
    put_u64le(buf, index);
    return digest_to_u64(sha256(buf));
}

}  // namespace dvote
