#include "nve/mac.hpp"

#include <cstring>

#include "nve/sha256.hpp"

namespace nve {

MacKey random_key(Rng& rng) {
    MacKey key;
    for (std::size_t i = 0; i < key.bytes.size(); i += 8) {
        const std::uint64_t v = rng.next_u64();
        for (std::size_t j = 0; j < 8; ++j) key.bytes[i + j] = std::uint8_t(v >> (8 * j));
    }
    return key;
}

MacTag mac_tag(const MacKey& key, std::span<const std::uint8_t> msg) {
    const Sha256Digest full = hmac_sha256(key.bytes, msg);
    MacTag tag;
    std::memcpy(tag.bytes.data(), full.data(), tag.bytes.size());
    return tag;
}

bool mac_verify(const MacKey& key, std::span<const std::uint8_t> msg, const MacTag& tag) {
    const MacTag expect = mac_tag(key, msg);
    std::uint8_t diff = 0;
    for (std::size_t i = 0; i < tag.bytes.size(); ++i) diff |= std::uint8_t(expect.bytes[i] ^ tag.bytes[i]);
    return diff == 0;
}

Bytes auth_input(std::span<const std::uint8_t> msg, ClientId client) {
    Bytes in(msg.begin(), msg.end());
    for (int i = 0; i < 8; ++i) in.push_back(std::uint8_t(client >> (8 * i)));
    return in;
}

AuthorizedMessage auth_msg(const MacKey& key, Bytes msg, ClientId client) {
    AuthorizedMessage m;
    m.tag = mac_tag(key, auth_input(msg, client));
    m.payload = std::move(msg);
    return m;
}

bool auth_verify(const MacKey& key, const AuthorizedMessage& m, ClientId client) {
    return mac_verify(key, auth_input(m.payload, client), m.tag);
}

} // namespace nve
