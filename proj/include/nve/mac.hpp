#pragma once

#include <array>
#include <span>

#include "nve/types.hpp"

namespace nve {

struct MacKey {
    std::array<std::uint8_t, 32> bytes{};
    bool operator==(const MacKey&) const = default;
};

struct MacTag {
    std::array<std::uint8_t, 16> bytes{};
    bool operator==(const MacTag&) const = default;
};

// Server-authorized response: payload plus the tag binding it to one
// addressee. The payload is the M^(1) half, the tag the M^(2) half.
struct AuthorizedMessage {
    Bytes payload;
    MacTag tag;
    bool operator==(const AuthorizedMessage&) const = default;
};

MacKey random_key(Rng& rng);

// HMAC-SHA256 truncated to 16 bytes.
MacTag mac_tag(const MacKey& key, std::span<const std::uint8_t> msg);

// Constant-time comparison against the recomputed tag.
bool mac_verify(const MacKey& key, std::span<const std::uint8_t> msg, const MacTag& tag);

// msg ‖ client-id as u64 little-endian, the canonical MAC input of an
// addressed message.
Bytes auth_input(std::span<const std::uint8_t> msg, ClientId client);

AuthorizedMessage auth_msg(const MacKey& key, Bytes msg, ClientId client);
bool auth_verify(const MacKey& key, const AuthorizedMessage& m, ClientId client);

} // namespace nve
