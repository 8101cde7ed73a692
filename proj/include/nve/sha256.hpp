#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "nve/types.hpp"

namespace nve {

using Sha256Digest = std::array<std::uint8_t, 32>;

// FIPS 180-4 SHA-256, streaming interface.
class Sha256 {
public:
    Sha256() { reset(); }
    void reset();
    void update(std::span<const std::uint8_t> data);
    Sha256Digest finish();

private:
    void compress(const std::uint8_t* block);

    std::array<std::uint32_t, 8> state_;
    std::array<std::uint8_t, 64> buffer_;
    std::uint64_t total_ = 0; // bytes absorbed
    std::size_t fill_ = 0;
};

Sha256Digest sha256(std::span<const std::uint8_t> data);

// RFC 2104 HMAC over SHA-256.
Sha256Digest hmac_sha256(std::span<const std::uint8_t> key, std::span<const std::uint8_t> msg);

} // namespace nve
