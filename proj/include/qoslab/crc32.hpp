#ifndef QOSLAB_CRC32_HPP
#define QOSLAB_CRC32_HPP

#include <array>
#include <cstdint>
#include <span>

namespace qoslab {

// CRC-32 (IEEE 802.3, reflected, poly 0xEDB88320): the integrity tag
// appended to generated payloads.
inline std::uint32_t crc32(std::span<const std::uint8_t> data) {
    static const std::array<std::uint32_t, 256> table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k)
                c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t c = 0xFFFFFFFFu;
    for (std::uint8_t b : data)
        c = table[(c ^ b) & 0xFFu] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

} // namespace qoslab

#endif
