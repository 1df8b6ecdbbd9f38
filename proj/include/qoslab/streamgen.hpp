#ifndef QOSLAB_STREAMGEN_HPP
#define QOSLAB_STREAMGEN_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qoslab/packet.hpp"

namespace qoslab {

/// Non-positive or otherwise unusable generator parameters.
class InvalidProfile : public ConfigError {
public:
    using ConfigError::ConfigError;
};

enum class RateMode { CBR, VBR };

/// Generator parameters for one synthetic stream. packet_payload_bytes is
/// the RTP payload size, which is also the per-packet byte count the rate
/// metric sees; payload sizing is explicit config, never derived.
struct StreamProfile {
    std::string name;
    RateMode mode = RateMode::CBR;
    std::uint32_t packet_payload_bytes = 1372;
    std::uint32_t packets_per_minute = 4000;
    double duration_s = 60.0;
    std::uint64_t seed = 1;
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
};

// Smallest payload that still holds the 4-byte integrity tag.
inline constexpr std::uint32_t kMinPayloadBytes = 4;

/// Deterministic packet timeline for one profile: send timestamps from 0,
/// consecutive sequence numbers, payload = seeded random bytes followed by a
/// big-endian CRC-32 over them.
std::vector<SentPacket> generate(const StreamProfile& profile);

/// True when the payload's trailing CRC-32 matches its leading bytes.
bool payload_crc_ok(std::span<const std::uint8_t> payload);

/// The three built-in presets behind `stream1-camera`, `stream2-vod` and
/// `stream3-dvb`: 4000/5000/20000 packets per minute, 1372/1370/1372-byte
/// payloads, port pairs 5000-1240, 5001-1241, 5002-1242.
const std::vector<StreamProfile>& builtin_profiles();
std::optional<StreamProfile> find_builtin_profile(const std::string& name);

} // namespace qoslab

#endif
