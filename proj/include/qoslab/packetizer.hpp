#ifndef QOSLAB_PACKETIZER_HPP
#define QOSLAB_PACKETIZER_HPP

#include <cstdint>
#include <vector>

#include "qoslab/packet.hpp"

namespace qoslab {

/// Continuity counter skipped or repeated inside one packetized run.
class ContinuityBreak : public DataError {
public:
    ContinuityBreak(const std::string& what, std::size_t position)
        : DataError(what), position(position) {}
    std::size_t position; // index of the offending TS packet
};

/// First TS packet of a reassembly run lacks payload_unit_start.
class MissingStart : public DataError {
public:
    using DataError::DataError;
};

/// Bad packetizer parameters.
class InvalidConfig : public ConfigError {
public:
    using ConfigError::ConfigError;
};

struct PacketizerConfig {
    std::uint16_t pid = 0x100;        // 13-bit
    std::size_t ts_per_rtp = 7;       // 7 x 188 = 1316-byte RTP payload
    std::size_t pes_max_payload = kPesMaxPayload;
    bool ethernet_safe = true;        // enforce ts_per_rtp*188 + 12 <= 1500

    void validate() const;
};

/// Slices one PES packet into 188-byte TS packets on cfg.pid. The first
/// carries payload_unit_start; continuity counters run mod 16 from cc_start.
std::vector<TsPacket> pes_to_ts(const PesPacket& pes, const PacketizerConfig& cfg,
                                std::uint8_t cc_start = 0);

/// Reassembles the PES from one packetized run. Throws ContinuityBreak on a
/// counter gap and MissingStart when the run does not begin a payload unit.
PesPacket ts_to_pes(const std::vector<TsPacket>& packets);

/// Packs serialized TS packets into RTP payloads, at most cfg.ts_per_rtp per
/// packet, sequence numbers consecutive mod 2^16 from seq0.
std::vector<RtpPacket> ts_to_rtp(const std::vector<TsPacket>& packets,
                                 const PacketizerConfig& cfg,
                                 std::uint16_t seq0, std::uint32_t ssrc);

/// Splits RTP payloads (188-byte multiples) back into TS packets.
std::vector<TsPacket> rtp_to_ts(const std::vector<RtpPacket>& packets);

} // namespace qoslab

#endif
