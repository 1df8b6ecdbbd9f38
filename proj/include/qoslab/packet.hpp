#ifndef QOSLAB_PACKET_HPP
#define QOSLAB_PACKET_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qoslab/error.hpp"
#include "qoslab/time.hpp"

namespace qoslab {

using Bytes = std::vector<std::uint8_t>;

// ---------------------------------------------------------------------------
// Sequence-number arithmetic (mod 2^16)
// ---------------------------------------------------------------------------

inline constexpr std::uint16_t seq_succ(std::uint16_t s) {
    return static_cast<std::uint16_t>(s + 1u);
}

/// Forward distance from `from` to `to`, in [0, 65535].
inline constexpr std::uint16_t seq_forward(std::uint16_t from, std::uint16_t to) {
    return static_cast<std::uint16_t>(to - from);
}

/// True when `a` precedes `b`: signed mod-2^16 difference in (-2^15, 0).
inline constexpr bool seq_less(std::uint16_t a, std::uint16_t b) {
    return static_cast<std::uint16_t>(a - b) > 0x8000u;
}

// ---------------------------------------------------------------------------
// Parse failures
// ---------------------------------------------------------------------------

/// Buffer too short to hold the fixed header.
class TruncatedHeader : public DataError {
public:
    using DataError::DataError;
};

/// RTP version field is not 2.
class UnsupportedVersion : public DataError {
public:
    using DataError::DataError;
};

/// Structurally invalid TS or PES data.
class MalformedPacket : public DataError {
public:
    using DataError::DataError;
};

// ---------------------------------------------------------------------------
// Packetized Elementary Stream
// ---------------------------------------------------------------------------

/// Variable-size PES packet: 0x000001 start code, stream id, 16-bit length,
/// payload. declared_length = 0 is the unbounded-video convention.
struct PesPacket {
    std::uint8_t stream_id = 0xE0;
    Bytes payload;
    std::uint16_t declared_length = 0;

    bool operator==(const PesPacket&) const = default;
};

inline constexpr std::size_t kPesHeaderSize = 6;
inline constexpr std::size_t kPesMaxSerialized = 65536;
// Largest payload a bounded PES can carry (65536 minus the 6-byte header).
inline constexpr std::size_t kPesMaxPayload = kPesMaxSerialized - kPesHeaderSize;

/// PES with declared_length = payload size (bounded) or 0 (unbounded).
PesPacket make_pes(std::uint8_t stream_id, Bytes payload, bool bounded = true);

Bytes serialize_pes(const PesPacket& pes);
PesPacket parse_pes(std::span<const std::uint8_t> buf);

// ---------------------------------------------------------------------------
// Transport Stream
// ---------------------------------------------------------------------------

/// Fixed 188-byte TS packet. `payload` holds the logical payload (at most
/// 184 bytes); serialization inserts adaptation-field stuffing as needed.
struct TsPacket {
    std::uint16_t pid = 0;              // 13-bit
    std::uint8_t continuity_counter = 0; // 4-bit
    bool payload_unit_start = false;
    Bytes payload;

    bool operator==(const TsPacket&) const = default;
};

inline constexpr std::size_t kTsPacketSize = 188;
inline constexpr std::uint8_t kTsSyncByte = 0x47;
inline constexpr std::size_t kTsMaxPayload = 184;

Bytes serialize_ts(const TsPacket& ts);
TsPacket parse_ts(std::span<const std::uint8_t> buf);

// ---------------------------------------------------------------------------
// RTP
// ---------------------------------------------------------------------------

/// RTP packet with a fixed 12-byte header: no CSRC list, no extension.
struct RtpPacket {
    bool marker = false;
    std::uint8_t payload_type = 33;     // 7-bit; 33 = MP2T
    std::uint16_t sequence_number = 0;
    std::uint32_t rtp_timestamp = 0;
    std::uint32_t ssrc = 0;
    Bytes payload;

    bool operator==(const RtpPacket&) const = default;
};

inline constexpr std::size_t kRtpHeaderSize = 12;
inline constexpr std::uint8_t kRtpVersion = 2;

Bytes serialize_rtp(const RtpPacket& pkt);
RtpPacket parse_rtp(std::span<const std::uint8_t> buf);

// ---------------------------------------------------------------------------
// Measurement records
// ---------------------------------------------------------------------------

/// One packet's identity plus send/receive timestamps; the atom every
/// metric is computed from. Absent recv_ts_ns means the packet never
/// arrived; absent send_ts_ns means no send log entry was available.
struct PacketRecord {
    std::string stream_id;
    std::uint16_t seq = 0;
    std::optional<Nanos> send_ts_ns;
    std::optional<Nanos> recv_ts_ns;
    std::uint32_t size_bytes = 0;
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
    bool corrupted = false;

    bool operator==(const PacketRecord&) const = default;
};

/// A record paired with the wire packet it describes. Timelines of these
/// flow generator -> channel -> capture.
struct SentPacket {
    PacketRecord record;
    RtpPacket rtp;
};

} // namespace qoslab

#endif
