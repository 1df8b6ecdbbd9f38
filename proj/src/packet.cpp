#include "qoslab/packet.hpp"

#include <algorithm>

namespace qoslab {

namespace {

void put_be16(Bytes& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

void put_be32(Bytes& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

std::uint16_t get_be16(std::span<const std::uint8_t> b, std::size_t off) {
    return static_cast<std::uint16_t>((b[off] << 8) | b[off + 1]);
}

std::uint32_t get_be32(std::span<const std::uint8_t> b, std::size_t off) {
    return (static_cast<std::uint32_t>(b[off]) << 24) |
           (static_cast<std::uint32_t>(b[off + 1]) << 16) |
           (static_cast<std::uint32_t>(b[off + 2]) << 8) |
           static_cast<std::uint32_t>(b[off + 3]);
}

} // namespace

// ---------------------------------------------------------------------------
// PES
// ---------------------------------------------------------------------------

PesPacket make_pes(std::uint8_t stream_id, Bytes payload, bool bounded) {
    PesPacket pes;
    pes.stream_id = stream_id;
    pes.declared_length = 0;
    if (bounded) {
        if (payload.size() > kPesMaxPayload)
            throw MalformedPacket("pes payload exceeds " + std::to_string(kPesMaxPayload) +
                                  " bytes; use unbounded convention");
        pes.declared_length = static_cast<std::uint16_t>(payload.size());
    }
    pes.payload = std::move(payload);
    return pes;
}

Bytes serialize_pes(const PesPacket& pes) {
    if (pes.declared_length > 0) {
        if (pes.declared_length != pes.payload.size())
            throw MalformedPacket("pes declared_length does not match payload size");
        if (kPesHeaderSize + pes.payload.size() > kPesMaxSerialized)
            throw MalformedPacket("bounded pes exceeds 65536 serialized bytes");
    }
    Bytes out;
    out.reserve(kPesHeaderSize + pes.payload.size());
    out.push_back(0x00);
    out.push_back(0x00);
    out.push_back(0x01);
    out.push_back(pes.stream_id);
    put_be16(out, pes.declared_length);
    out.insert(out.end(), pes.payload.begin(), pes.payload.end());
    return out;
}

PesPacket parse_pes(std::span<const std::uint8_t> buf) {
    if (buf.size() < kPesHeaderSize)
        throw TruncatedHeader("pes buffer shorter than 6-byte header");
    if (buf[0] != 0x00 || buf[1] != 0x00 || buf[2] != 0x01)
        throw MalformedPacket("pes start-code prefix 0x000001 missing");
    PesPacket pes;
    pes.stream_id = buf[3];
    pes.declared_length = get_be16(buf, 4);
    pes.payload.assign(buf.begin() + kPesHeaderSize, buf.end());
    if (pes.declared_length > 0 && pes.declared_length != pes.payload.size())
        throw MalformedPacket("pes declared length " + std::to_string(pes.declared_length) +
                              " does not match payload of " + std::to_string(pes.payload.size()));
    return pes;
}

// ---------------------------------------------------------------------------
// TS
// ---------------------------------------------------------------------------

Bytes serialize_ts(const TsPacket& ts) {
    if (ts.pid > 0x1FFF)
        throw MalformedPacket("ts pid exceeds 13 bits");
    if (ts.continuity_counter > 0x0F)
        throw MalformedPacket("ts continuity counter exceeds 4 bits");
    if (ts.payload.size() > kTsMaxPayload)
        throw MalformedPacket("ts payload exceeds 184 bytes");

    Bytes out;
    out.reserve(kTsPacketSize);
    out.push_back(kTsSyncByte);
    out.push_back(static_cast<std::uint8_t>((ts.payload_unit_start ? 0x40 : 0x00) |
                                            ((ts.pid >> 8) & 0x1F)));
    out.push_back(static_cast<std::uint8_t>(ts.pid & 0xFF));

    const std::size_t n = ts.payload.size();
    if (n == kTsMaxPayload) {
        // Payload only.
        out.push_back(static_cast<std::uint8_t>(0x10 | ts.continuity_counter));
    } else {
        // Adaptation field absorbs the slack: length byte, then flags byte
        // and 0xFF stuffing when the field is non-empty.
        out.push_back(static_cast<std::uint8_t>(0x30 | ts.continuity_counter));
        const std::uint8_t af_len = static_cast<std::uint8_t>(kTsMaxPayload - 1 - n);
        out.push_back(af_len);
        if (af_len > 0) {
            out.push_back(0x00);
            out.insert(out.end(), af_len - 1, 0xFF);
        }
    }
    out.insert(out.end(), ts.payload.begin(), ts.payload.end());
    return out;
}

TsPacket parse_ts(std::span<const std::uint8_t> buf) {
    if (buf.size() != kTsPacketSize)
        throw MalformedPacket("ts packet must be exactly 188 bytes");
    if (buf[0] != kTsSyncByte)
        throw MalformedPacket("ts sync byte 0x47 missing");

    TsPacket ts;
    ts.payload_unit_start = (buf[1] & 0x40) != 0;
    ts.pid = static_cast<std::uint16_t>(((buf[1] & 0x1F) << 8) | buf[2]);
    ts.continuity_counter = buf[3] & 0x0F;

    const std::uint8_t afc = (buf[3] >> 4) & 0x03;
    std::size_t payload_off = 4;
    switch (afc) {
    case 0x1:
        break;
    case 0x3: {
        const std::uint8_t af_len = buf[4];
        payload_off = 5 + af_len;
        if (payload_off > kTsPacketSize)
            throw MalformedPacket("ts adaptation field overruns packet");
        break;
    }
    case 0x2:
        payload_off = kTsPacketSize; // adaptation only, no payload
        break;
    default:
        throw MalformedPacket("ts adaptation field control 00 is reserved");
    }
    ts.payload.assign(buf.begin() + payload_off, buf.end());
    return ts;
}

// ---------------------------------------------------------------------------
// RTP
// ---------------------------------------------------------------------------

Bytes serialize_rtp(const RtpPacket& pkt) {
    if (pkt.payload_type > 0x7F)
        throw MalformedPacket("rtp payload type exceeds 7 bits");
    Bytes out;
    out.reserve(kRtpHeaderSize + pkt.payload.size());
    out.push_back(kRtpVersion << 6); // P=0, X=0, CC=0
    out.push_back(static_cast<std::uint8_t>((pkt.marker ? 0x80 : 0x00) | pkt.payload_type));
    put_be16(out, pkt.sequence_number);
    put_be32(out, pkt.rtp_timestamp);
    put_be32(out, pkt.ssrc);
    out.insert(out.end(), pkt.payload.begin(), pkt.payload.end());
    return out;
}

RtpPacket parse_rtp(std::span<const std::uint8_t> buf) {
    if (buf.size() < kRtpHeaderSize)
        throw TruncatedHeader("rtp buffer shorter than 12-byte header");
    const std::uint8_t version = buf[0] >> 6;
    if (version != kRtpVersion)
        throw UnsupportedVersion("rtp version " + std::to_string(version) + ", expected 2");

    RtpPacket pkt;
    pkt.marker = (buf[1] & 0x80) != 0;
    pkt.payload_type = buf[1] & 0x7F;
    pkt.sequence_number = get_be16(buf, 2);
    pkt.rtp_timestamp = get_be32(buf, 4);
    pkt.ssrc = get_be32(buf, 8);
    pkt.payload.assign(buf.begin() + kRtpHeaderSize, buf.end());
    return pkt;
}

} // namespace qoslab
