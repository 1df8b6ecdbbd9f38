#include "qoslab/packetizer.hpp"

#include <algorithm>

namespace qoslab {

void PacketizerConfig::validate() const {
    if (pid > 0x1FFF)
        throw InvalidConfig("packetizer pid exceeds 13 bits");
    if (ts_per_rtp < 1)
        throw InvalidConfig("packetizer ts_per_rtp must be >= 1");
    if (pes_max_payload > kPesMaxPayload)
        throw InvalidConfig("packetizer pes_max_payload exceeds " +
                            std::to_string(kPesMaxPayload));
    if (ethernet_safe && ts_per_rtp * kTsPacketSize + kRtpHeaderSize > 1500)
        throw InvalidConfig("packetizer ts_per_rtp too large for a 1500-byte MTU");
}

std::vector<TsPacket> pes_to_ts(const PesPacket& pes, const PacketizerConfig& cfg,
                                std::uint8_t cc_start) {
    cfg.validate();
    const Bytes raw = serialize_pes(pes);

    std::vector<TsPacket> out;
    out.reserve((raw.size() + kTsMaxPayload - 1) / kTsMaxPayload);
    std::size_t off = 0;
    std::uint8_t cc = cc_start & 0x0F;
    while (off < raw.size()) {
        const std::size_t n = std::min(kTsMaxPayload, raw.size() - off);
        TsPacket ts;
        ts.pid = cfg.pid;
        ts.continuity_counter = cc;
        ts.payload_unit_start = (off == 0);
        ts.payload.assign(raw.begin() + off, raw.begin() + off + n);
        out.push_back(std::move(ts));
        off += n;
        cc = (cc + 1) & 0x0F;
    }
    return out;
}

PesPacket ts_to_pes(const std::vector<TsPacket>& packets) {
    if (packets.empty())
        throw MissingStart("empty ts packet run");
    if (!packets.front().payload_unit_start)
        throw MissingStart("first ts packet lacks payload_unit_start");

    Bytes raw;
    const std::uint16_t pid = packets.front().pid;
    std::uint8_t expected_cc = packets.front().continuity_counter;
    for (std::size_t i = 0; i < packets.size(); ++i) {
        const TsPacket& ts = packets[i];
        if (ts.pid != pid)
            throw MalformedPacket("ts run mixes pids");
        if (i > 0 && ts.payload_unit_start)
            throw MalformedPacket("payload_unit_start inside ts run");
        if (ts.continuity_counter != expected_cc)
            throw ContinuityBreak("continuity counter gap at packet " + std::to_string(i) +
                                      ": expected " + std::to_string(expected_cc) + ", got " +
                                      std::to_string(ts.continuity_counter),
                                  i);
        raw.insert(raw.end(), ts.payload.begin(), ts.payload.end());
        expected_cc = (expected_cc + 1) & 0x0F;
    }
    return parse_pes(raw);
}

std::vector<RtpPacket> ts_to_rtp(const std::vector<TsPacket>& packets,
                                 const PacketizerConfig& cfg,
                                 std::uint16_t seq0, std::uint32_t ssrc) {
    cfg.validate();
    std::vector<RtpPacket> out;
    out.reserve((packets.size() + cfg.ts_per_rtp - 1) / cfg.ts_per_rtp);
    std::uint16_t seq = seq0;
    for (std::size_t i = 0; i < packets.size(); i += cfg.ts_per_rtp) {
        const std::size_t count = std::min(cfg.ts_per_rtp, packets.size() - i);
        RtpPacket rtp;
        rtp.sequence_number = seq;
        rtp.ssrc = ssrc;
        rtp.payload.reserve(count * kTsPacketSize);
        for (std::size_t k = 0; k < count; ++k) {
            const Bytes cell = serialize_ts(packets[i + k]);
            rtp.payload.insert(rtp.payload.end(), cell.begin(), cell.end());
        }
        out.push_back(std::move(rtp));
        seq = seq_succ(seq);
    }
    return out;
}

std::vector<TsPacket> rtp_to_ts(const std::vector<RtpPacket>& packets) {
    std::vector<TsPacket> out;
    for (const RtpPacket& rtp : packets) {
        if (rtp.payload.empty() || rtp.payload.size() % kTsPacketSize != 0)
            throw MalformedPacket("rtp payload is not a positive multiple of 188 bytes");
        for (std::size_t off = 0; off < rtp.payload.size(); off += kTsPacketSize)
            out.push_back(parse_ts(std::span(rtp.payload).subspan(off, kTsPacketSize)));
    }
    return out;
}

} // namespace qoslab
