#ifndef QOSLAB_CAPTURE_HPP
#define QOSLAB_CAPTURE_HPP

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "qoslab/packet.hpp"

namespace qoslab {

// ---------------------------------------------------------------------------
// Send log: out-of-band sender timestamps replacing NTP-synchronised clocks
// ---------------------------------------------------------------------------

struct SendLogEntry {
    std::string stream_id;
    std::uint16_t seq = 0;
    Nanos send_ts_ns = 0;
    std::uint32_t size_bytes = 0;

    bool operator==(const SendLogEntry&) const = default;
};

/// Ordered per-packet send records. (stream_id, seq) is unique within one
/// sequence-wrap epoch; send_ts is monotone non-decreasing per stream.
struct SendLog {
    std::vector<SendLogEntry> entries;

    void append(const PacketRecord& record);
    bool operator==(const SendLog&) const = default;
};

// CSV with header `stream_id,seq,send_ts_ns,size_bytes`.
void save_send_log(const SendLog& log, const std::filesystem::path& path);
SendLog load_send_log(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// pcap files (classic format, Ethernet/IPv4/UDP)
// ---------------------------------------------------------------------------

class BadMagic : public DataError {
public:
    using DataError::DataError;
};

class TruncatedRecord : public DataError {
public:
    using DataError::DataError;
};

class IoFailure : public IoError {
public:
    using IoError::IoError;
};

class ParseFailure : public DataError {
public:
    using DataError::DataError;
};

/// One captured UDP datagram.
struct CaptureSample {
    Nanos recv_ts_ns = 0;
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
    Bytes payload;

    bool operator==(const CaptureSample&) const = default;
};

enum class PcapPrecision { Micro, Nano };
enum class PcapByteOrder { Little, Big };

struct PcapWriteOptions {
    PcapPrecision precision = PcapPrecision::Nano;
    PcapByteOrder byte_order = PcapByteOrder::Little;
};

struct PcapReadResult {
    std::vector<CaptureSample> samples;
    std::size_t non_udp_skipped = 0;
};

/// Writes samples as Ethernet/IPv4/UDP frames in a classic pcap file.
void write_pcap(const std::vector<CaptureSample>& samples,
                const std::filesystem::path& path,
                const PcapWriteOptions& options = {});

/// Reads a classic pcap file (either endianness, microsecond or nanosecond
/// magic) and yields UDP payloads on the filtered destination ports; an
/// empty filter admits every port. Non-UDP frames are counted, not fatal.
PcapReadResult read_pcap(const std::filesystem::path& path,
                         const std::set<std::uint16_t>& filter_ports = {});

// ---------------------------------------------------------------------------
// Live UDP capture (the sniffer role)
// ---------------------------------------------------------------------------

class BindFailure : public IoError {
public:
    using IoError::IoError;
};

struct CaptureConfig {
    std::set<std::uint16_t> filter_ports;
    std::string bind_address = "127.0.0.1";
};

/// Binds one UDP socket per filtered port and forwards each datagram to the
/// sink as a timestamped CaptureSample. One poll thread serialises sink
/// calls; after stop() returns the sink sees nothing further. Arrival
/// timestamps come from the monotonic clock mapped to wall time once per
/// session.
class UdpListener {
public:
    using Sink = std::function<void(const CaptureSample&)>;

    explicit UdpListener(const CaptureConfig& config);
    ~UdpListener();

    UdpListener(const UdpListener&) = delete;
    UdpListener& operator=(const UdpListener&) = delete;

    void start(Sink sink);
    void stop();
    bool running() const { return running_.load(); }

private:
    void poll_loop();

    CaptureConfig config_;
    std::vector<int> sockets_; // parallel to ports_
    std::vector<std::uint16_t> ports_;
    Sink sink_;
    std::thread thread_;
    std::atomic<bool> running_{false};
    std::atomic<bool> stop_requested_{false};
    Nanos wall_base_ns_ = 0;
    Nanos mono_base_ns_ = 0;
};

// ---------------------------------------------------------------------------
// Joining arrivals with the send log
// ---------------------------------------------------------------------------

/// The join is total over the log: every entry lands in `received` or in
/// `never_received`; samples with no matching entry land in `unknown`.
struct JoinResult {
    std::vector<PacketRecord> received;       // arrival order
    std::vector<PacketRecord> never_received; // send order
    std::vector<PacketRecord> unknown;        // arrival order
    std::size_t unparseable = 0;              // datagrams without an RTP header
};

struct JoinOptions {
    bool check_integrity = true; // verify the generator's trailing CRC tag
};

/// Parses each sample's RTP header and matches (stream id from the port
/// map, sequence number) against the log, consuming entries in send order
/// so wrapped sequence numbers resolve to the right epoch.
JoinResult join_send_log(const std::vector<CaptureSample>& arrivals,
                         const SendLog& log,
                         const std::map<std::uint16_t, std::string>& port_to_stream,
                         const JoinOptions& options = {});

} // namespace qoslab

#endif
