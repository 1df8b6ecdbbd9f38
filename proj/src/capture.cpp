#include "qoslab/capture.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <deque>
#include <fstream>
#include <sstream>

#include "qoslab/streamgen.hpp"

namespace qoslab {

// ---------------------------------------------------------------------------
// Send log
// ---------------------------------------------------------------------------

void SendLog::append(const PacketRecord& record) {
    if (!record.send_ts_ns)
        throw DataError("send log append: record has no send timestamp");
    entries.push_back({record.stream_id, record.seq, *record.send_ts_ns, record.size_bytes});
}

static const char* kSendLogHeader = "stream_id,seq,send_ts_ns,size_bytes";

void save_send_log(const SendLog& log, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out)
        throw IoFailure("cannot open send log for writing: " + path.string());
    out << kSendLogHeader << '\n';
    for (const SendLogEntry& e : log.entries)
        out << e.stream_id << ',' << e.seq << ',' << e.send_ts_ns << ',' << e.size_bytes
            << '\n';
    if (!out)
        throw IoFailure("write failed: " + path.string());
}

SendLog load_send_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoFailure("cannot open send log: " + path.string());

    std::string line;
    if (!std::getline(in, line) || line != kSendLogHeader)
        throw ParseFailure("send log " + path.string() + ": missing header '" +
                           kSendLogHeader + "'");

    SendLog log;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        std::istringstream row(line);
        SendLogEntry e;
        std::string field;
        try {
            if (!std::getline(row, e.stream_id, ','))
                throw ParseFailure("missing stream_id");
            if (!std::getline(row, field, ','))
                throw ParseFailure("missing seq");
            e.seq = static_cast<std::uint16_t>(std::stoul(field));
            if (!std::getline(row, field, ','))
                throw ParseFailure("missing send_ts_ns");
            e.send_ts_ns = std::stoll(field);
            if (!std::getline(row, field, ','))
                throw ParseFailure("missing size_bytes");
            e.size_bytes = static_cast<std::uint32_t>(std::stoul(field));
        } catch (const std::exception& ex) {
            throw ParseFailure("send log " + path.string() + " line " +
                               std::to_string(line_no) + ": " + ex.what());
        }
        log.entries.push_back(std::move(e));
    }
    return log;
}

// ---------------------------------------------------------------------------
// pcap
// ---------------------------------------------------------------------------

namespace {

constexpr std::uint32_t kMagicMicro = 0xA1B2C3D4u;
constexpr std::uint32_t kMagicNano = 0xA1B23C4Du;
constexpr std::uint32_t kMagicMicroSwapped = 0xD4C3B2A1u;
constexpr std::uint32_t kMagicNanoSwapped = 0x4D3CB2A1u;

constexpr std::size_t kEthHeaderSize = 14;
constexpr std::size_t kIpHeaderSize = 20;
constexpr std::size_t kUdpHeaderSize = 8;
constexpr std::size_t kMaxRecordBytes = 1 << 20;

std::uint32_t bswap32(std::uint32_t v) { return __builtin_bswap32(v); }
std::uint16_t bswap16(std::uint16_t v) { return __builtin_bswap16(v); }

struct LeWriter {
    std::ofstream out;
    bool swap = false;

    void u16(std::uint16_t v) {
        if (swap)
            v = bswap16(v);
        out.write(reinterpret_cast<const char*>(&v), 2);
    }
    void u32(std::uint32_t v) {
        if (swap)
            v = bswap32(v);
        out.write(reinterpret_cast<const char*>(&v), 4);
    }
    void raw(const void* p, std::size_t n) {
        out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
    }
};

void put_be16(Bytes& b, std::size_t off, std::uint16_t v) {
    b[off] = static_cast<std::uint8_t>(v >> 8);
    b[off + 1] = static_cast<std::uint8_t>(v & 0xFF);
}

std::uint16_t read_be16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

std::uint16_t ipv4_checksum(const std::uint8_t* header, std::size_t len) {
    std::uint32_t sum = 0;
    for (std::size_t i = 0; i + 1 < len; i += 2)
        sum += read_be16(header + i);
    while (sum >> 16)
        sum = (sum & 0xFFFF) + (sum >> 16);
    return static_cast<std::uint16_t>(~sum);
}

Bytes build_frame(const CaptureSample& s, std::uint16_t ip_id) {
    const std::size_t ip_total = kIpHeaderSize + kUdpHeaderSize + s.payload.size();
    Bytes frame(kEthHeaderSize + ip_total, 0);

    // Ethernet: synthetic locally administered MACs, IPv4 ethertype.
    static const std::uint8_t dst_mac[6] = {0x02, 0x00, 0x00, 0x00, 0x00, 0x02};
    static const std::uint8_t src_mac[6] = {0x02, 0x00, 0x00, 0x00, 0x00, 0x01};
    std::memcpy(frame.data(), dst_mac, 6);
    std::memcpy(frame.data() + 6, src_mac, 6);
    put_be16(frame, 12, 0x0800);

    std::uint8_t* ip = frame.data() + kEthHeaderSize;
    ip[0] = 0x45; // version 4, ihl 5
    put_be16(frame, kEthHeaderSize + 2, static_cast<std::uint16_t>(ip_total));
    put_be16(frame, kEthHeaderSize + 4, ip_id);
    ip[8] = 64; // ttl
    ip[9] = 17; // udp
    const std::uint8_t src_ip[4] = {10, 0, 0, 1};
    const std::uint8_t dst_ip[4] = {10, 0, 0, 2};
    std::memcpy(ip + 12, src_ip, 4);
    std::memcpy(ip + 16, dst_ip, 4);
    const std::uint16_t csum = ipv4_checksum(ip, kIpHeaderSize);
    put_be16(frame, kEthHeaderSize + 10, csum);

    const std::size_t udp_off = kEthHeaderSize + kIpHeaderSize;
    put_be16(frame, udp_off, s.src_port);
    put_be16(frame, udp_off + 2, s.dst_port);
    put_be16(frame, udp_off + 4,
             static_cast<std::uint16_t>(kUdpHeaderSize + s.payload.size()));
    // UDP checksum 0: not computed (legal over IPv4).
    std::memcpy(frame.data() + udp_off + kUdpHeaderSize, s.payload.data(),
                s.payload.size());
    return frame;
}

} // namespace

void write_pcap(const std::vector<CaptureSample>& samples,
                const std::filesystem::path& path, const PcapWriteOptions& options) {
    LeWriter w;
    w.out.open(path, std::ios::binary);
    if (!w.out)
        throw IoFailure("cannot open pcap for writing: " + path.string());
    w.swap = options.byte_order == PcapByteOrder::Big;

    const bool nano = options.precision == PcapPrecision::Nano;
    w.u32(nano ? kMagicNano : kMagicMicro);
    w.u16(2);
    w.u16(4);
    w.u32(0); // thiszone
    w.u32(0); // sigfigs
    w.u32(65535);
    w.u32(1); // LINKTYPE_ETHERNET

    std::uint16_t ip_id = 0;
    for (const CaptureSample& s : samples) {
        if (s.recv_ts_ns < 0)
            throw IoFailure("pcap cannot represent negative timestamps");
        const Bytes frame = build_frame(s, ip_id++);
        w.u32(static_cast<std::uint32_t>(s.recv_ts_ns / kNanosPerSecond));
        const std::uint32_t frac_ns =
            static_cast<std::uint32_t>(s.recv_ts_ns % kNanosPerSecond);
        w.u32(nano ? frac_ns : frac_ns / 1000);
        w.u32(static_cast<std::uint32_t>(frame.size()));
        w.u32(static_cast<std::uint32_t>(frame.size()));
        w.raw(frame.data(), frame.size());
    }
    if (!w.out)
        throw IoFailure("write failed: " + path.string());
}

PcapReadResult read_pcap(const std::filesystem::path& path,
                         const std::set<std::uint16_t>& filter_ports) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoFailure("cannot open pcap: " + path.string());

    std::uint8_t header[24];
    in.read(reinterpret_cast<char*>(header), sizeof header);
    if (in.gcount() != sizeof header)
        throw BadMagic("pcap " + path.string() + ": file shorter than the global header");

    std::uint32_t magic;
    std::memcpy(&magic, header, 4);
    bool swap = false;
    bool nano = false;
    switch (magic) {
    case kMagicMicro:
        break;
    case kMagicNano:
        nano = true;
        break;
    case kMagicMicroSwapped:
        swap = true;
        break;
    case kMagicNanoSwapped:
        swap = true;
        nano = true;
        break;
    default:
        throw BadMagic("pcap " + path.string() + ": unrecognised magic");
    }

    auto u32_at = [&](const std::uint8_t* p) {
        std::uint32_t v;
        std::memcpy(&v, p, 4);
        return swap ? bswap32(v) : v;
    };

    PcapReadResult result;
    Bytes data;
    std::uint8_t rec[16];
    while (true) {
        in.read(reinterpret_cast<char*>(rec), sizeof rec);
        if (in.gcount() == 0)
            break;
        if (in.gcount() != sizeof rec)
            throw TruncatedRecord("pcap " + path.string() + ": truncated record header");

        const std::uint32_t ts_sec = u32_at(rec);
        const std::uint32_t ts_frac = u32_at(rec + 4);
        const std::uint32_t incl_len = u32_at(rec + 8);
        if (incl_len > kMaxRecordBytes)
            throw TruncatedRecord("pcap " + path.string() + ": implausible record length " +
                                  std::to_string(incl_len));
        data.resize(incl_len);
        in.read(reinterpret_cast<char*>(data.data()), incl_len);
        if (in.gcount() != static_cast<std::streamsize>(incl_len))
            throw TruncatedRecord("pcap " + path.string() + ": truncated record body");

        // Ethernet / IPv4 / UDP; anything else is counted and skipped.
        if (data.size() < kEthHeaderSize + kIpHeaderSize ||
            read_be16(data.data() + 12) != 0x0800) {
            ++result.non_udp_skipped;
            continue;
        }
        const std::uint8_t* ip = data.data() + kEthHeaderSize;
        const std::size_t ihl = static_cast<std::size_t>(ip[0] & 0x0F) * 4;
        if ((ip[0] >> 4) != 4 || ihl < kIpHeaderSize || ip[9] != 17) {
            ++result.non_udp_skipped;
            continue;
        }
        const std::size_t udp_off = kEthHeaderSize + ihl;
        if (data.size() < udp_off + kUdpHeaderSize)
            throw TruncatedRecord("pcap " + path.string() + ": frame cut inside udp header");
        const std::uint16_t src_port = read_be16(data.data() + udp_off);
        const std::uint16_t dst_port = read_be16(data.data() + udp_off + 2);
        const std::size_t udp_len = read_be16(data.data() + udp_off + 4);
        if (udp_len < kUdpHeaderSize || data.size() < udp_off + udp_len)
            throw TruncatedRecord("pcap " + path.string() + ": frame cut inside udp payload");

        if (!filter_ports.empty() && !filter_ports.contains(dst_port))
            continue;

        CaptureSample s;
        s.recv_ts_ns = static_cast<Nanos>(ts_sec) * kNanosPerSecond +
                       (nano ? ts_frac : static_cast<Nanos>(ts_frac) * 1000);
        s.src_port = src_port;
        s.dst_port = dst_port;
        s.payload.assign(data.begin() + static_cast<std::ptrdiff_t>(udp_off + kUdpHeaderSize),
                         data.begin() + static_cast<std::ptrdiff_t>(udp_off + udp_len));
        result.samples.push_back(std::move(s));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Live UDP capture
// ---------------------------------------------------------------------------

namespace {

Nanos steady_now_ns() {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

Nanos wall_now_ns() {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

} // namespace

UdpListener::UdpListener(const CaptureConfig& config) : config_(config) {
    if (config_.filter_ports.empty())
        throw ConfigError("udp listener: filter_ports must not be empty");

    for (std::uint16_t port : config_.filter_ports) {
        const int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
        if (fd < 0)
            throw BindFailure("udp listener: socket() failed: " +
                              std::string(std::strerror(errno)));
        const int one = 1;
        ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);

        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(port);
        if (::inet_pton(AF_INET, config_.bind_address.c_str(), &addr.sin_addr) != 1) {
            ::close(fd);
            throw BindFailure("udp listener: bad bind address '" + config_.bind_address +
                              "'");
        }
        if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
            const std::string err = std::strerror(errno);
            ::close(fd);
            for (int other : sockets_)
                ::close(other);
            sockets_.clear();
            throw BindFailure("udp listener: cannot bind port " + std::to_string(port) +
                              ": " + err);
        }
        sockets_.push_back(fd);
        ports_.push_back(port);
    }
}

UdpListener::~UdpListener() {
    stop();
    for (int fd : sockets_)
        ::close(fd);
}

void UdpListener::start(Sink sink) {
    if (running_.load())
        throw Error("udp listener already running");
    sink_ = std::move(sink);
    stop_requested_.store(false);
    wall_base_ns_ = wall_now_ns();
    mono_base_ns_ = steady_now_ns();
    running_.store(true);
    thread_ = std::thread(&UdpListener::poll_loop, this);
}

void UdpListener::stop() {
    if (!running_.load())
        return;
    stop_requested_.store(true);
    if (thread_.joinable())
        thread_.join();
    running_.store(false);
}

void UdpListener::poll_loop() {
    std::vector<pollfd> fds;
    fds.reserve(sockets_.size());
    for (int fd : sockets_)
        fds.push_back({fd, POLLIN, 0});

    Bytes buf(65536);
    while (!stop_requested_.load()) {
        const int n = ::poll(fds.data(), fds.size(), 50);
        if (n <= 0)
            continue;
        for (std::size_t i = 0; i < fds.size(); ++i) {
            if (!(fds[i].revents & POLLIN))
                continue;
            sockaddr_in peer{};
            socklen_t peer_len = sizeof peer;
            const ssize_t got =
                ::recvfrom(fds[i].fd, buf.data(), buf.size(), 0,
                           reinterpret_cast<sockaddr*>(&peer), &peer_len);
            if (got < 0)
                continue;
            CaptureSample s;
            s.recv_ts_ns = wall_base_ns_ + (steady_now_ns() - mono_base_ns_);
            s.src_port = ntohs(peer.sin_port);
            s.dst_port = ports_[i];
            s.payload.assign(buf.begin(), buf.begin() + got);
            sink_(s);
        }
    }
}

// ---------------------------------------------------------------------------
// Join
// ---------------------------------------------------------------------------

JoinResult join_send_log(const std::vector<CaptureSample>& arrivals, const SendLog& log,
                         const std::map<std::uint16_t, std::string>& port_to_stream,
                         const JoinOptions& options) {
    // Entries are consumed in send order per (stream, seq), so a sequence
    // number that wraps matches its own epoch.
    std::map<std::string, std::map<std::uint16_t, std::deque<std::size_t>>> pending;
    for (std::size_t i = 0; i < log.entries.size(); ++i)
        pending[log.entries[i].stream_id][log.entries[i].seq].push_back(i);
    std::vector<bool> consumed(log.entries.size(), false);

    JoinResult result;
    for (const CaptureSample& sample : arrivals) {
        RtpPacket rtp;
        try {
            rtp = parse_rtp(sample.payload);
        } catch (const DataError&) {
            ++result.unparseable;
            continue;
        }

        PacketRecord record;
        record.seq = rtp.sequence_number;
        record.recv_ts_ns = sample.recv_ts_ns;
        record.size_bytes = static_cast<std::uint32_t>(rtp.payload.size());
        record.src_port = sample.src_port;
        record.dst_port = sample.dst_port;
        record.corrupted = options.check_integrity && !payload_crc_ok(rtp.payload);

        const auto stream_it = port_to_stream.find(sample.dst_port);
        std::size_t entry_idx = log.entries.size();
        if (stream_it != port_to_stream.end()) {
            record.stream_id = stream_it->second;
            auto per_stream = pending.find(stream_it->second);
            if (per_stream != pending.end()) {
                auto per_seq = per_stream->second.find(rtp.sequence_number);
                if (per_seq != per_stream->second.end() && !per_seq->second.empty()) {
                    entry_idx = per_seq->second.front();
                    per_seq->second.pop_front();
                }
            }
        } else {
            record.stream_id = "port-" + std::to_string(sample.dst_port);
        }

        if (entry_idx < log.entries.size()) {
            record.send_ts_ns = log.entries[entry_idx].send_ts_ns;
            consumed[entry_idx] = true;
            result.received.push_back(std::move(record));
        } else {
            result.unknown.push_back(std::move(record));
        }
    }

    for (std::size_t i = 0; i < log.entries.size(); ++i) {
        if (consumed[i])
            continue;
        const SendLogEntry& e = log.entries[i];
        PacketRecord record;
        record.stream_id = e.stream_id;
        record.seq = e.seq;
        record.send_ts_ns = e.send_ts_ns;
        record.size_bytes = e.size_bytes;
        result.never_received.push_back(std::move(record));
    }
    return result;
}

} // namespace qoslab
