#include "qoslab/capture.hpp"

#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <thread>

#include "qoslab/channel.hpp"
#include "qoslab/rng.hpp"
#include "qoslab/streamgen.hpp"
#include "test_util.hpp"

namespace qoslab {
namespace {

using test::temp_dir;

std::vector<CaptureSample> sample_set() {
    Rng rng(77);
    std::vector<CaptureSample> samples;
    Nanos t = 5'000'000'123;
    for (int i = 0; i < 20; ++i) {
        CaptureSample s;
        s.recv_ts_ns = t;
        s.src_port = 5000;
        s.dst_port = static_cast<std::uint16_t>(1240 + (i % 2));
        s.payload.resize(1 + rng.uniform_int(0, 199));
        for (auto& b : s.payload)
            b = static_cast<std::uint8_t>(rng.next_u64() & 0xFF);
        samples.push_back(std::move(s));
        t += 1'000'037; // deliberately not microsecond aligned
    }
    return samples;
}

// --- send log -----------------------------------------------------------------

TEST(SendLogFile, RoundTrip) {
    const auto dir = temp_dir("sendlog");
    SendLog log;
    log.entries = {{"stream1-camera", 0, 0, 1372},
                   {"stream1-camera", 1, 14'999'999, 1372},
                   {"stream2-vod", 0, 3, 1370}};
    save_send_log(log, dir / "log.csv");
    EXPECT_EQ(load_send_log(dir / "log.csv"), log);
}

TEST(SendLogFile, RejectsMissingHeaderAndBadRows) {
    const auto dir = temp_dir("sendlog_bad");
    {
        std::ofstream out(dir / "noheader.csv");
        out << "stream,0,0,10\n";
    }
    EXPECT_THROW(load_send_log(dir / "noheader.csv"), ParseFailure);
    {
        std::ofstream out(dir / "badrow.csv");
        out << "stream_id,seq,send_ts_ns,size_bytes\n";
        out << "s,notanumber,0,10\n";
    }
    EXPECT_THROW(load_send_log(dir / "badrow.csv"), ParseFailure);
    EXPECT_THROW(load_send_log(dir / "absent.csv"), IoFailure);
}

// --- pcap ----------------------------------------------------------------------

TEST(Pcap, NanosecondRoundTripIsExact) {
    const auto dir = temp_dir("pcap_ns");
    const auto samples = sample_set();
    for (const PcapByteOrder order : {PcapByteOrder::Little, PcapByteOrder::Big}) {
        const auto path = dir / (order == PcapByteOrder::Big ? "be.pcap" : "le.pcap");
        write_pcap(samples, path, {PcapPrecision::Nano, order});
        const PcapReadResult result = read_pcap(path);
        EXPECT_EQ(result.non_udp_skipped, 0u);
        ASSERT_EQ(result.samples.size(), samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i)
            EXPECT_EQ(result.samples[i], samples[i]);
    }
}

TEST(Pcap, MicrosecondPrecisionTruncatesToMicroseconds) {
    const auto dir = temp_dir("pcap_us");
    const auto samples = sample_set();
    write_pcap(samples, dir / "us.pcap", {PcapPrecision::Micro, PcapByteOrder::Little});
    const PcapReadResult result = read_pcap(dir / "us.pcap");
    ASSERT_EQ(result.samples.size(), samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        EXPECT_EQ(result.samples[i].recv_ts_ns, samples[i].recv_ts_ns / 1000 * 1000);
        EXPECT_EQ(result.samples[i].payload, samples[i].payload);
    }
}

TEST(Pcap, MagicVariantsAgreeOnMicrosecondTimestamps) {
    const auto dir = temp_dir("pcap_dual");
    auto samples = sample_set();
    for (CaptureSample& s : samples)
        s.recv_ts_ns = s.recv_ts_ns / 1000 * 1000; // whole microseconds
    write_pcap(samples, dir / "us.pcap", {PcapPrecision::Micro, PcapByteOrder::Little});
    write_pcap(samples, dir / "ns.pcap", {PcapPrecision::Nano, PcapByteOrder::Big});
    const auto micro = read_pcap(dir / "us.pcap");
    const auto nano = read_pcap(dir / "ns.pcap");
    ASSERT_EQ(micro.samples.size(), nano.samples.size());
    for (std::size_t i = 0; i < micro.samples.size(); ++i)
        EXPECT_EQ(micro.samples[i].recv_ts_ns, nano.samples[i].recv_ts_ns);
}

TEST(Pcap, PortFilterSelectsDestinationPorts) {
    const auto dir = temp_dir("pcap_filter");
    const auto samples = sample_set();
    write_pcap(samples, dir / "all.pcap");
    const PcapReadResult result = read_pcap(dir / "all.pcap", {1240});
    ASSERT_EQ(result.samples.size(), samples.size() / 2);
    for (const CaptureSample& s : result.samples)
        EXPECT_EQ(s.dst_port, 1240);
}

TEST(Pcap, EmptyAndGarbageFilesAreBadMagic) {
    const auto dir = temp_dir("pcap_bad");
    { std::ofstream out(dir / "empty.pcap", std::ios::binary); }
    EXPECT_THROW(read_pcap(dir / "empty.pcap"), BadMagic);
    {
        std::ofstream out(dir / "garbage.pcap", std::ios::binary);
        const char junk[32] = "definitely not a capture file..";
        out.write(junk, sizeof junk);
    }
    EXPECT_THROW(read_pcap(dir / "garbage.pcap"), BadMagic);
    EXPECT_THROW(read_pcap(dir / "missing.pcap"), IoFailure);
}

TEST(Pcap, TruncatedRecordDetected) {
    const auto dir = temp_dir("pcap_trunc");
    const auto samples = sample_set();
    write_pcap(samples, dir / "full.pcap");
    const std::string full = test::read_file(dir / "full.pcap");
    {
        std::ofstream out(dir / "cut.pcap", std::ios::binary);
        out.write(full.data(), static_cast<std::streamsize>(full.size() - 7));
    }
    EXPECT_THROW(read_pcap(dir / "cut.pcap"), TruncatedRecord);
}

TEST(Pcap, NonUdpFramesAreCountedNotFatal) {
    const auto dir = temp_dir("pcap_nonudp");
    const auto samples = sample_set();
    write_pcap(samples, dir / "mixed.pcap");
    {
        // Append one ARP frame record by hand (little-endian, micro header
        // fields irrelevant to the reader beyond lengths).
        std::ofstream out(dir / "mixed.pcap", std::ios::binary | std::ios::app);
        const std::uint32_t rec[4] = {1, 0, 60, 60};
        out.write(reinterpret_cast<const char*>(rec), sizeof rec);
        Bytes frame(60, 0);
        frame[12] = 0x08;
        frame[13] = 0x06; // ARP ethertype
        out.write(reinterpret_cast<const char*>(frame.data()),
                  static_cast<std::streamsize>(frame.size()));
    }
    const PcapReadResult result = read_pcap(dir / "mixed.pcap");
    EXPECT_EQ(result.samples.size(), samples.size());
    EXPECT_EQ(result.non_udp_skipped, 1u);
}

TEST(Pcap, NegativeTimestampsAreRejected) {
    CaptureSample s;
    s.recv_ts_ns = -1;
    s.payload = {1};
    EXPECT_THROW(write_pcap({s}, temp_dir("pcap_neg") / "x.pcap"), IoFailure);
}

// --- join -----------------------------------------------------------------------

std::vector<CaptureSample> samples_from(const std::vector<SentPacket>& packets,
                                        bool use_recv_ts) {
    std::vector<CaptureSample> samples;
    for (const SentPacket& sp : packets) {
        CaptureSample s;
        s.recv_ts_ns = use_recv_ts ? *sp.record.recv_ts_ns : *sp.record.send_ts_ns;
        s.src_port = sp.record.src_port;
        s.dst_port = sp.record.dst_port;
        s.payload = serialize_rtp(sp.rtp);
        samples.push_back(std::move(s));
    }
    return samples;
}

TEST(Join, PartitionsLogIntoReceivedAndNeverReceived) {
    StreamProfile profile = *find_builtin_profile("stream1-camera");
    profile.duration_s = 5;
    const auto sent = generate(profile);
    SendLog log;
    for (const SentPacket& sp : sent)
        log.append(sp.record);

    ImpairmentSpec spec;
    spec.base_delay_s = 0.1;
    spec.loss_prob = 0.05;
    spec.corrupt_prob = 0.02;
    spec.seed = 5;
    const ChannelResult channel = apply_channel(sent, spec);

    const JoinResult joined =
        join_send_log(samples_from(channel.arrivals, true), log,
                      {{profile.dst_port, profile.name}});
    EXPECT_EQ(joined.received.size() + joined.never_received.size(), log.entries.size());
    EXPECT_EQ(joined.received.size(), channel.arrivals.size());
    EXPECT_EQ(joined.never_received.size(), channel.truth.dropped_seqs.size());
    EXPECT_TRUE(joined.unknown.empty());
    EXPECT_EQ(joined.unparseable, 0u);

    // CRC verdicts reproduce the channel's corruption set.
    std::size_t corrupted = 0;
    for (const PacketRecord& r : joined.received)
        corrupted += r.corrupted;
    EXPECT_EQ(corrupted, channel.truth.corrupted_seqs.size());

    // Send timestamps came from the log.
    for (std::size_t i = 0; i < joined.received.size(); ++i) {
        ASSERT_TRUE(joined.received[i].send_ts_ns.has_value());
        EXPECT_EQ(*joined.received[i].send_ts_ns,
                  *channel.arrivals[i].record.send_ts_ns);
    }
}

TEST(Join, UnknownPortAndUnknownSeqAreSetAside) {
    StreamProfile profile = *find_builtin_profile("stream2-vod");
    profile.duration_s = 1;
    const auto sent = generate(profile);
    SendLog log;
    for (const SentPacket& sp : sent)
        log.append(sp.record);

    auto samples = samples_from(sent, false);
    samples[0].dst_port = 9999; // not in the port map
    RtpPacket alien;
    alien.sequence_number = 60000; // seq never sent
    CaptureSample alien_sample;
    alien_sample.recv_ts_ns = 1;
    alien_sample.dst_port = profile.dst_port;
    alien_sample.payload = serialize_rtp(alien);
    samples.push_back(alien_sample);
    samples.push_back({2, 1, profile.dst_port, Bytes{0x80, 0x00}}); // truncated rtp

    const JoinResult joined =
        join_send_log(samples, log, {{profile.dst_port, profile.name}});
    EXPECT_EQ(joined.unknown.size(), 2u);
    EXPECT_EQ(joined.unparseable, 1u);
    EXPECT_EQ(joined.received.size(), sent.size() - 1);
    EXPECT_EQ(joined.never_received.size(), 1u);
}

TEST(Join, WrappedSequenceNumbersResolveByEpoch) {
    // Two epochs of the same sequence numbers.
    SendLog log;
    std::vector<CaptureSample> samples;
    Nanos t = 0;
    for (int epoch = 0; epoch < 2; ++epoch) {
        for (std::uint16_t seq = 0; seq < 4; ++seq) {
            RtpPacket rtp;
            rtp.sequence_number = seq;
            log.entries.push_back({"s", seq, t, 12});
            samples.push_back({t + 500, 1, 10, serialize_rtp(rtp)});
            t += 1000;
        }
    }
    const JoinResult joined = join_send_log(samples, log, {{10, "s"}}, {false});
    ASSERT_EQ(joined.received.size(), 8u);
    for (std::size_t i = 0; i < 8; ++i)
        EXPECT_EQ(*joined.received[i].send_ts_ns, log.entries[i].send_ts_ns);
}

// --- live UDP capture -------------------------------------------------------------

void send_loopback(std::uint16_t port, const Bytes& payload) {
    const int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
    ASSERT_GE(fd, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    addr.sin_addr.s_addr = inet_addr("127.0.0.1");
    ASSERT_EQ(::sendto(fd, payload.data(), payload.size(), 0,
                       reinterpret_cast<const sockaddr*>(&addr), sizeof addr),
              static_cast<ssize_t>(payload.size()));
    ::close(fd);
}

TEST(UdpListener, LoopbackCaptureDeliversInOrder) {
    CaptureConfig config;
    config.filter_ports = {31240, 31241};
    UdpListener listener(config);

    std::mutex sink_mutex;
    std::vector<CaptureSample> sink;
    auto sink_size = [&] {
        std::lock_guard lock(sink_mutex);
        return sink.size();
    };
    listener.start([&](const CaptureSample& s) {
        std::lock_guard lock(sink_mutex);
        sink.push_back(s);
    });

    for (std::uint8_t i = 0; i < 100; ++i)
        send_loopback(31240, Bytes{i, 0xAA});
    send_loopback(31241, Bytes{0xBB});

    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
    while (sink_size() < 101 && std::chrono::steady_clock::now() < deadline)
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    listener.stop();

    ASSERT_EQ(sink.size(), 101u);
    std::uint8_t expected = 0;
    Nanos last_ts = 0;
    for (const CaptureSample& s : sink) {
        EXPECT_GE(s.recv_ts_ns, last_ts);
        last_ts = s.recv_ts_ns;
        if (s.dst_port == 31240) {
            EXPECT_EQ(s.payload[0], expected++);
        } else {
            EXPECT_EQ(s.dst_port, 31241);
            EXPECT_EQ(s.payload[0], 0xBB);
        }
    }
    EXPECT_EQ(expected, 100);

    // After stop the sink sees nothing further.
    const std::size_t frozen = sink.size();
    send_loopback(31240, Bytes{0xCC});
    std::this_thread::sleep_for(std::chrono::milliseconds(150));
    EXPECT_EQ(sink_size(), frozen);
}

TEST(UdpListener, UnfilteredPortIsNotDelivered) {
    CaptureConfig config;
    config.filter_ports = {31242};
    UdpListener listener(config);
    std::atomic<std::size_t> count{0};
    listener.start([&count](const CaptureSample&) { ++count; });

    send_loopback(31243, Bytes{0x01}); // nothing listens there
    send_loopback(31242, Bytes{0x02});
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
    while (count.load() < 1 && std::chrono::steady_clock::now() < deadline)
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    listener.stop();
    EXPECT_EQ(count.load(), 1u);

    // The session is restartable after stop.
    listener.start([&count](const CaptureSample&) { ++count; });
    send_loopback(31242, Bytes{0x03});
    const auto deadline2 = std::chrono::steady_clock::now() + std::chrono::seconds(5);
    while (count.load() < 2 && std::chrono::steady_clock::now() < deadline2)
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    listener.stop();
    EXPECT_EQ(count.load(), 2u);
}

TEST(UdpListener, BindFailureNamesThePort) {
    CaptureConfig config;
    config.filter_ports = {31250};
    config.bind_address = "198.51.100.77"; // not a local address
    try {
        UdpListener listener(config);
        FAIL() << "expected BindFailure";
    } catch (const BindFailure& ex) {
        EXPECT_NE(std::string(ex.what()).find("31250"), std::string::npos);
    }
    EXPECT_THROW(UdpListener{CaptureConfig{}}, ConfigError);
}

} // namespace
} // namespace qoslab
