#include "qoslab/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "qoslab/rng.hpp"

#include <json.hpp>

namespace qoslab {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void config_fail(const std::string& path, const std::string& message) {
    throw ConfigError(path + ": " + message);
}

const json& require_object(const json& j, const std::string& path) {
    if (!j.is_object())
        config_fail(path, "expected an object");
    return j;
}

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& path) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&key](const char* k) { return key == k; }) == allowed.end())
            config_fail(path + "." + key, "unknown field");
    }
}

double opt_double(const json& j, const char* key, double fallback,
                  const std::string& path) {
    if (!j.contains(key))
        return fallback;
    if (!j.at(key).is_number())
        config_fail(path + "." + key, "expected a number");
    return j.at(key).get<double>();
}

std::uint64_t opt_u64(const json& j, const char* key, std::uint64_t fallback,
                      const std::string& path) {
    if (!j.contains(key))
        return fallback;
    if (!j.at(key).is_number_unsigned())
        config_fail(path + "." + key, "expected a non-negative integer");
    return j.at(key).get<std::uint64_t>();
}

std::string opt_string(const json& j, const char* key, std::string fallback,
                       const std::string& path) {
    if (!j.contains(key))
        return fallback;
    if (!j.at(key).is_string())
        config_fail(path + "." + key, "expected a string");
    return j.at(key).get<std::string>();
}

std::uint16_t require_port(const json& j, const char* key, const std::string& path) {
    if (!j.contains(key))
        config_fail(path + "." + key, "required field is missing");
    const std::uint64_t v = opt_u64(j, key, 0, path);
    if (v == 0 || v > 65535)
        config_fail(path + "." + key, "expected a port in [1, 65535]");
    return static_cast<std::uint16_t>(v);
}

JitterModel jitter_from_json(const json& j, const std::string& path) {
    require_object(j, path);
    check_keys(j, {"model", "seconds"}, path);
    const std::string model = opt_string(j, "model", "none", path);
    const double seconds = opt_double(j, "seconds", 0.0, path);
    if (model == "none")
        return JitterModel::none();
    if (model == "uniform")
        return JitterModel::uniform(seconds);
    if (model == "normal")
        return JitterModel::normal(seconds);
    config_fail(path + ".model", "expected one of none|uniform|normal, got '" + model + "'");
}

ImpairmentSpec impairment_from_json(const json& j, const std::string& path) {
    require_object(j, path);
    check_keys(j,
               {"base_delay_s", "jitter", "loss_prob", "reorder_prob",
                "reorder_extra_delay_s", "corrupt_prob", "clock_offset_s", "seed"},
               path);
    ImpairmentSpec spec;
    spec.base_delay_s = opt_double(j, "base_delay_s", 0.0, path);
    if (j.contains("jitter"))
        spec.jitter_model = jitter_from_json(j.at("jitter"), path + ".jitter");
    spec.loss_prob = opt_double(j, "loss_prob", 0.0, path);
    spec.reorder_prob = opt_double(j, "reorder_prob", 0.0, path);
    spec.reorder_extra_delay_s = opt_double(j, "reorder_extra_delay_s", 0.01, path);
    spec.corrupt_prob = opt_double(j, "corrupt_prob", 0.0, path);
    spec.clock_offset_s = opt_double(j, "clock_offset_s", 0.0, path);
    spec.seed = opt_u64(j, "seed", 0, path);
    try {
        spec.validate();
    } catch (const InvalidSpec& ex) {
        config_fail(path, ex.what());
    }
    return spec;
}

StreamProfile profile_from_json(const json& j, const std::string& path) {
    if (j.is_string()) {
        const std::string name = j.get<std::string>();
        if (auto builtin = find_builtin_profile(name))
            return *builtin;
        config_fail(path, "unknown built-in profile '" + name + "'");
    }
    require_object(j, path);
    check_keys(j,
               {"builtin", "name", "mode", "packet_payload_bytes",
                "packets_per_minute", "duration_s", "seed"},
               path);

    StreamProfile profile;
    // An object may start from a built-in and override fields.
    if (j.contains("builtin")) {
        const std::string name = opt_string(j, "builtin", "", path);
        if (auto builtin = find_builtin_profile(name))
            profile = *builtin;
        else
            config_fail(path + ".builtin", "unknown built-in profile '" + name + "'");
    }
    profile.name = opt_string(j, "name", profile.name, path);
    if (profile.name.empty())
        config_fail(path + ".name", "required field is missing");
    const std::string mode = opt_string(
        j, "mode", profile.mode == RateMode::VBR ? "vbr" : "cbr", path);
    if (mode == "cbr")
        profile.mode = RateMode::CBR;
    else if (mode == "vbr")
        profile.mode = RateMode::VBR;
    else
        config_fail(path + ".mode", "expected cbr or vbr, got '" + mode + "'");
    profile.packet_payload_bytes = static_cast<std::uint32_t>(
        opt_u64(j, "packet_payload_bytes", profile.packet_payload_bytes, path));
    profile.packets_per_minute = static_cast<std::uint32_t>(
        opt_u64(j, "packets_per_minute", profile.packets_per_minute, path));
    profile.duration_s = opt_double(j, "duration_s", profile.duration_s, path);
    profile.seed = opt_u64(j, "seed", profile.seed, path);
    return profile;
}

} // namespace

ImpairmentSpec impairment_from_json_text(const std::string& text,
                                         const std::string& context) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& ex) {
        throw ConfigError(context + ": invalid json: " + ex.what());
    }
    return impairment_from_json(j, context);
}

void ExperimentConfig::validate() const {
    if (streams.empty())
        throw ConfigError("experiment config: streams must not be empty");
    std::set<std::pair<std::uint16_t, std::uint16_t>> pairs;
    std::set<std::string> names;
    for (std::size_t i = 0; i < streams.size(); ++i) {
        const std::string path = "streams[" + std::to_string(i) + "]";
        const StreamSetup& s = streams[i];
        if (s.tx_port == 0 || s.rx_port == 0)
            throw ConfigError(path + ": tx_port and rx_port are required");
        if (!pairs.insert({s.tx_port, s.rx_port}).second)
            throw ConfigError(path + ": duplicate port pair " + s.pair_label());
        if (!names.insert(s.profile.name).second)
            throw ConfigError(path + ": duplicate stream name '" + s.profile.name + "'");
        s.impairment.validate();
    }
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoFailure("cannot open config: " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& ex) {
        throw ConfigError("config " + path.string() + ": invalid json: " + ex.what());
    }
    require_object(j, "config");
    check_keys(j, {"seed", "duration_s", "loss_window", "output_dir", "streams"},
               "config");

    ExperimentConfig cfg;
    cfg.seed = opt_u64(j, "seed", 0, "config");
    if (j.contains("duration_s"))
        cfg.duration_s = opt_double(j, "duration_s", 0, "config");
    cfg.loss_window = static_cast<std::uint32_t>(
        opt_u64(j, "loss_window", kDefaultLossWindow, "config"));
    cfg.output_dir = opt_string(j, "output_dir", "out", "config");

    if (!j.contains("streams") || !j.at("streams").is_array())
        config_fail("config.streams", "expected an array");
    const json& streams = j.at("streams");
    for (std::size_t i = 0; i < streams.size(); ++i) {
        const std::string path_i = "streams[" + std::to_string(i) + "]";
        const json& sj = require_object(streams[i], path_i);
        check_keys(sj, {"profile", "tx_port", "rx_port", "impairment"}, path_i);
        StreamSetup setup;
        if (!sj.contains("profile"))
            config_fail(path_i + ".profile", "required field is missing");
        setup.profile = profile_from_json(sj.at("profile"), path_i + ".profile");
        setup.tx_port = require_port(sj, "tx_port", path_i);
        setup.rx_port = require_port(sj, "rx_port", path_i);
        if (sj.contains("impairment"))
            setup.impairment = impairment_from_json(sj.at("impairment"),
                                                    path_i + ".impairment");
        // Unseeded pieces get deterministic seeds derived from the master.
        if (!sj.contains("impairment") || !sj.at("impairment").contains("seed"))
            setup.impairment.seed = derive_seed(cfg.seed, 2 * i + 1);
        const bool profile_has_seed = sj.at("profile").is_object() &&
                                      sj.at("profile").contains("seed");
        if (!sj.at("profile").is_string() && !profile_has_seed)
            setup.profile.seed = derive_seed(cfg.seed, 2 * i);
        setup.profile.src_port = setup.tx_port;
        setup.profile.dst_port = setup.rx_port;
        if (cfg.duration_s)
            setup.profile.duration_s = *cfg.duration_s;
        cfg.streams.push_back(std::move(setup));
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig paper_iv_config() {
    ExperimentConfig cfg;
    cfg.seed = 42;
    cfg.output_dir = "paper-iv-out";

    auto stream = [](const char* builtin, double base_delay, double jitter_half,
                     double loss_prob, std::uint64_t channel_seed) {
        StreamSetup setup;
        setup.profile = *find_builtin_profile(builtin);
        setup.tx_port = setup.profile.src_port;
        setup.rx_port = setup.profile.dst_port;
        setup.impairment.base_delay_s = base_delay;
        setup.impairment.jitter_model = JitterModel::uniform(jitter_half);
        setup.impairment.loss_prob = loss_prob;
        setup.impairment.seed = channel_seed;
        return setup;
    };
    cfg.streams.push_back(stream("stream1-camera", 0.28, 0.020, 0.0035, 1101));
    cfg.streams.push_back(stream("stream2-vod", 0.215, 0.015, 0.0015, 1102));
    cfg.streams.push_back(stream("stream3-dvb", 0.205, 0.0012, 0.0005, 1103));
    return cfg;
}

// ---------------------------------------------------------------------------
// Ground truth files
// ---------------------------------------------------------------------------

void save_ground_truth(const ChannelGroundTruth& truth,
                       const std::filesystem::path& path) {
    std::filesystem::create_directories(path.parent_path());
    json j;
    j["dropped_seqs"] = truth.dropped_seqs;
    j["corrupted_seqs"] = truth.corrupted_seqs;
    j["reordered_seqs"] = truth.reordered_seqs;
    json delays = json::array();
    for (const auto& [seq, ns] : truth.per_packet_delay_ns)
        delays.push_back({seq, ns});
    j["per_packet_delay_ns"] = std::move(delays);

    std::ofstream out(path);
    if (!out)
        throw IoFailure("cannot open ground truth for writing: " + path.string());
    out << j.dump(2) << '\n';
}

ChannelGroundTruth load_ground_truth(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoFailure("cannot open ground truth: " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& ex) {
        throw ParseFailure("ground truth " + path.string() + ": " + ex.what());
    }
    ChannelGroundTruth truth;
    truth.dropped_seqs = j.at("dropped_seqs").get<std::vector<std::uint16_t>>();
    truth.corrupted_seqs = j.at("corrupted_seqs").get<std::vector<std::uint16_t>>();
    truth.reordered_seqs = j.at("reordered_seqs").get<std::vector<std::uint16_t>>();
    for (const json& pair : j.at("per_packet_delay_ns"))
        truth.per_packet_delay_ns.emplace_back(pair.at(0).get<std::uint16_t>(),
                                               pair.at(1).get<Nanos>());
    return truth;
}

// ---------------------------------------------------------------------------
// Command-level operations
// ---------------------------------------------------------------------------

namespace {

CaptureSample sample_from_sent(const SentPacket& sp, Nanos ts) {
    CaptureSample s;
    s.recv_ts_ns = ts;
    s.src_port = sp.record.src_port;
    s.dst_port = sp.record.dst_port;
    s.payload = serialize_rtp(sp.rtp);
    return s;
}

} // namespace

GenerateResult run_generate(const StreamProfile& profile,
                            const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::vector<SentPacket> packets = generate(profile);

    std::vector<CaptureSample> samples;
    samples.reserve(packets.size());
    SendLog log;
    for (const SentPacket& sp : packets) {
        samples.push_back(sample_from_sent(sp, *sp.record.send_ts_ns));
        log.append(sp.record);
    }

    GenerateResult result;
    result.pcap_path = out_dir / "sent.pcap";
    result.send_log_path = out_dir / "send_log.csv";
    result.packet_count = packets.size();
    write_pcap(samples, result.pcap_path);
    save_send_log(log, result.send_log_path);
    return result;
}

ImpairResult run_impair(const std::filesystem::path& in_pcap, const ImpairmentSpec& spec,
                        const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    const PcapReadResult input = read_pcap(in_pcap);

    std::vector<SentPacket> timeline;
    timeline.reserve(input.samples.size());
    for (const CaptureSample& s : input.samples) {
        SentPacket sp;
        try {
            sp.rtp = parse_rtp(s.payload);
        } catch (const DataError&) {
            continue; // datagrams without an RTP header are left out
        }
        sp.record.seq = sp.rtp.sequence_number;
        sp.record.send_ts_ns = s.recv_ts_ns; // capture time at the sender
        sp.record.size_bytes = static_cast<std::uint32_t>(sp.rtp.payload.size());
        sp.record.src_port = s.src_port;
        sp.record.dst_port = s.dst_port;
        timeline.push_back(std::move(sp));
    }

    ChannelResult channel = apply_channel(timeline, spec);

    std::vector<CaptureSample> arrivals;
    arrivals.reserve(channel.arrivals.size());
    for (const SentPacket& sp : channel.arrivals)
        arrivals.push_back(sample_from_sent(sp, *sp.record.recv_ts_ns));

    ImpairResult result;
    result.pcap_path = out_dir / "received.pcap";
    result.ground_truth_path = out_dir / "ground_truth.json";
    result.sent = timeline.size();
    result.arrived = arrivals.size();
    write_pcap(arrivals, result.pcap_path);
    save_ground_truth(channel.truth, result.ground_truth_path);
    return result;
}

namespace {

void resolve_stream_ids(std::vector<PortPairSpec>& pairs, const SendLog* log) {
    std::set<std::string> stream_ids;
    if (log)
        for (const SendLogEntry& e : log->entries)
            stream_ids.insert(e.stream_id);

    for (PortPairSpec& pair : pairs) {
        if (!pair.stream_id.empty())
            continue;
        if (log && stream_ids.size() == 1 && pairs.size() == 1) {
            pair.stream_id = *stream_ids.begin();
        } else if (log && stream_ids.size() > 1) {
            throw ConfigError("pair " + pair.label() +
                              ": stream name required (send log holds " +
                              std::to_string(stream_ids.size()) +
                              " streams); use tx-rx=stream");
        } else {
            pair.stream_id = pair.label();
        }
    }
}

} // namespace

AnalyzeResult analyze_samples(const std::vector<CaptureSample>& samples,
                              const std::optional<SendLog>& log,
                              std::vector<PortPairSpec> pairs,
                              const std::filesystem::path& out_dir,
                              const AnalyzeOptions& options, bool check_integrity) {
    if (pairs.empty())
        throw ConfigError("analyze: at least one port pair is required");
    resolve_stream_ids(pairs, log ? &*log : nullptr);
    std::filesystem::create_directories(out_dir);

    AnalyzeResult result;
    result.out_dir = out_dir;
    for (const PortPairSpec& pair : pairs) {
        std::vector<CaptureSample> pair_samples;
        for (const CaptureSample& s : samples)
            if (s.dst_port == pair.rx_port)
                pair_samples.push_back(s);

        std::vector<PacketRecord> arrivals;
        QosReport report;
        if (log) {
            const std::map<std::uint16_t, std::string> port_map = {
                {pair.rx_port, pair.stream_id}};
            JoinResult joined =
                join_send_log(pair_samples, *log, port_map, {check_integrity});
            arrivals = std::move(joined.received);
            report = analyze(arrivals, *log, options);
        } else {
            arrivals.reserve(pair_samples.size());
            for (const CaptureSample& s : pair_samples) {
                RtpPacket rtp;
                try {
                    rtp = parse_rtp(s.payload);
                } catch (const DataError&) {
                    continue;
                }
                PacketRecord record;
                record.stream_id = pair.stream_id;
                record.seq = rtp.sequence_number;
                record.recv_ts_ns = s.recv_ts_ns;
                record.size_bytes = static_cast<std::uint32_t>(rtp.payload.size());
                record.src_port = s.src_port;
                record.dst_port = s.dst_port;
                record.corrupted = check_integrity && !payload_crc_ok(rtp.payload);
                arrivals.push_back(std::move(record));
            }
            report = analyze(arrivals, options);
        }

        const std::filesystem::path pair_dir = out_dir / pair.label();
        emit_stream_files(report, arrivals, pair_dir);
        emit_timeseries(report, arrivals, pair_dir);
        std::ofstream report_out(pair_dir / "report.json");
        if (!report_out)
            throw IoFailure("cannot open report.json in " + pair_dir.string());
        report_out << qos_report_to_json(report) << '\n';

        result.reports.emplace(pair.label(), std::move(report));
    }

    emit_summary(result.reports, out_dir);
    return result;
}

AnalyzeResult run_analyze(const std::filesystem::path& pcap_path,
                          const std::optional<std::filesystem::path>& send_log_path,
                          std::vector<PortPairSpec> pairs,
                          const std::filesystem::path& out_dir,
                          const AnalyzeOptions& options, bool check_integrity) {
    std::set<std::uint16_t> ports;
    for (const PortPairSpec& pair : pairs)
        ports.insert(pair.rx_port);
    const PcapReadResult input = read_pcap(pcap_path, ports);

    std::optional<SendLog> log;
    if (send_log_path)
        log = load_send_log(*send_log_path);
    return analyze_samples(input.samples, log, std::move(pairs), out_dir, options,
                           check_integrity);
}

AnalyzeResult run_experiment(const ExperimentConfig& config,
                             const std::optional<std::filesystem::path>& out_override) {
    config.validate();
    const std::filesystem::path out_dir =
        out_override ? *out_override : std::filesystem::path(config.output_dir);
    std::filesystem::create_directories(out_dir);

    // Generate every stream, then merge the timelines on send_ts: the
    // streams share the wire exactly as simultaneous transmission would.
    std::vector<std::vector<SentPacket>> timelines;
    for (const StreamSetup& setup : config.streams) {
        StreamProfile profile = setup.profile;
        profile.src_port = setup.tx_port;
        profile.dst_port = setup.rx_port;
        if (config.duration_s)
            profile.duration_s = *config.duration_s;
        timelines.push_back(generate(profile));
    }

    struct Cursor {
        std::size_t stream;
        std::size_t index;
    };
    std::vector<Cursor> order;
    for (std::size_t s = 0; s < timelines.size(); ++s)
        for (std::size_t i = 0; i < timelines[s].size(); ++i)
            order.push_back({s, i});
    std::stable_sort(order.begin(), order.end(), [&](const Cursor& a, const Cursor& b) {
        return *timelines[a.stream][a.index].record.send_ts_ns <
               *timelines[b.stream][b.index].record.send_ts_ns;
    });

    std::vector<CaptureSample> sent_samples;
    sent_samples.reserve(order.size());
    SendLog log;
    for (const Cursor& c : order) {
        const SentPacket& sp = timelines[c.stream][c.index];
        sent_samples.push_back(sample_from_sent(sp, *sp.record.send_ts_ns));
        log.append(sp.record);
    }
    write_pcap(sent_samples, out_dir / "sent.pcap");
    save_send_log(log, out_dir / "send_log.csv");

    // Impair per stream, record ground truth, then merge arrivals.
    std::vector<SentPacket> all_arrivals;
    for (std::size_t s = 0; s < config.streams.size(); ++s) {
        ChannelResult channel = apply_channel(timelines[s], config.streams[s].impairment);
        save_ground_truth(channel.truth,
                          out_dir / config.streams[s].pair_label() / "ground_truth.json");
        for (SentPacket& sp : channel.arrivals)
            all_arrivals.push_back(std::move(sp));
    }
    std::stable_sort(all_arrivals.begin(), all_arrivals.end(),
                     [](const SentPacket& a, const SentPacket& b) {
                         return *a.record.recv_ts_ns < *b.record.recv_ts_ns;
                     });
    std::vector<CaptureSample> received_samples;
    received_samples.reserve(all_arrivals.size());
    for (const SentPacket& sp : all_arrivals)
        received_samples.push_back(sample_from_sent(sp, *sp.record.recv_ts_ns));
    write_pcap(received_samples, out_dir / "received.pcap");

    // Analysis runs from the files just written, exercising the same path
    // as the standalone commands.
    std::vector<PortPairSpec> pairs;
    for (const StreamSetup& setup : config.streams)
        pairs.push_back({setup.tx_port, setup.rx_port, setup.profile.name});
    AnalyzeOptions options;
    options.loss_window = config.loss_window;
    return run_analyze(out_dir / "received.pcap", out_dir / "send_log.csv",
                       std::move(pairs), out_dir, options, /*check_integrity=*/true);
}

} // namespace qoslab
