#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "qoslab/pipeline.hpp"

namespace {

using namespace qoslab;

PortPairSpec parse_pair(const std::string& text) {
    // tx-rx or tx-rx=stream
    PortPairSpec pair;
    std::string ports = text;
    if (const auto eq = text.find('='); eq != std::string::npos) {
        ports = text.substr(0, eq);
        pair.stream_id = text.substr(eq + 1);
    }
    const auto dash = ports.find('-');
    if (dash == std::string::npos)
        throw ConfigError("--pair '" + text + "': expected tx-rx or tx-rx=stream");
    try {
        const unsigned long tx = std::stoul(ports.substr(0, dash));
        const unsigned long rx = std::stoul(ports.substr(dash + 1));
        if (tx == 0 || tx > 65535 || rx == 0 || rx > 65535)
            throw std::out_of_range("port");
        pair.tx_port = static_cast<std::uint16_t>(tx);
        pair.rx_port = static_cast<std::uint16_t>(rx);
    } catch (const std::exception&) {
        throw ConfigError("--pair '" + text + "': ports must be in [1, 65535]");
    }
    return pair;
}

void print_report_line(const std::string& label, const QosReport& r) {
    std::printf("%s: received=%llu lost=%llu (%.4f%%) reordered=%llu corrupted=%llu "
                "rate=%.3f Mbps",
                label.c_str(), static_cast<unsigned long long>(r.received_count),
                static_cast<unsigned long long>(r.lost_count), r.loss_percent,
                static_cast<unsigned long long>(r.reordered_count),
                static_cast<unsigned long long>(r.corrupted_count),
                r.traffic_rate_bps / 1e6);
    if (r.delay)
        std::printf(" delay[s]=%.7f/%.7f/%.7f", r.delay->min_s, r.delay->mean_s,
                    r.delay->max_s);
    if (r.jitter)
        std::printf(" jitter[s]=%.7f/%.7f/%.7f", r.jitter->min_s, r.jitter->mean_abs_s,
                    r.jitter->max_s);
    std::printf("\n");
}

struct GenerateArgs {
    std::string profile_name;
    std::string config_path;
    std::string stream_name;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    double duration = 0;
    bool duration_set = false;
    std::uint32_t payload_bytes = 0;
    std::uint32_t ppm = 0;
    std::string mode;
    std::uint16_t tx_port = 0;
    std::uint16_t rx_port = 0;
};

int cmd_generate(const GenerateArgs& args) {
    StreamProfile profile;
    if (!args.profile_name.empty()) {
        if (auto builtin = find_builtin_profile(args.profile_name)) {
            profile = *builtin;
        } else {
            throw ConfigError("--profile: unknown built-in profile '" + args.profile_name +
                              "' (known: stream1-camera, stream2-vod, stream3-dvb)");
        }
    } else if (!args.config_path.empty()) {
        const ExperimentConfig cfg = load_experiment_config(args.config_path);
        const StreamSetup* found = nullptr;
        for (const StreamSetup& s : cfg.streams)
            if (s.profile.name == args.stream_name)
                found = &s;
        if (!found)
            throw ConfigError("--stream: no stream named '" + args.stream_name +
                              "' in " + args.config_path);
        profile = found->profile;
    } else {
        throw ConfigError("generate: either --profile or --config with --stream is required");
    }

    if (args.seed_set)
        profile.seed = args.seed;
    if (args.duration_set)
        profile.duration_s = args.duration;
    if (args.payload_bytes)
        profile.packet_payload_bytes = args.payload_bytes;
    if (args.ppm)
        profile.packets_per_minute = args.ppm;
    if (!args.mode.empty()) {
        if (args.mode == "cbr")
            profile.mode = RateMode::CBR;
        else if (args.mode == "vbr")
            profile.mode = RateMode::VBR;
        else
            throw ConfigError("--mode: expected cbr or vbr, got '" + args.mode + "'");
    }
    if (args.tx_port)
        profile.src_port = args.tx_port;
    if (args.rx_port)
        profile.dst_port = args.rx_port;

    const GenerateResult result = run_generate(profile, args.out_dir);
    std::printf("wrote %s (%zu packets) and %s\n", result.pcap_path.c_str(),
                result.packet_count, result.send_log_path.c_str());
    return 0;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"IPTV QoS laboratory: generate, impair and analyze RTP streams"};
    app.require_subcommand(1);

    // generate ---------------------------------------------------------
    GenerateArgs gen;
    CLI::App* generate = app.add_subcommand("generate", "Write a synthetic stream "
                                                        "as sent.pcap + send_log.csv");
    generate->add_option("--profile", gen.profile_name, "Built-in profile name");
    generate->add_option("--config", gen.config_path, "Experiment config file");
    generate->add_option("--stream", gen.stream_name, "Stream name inside --config");
    generate->add_option("--out", gen.out_dir, "Output directory")->required();
    generate->add_option("--seed", gen.seed, "Generator seed")
        ->each([&gen](const std::string&) { gen.seed_set = true; });
    generate->add_option("--duration", gen.duration, "Duration in seconds")
        ->each([&gen](const std::string&) { gen.duration_set = true; });
    generate->add_option("--payload-bytes", gen.payload_bytes, "RTP payload size");
    generate->add_option("--ppm", gen.ppm, "Packets per minute");
    generate->add_option("--mode", gen.mode, "cbr or vbr");
    generate->add_option("--tx-port", gen.tx_port, "Source port");
    generate->add_option("--rx-port", gen.rx_port, "Destination port");

    // impair -----------------------------------------------------------
    std::string impair_in, impair_out, impair_spec_path;
    ImpairmentSpec inline_spec;
    std::string jitter_model = "none";
    double jitter_seconds = 0.0;
    CLI::App* impair = app.add_subcommand(
        "impair", "Pass a sent pcap through the impairment channel");
    impair->add_option("--in", impair_in, "Input pcap")->required();
    impair->add_option("--out", impair_out, "Output directory")->required();
    impair->add_option("--spec", impair_spec_path, "Impairment spec json file");
    impair->add_option("--base-delay", inline_spec.base_delay_s, "Base delay seconds");
    impair->add_option("--jitter-model", jitter_model, "none, uniform or normal");
    impair->add_option("--jitter", jitter_seconds,
                       "Jitter half-width (uniform) or sigma (normal), seconds");
    impair->add_option("--loss-prob", inline_spec.loss_prob, "Loss probability");
    impair->add_option("--reorder-prob", inline_spec.reorder_prob, "Reorder probability");
    impair->add_option("--reorder-extra", inline_spec.reorder_extra_delay_s,
                       "Extra delay for reordered packets, seconds");
    impair->add_option("--corrupt-prob", inline_spec.corrupt_prob,
                       "Corruption probability");
    impair->add_option("--clock-offset", inline_spec.clock_offset_s,
                       "Receiver clock offset, seconds");
    impair->add_option("--channel-seed", inline_spec.seed, "Channel seed");

    // analyze ----------------------------------------------------------
    std::string analyze_pcap, analyze_send_log, analyze_out = "analysis", bind_address =
                                                                  "127.0.0.1";
    std::vector<std::string> pair_texts;
    double analyze_duration = 0, rate_window = 1.0, listen_secs = 0;
    bool duration_given = false, live = false, no_integrity = false;
    std::uint32_t loss_window = kDefaultLossWindow;
    CLI::App* analyze = app.add_subcommand(
        "analyze", "Measure QoS per port pair from a pcap or live UDP capture");
    analyze->add_option("--pcap", analyze_pcap, "Received pcap to analyze");
    analyze->add_flag("--live", live, "Capture live UDP instead of reading a pcap");
    analyze->add_option("--listen-secs", listen_secs, "Live capture duration");
    analyze->add_option("--bind", bind_address, "Live capture bind address");
    analyze->add_option("--send-log", analyze_send_log,
                        "Send log csv (enables delay/jitter)");
    analyze
        ->add_option("--pair", pair_texts,
                     "Port pair tx-rx or tx-rx=stream (repeatable)")
        ->required();
    analyze->add_option("--out", analyze_out, "Report directory");
    analyze->add_option("--duration", analyze_duration,
                        "Transmission duration override, seconds")
        ->each([&duration_given](const std::string&) { duration_given = true; });
    analyze->add_option("--window", loss_window, "Loss detection window (packets)");
    analyze->add_option("--rate-window", rate_window, "Rate series window, seconds");
    analyze->add_flag("--no-integrity-check", no_integrity,
                      "Skip the payload CRC check");

    // experiment -------------------------------------------------------
    std::string exp_config, exp_builtin, exp_out;
    CLI::App* experiment = app.add_subcommand(
        "experiment", "Generate, impair and analyze all configured streams");
    experiment->add_option("--config", exp_config, "Experiment config file");
    experiment->add_option("--builtin", exp_builtin, "Built-in experiment (paper-iv)");
    experiment->add_option("--out", exp_out, "Output directory override");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (generate->parsed())
        return cmd_generate(gen);

    if (impair->parsed()) {
        ImpairmentSpec spec;
        if (!impair_spec_path.empty()) {
            std::ifstream in(impair_spec_path);
            if (!in)
                throw IoFailure("cannot open --spec file: " + impair_spec_path);
            std::stringstream buffer;
            buffer << in.rdbuf();
            spec = impairment_from_json_text(buffer.str(), "--spec");
        } else {
            spec = inline_spec;
            if (jitter_model == "uniform")
                spec.jitter_model = JitterModel::uniform(jitter_seconds);
            else if (jitter_model == "normal")
                spec.jitter_model = JitterModel::normal(jitter_seconds);
            else if (jitter_model != "none")
                throw ConfigError("--jitter-model: expected none, uniform or normal");
            spec.validate();
        }
        const ImpairResult result = run_impair(impair_in, spec, impair_out);
        std::printf("wrote %s (%zu of %zu packets arrived) and %s\n",
                    result.pcap_path.c_str(), result.arrived, result.sent,
                    result.ground_truth_path.c_str());
        return 0;
    }

    if (analyze->parsed()) {
        std::vector<PortPairSpec> pairs;
        for (const std::string& text : pair_texts)
            pairs.push_back(parse_pair(text));
        AnalyzeOptions options;
        if (duration_given)
            options.duration_s = analyze_duration;
        options.loss_window = loss_window;

        std::optional<SendLog> log;
        if (!analyze_send_log.empty())
            log = load_send_log(analyze_send_log);

        AnalyzeResult result;
        if (live) {
            if (listen_secs <= 0)
                throw ConfigError("--listen-secs must be > 0 in live mode");
            CaptureConfig capture;
            capture.bind_address = bind_address;
            for (const PortPairSpec& pair : pairs)
                capture.filter_ports.insert(pair.rx_port);
            std::vector<CaptureSample> samples;
            UdpListener listener(capture);
            listener.start([&samples](const CaptureSample& s) {
                samples.push_back(s);
            });
            std::this_thread::sleep_for(std::chrono::duration<double>(listen_secs));
            listener.stop();
            result = analyze_samples(samples, log, pairs, analyze_out, options,
                                     !no_integrity);
        } else {
            if (analyze_pcap.empty())
                throw ConfigError("analyze: --pcap is required unless --live is set");
            std::optional<std::filesystem::path> log_path;
            if (!analyze_send_log.empty())
                log_path = analyze_send_log;
            result = run_analyze(analyze_pcap, log_path, pairs, analyze_out, options,
                                 !no_integrity);
        }
        for (const auto& [label, report] : result.reports)
            print_report_line(label, report);
        std::printf("reports written to %s\n", result.out_dir.c_str());
        return 0;
    }

    if (experiment->parsed()) {
        ExperimentConfig cfg;
        if (!exp_config.empty()) {
            cfg = load_experiment_config(exp_config);
        } else if (exp_builtin == "paper-iv") {
            cfg = paper_iv_config();
        } else if (exp_builtin.empty()) {
            throw ConfigError(
                "experiment: either --config or --builtin paper-iv is required");
        } else {
            throw ConfigError("--builtin: unknown experiment '" + exp_builtin +
                              "' (known: paper-iv)");
        }
        std::optional<std::filesystem::path> out_override;
        if (!exp_out.empty())
            out_override = exp_out;
        const AnalyzeResult result = run_experiment(cfg, out_override);
        for (const auto& [label, report] : result.reports)
            print_report_line(label, report);
        std::printf("experiment outputs written to %s\n", result.out_dir.c_str());
        return 0;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const ConfigError& ex) {
        std::cerr << "config error: " << ex.what() << '\n';
        return 1;
    } catch (const IoError& ex) {
        std::cerr << "io error: " << ex.what() << '\n';
        return 2;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 3;
    }
}
