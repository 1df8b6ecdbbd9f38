#ifndef QOSLAB_PIPELINE_HPP
#define QOSLAB_PIPELINE_HPP

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qoslab/channel.hpp"
#include "qoslab/metrics.hpp"
#include "qoslab/report.hpp"
#include "qoslab/streamgen.hpp"

namespace qoslab {

/// One stream of an experiment: generator profile, impairment path and the
/// tx/rx port pair the QoS parameters are evaluated on.
struct StreamSetup {
    StreamProfile profile;
    ImpairmentSpec impairment; // identity when the config omits it
    std::uint16_t tx_port = 0;
    std::uint16_t rx_port = 0;

    std::string pair_label() const {
        return std::to_string(tx_port) + "-" + std::to_string(rx_port);
    }
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::optional<double> duration_s; // overrides every profile when set
    std::uint32_t loss_window = kDefaultLossWindow;
    std::string output_dir = "out";
    std::vector<StreamSetup> streams;

    void validate() const;
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// The shipped three-stream experiment preset (also at configs/paper_iv.json).
ExperimentConfig paper_iv_config();

ImpairmentSpec impairment_from_json_text(const std::string& text,
                                         const std::string& context = "impairment");

void save_ground_truth(const ChannelGroundTruth& truth,
                       const std::filesystem::path& path);
ChannelGroundTruth load_ground_truth(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Command-level operations (the CLI is a thin shell over these)
// ---------------------------------------------------------------------------

struct GenerateResult {
    std::filesystem::path pcap_path;
    std::filesystem::path send_log_path;
    std::size_t packet_count = 0;
};

/// Writes <out>/sent.pcap and <out>/send_log.csv for one profile.
GenerateResult run_generate(const StreamProfile& profile,
                            const std::filesystem::path& out_dir);

struct ImpairResult {
    std::filesystem::path pcap_path;
    std::filesystem::path ground_truth_path;
    std::size_t sent = 0;
    std::size_t arrived = 0;
};

/// Reads a sent pcap, pushes every UDP packet through one impairment spec
/// and writes <out>/received.pcap plus <out>/ground_truth.json.
ImpairResult run_impair(const std::filesystem::path& in_pcap, const ImpairmentSpec& spec,
                        const std::filesystem::path& out_dir);

struct PortPairSpec {
    std::uint16_t tx_port = 0;
    std::uint16_t rx_port = 0;
    std::string stream_id; // empty = infer from the send log

    std::string label() const {
        return std::to_string(tx_port) + "-" + std::to_string(rx_port);
    }
};

struct AnalyzeResult {
    std::map<std::string, QosReport> reports; // key = pair label
    std::filesystem::path out_dir;
};

/// Full analysis of a received pcap: per port pair a report directory with
/// report.json, the three per-stream files and the time series, plus
/// summary.json and ranking.csv at the top. Without a send log the delay
/// and jitter blocks are omitted.
AnalyzeResult run_analyze(const std::filesystem::path& pcap_path,
                          const std::optional<std::filesystem::path>& send_log_path,
                          std::vector<PortPairSpec> pairs,
                          const std::filesystem::path& out_dir,
                          const AnalyzeOptions& options = {},
                          bool check_integrity = true);

/// Same analysis over live-captured samples.
AnalyzeResult analyze_samples(const std::vector<CaptureSample>& samples,
                              const std::optional<SendLog>& log,
                              std::vector<PortPairSpec> pairs,
                              const std::filesystem::path& out_dir,
                              const AnalyzeOptions& options = {},
                              bool check_integrity = true);

/// Generate, impair and analyze every configured stream: merged sent.pcap,
/// send_log.csv and received.pcap, per-pair ground truth and report
/// directories, then the cross-stream summary. Deterministic for a fixed
/// config.
AnalyzeResult run_experiment(const ExperimentConfig& config,
                             const std::optional<std::filesystem::path>& out_override = {});

} // namespace qoslab

#endif
