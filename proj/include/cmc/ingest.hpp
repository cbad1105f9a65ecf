#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cmc/segmentation.hpp"
#include "cmc/time_series.hpp"

namespace cmc::ingest {

// Recording binary layout (all little-endian):
//   0..3    magic "CMCD"
//   4..7    u32 format version (1)
//   8..11   u32 channel count C
//   12..15  u32 reserved, 0
//   16..23  u64 sample count N
//   24..    C x N float32, channel-major (channel 0 samples 0..N-1, then channel 1, ...)
inline constexpr std::array<char, 4> kMagic{'C', 'M', 'C', 'D'};
inline constexpr std::uint32_t kBinaryVersion = 1;
inline constexpr std::size_t kHeaderBytes = 24;

inline constexpr const char* kManifestName = "manifest.json";
inline constexpr const char* kManifestFormat = "cmc-dataset";
inline constexpr int kManifestVersion = 1;

/// Profile of recordings converted from the grasp-and-lift EEG/EMG corpus:
/// 32 EEG + 5 EMG channels at 500 Hz. Other profiles skip those checks.
inline constexpr const char* kWayEegGalProfile = "way-eeg-gal";
inline constexpr std::size_t kWayEegChannels = 32;
inline constexpr std::size_t kWayEmgChannels = 5;
inline constexpr double kWayFs = 500.0;

struct RecordingInfo {
    std::string id;
    std::string file;  ///< relative to the dataset root
};

struct TrialInfo {
    int trial_id = 0;
    std::string recording;
    double start_s = 0.0;
    double end_s = 0.0;
    segmentation::Condition condition;
};

struct DatasetManifest {
    std::string subject;
    std::string profile = kWayEegGalProfile;
    double fs = kWayFs;
    std::vector<std::string> eeg_channels;
    std::vector<std::string> emg_channels;
    std::vector<RecordingInfo> recordings;
    std::vector<TrialInfo> trials;
};

struct BinaryHeader {
    std::uint32_t version = kBinaryVersion;
    std::uint32_t channels = 0;
    std::uint64_t samples = 0;
};

nlohmann::json to_json(const DatasetManifest& m);

/// Parses a manifest, appending every schema problem to `problems`.
DatasetManifest manifest_from_json(const nlohmann::json& j, std::vector<std::string>& problems);

void write_manifest(const std::filesystem::path& root, const DatasetManifest& m);

/// Writes equal-length channels in the binary layout above.
void write_recording(const std::filesystem::path& path, std::span<const std::vector<float>> channels);

/// Throws IoError naming the path on a bad or truncated header.
BinaryHeader read_header(const std::filesystem::path& path);

/// Reads samples [first, first + count) of one channel.
std::vector<float> read_channel(const std::filesystem::path& path, std::size_t channel,
                                std::size_t first, std::size_t count);

/// Every channel of one trial window, plus its labels.
struct TrialRecord {
    TrialInfo info;
    std::vector<TimeSeries> eeg;
    std::vector<TimeSeries> emg;
};

/// Validated manifest with on-demand access to sample data.
class Dataset {
public:
    /// Reads and validates root/manifest.json. Throws IoError when the
    /// manifest is missing and ValidationError listing all problems otherwise.
    static Dataset load(const std::filesystem::path& root);

    const DatasetManifest& manifest() const noexcept { return manifest_; }
    const std::filesystem::path& root() const noexcept { return root_; }

    /// Position of a channel in the recording binaries (EEG first, then EMG).
    std::size_t channel_index(const std::string& name) const;

    std::size_t recording_samples(const std::string& recording) const;

    /// Whole-recording series of one channel.
    TimeSeries channel(const std::string& recording, const std::string& name) const;

    /// Samples [first, first + count) of one channel.
    TimeSeries channel_window(const std::string& recording, const std::string& name,
                              std::size_t first, std::size_t count) const;

    /// All channels over trial `index`'s window.
    TrialRecord trial(std::size_t index) const;

    std::size_t trial_first_sample(const TrialInfo& t) const;
    std::size_t trial_sample_count(const TrialInfo& t) const;

private:
    Dataset(std::filesystem::path root, DatasetManifest manifest,
            std::vector<BinaryHeader> headers);

    std::size_t recording_index(const std::string& id) const;

    std::filesystem::path root_;
    DatasetManifest manifest_;
    std::vector<BinaryHeader> headers_;
};

struct ConditionCount {
    std::string condition;
    std::size_t expected;
    std::size_t actual;
    bool matches() const noexcept { return expected == actual; }
};

/// Trial counts of the reference subject: light 84, heavy 57, sandpaper 51,
/// silk 221. Informational; never throws.
std::vector<ConditionCount> check_reference_counts(const DatasetManifest& m);

}  // namespace cmc::ingest
