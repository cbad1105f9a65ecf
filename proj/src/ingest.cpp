#include "cmc/ingest.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include "cmc/error.hpp"
#include "cmc/io.hpp"

namespace cmc::ingest {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little,
              "recording binaries are read and written with native little-endian layout");
static_assert(sizeof(float) == 4);

template <typename T>
void put(std::string& buf, T v) {
    char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    buf.append(bytes, sizeof(T));
}

template <typename T>
T get(const char* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;
}

std::string trial_ctx(const json& t, std::size_t index) {
    if (t.is_object() && t.contains("trial_id") && t["trial_id"].is_number_integer()) {
        return "trial " + std::to_string(t["trial_id"].get<int>());
    }
    return "trial entry #" + std::to_string(index);
}

std::vector<std::string> string_list(const json& j, const char* key,
                                     std::vector<std::string>& problems) {
    std::vector<std::string> out;
    if (!j.contains(key) || !j[key].is_array()) {
        problems.push_back(std::string("manifest: '") + key + "' must be an array of strings");
        return out;
    }
    for (const auto& v : j[key]) {
        if (!v.is_string()) {
            problems.push_back(std::string("manifest: '") + key + "' contains a non-string entry");
            continue;
        }
        out.push_back(v.get<std::string>());
    }
    return out;
}

}  // namespace

json to_json(const DatasetManifest& m) {
    json j;
    j["format"] = kManifestFormat;
    j["version"] = kManifestVersion;
    j["subject"] = m.subject;
    j["profile"] = m.profile;
    j["fs"] = m.fs;
    j["eeg_channels"] = m.eeg_channels;
    j["emg_channels"] = m.emg_channels;
    j["recordings"] = json::array();
    for (const auto& r : m.recordings) j["recordings"].push_back({{"id", r.id}, {"file", r.file}});
    j["trials"] = json::array();
    for (const auto& t : m.trials) {
        j["trials"].push_back({{"trial_id", t.trial_id},
                               {"recording", t.recording},
                               {"start_s", t.start_s},
                               {"end_s", t.end_s},
                               {"weight_g", t.condition.weight_g},
                               {"surface", segmentation::to_string(t.condition.surface)}});
    }
    return j;
}

DatasetManifest manifest_from_json(const json& j, std::vector<std::string>& problems) {
    DatasetManifest m;
    if (!j.is_object()) {
        problems.push_back("manifest: top level must be a JSON object");
        return m;
    }
    if (j.value("format", std::string{}) != kManifestFormat) {
        problems.push_back(std::string("manifest: 'format' must be \"") + kManifestFormat + "\"");
    }
    if (!j.contains("version") || !j["version"].is_number_integer() ||
        j["version"].get<int>() != kManifestVersion) {
        problems.push_back("manifest: unsupported 'version' (expected " +
                           std::to_string(kManifestVersion) + ")");
    }
    if (j.contains("subject") && j["subject"].is_string()) m.subject = j["subject"];
    if (j.contains("profile")) {
        if (j["profile"].is_string()) {
            m.profile = j["profile"];
        } else {
            problems.push_back("manifest: 'profile' must be a string");
        }
    }
    if (!j.contains("fs") || !j["fs"].is_number() || !(j["fs"].get<double>() > 0.0)) {
        problems.push_back("manifest: 'fs' must be a positive number");
        m.fs = 0.0;
    } else {
        m.fs = j["fs"].get<double>();
    }
    m.eeg_channels = string_list(j, "eeg_channels", problems);
    m.emg_channels = string_list(j, "emg_channels", problems);

    if (!j.contains("recordings") || !j["recordings"].is_array()) {
        problems.push_back("manifest: 'recordings' must be an array");
    } else {
        for (std::size_t i = 0; i < j["recordings"].size(); ++i) {
            const auto& r = j["recordings"][i];
            if (!r.is_object() || !r.contains("id") || !r["id"].is_string() || !r.contains("file") ||
                !r["file"].is_string()) {
                problems.push_back("recording entry #" + std::to_string(i) +
                                   ": needs string fields 'id' and 'file'");
                continue;
            }
            m.recordings.push_back({r["id"], r["file"]});
        }
    }

    if (!j.contains("trials") || !j["trials"].is_array()) {
        problems.push_back("manifest: 'trials' must be an array");
        return m;
    }
    for (std::size_t i = 0; i < j["trials"].size(); ++i) {
        const auto& t = j["trials"][i];
        const std::string ctx = trial_ctx(t, i);
        if (!t.is_object()) {
            problems.push_back(ctx + ": must be an object");
            continue;
        }
        TrialInfo info;
        bool ok = true;
        if (!t.contains("trial_id") || !t["trial_id"].is_number_integer()) {
            problems.push_back(ctx + ": 'trial_id' must be an integer");
            ok = false;
        } else {
            info.trial_id = t["trial_id"];
        }
        if (!t.contains("recording") || !t["recording"].is_string()) {
            problems.push_back(ctx + ": 'recording' must be a string");
            ok = false;
        } else {
            info.recording = t["recording"];
        }
        for (const char* key : {"start_s", "end_s"}) {
            if (!t.contains(key) || !t[key].is_number()) {
                problems.push_back(ctx + ": '" + key + "' must be a number");
                ok = false;
            }
        }
        if (ok) {
            info.start_s = t["start_s"];
            info.end_s = t["end_s"];
        }
        if (!t.contains("weight_g") || !t["weight_g"].is_number_integer() ||
            !segmentation::is_valid_weight(t["weight_g"].get<int>())) {
            problems.push_back(ctx + ": 'weight_g' must be one of 165, 330, 660");
            ok = false;
        } else {
            info.condition.weight_g = t["weight_g"];
        }
        try {
            if (!t.contains("surface") || !t["surface"].is_string()) throw InvalidArgument("missing");
            info.condition.surface = segmentation::parse_surface(t["surface"].get<std::string>());
        } catch (const InvalidArgument&) {
            problems.push_back(ctx + ": 'surface' must be one of sandpaper, suede, silk");
            ok = false;
        }
        if (ok) m.trials.push_back(std::move(info));
    }
    return m;
}

void write_manifest(const fs::path& root, const DatasetManifest& m) {
    io::write_file_atomic(root / kManifestName, to_json(m).dump(2) + "\n");
}

void write_recording(const fs::path& path, std::span<const std::vector<float>> channels) {
    const std::size_t n = channels.empty() ? 0 : channels.front().size();
    for (const auto& c : channels) {
        if (c.size() != n) throw InvalidArgument("write_recording: channels differ in length");
    }
    std::string buf;
    buf.reserve(kHeaderBytes + channels.size() * n * sizeof(float));
    buf.append(kMagic.data(), kMagic.size());
    put<std::uint32_t>(buf, kBinaryVersion);
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(channels.size()));
    put<std::uint32_t>(buf, 0);
    put<std::uint64_t>(buf, n);
    for (const auto& c : channels) {
        buf.append(reinterpret_cast<const char*>(c.data()), c.size() * sizeof(float));
    }
    io::write_file_atomic(path, buf);
}

BinaryHeader read_header(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open recording " + path.string());
    char raw[kHeaderBytes];
    if (!in.read(raw, kHeaderBytes)) throw IoError("truncated header in " + path.string());
    if (std::memcmp(raw, kMagic.data(), kMagic.size()) != 0) {
        throw IoError("bad magic in " + path.string() + " (expected CMCD)");
    }
    BinaryHeader h;
    h.version = get<std::uint32_t>(raw + 4);
    h.channels = get<std::uint32_t>(raw + 8);
    h.samples = get<std::uint64_t>(raw + 16);
    if (h.version != kBinaryVersion) {
        throw IoError("unsupported recording version " + std::to_string(h.version) + " in " +
                      path.string());
    }
    return h;
}

std::vector<float> read_channel(const fs::path& path, std::size_t channel, std::size_t first,
                                std::size_t count) {
    const BinaryHeader h = read_header(path);
    if (channel >= h.channels || first > h.samples || count > h.samples - first) {
        throw OutOfBounds("read_channel: channel " + std::to_string(channel) + " samples [" +
                          std::to_string(first) + ", " + std::to_string(first + count) +
                          ") outside " + path.string());
    }
    std::ifstream in(path, std::ios::binary);
    const auto offset = kHeaderBytes + (channel * h.samples + first) * sizeof(float);
    in.seekg(static_cast<std::streamoff>(offset));
    std::vector<float> out(count);
    if (!in.read(reinterpret_cast<char*>(out.data()),
                 static_cast<std::streamsize>(count * sizeof(float)))) {
        throw IoError("short read from " + path.string());
    }
    return out;
}

Dataset::Dataset(fs::path root, DatasetManifest manifest, std::vector<BinaryHeader> headers)
    : root_(std::move(root)), manifest_(std::move(manifest)), headers_(std::move(headers)) {}

Dataset Dataset::load(const fs::path& root) {
    const fs::path manifest_path = root / kManifestName;
    if (!fs::exists(root)) throw IoError("dataset path does not exist: " + root.string());
    if (!fs::exists(manifest_path)) throw IoError("manifest not found: " + manifest_path.string());

    std::vector<std::string> problems;
    json j;
    try {
        j = json::parse(io::read_file(manifest_path));
    } catch (const json::parse_error& e) {
        throw ValidationError({manifest_path.string() + ": malformed JSON: " + e.what()});
    }
    DatasetManifest m = manifest_from_json(j, problems);

    if (m.profile == kWayEegGalProfile) {
        if (m.eeg_channels.size() != kWayEegChannels) {
            problems.push_back("expected " + std::to_string(kWayEegChannels) +
                               " EEG channels, manifest declares " +
                               std::to_string(m.eeg_channels.size()));
        }
        if (m.emg_channels.size() != kWayEmgChannels) {
            problems.push_back("expected " + std::to_string(kWayEmgChannels) +
                               " EMG channels, manifest declares " +
                               std::to_string(m.emg_channels.size()));
        }
        if (m.fs != kWayFs) {
            problems.push_back("expected fs = 500 Hz, manifest declares " + io::format_double(m.fs));
        }
    }
    if (m.eeg_channels.empty()) problems.push_back("manifest declares no EEG channels");
    if (m.emg_channels.empty()) problems.push_back("manifest declares no EMG channels");
    std::set<std::string> names;
    for (const auto& c : m.eeg_channels) {
        if (!names.insert(c).second) problems.push_back("duplicate channel name '" + c + "'");
    }
    for (const auto& c : m.emg_channels) {
        if (!names.insert(c).second) problems.push_back("duplicate channel name '" + c + "'");
    }

    const std::size_t nch = m.eeg_channels.size() + m.emg_channels.size();
    std::vector<BinaryHeader> headers(m.recordings.size());
    std::vector<bool> header_ok(m.recordings.size(), false);
    std::set<std::string> rec_ids;
    for (std::size_t i = 0; i < m.recordings.size(); ++i) {
        const auto& r = m.recordings[i];
        if (!rec_ids.insert(r.id).second) problems.push_back("duplicate recording id '" + r.id + "'");
        const fs::path p = root / r.file;
        if (!fs::exists(p)) {
            problems.push_back("recording '" + r.id + "': missing file " + p.string());
            continue;
        }
        try {
            headers[i] = read_header(p);
        } catch (const IoError& e) {
            problems.push_back("recording '" + r.id + "': " + e.what());
            continue;
        }
        if (headers[i].channels != nch) {
            problems.push_back("recording '" + r.id + "': binary holds " +
                               std::to_string(headers[i].channels) + " channels, manifest declares " +
                               std::to_string(nch));
            continue;
        }
        const auto expected_size = kHeaderBytes + headers[i].channels * headers[i].samples * sizeof(float);
        if (fs::file_size(p) != expected_size) {
            problems.push_back("recording '" + r.id + "': file size " +
                               std::to_string(fs::file_size(p)) + " bytes, header implies " +
                               std::to_string(expected_size));
            continue;
        }
        header_ok[i] = true;
    }

    std::set<int> ids;
    std::map<std::string, std::vector<std::pair<double, double>>> spans;
    for (const auto& t : m.trials) {
        const std::string ctx = "trial " + std::to_string(t.trial_id);
        if (!ids.insert(t.trial_id).second) problems.push_back(ctx + ": duplicate trial_id");
        if (!(t.start_s < t.end_s)) {
            problems.push_back(ctx + ": end_s (" + io::format_double(t.end_s) +
                               ") is not after start_s (" + io::format_double(t.start_s) + ")");
            continue;
        }
        const auto it = std::find_if(m.recordings.begin(), m.recordings.end(),
                                     [&](const RecordingInfo& r) { return r.id == t.recording; });
        if (it == m.recordings.end()) {
            problems.push_back(ctx + ": unknown recording '" + t.recording + "'");
            continue;
        }
        const auto ri = static_cast<std::size_t>(it - m.recordings.begin());
        if (header_ok[ri] && m.fs > 0.0) {
            const double len_s = static_cast<double>(headers[ri].samples) / m.fs;
            if (t.start_s < 0.0 || t.end_s > len_s) {
                problems.push_back(ctx + ": window [" + io::format_double(t.start_s) + ", " +
                                   io::format_double(t.end_s) + ") s outside recording '" +
                                   t.recording + "' of " + io::format_double(len_s) + " s");
            }
        }
        spans[t.recording].emplace_back(t.start_s, t.end_s);
    }
    for (auto& [rec, list] : spans) {
        std::sort(list.begin(), list.end());
        for (std::size_t i = 1; i < list.size(); ++i) {
            if (list[i].first < list[i - 1].second) {
                problems.push_back("recording '" + rec + "': trial windows overlap at " +
                                   io::format_double(list[i].first) + " s");
            }
        }
    }

    if (!problems.empty()) throw ValidationError(std::move(problems));
    return Dataset(root, std::move(m), std::move(headers));
}

std::size_t Dataset::channel_index(const std::string& name) const {
    const auto& eeg = manifest_.eeg_channels;
    const auto& emg = manifest_.emg_channels;
    if (auto it = std::find(eeg.begin(), eeg.end(), name); it != eeg.end()) {
        return static_cast<std::size_t>(it - eeg.begin());
    }
    if (auto it = std::find(emg.begin(), emg.end(), name); it != emg.end()) {
        return eeg.size() + static_cast<std::size_t>(it - emg.begin());
    }
    throw InvalidArgument("dataset has no channel named '" + name + "'");
}

std::size_t Dataset::recording_index(const std::string& id) const {
    for (std::size_t i = 0; i < manifest_.recordings.size(); ++i) {
        if (manifest_.recordings[i].id == id) return i;
    }
    throw InvalidArgument("dataset has no recording '" + id + "'");
}

std::size_t Dataset::recording_samples(const std::string& recording) const {
    return headers_[recording_index(recording)].samples;
}

TimeSeries Dataset::channel_window(const std::string& recording, const std::string& name,
                                   std::size_t first, std::size_t count) const {
    const auto ri = recording_index(recording);
    const auto raw = read_channel(root_ / manifest_.recordings[ri].file, channel_index(name), first,
                                  count);
    return TimeSeries(std::vector<double>(raw.begin(), raw.end()), manifest_.fs, name);
}

TimeSeries Dataset::channel(const std::string& recording, const std::string& name) const {
    return channel_window(recording, name, 0, recording_samples(recording));
}

std::size_t Dataset::trial_first_sample(const TrialInfo& t) const {
    return static_cast<std::size_t>(std::llround(t.start_s * manifest_.fs));
}

std::size_t Dataset::trial_sample_count(const TrialInfo& t) const {
    const auto last = static_cast<std::size_t>(std::llround(t.end_s * manifest_.fs));
    const std::size_t first = trial_first_sample(t);
    const std::size_t cap = recording_samples(t.recording);
    return std::min(last, cap) - first;
}

TrialRecord Dataset::trial(std::size_t index) const {
    const TrialInfo& t = manifest_.trials.at(index);
    const std::size_t first = trial_first_sample(t);
    const std::size_t count = trial_sample_count(t);
    TrialRecord rec{t, {}, {}};
    for (const auto& c : manifest_.eeg_channels) {
        rec.eeg.push_back(channel_window(t.recording, c, first, count));
    }
    for (const auto& c : manifest_.emg_channels) {
        rec.emg.push_back(channel_window(t.recording, c, first, count));
    }
    return rec;
}

std::vector<ConditionCount> check_reference_counts(const DatasetManifest& m) {
    std::size_t light = 0, heavy = 0, sandpaper = 0, silk = 0;
    for (const auto& t : m.trials) {
        if (t.condition.weight_g == 165) ++light;
        if (t.condition.weight_g == 660) ++heavy;
        if (t.condition.surface == segmentation::Surface::sandpaper) ++sandpaper;
        if (t.condition.surface == segmentation::Surface::silk) ++silk;
    }
    return {{"light", 84, light}, {"heavy", 57, heavy}, {"sandpaper", 51, sandpaper}, {"silk", 221, silk}};
}

}  // namespace cmc::ingest
