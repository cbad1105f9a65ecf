#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <limits>

#include "cmc/error.hpp"
#include "cmc/ingest.hpp"
#include "cmc/synth.hpp"
#include "test_helpers.hpp"

namespace cmc {
namespace {

using namespace ingest;
using nlohmann::json;

synth::DatasetSpec small_spec(std::size_t extra_eeg = 31) {
    synth::DatasetSpec spec;
    spec.trials_per_class = 3;
    spec.extra_eeg_channels = extra_eeg;
    return spec;
}

json read_json(const std::filesystem::path& p) {
    std::ifstream in(p);
    return json::parse(in);
}

void write_json(const std::filesystem::path& p, const json& j) {
    std::ofstream(p) << j.dump(2);
}

std::string validation_message(const std::filesystem::path& root) {
    try {
        Dataset::load(root);
    } catch (const ValidationError& e) {
        return e.what();
    }
    return {};
}

TEST(Ingest, SyntheticDatasetLoadsWithProfileCounts) {
    test::TempDir dir("ingest");
    const auto n = synth::write_dataset(small_spec(), dir.path());
    const auto ds = Dataset::load(dir.path());
    EXPECT_EQ(ds.manifest().trials.size(), n);
    EXPECT_EQ(ds.manifest().profile, kWayEegGalProfile);
    EXPECT_EQ(ds.manifest().eeg_channels.size(), 32u);
    EXPECT_EQ(ds.manifest().emg_channels.size(), 5u);
    EXPECT_EQ(ds.channel_index("C3"), 0u);
    EXPECT_EQ(ds.channel_index("AD"), 32u);
    EXPECT_THROW(ds.channel_index("nope"), InvalidArgument);
    EXPECT_EQ(read_header(dir.path() / "series1.bin").channels, 37u);
}

TEST(Ingest, BinaryRoundTripIsBitExact) {
    test::TempDir dir("ingest_bin");
    std::vector<std::vector<float>> ch(3, std::vector<float>(1000));
    const auto noise = test::white(3000, 5);
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < 1000; ++i) ch[c][i] = static_cast<float>(noise[c * 1000 + i]);
    }
    ch[1][7] = std::numeric_limits<float>::denorm_min();
    ch[2][0] = -0.0f;
    write_recording(dir.path() / "r.bin", ch);
    const auto h = read_header(dir.path() / "r.bin");
    EXPECT_EQ(h.channels, 3u);
    EXPECT_EQ(h.samples, 1000u);
    EXPECT_EQ(std::filesystem::file_size(dir.path() / "r.bin"), kHeaderBytes + 3 * 1000 * 4);
    for (std::size_t c = 0; c < 3; ++c) {
        const auto back = read_channel(dir.path() / "r.bin", c, 0, 1000);
        EXPECT_EQ(std::memcmp(back.data(), ch[c].data(), 4000), 0);
    }
    // Header layout, byte for byte.
    std::ifstream in(dir.path() / "r.bin", std::ios::binary);
    unsigned char hdr[24];
    in.read(reinterpret_cast<char*>(hdr), 24);
    EXPECT_EQ(std::string(reinterpret_cast<char*>(hdr), 4), "CMCD");
    EXPECT_EQ(hdr[4], 1);
    EXPECT_EQ(hdr[8], 3);
    EXPECT_EQ(hdr[16], 1000 % 256);
    EXPECT_EQ(hdr[17], 1000 / 256);
    EXPECT_THROW(read_channel(dir.path() / "r.bin", 3, 0, 1), OutOfBounds);
    EXPECT_THROW(read_channel(dir.path() / "r.bin", 0, 900, 101), OutOfBounds);
}

TEST(Ingest, LazyWindowsMatchWholeChannel) {
    test::TempDir dir("ingest_lazy");
    synth::write_dataset(small_spec(0), dir.path());
    const auto ds = Dataset::load(dir.path());
    const auto whole = ds.channel("series1", "BR");
    for (std::size_t i = 0; i < ds.manifest().trials.size(); ++i) {
        const auto rec = ds.trial(i);
        const auto& t = ds.manifest().trials[i];
        const std::size_t first = ds.trial_first_sample(t);
        ASSERT_EQ(rec.emg.size(), 5u);
        const auto& br = rec.emg[1];
        EXPECT_EQ(br.label(), "BR");
        for (std::size_t k = 0; k < br.size(); ++k) ASSERT_EQ(br[k], whole[first + k]);
        const auto win = ds.channel_window("series1", "BR", first + 10, 50);
        for (std::size_t k = 0; k < 50; ++k) ASSERT_EQ(win[k], whole[first + 10 + k]);
    }
}

TEST(Ingest, ManifestRoundTrip) {
    test::TempDir dir("ingest_man");
    synth::write_dataset(small_spec(0), dir.path());
    const auto ds = Dataset::load(dir.path());
    std::vector<std::string> problems;
    const auto again = manifest_from_json(to_json(ds.manifest()), problems);
    EXPECT_TRUE(problems.empty());
    EXPECT_EQ(to_json(again), to_json(ds.manifest()));
    EXPECT_EQ(again.trials[1].condition.weight_g, 660);
}

TEST(Ingest, ChannelCountMismatchNamesCount) {
    test::TempDir dir("ingest_31");
    synth::write_dataset(small_spec(), dir.path());
    auto j = read_json(dir.path() / kManifestName);
    j["eeg_channels"].erase(j["eeg_channels"].size() - 1);
    write_json(dir.path() / kManifestName, j);
    const auto msg = validation_message(dir.path());
    EXPECT_NE(msg.find("32 EEG channels, manifest declares 31"), std::string::npos) << msg;
}

TEST(Ingest, ReportsEveryProblemTogether) {
    test::TempDir dir("ingest_multi");
    synth::write_dataset(small_spec(0), dir.path());
    auto j = read_json(dir.path() / kManifestName);
    j["trials"][2]["end_s"] = j["trials"][2]["start_s"].get<double>() - 1.0;
    j["trials"][4]["weight_g"] = 200;
    j["recordings"].push_back({{"id", "ghost"}, {"file", "ghost.bin"}});
    write_json(dir.path() / kManifestName, j);
    try {
        Dataset::load(dir.path());
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        const int bad_id = j["trials"][2]["trial_id"].get<int>();
        EXPECT_NE(msg.find("trial " + std::to_string(bad_id) + ": end_s"), std::string::npos) << msg;
        EXPECT_NE(msg.find("weight_g"), std::string::npos) << msg;
        EXPECT_NE(msg.find("ghost"), std::string::npos) << msg;
        EXPECT_GE(e.problems().size(), 3u);
    }
}

TEST(Ingest, MissingManifestIsIoError) {
    test::TempDir dir("ingest_none");
    EXPECT_THROW(Dataset::load(dir.path()), IoError);
    EXPECT_THROW(Dataset::load(dir.path() / "absent"), IoError);
}

TEST(Ingest, TruncatedBinaryDetected) {
    test::TempDir dir("ingest_trunc");
    synth::write_dataset(small_spec(0), dir.path());
    std::filesystem::resize_file(dir.path() / "series1.bin", 1000);
    const auto msg = validation_message(dir.path());
    EXPECT_NE(msg.find("series1"), std::string::npos) << msg;
}

TEST(ReferenceCounts, ReportsDeviationsWithoutThrowing) {
    DatasetManifest empty;
    for (const auto& c : check_reference_counts(empty)) EXPECT_EQ(c.actual, 0u);

    DatasetManifest m;
    auto add = [&](int n, int w, segmentation::Surface s) {
        for (int i = 0; i < n; ++i) {
            TrialInfo t;
            t.trial_id = static_cast<int>(m.trials.size());
            t.condition = {w, s};
            m.trials.push_back(t);
        }
    };
    using segmentation::Surface;
    add(51, 165, Surface::sandpaper);
    add(33, 165, Surface::silk);
    add(57, 660, Surface::silk);
    add(131, 330, Surface::silk);
    add(10, 330, Surface::suede);
    const auto counts = check_reference_counts(m);
    ASSERT_EQ(counts.size(), 4u);
    for (const auto& c : counts) EXPECT_TRUE(c.matches()) << c.condition << " " << c.actual;

    test::TempDir dir("ingest_ref");
    synth::write_dataset(small_spec(0), dir.path());
    const auto synth_counts = check_reference_counts(Dataset::load(dir.path()).manifest());
    EXPECT_FALSE(synth_counts[0].matches());
}

}  // namespace
}  // namespace cmc
