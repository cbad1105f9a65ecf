#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "cmc/error.hpp"
#include "cmc/segmentation.hpp"
#include "test_helpers.hpp"

namespace cmc {
namespace {

using namespace segmentation;

constexpr double kFs = 500.0;

TimeSeries trapezoid(double rise_s, double fall_s, double total_s, double ramp_s = 0.2) {
    const auto n = static_cast<std::size_t>(total_s * kFs);
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / kFs;
        const double up = std::clamp((t - (rise_s - ramp_s / 2)) / ramp_s, 0.0, 1.0);
        const double down = std::clamp(((fall_s + ramp_s / 2) - t) / ramp_s, 0.0, 1.0);
        x[i] = 0.1 + 2.0 * std::min(up, down);
    }
    return TimeSeries(x, kFs, "env");
}

TEST(Threshold, Formula) {
    EXPECT_EQ(compute_threshold(TimeSeries({0.0, 3.0, 1.5}, kFs)), 1.0);
    EXPECT_EQ(compute_threshold(TimeSeries({2.0, 2.0}, kFs)), 2.0);
    EXPECT_EQ(compute_threshold(TimeSeries({0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0}, kFs)), 2.0);
}

TEST(Threshold, TranslationAndScaleEquivariant) {
    // Values are dyadic so the equalities are exact.
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x(50);
        for (double& v : x) v = static_cast<double>(static_cast<int>(gen() % 4096) - 2048) / 64.0;
        const double c = static_cast<double>(static_cast<int>(gen() % 256)) / 8.0;
        const double a = std::ldexp(1.0, static_cast<int>(gen() % 6) - 2);
        std::vector<double> shifted(x), scaled(x);
        for (double& v : shifted) v += c;
        for (double& v : scaled) v *= a;
        const double th = compute_threshold(TimeSeries(x, kFs));
        EXPECT_EQ(compute_threshold(TimeSeries(shifted, kFs)), th + c);
        EXPECT_EQ(compute_threshold(TimeSeries(scaled, kFs)), a * th);
    }
}

TEST(FindActivation, TrapezoidMidpoint) {
    const auto env = trapezoid(1.0, 3.0, 5.0);
    const auto a = find_activation(env, compute_threshold(env));
    EXPECT_NEAR(a.t0, 2.0, 1.0 / kFs);
    EXPECT_EQ(a.t0, (a.t_start + a.t_end) / 2.0);
    EXPECT_LT(a.t_start, a.t_end);
}

TEST(FindActivation, ConstantEnvelopeHasNoActivation) {
    const TimeSeries env(std::vector<double>(100, 2.0), kFs);
    EXPECT_THROW(find_activation(env, compute_threshold(env)), NoActivation);
}

TEST(FindActivation, KeepsLongestRun) {
    std::vector<double> x(1000, 0.0);
    for (std::size_t i = 100; i < 200; ++i) x[i] = 1.0;
    for (std::size_t i = 500; i < 800; ++i) x[i] = 1.0;
    const auto a = find_activation(TimeSeries(x, kFs), 0.5);
    EXPECT_EQ(a.first, 500u);
    EXPECT_EQ(a.last, 799u);
}

TEST(FindActivation, TiesPickEarliest) {
    std::vector<double> x(100, 0.0);
    for (std::size_t i = 10; i < 20; ++i) x[i] = 1.0;
    for (std::size_t i = 50; i < 60; ++i) x[i] = 1.0;
    EXPECT_EQ(find_activation(TimeSeries(x, kFs), 0.5).first, 10u);
}

TEST(FindActivation, BoundarySamplesAreAtOrBelowThreshold) {
    std::mt19937_64 gen(17);
    for (int trial = 0; trial < 200; ++trial) {
        auto x = test::white(300, gen());
        const TimeSeries env(x, kFs);
        const double th = compute_threshold(env);
        const auto a = find_activation(env, th);
        for (std::size_t i = a.first; i <= a.last; ++i) EXPECT_GT(x[i], th);
        if (a.first > 0) EXPECT_LE(x[a.first - 1], th);
        if (a.last + 1 < x.size()) EXPECT_LE(x[a.last + 1], th);
    }
}

TEST(ExtractSegment, IndexArithmetic) {
    const TimeSeries eeg(test::white(10000, 1), kFs, "C3");
    const TimeSeries emg(test::white(10000, 2), kFs, "BR");
    const auto seg = extract_segment(eeg, emg, 10.0, 4.0, {660, Surface::silk}, 12);
    EXPECT_EQ(seg.start_index, 4000u);
    EXPECT_EQ(seg.eeg.size(), 2000u);
    EXPECT_EQ(seg.emg.size(), 2000u);
    EXPECT_EQ(seg.eeg[0], eeg[4000]);
    EXPECT_EQ(seg.emg[1999], emg[5999]);
    EXPECT_EQ(seg.trial_id, 12);
    EXPECT_EQ(seg.condition.weight_g, 660);

    const auto again = extract_segment(eeg, emg, 10.0, 4.0, {660, Surface::silk}, 12);
    EXPECT_EQ(again.eeg, seg.eeg);
    EXPECT_EQ(again.emg, seg.emg);
}

TEST(ExtractSegment, Errors) {
    const TimeSeries eeg(test::white(10000, 1), kFs);
    const TimeSeries emg(test::white(10000, 2), kFs);
    EXPECT_THROW(extract_segment(eeg, emg, 0.3, 1.0), OutOfBounds);
    EXPECT_THROW(extract_segment(eeg, emg, 19.9, 1.0), OutOfBounds);
    EXPECT_THROW(extract_segment(eeg, TimeSeries(test::white(10000, 2), 1000.0), 10.0, 1.0),
                 RateMismatch);
    EXPECT_THROW(extract_segment(eeg, emg, 10.0, 3.0), InvalidArgument);
}

std::vector<TrialSegment> noise_population(std::size_t count, std::uint64_t seed) {
    std::vector<TrialSegment> segs;
    for (std::size_t i = 0; i < count; ++i) {
        const TimeSeries eeg(test::white(500, seed + i), kFs);
        const TimeSeries emg(test::white(500, seed + 1000 + i), kFs);
        segs.push_back({eeg, emg, 1.0, {}, static_cast<int>(i), 0});
    }
    return segs;
}

TEST(RejectArtifacts, IdenticalSegmentsKept) {
    const TimeSeries eeg(test::white(500, 3), kFs);
    std::vector<TrialSegment> segs(6, TrialSegment{eeg, eeg, 1.0, {}, 0, 0});
    for (std::size_t i = 0; i < segs.size(); ++i) segs[i].trial_id = static_cast<int>(i);
    EXPECT_EQ(reject_artifacts(segs, 5.0).size(), segs.size());

    std::vector<TrialSegment> flat(3, TrialSegment{TimeSeries(std::vector<double>(10, 1.0), kFs),
                                                   TimeSeries(std::vector<double>(10, 1.0), kFs),
                                                   1.0, {}, 0, 0});
    EXPECT_EQ(reject_artifacts(flat, 5.0).size(), 3u);  // zero dispersion
}

TEST(RejectArtifacts, SpikedSegmentRejected) {
    auto segs = noise_population(20, 40);
    std::vector<double> spiked(segs[7].eeg.samples().begin(), segs[7].eeg.samples().end());
    spiked[250] = 10.0;
    segs[7].eeg = segs[7].eeg.with_samples(spiked);

    // Direct MAD over the pooled population.
    std::vector<double> pooled;
    for (const auto& s : segs) pooled.insert(pooled.end(), s.eeg.samples().begin(), s.eeg.samples().end());
    std::sort(pooled.begin(), pooled.end());
    const std::size_t n = pooled.size();
    const double median = (pooled[n / 2 - 1] + pooled[n / 2]) / 2.0;
    std::vector<double> dev;
    for (double v : pooled) dev.push_back(std::fabs(v - median));
    std::sort(dev.begin(), dev.end());
    const double sigma = 1.4826 * (dev[n / 2 - 1] + dev[n / 2]) / 2.0;
    for (std::size_t i = 0; i < segs.size(); ++i) {
        double peak = 0.0;
        for (double v : segs[i].eeg.samples()) peak = std::max(peak, std::fabs(v - median));
        ASSERT_EQ(peak > 5.0 * sigma, i == 7) << "population construction, segment " << i;
    }

    const auto rs = robust_scale(pooled);
    EXPECT_NEAR(rs.median, median, 1e-12);
    EXPECT_NEAR(rs.sigma, sigma, 1e-12);

    std::vector<int> rejected;
    const auto kept = reject_artifacts(segs, 5.0, &rejected);
    EXPECT_EQ(kept.size(), 19u);
    EXPECT_EQ(rejected, std::vector<int>{7});
    for (const auto& s : kept) EXPECT_NE(s.trial_id, 7);
}

TEST(RejectArtifacts, InfiniteLimitIsIdentity) {
    auto segs = noise_population(5, 9);
    std::vector<double> spiked(segs[2].eeg.samples().begin(), segs[2].eeg.samples().end());
    spiked[0] = 1e6;
    segs[2].eeg = segs[2].eeg.with_samples(spiked);
    const auto kept = reject_artifacts(segs, std::numeric_limits<double>::infinity());
    ASSERT_EQ(kept.size(), segs.size());
    for (std::size_t i = 0; i < kept.size(); ++i) EXPECT_EQ(kept[i].eeg, segs[i].eeg);
}

TEST(Envelope, TracksBurst) {
    // Noise burst between 1 s and 3 s on a quiet background.
    auto x = test::white(2500, 8, 0.05);
    const auto burst = test::white(2500, 9, 1.0);
    for (std::size_t i = 500; i < 1500; ++i) x[i] += burst[i];
    const auto env = envelope(TimeSeries(x, kFs), {3.0, 80.0, 4});
    const auto a = find_activation(env, compute_threshold(env));
    EXPECT_NEAR(a.t0, 2.0, 0.05);
}

}  // namespace
}  // namespace cmc
