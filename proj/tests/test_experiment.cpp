#include <gtest/gtest.h>

#include <set>

#include "cmc/error.hpp"
#include "cmc/experiment.hpp"
#include "cmc/io.hpp"
#include "cmc/synth.hpp"
#include "test_helpers.hpp"

namespace cmc {
namespace {

using namespace experiment;
using segmentation::Surface;

ingest::DatasetManifest manifest_with(std::vector<segmentation::Condition> conds) {
    ingest::DatasetManifest m;
    for (std::size_t i = 0; i < conds.size(); ++i) {
        ingest::TrialInfo t;
        t.trial_id = static_cast<int>(100 + i);
        t.condition = conds[i];
        m.trials.push_back(t);
    }
    return m;
}

TEST(LabelTrials, KeepsOnlyTaskConditions) {
    const auto m = manifest_with({{165, Surface::silk},
                                  {330, Surface::sandpaper},
                                  {660, Surface::suede},
                                  {165, Surface::sandpaper},
                                  {330, Surface::suede}});
    const auto w = label_trials(m, Task::light_vs_heavy);
    ASSERT_EQ(w.size(), 3u);
    EXPECT_EQ(w[0].trial_id, 100);
    EXPECT_EQ(w[0].label, -1);
    EXPECT_EQ(w[1].trial_id, 102);
    EXPECT_EQ(w[1].label, 1);
    EXPECT_EQ(w[2].trial_id, 103);
    const auto s = label_trials(m, Task::sandpaper_vs_silk);
    ASSERT_EQ(s.size(), 3u);
    EXPECT_EQ(s[0].label, 1);
    EXPECT_EQ(s[1].label, -1);
    EXPECT_EQ(s[1].index, 1u);

    EXPECT_THROW(label_trials(manifest_with({{330, Surface::silk}, {330, Surface::suede}}),
                              Task::light_vs_heavy),
                 InsufficientData);
}

TEST(Muscles, CanonicalOrderAndKeys) {
    EXPECT_EQ(canonical_order({"FDI", "BR", "AD", "FD", "CED"}),
              (std::vector<std::string>{"AD", "BR", "CED", "FD", "FDI"}));
    EXPECT_EQ(canonical_order({"ZZ", "FD", "AA"}), (std::vector<std::string>{"FD", "AA", "ZZ"}));
    TaskSpec a{Task::light_vs_heavy, 4.0, {svm::KernelKind::rbf}, {"FD", "BR"}};
    TaskSpec b{Task::light_vs_heavy, 4.0, {svm::KernelKind::rbf}, {"BR", "FD"}};
    EXPECT_EQ(cell_key(a), "light_vs_heavy|BR+FD|4|rbf");
    EXPECT_EQ(cell_key(a), cell_key(b));
    EXPECT_EQ(cell_seed(7, cell_key(a)), cell_seed(7, cell_key(b)));
    EXPECT_NE(cell_seed(7, cell_key(a)), cell_seed(8, cell_key(a)));
}

TEST(Subsets, BinomialCountsWithoutDuplicates) {
    const std::vector<std::string> five(kCanonicalMuscles.begin(), kCanonicalMuscles.end());
    const std::vector<std::size_t> expected5{5, 10, 10, 5, 1};
    for (std::size_t s = 1; s <= 5; ++s) {
        const auto subs = subsets_of_size(five, s);
        EXPECT_EQ(subs.size(), expected5[s - 1]);
        std::set<std::vector<std::string>> unique(subs.begin(), subs.end());
        EXPECT_EQ(unique.size(), subs.size());
        for (const auto& sub : subs) EXPECT_EQ(sub.size(), s);
    }
    const std::vector<std::string> four{"AD", "BR", "CED", "FD"};
    const std::vector<std::size_t> expected4{4, 6, 4, 1};
    for (std::size_t s = 1; s <= 4; ++s) EXPECT_EQ(subsets_of_size(four, s).size(), expected4[s - 1]);
    EXPECT_TRUE(subsets_of_size(four, 0).empty());
    EXPECT_TRUE(subsets_of_size(four, 5).empty());
}

class SyntheticExperiment : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new test::TempDir("experiment");
        synth::DatasetSpec spec;
        spec.trials_per_class = 30;
        synth::write_dataset(spec, dir_->path() / "separable");
        spec.coherence_b = spec.coherence_a;
        synth::write_dataset(spec, dir_->path() / "null");
    }
    static void TearDownTestSuite() {
        delete dir_;
        dir_ = nullptr;
    }
    static CvConfig quick_cv() {
        CvConfig cv;
        cv.reps = 3;
        return cv;
    }
    static test::TempDir* dir_;
};

test::TempDir* SyntheticExperiment::dir_ = nullptr;

TEST_F(SyntheticExperiment, SegmentCountsAddUp) {
    const auto ds = ingest::Dataset::load(dir_->path() / "separable");
    Experiment exp(ds, {}, quick_cv(), 1);
    for (double dur : {1.0, 2.0, 4.0}) {
        const auto batch = exp.segment(dur);
        std::size_t kept = 0;
        for (const auto& [m, entries] : batch.by_muscle) {
            kept += entries.size();
            for (const auto& e : entries) {
                EXPECT_EQ(e.segment.eeg.size(), static_cast<std::size_t>(dur * 500));
                EXPECT_EQ(e.muscle, m);
            }
        }
        EXPECT_EQ(kept + batch.rejections.size(), ds.manifest().trials.size() * 5);
    }
}

TEST_F(SyntheticExperiment, SeparableClassesClassified) {
    const auto ds = ingest::Dataset::load(dir_->path() / "separable");
    Experiment exp(ds, {}, quick_cv(), 1);
    const std::vector<std::string> all(kCanonicalMuscles.begin(), kCanonicalMuscles.end());
    for (auto kind : {svm::KernelKind::linear, svm::KernelKind::rbf}) {
        const auto cell = exp.run_cell({Task::light_vs_heavy, 4.0, {kind}, all});
        ASSERT_TRUE(cell.sufficient);
        EXPECT_GE(cell.cv.mean, 0.95) << svm::to_string(kind);
    }
    const auto samples = exp.samples(Task::light_vs_heavy, {"FD", "AD", "BR"}, 4.0);
    EXPECT_EQ(samples.size(), 60u);
    for (const auto& s : samples) EXPECT_EQ(s.features.size(), 24u);
}

TEST_F(SyntheticExperiment, NoGapIsChance) {
    // Chance accuracy of one small cell scatters by several points, so the
    // single-muscle cells are averaged.
    const auto ds = ingest::Dataset::load(dir_->path() / "null");
    Experiment exp(ds, {}, quick_cv(), 1);
    double sum = 0.0;
    for (const auto& m : exp.muscles()) {
        sum += exp.run_cell({Task::light_vs_heavy, 4.0, {svm::KernelKind::linear}, {m}}).cv.mean;
    }
    EXPECT_NEAR(sum / 5.0, 0.5, 0.1);
}

TEST_F(SyntheticExperiment, WrongTaskIsInsufficient) {
    const auto ds = ingest::Dataset::load(dir_->path() / "separable");
    Experiment exp(ds, {}, quick_cv(), 1);
    EXPECT_THROW(exp.run_cell({Task::sandpaper_vs_silk, 4.0, {}, {"BR"}}), InsufficientData);
    EXPECT_THROW(exp.features("XYZ", 4.0), InvalidArgument);
    EXPECT_THROW(exp.segment(3.0), InvalidArgument);
    PipelineConfig p;
    p.eeg_channel = "Cz";
    EXPECT_THROW(Experiment(ds, p, quick_cv(), 1), InvalidArgument);
}

TEST_F(SyntheticExperiment, SweepShapeAndDeterminism) {
    const auto ds = ingest::Dataset::load(dir_->path() / "separable");
    CvConfig cv = quick_cv();
    cv.reps = 1;
    Experiment a(ds, {}, cv, 3);
    const auto rep = a.run_sweep(Task::light_vs_heavy, 2.0, {svm::KernelKind::linear});
    ASSERT_EQ(rep.sizes.size(), 5u);
    const std::vector<std::size_t> counts{5, 10, 10, 5, 1};
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_EQ(rep.sizes[i].subsets.size(), counts[i]);
        EXPECT_GE(rep.sizes[i].best, rep.sizes[i].mean);
    }
    Experiment b(ds, {}, cv, 3);
    const auto again = b.run_sweep(Task::light_vs_heavy, 2.0, {svm::KernelKind::linear});
    EXPECT_EQ(sweep_csv(rep), sweep_csv(again));
    EXPECT_EQ(sweep_subsets_csv(rep), sweep_subsets_csv(again));
    EXPECT_EQ(to_json(rep).dump(), to_json(again).dump());
}

TEST(SweepFourMuscles, CountsFollowBinomials) {
    test::TempDir dir("experiment4");
    synth::DatasetSpec spec;
    spec.trials_per_class = 10;
    spec.muscles = {"AD", "BR", "CED", "FD"};
    synth::write_dataset(spec, dir.path());
    const auto ds = ingest::Dataset::load(dir.path());
    CvConfig cv;
    cv.reps = 1;
    Experiment exp(ds, {}, cv, 1);
    const auto rep = exp.run_sweep(Task::light_vs_heavy, 1.0, {});
    ASSERT_EQ(rep.sizes.size(), 4u);
    const std::vector<std::size_t> counts{4, 6, 4, 1};
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(rep.sizes[i].subsets.size(), counts[i]);
}

TEST(Reports, EmptyAndSingleCell) {
    EXPECT_EQ(cells_csv({}), "task,muscles,dur_s,kernel,fold,accuracy\n");
    EXPECT_EQ(sweep_csv({}), "size,mean,std,best_subset,best_accuracy\n");

    CellResult c;
    c.spec = {Task::light_vs_heavy, 4.0, {svm::KernelKind::linear}, {"BR"}};
    c.cv.accuracies = {0.94};
    c.cv.mean = 0.94;
    EXPECT_EQ(cells_csv({c}), "task,muscles,dur_s,kernel,fold,accuracy\n"
                              "light_vs_heavy,BR,4,linear,0,0.94\n");
    c.sufficient = false;
    EXPECT_EQ(cells_csv({c}), "task,muscles,dur_s,kernel,fold,accuracy\n"
                              "light_vs_heavy,BR,4,linear,NA,insufficient_data\n");

    test::TempDir dir("reports");
    emit_cells(dir.path() / "a.csv", {c});
    emit_cells(dir.path() / "b.csv", {c});
    EXPECT_EQ(io::read_file(dir.path() / "a.csv"), io::read_file(dir.path() / "b.csv"));
}

TEST(Reports, SortedByCellKey) {
    CellResult a, b;
    a.spec = {Task::sandpaper_vs_silk, 1.0, {}, {"AD"}};
    b.spec = {Task::light_vs_heavy, 1.0, {}, {"AD"}};
    a.sufficient = b.sufficient = false;
    const auto csv = cells_csv({a, b});
    EXPECT_LT(csv.find("light_vs_heavy"), csv.find("sandpaper_vs_silk"));
}

}  // namespace
}  // namespace cmc
