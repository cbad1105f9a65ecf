#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cmc/ingest.hpp"
#include "cmc/parallel.hpp"
#include "cmc/segmentation.hpp"
#include "cmc/sigcore.hpp"
#include "cmc/spectral.hpp"
#include "cmc/svm.hpp"

namespace cmc::experiment {

enum class Task { light_vs_heavy, sandpaper_vs_silk };

std::string to_string(Task t);
Task parse_task(const std::string& name);

/// Canonical muscle order used when concatenating per-muscle features.
inline const std::array<std::string, 5> kCanonicalMuscles{"AD", "BR", "CED", "FD", "FDI"};

/// Sorts muscle names into canonical order (unknown names last, alphabetical).
std::vector<std::string> canonical_order(std::vector<std::string> muscles);

std::string join_muscles(const std::vector<std::string>& muscles);

struct PipelineConfig {
    std::string eeg_channel = "C3";
    sigcore::BandPassSpec band{3.0, 80.0, 4};
    spectral::WelchConfig welch{};
    spectral::FeatureStat feature_stat = spectral::FeatureStat::mean;
    double z_max = segmentation::kDefaultZMax;
    bool rectify_emg = true;  ///< rectify EMG segments before computing CMC
};

struct CvConfig {
    double c = 1.0;
    double gamma = 0.0;  ///< <= 0: derived from each training fold
    std::size_t folds = 5;
    std::size_t reps = 10;
    double tol = 1e-3;
    int max_passes = 20;
};

struct LabeledTrial {
    std::size_t index;  ///< position in the manifest's trial list
    int trial_id;
    int label;  ///< -1: light / sandpaper, +1: heavy / silk
};

/// light_vs_heavy keeps 165 g (-1) and 660 g (+1); sandpaper_vs_silk keeps
/// sandpaper (-1) and silk (+1). Throws InsufficientData when a class is empty.
std::vector<LabeledTrial> label_trials(const ingest::DatasetManifest& m, Task task);

struct TaskSpec {
    Task task = Task::light_vs_heavy;
    double dur_s = 4.0;
    svm::KernelSpec kernel{};
    std::vector<std::string> muscles;
};

/// "task|muscles|dur|kernel", the key cells are sorted and seeded by.
std::string cell_key(const TaskSpec& spec);
std::uint64_t cell_seed(std::uint64_t master, const std::string& key);

struct SegmentEntry {
    segmentation::TrialSegment segment;
    std::string muscle;
    std::string recording;
    double t0_s;  ///< activation midpoint, seconds from recording start
};

struct Rejection {
    int trial_id;
    std::string muscle;
    double dur_s;
    std::string reason;  ///< no_activation, out_of_bounds or artifact
};

/// Segments of every trial for one duration, per muscle, sorted by trial id.
struct SegmentBatch {
    double dur_s = 0.0;
    std::map<std::string, std::vector<SegmentEntry>> by_muscle;
    std::vector<Rejection> rejections;
};

/// Per-trial CMC spectrum and band features for one (muscle, duration).
struct TrialFeatures {
    int trial_id;
    spectral::CmcSpectrum cmc;
    std::vector<double> features;
};

struct CellResult {
    TaskSpec spec;
    bool sufficient = true;
    std::size_t n_neg = 0;
    std::size_t n_pos = 0;
    svm::CvReport cv;
};

struct SubsetAccuracy {
    std::vector<std::string> muscles;
    bool sufficient = true;
    double accuracy = 0.0;
};

struct SizeSummary {
    std::size_t size = 0;
    std::vector<SubsetAccuracy> subsets;
    bool sufficient = true;
    double mean = 0.0;
    double std = 0.0;
    double best = 0.0;
    std::vector<std::string> best_subset;
};

struct SweepReport {
    Task task = Task::light_vs_heavy;
    double dur_s = 4.0;
    svm::KernelSpec kernel{};
    std::vector<SizeSummary> sizes;
};

/// All non-empty subsets of `muscles` of the given size, in lexicographic
/// order of positions.
std::vector<std::vector<std::string>> subsets_of_size(const std::vector<std::string>& muscles,
                                                      std::size_t size);

/// Pipeline over one dataset: filtering, segmentation, CMC features and
/// cross-validated classification. Intermediate results are cached per
/// duration.
class Experiment {
public:
    Experiment(const ingest::Dataset& dataset, PipelineConfig pipeline, CvConfig cv,
               std::uint64_t master_seed, Execution exec = Execution::parallel);
    ~Experiment();
    Experiment(const Experiment&) = delete;
    Experiment& operator=(const Experiment&) = delete;

    /// EMG channels of the dataset in canonical order.
    const std::vector<std::string>& muscles() const noexcept { return muscles_; }

    SegmentBatch segment(double dur_s) const;

    /// Features for every surviving trial of (muscle, duration).
    const std::vector<TrialFeatures>& features(const std::string& muscle, double dur_s);
    const std::vector<Rejection>& rejections(double dur_s);

    /// Samples of the labelled trials that have features for every muscle
    /// in the subset; 8 features per muscle in canonical muscle order.
    std::vector<svm::Sample> samples(Task task, const std::vector<std::string>& muscles,
                                     double dur_s);

    CellResult run_cell(const TaskSpec& spec);
    /// Every non-empty subset of `muscles` (default: all dataset muscles).
    SweepReport run_sweep(Task task, double dur_s, const svm::KernelSpec& kernel,
                          std::vector<std::string> muscles = {});

private:
    struct Prepared;
    const Prepared& prepared(const std::string& recording) const;
    void build(double dur_s);

    const ingest::Dataset& dataset_;
    PipelineConfig pipeline_;
    CvConfig cv_;
    std::uint64_t master_seed_;
    Execution exec_;
    std::vector<std::string> muscles_;
    mutable std::map<std::string, std::shared_ptr<const Prepared>> prepared_;
    std::map<double, std::map<std::string, std::vector<TrialFeatures>>> features_;
    std::map<double, std::vector<Rejection>> rejections_;
};

/// CSV header: task,muscles,dur_s,kernel,fold,accuracy (one row per fold).
std::string cells_csv(const std::vector<CellResult>& cells);
/// task,muscles,dur_s,kernel,status,n_neg,n_pos,mean,std,balanced_mean
std::string cells_summary_csv(const std::vector<CellResult>& cells);
/// CSV header: size,mean,std,best_subset,best_accuracy
std::string sweep_csv(const SweepReport& report);
/// Every subset's accuracy: size,muscles,status,accuracy
std::string sweep_subsets_csv(const SweepReport& report);
nlohmann::json to_json(const SweepReport& report);
nlohmann::json to_json(const CellResult& cell);

void emit_cells(const std::filesystem::path& path, const std::vector<CellResult>& cells);
void emit_sweep(const std::filesystem::path& path, const SweepReport& report);

}  // namespace cmc::experiment
