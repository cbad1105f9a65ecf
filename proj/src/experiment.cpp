#include "cmc/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cmc/error.hpp"
#include "cmc/io.hpp"
#include "cmc/random.hpp"

namespace cmc::experiment {

using segmentation::Surface;

std::string to_string(Task t) {
    return t == Task::light_vs_heavy ? "light_vs_heavy" : "sandpaper_vs_silk";
}

Task parse_task(const std::string& name) {
    if (name == "light_vs_heavy") return Task::light_vs_heavy;
    if (name == "sandpaper_vs_silk") return Task::sandpaper_vs_silk;
    throw InvalidArgument("unknown task '" + name + "' (expected light_vs_heavy or sandpaper_vs_silk)");
}

std::vector<std::string> canonical_order(std::vector<std::string> muscles) {
    auto rank = [](const std::string& m) {
        const auto it = std::find(kCanonicalMuscles.begin(), kCanonicalMuscles.end(), m);
        return static_cast<std::size_t>(it - kCanonicalMuscles.begin());
    };
    std::sort(muscles.begin(), muscles.end(), [&](const std::string& a, const std::string& b) {
        const auto ra = rank(a);
        const auto rb = rank(b);
        return ra != rb ? ra < rb : a < b;
    });
    muscles.erase(std::unique(muscles.begin(), muscles.end()), muscles.end());
    return muscles;
}

std::string join_muscles(const std::vector<std::string>& muscles) {
    std::string out;
    for (std::size_t i = 0; i < muscles.size(); ++i) {
        if (i) out += '+';
        out += muscles[i];
    }
    return out;
}

std::vector<LabeledTrial> label_trials(const ingest::DatasetManifest& m, Task task) {
    std::vector<LabeledTrial> out;
    std::size_t neg = 0;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < m.trials.size(); ++i) {
        const auto& c = m.trials[i].condition;
        int label = 0;
        if (task == Task::light_vs_heavy) {
            label = c.weight_g == 165 ? -1 : c.weight_g == 660 ? 1 : 0;
        } else {
            label = c.surface == Surface::sandpaper ? -1 : c.surface == Surface::silk ? 1 : 0;
        }
        if (label == 0) continue;
        (label < 0 ? neg : pos) += 1;
        out.push_back({i, m.trials[i].trial_id, label});
    }
    if (neg == 0 || pos == 0) {
        throw InsufficientData("task " + to_string(task) + " leaves an empty class (" +
                               std::to_string(neg) + " vs " + std::to_string(pos) + " trials)");
    }
    return out;
}

std::string cell_key(const TaskSpec& spec) {
    return to_string(spec.task) + "|" + join_muscles(canonical_order(spec.muscles)) + "|" +
           io::format_double(spec.dur_s) + "|" + svm::to_string(spec.kernel.kind);
}

std::uint64_t cell_seed(std::uint64_t master, const std::string& key) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char ch : key) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return rng::splitmix64(master ^ h);
}

std::vector<std::vector<std::string>> subsets_of_size(const std::vector<std::string>& muscles,
                                                      std::size_t size) {
    std::vector<std::vector<std::string>> out;
    const std::size_t n = muscles.size();
    if (size == 0 || size > n) return out;
    std::vector<std::size_t> idx(size);
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
        std::vector<std::string> s;
        for (std::size_t i : idx) s.push_back(muscles[i]);
        out.push_back(std::move(s));
        std::size_t pos = size;
        while (pos > 0 && idx[pos - 1] == n - size + pos - 1) --pos;
        if (pos == 0) break;
        ++idx[pos - 1];
        for (std::size_t j = pos; j < size; ++j) idx[j] = idx[j - 1] + 1;
    }
    return out;
}

struct Experiment::Prepared {
    TimeSeries eeg;
    std::map<std::string, TimeSeries> emg_for_cmc;
    std::map<std::string, TimeSeries> envelope;
};

Experiment::Experiment(const ingest::Dataset& dataset, PipelineConfig pipeline, CvConfig cv,
                       std::uint64_t master_seed, Execution exec)
    : dataset_(dataset), pipeline_(std::move(pipeline)), cv_(cv), master_seed_(master_seed),
      exec_(exec), muscles_(canonical_order(dataset.manifest().emg_channels)) {
    const auto& eeg = dataset.manifest().eeg_channels;
    if (std::find(eeg.begin(), eeg.end(), pipeline_.eeg_channel) == eeg.end()) {
        throw InvalidArgument("dataset has no EEG channel '" + pipeline_.eeg_channel + "'");
    }
}

Experiment::~Experiment() = default;

const Experiment::Prepared& Experiment::prepared(const std::string& recording) const {
    if (auto it = prepared_.find(recording); it != prepared_.end()) return *it->second;
    const auto& band = pipeline_.band;
    auto eeg = sigcore::bandpass(dataset_.channel(recording, pipeline_.eeg_channel), band);
    std::map<std::string, TimeSeries> emg_cmc;
    std::map<std::string, TimeSeries> env;
    for (const auto& m : muscles_) {
        auto filtered = sigcore::bandpass(dataset_.channel(recording, m), band);
        auto rect = sigcore::rectify(filtered);
        env.emplace(m, sigcore::moving_average(rect, segmentation::kEnvelopeWindowS));
        emg_cmc.emplace(m, pipeline_.rectify_emg ? std::move(rect) : std::move(filtered));
    }
    auto p = std::make_shared<const Prepared>(Prepared{std::move(eeg), std::move(emg_cmc), std::move(env)});
    return *prepared_.emplace(recording, std::move(p)).first->second;
}

SegmentBatch Experiment::segment(double dur_s) const {
    if (!segmentation::is_valid_duration(dur_s)) {
        throw InvalidArgument("segment duration must be 1, 2 or 4 s, got " + io::format_double(dur_s));
    }
    const auto& trials = dataset_.manifest().trials;
    for (const auto& r : dataset_.manifest().recordings) prepared(r.id);

    struct Outcome {
        std::vector<std::optional<SegmentEntry>> entries;  // per muscle
        std::vector<Rejection> rejections;
    };
    std::vector<Outcome> outcomes(trials.size());
    for_each_index(trials.size(), exec_, [&](std::size_t i) {
        const auto& t = trials[i];
        const Prepared& p = *prepared_.at(t.recording);
        const std::size_t first = dataset_.trial_first_sample(t);
        const std::size_t count = dataset_.trial_sample_count(t);
        const double fs = dataset_.manifest().fs;
        Outcome& out = outcomes[i];
        out.entries.resize(muscles_.size());
        for (std::size_t mi = 0; mi < muscles_.size(); ++mi) {
            const auto& m = muscles_[mi];
            try {
                const auto env = p.envelope.at(m).slice(first, count);
                const auto act = segmentation::find_activation(env, segmentation::compute_threshold(env));
                const double t0 = static_cast<double>(first) / fs + act.t0;
                auto seg = segmentation::extract_segment(p.eeg, p.emg_for_cmc.at(m), t0, dur_s,
                                                         t.condition, t.trial_id);
                out.entries[mi] = SegmentEntry{std::move(seg), m, t.recording, t0};
            } catch (const NoActivation&) {
                out.rejections.push_back({t.trial_id, m, dur_s, "no_activation"});
            } catch (const OutOfBounds&) {
                out.rejections.push_back({t.trial_id, m, dur_s, "out_of_bounds"});
            }
        }
    });

    SegmentBatch batch;
    batch.dur_s = dur_s;
    for (std::size_t mi = 0; mi < muscles_.size(); ++mi) {
        std::vector<SegmentEntry> entries;
        for (auto& o : outcomes) {
            if (o.entries[mi]) entries.push_back(std::move(*o.entries[mi]));
        }
        std::sort(entries.begin(), entries.end(), [](const SegmentEntry& a, const SegmentEntry& b) {
            return a.segment.trial_id < b.segment.trial_id;
        });

        // Artifact rejection works on plain segments; map survivors back by trial id.
        std::vector<segmentation::TrialSegment> segs;
        segs.reserve(entries.size());
        for (const auto& e : entries) segs.push_back(e.segment);
        std::vector<int> rejected;
        segmentation::reject_artifacts(std::move(segs), pipeline_.z_max, &rejected);
        std::vector<SegmentEntry> kept;
        for (auto& e : entries) {
            if (std::find(rejected.begin(), rejected.end(), e.segment.trial_id) != rejected.end()) {
                batch.rejections.push_back({e.segment.trial_id, muscles_[mi], dur_s, "artifact"});
            } else {
                kept.push_back(std::move(e));
            }
        }
        batch.by_muscle.emplace(muscles_[mi], std::move(kept));
    }
    for (auto& o : outcomes) {
        batch.rejections.insert(batch.rejections.end(), o.rejections.begin(), o.rejections.end());
    }
    std::stable_sort(batch.rejections.begin(), batch.rejections.end(),
                     [](const Rejection& a, const Rejection& b) {
                         return a.trial_id != b.trial_id ? a.trial_id < b.trial_id : a.muscle < b.muscle;
                     });
    return batch;
}

void Experiment::build(double dur_s) {
    if (features_.count(dur_s)) return;
    SegmentBatch batch = segment(dur_s);
    const auto& bands = spectral::default_bands();
    std::map<std::string, std::vector<TrialFeatures>> per_muscle;
    for (const auto& [muscle, entries] : batch.by_muscle) {
        std::vector<spectral::SegmentPair> pairs;
        pairs.reserve(entries.size());
        for (const auto& e : entries) pairs.push_back({e.segment.eeg.samples(), e.segment.emg.samples()});
        auto spectra = spectral::batch_cmc(pairs, dataset_.manifest().fs, pipeline_.welch, exec_);
        std::vector<TrialFeatures> feats;
        feats.reserve(entries.size());
        for (std::size_t i = 0; i < entries.size(); ++i) {
            auto f = spectral::band_features(spectra[i], bands, pipeline_.feature_stat);
            feats.push_back({entries[i].segment.trial_id, std::move(spectra[i]), std::move(f)});
        }
        per_muscle.emplace(muscle, std::move(feats));
    }
    features_.emplace(dur_s, std::move(per_muscle));
    rejections_.emplace(dur_s, std::move(batch.rejections));
}

const std::vector<TrialFeatures>& Experiment::features(const std::string& muscle, double dur_s) {
    build(dur_s);
    const auto& per = features_.at(dur_s);
    const auto it = per.find(muscle);
    if (it == per.end()) throw InvalidArgument("dataset has no EMG channel '" + muscle + "'");
    return it->second;
}

const std::vector<Rejection>& Experiment::rejections(double dur_s) {
    build(dur_s);
    return rejections_.at(dur_s);
}

std::vector<svm::Sample> Experiment::samples(Task task, const std::vector<std::string>& muscles,
                                             double dur_s) {
    if (muscles.empty()) throw InvalidArgument("muscle subset is empty");
    const auto ordered = canonical_order(muscles);
    std::vector<std::map<int, const std::vector<double>*>> lookup;
    for (const auto& m : ordered) {
        std::map<int, const std::vector<double>*> by_id;
        for (const auto& tf : features(m, dur_s)) by_id.emplace(tf.trial_id, &tf.features);
        lookup.push_back(std::move(by_id));
    }
    std::vector<svm::Sample> out;
    for (const auto& lt : label_trials(dataset_.manifest(), task)) {
        svm::Sample s;
        s.label = lt.label;
        bool complete = true;
        for (const auto& by_id : lookup) {
            const auto it = by_id.find(lt.trial_id);
            if (it == by_id.end()) {
                complete = false;
                break;
            }
            s.features.insert(s.features.end(), it->second->begin(), it->second->end());
        }
        if (complete) out.push_back(std::move(s));
    }
    return out;
}

namespace {

CellResult evaluate(const TaskSpec& spec, const std::vector<svm::Sample>& samples,
                    const CvConfig& cv, std::uint64_t master, Execution exec) {
    CellResult r;
    r.spec = spec;
    r.spec.muscles = canonical_order(spec.muscles);
    for (const auto& s : samples) (s.label < 0 ? r.n_neg : r.n_pos) += 1;
    if (r.n_neg < cv.folds || r.n_pos < cv.folds) {
        r.sufficient = false;
        return r;
    }
    svm::TrainParams p;
    p.c = cv.c;
    p.tol = cv.tol;
    p.max_passes = cv.max_passes;
    r.cv = svm::cross_validate(samples, spec.kernel, p, cv.folds, cv.reps,
                               cell_seed(master, cell_key(r.spec)), exec);
    return r;
}

}  // namespace

CellResult Experiment::run_cell(const TaskSpec& spec) {
    return evaluate(spec, samples(spec.task, spec.muscles, spec.dur_s), cv_, master_seed_, exec_);
}

SweepReport Experiment::run_sweep(Task task, double dur_s, const svm::KernelSpec& kernel,
                                  std::vector<std::string> muscles) {
    build(dur_s);
    muscles = muscles.empty() ? muscles_ : canonical_order(std::move(muscles));
    for (const auto& m : muscles) {
        if (std::find(muscles_.begin(), muscles_.end(), m) == muscles_.end()) {
            throw InvalidArgument("dataset has no EMG channel '" + m + "'");
        }
    }
    std::vector<TaskSpec> specs;
    for (std::size_t size = 1; size <= muscles.size(); ++size) {
        for (auto& subset : subsets_of_size(muscles, size)) {
            specs.push_back({task, dur_s, kernel, std::move(subset)});
        }
    }
    std::vector<std::vector<svm::Sample>> data;
    data.reserve(specs.size());
    for (const auto& s : specs) data.push_back(samples(task, s.muscles, dur_s));

    // Cells in parallel, each cross-validation serial inside.
    std::vector<CellResult> cells(specs.size());
    for_each_index(specs.size(), exec_, [&](std::size_t i) {
        cells[i] = evaluate(specs[i], data[i], cv_, master_seed_, Execution::serial);
    });

    SweepReport rep;
    rep.task = task;
    rep.dur_s = dur_s;
    rep.kernel = kernel;
    for (std::size_t size = 1; size <= muscles.size(); ++size) {
        SizeSummary s;
        s.size = size;
        std::vector<double> accs;
        for (const auto& c : cells) {
            if (c.spec.muscles.size() != size) continue;
            s.subsets.push_back({c.spec.muscles, c.sufficient, c.sufficient ? c.cv.mean : 0.0});
            if (!c.sufficient) continue;
            if (accs.empty() || c.cv.mean > s.best) {
                s.best = c.cv.mean;
                s.best_subset = c.spec.muscles;
            }
            accs.push_back(c.cv.mean);
        }
        s.sufficient = !accs.empty();
        if (s.sufficient) {
            const auto n = static_cast<double>(accs.size());
            s.mean = std::accumulate(accs.begin(), accs.end(), 0.0) / n;
            double ss = 0.0;
            for (double a : accs) ss += (a - s.mean) * (a - s.mean);
            s.std = std::sqrt(ss / n);
        }
        rep.sizes.push_back(std::move(s));
    }
    return rep;
}

namespace {

std::vector<const CellResult*> sorted_cells(const std::vector<CellResult>& cells) {
    std::vector<const CellResult*> v;
    for (const auto& c : cells) v.push_back(&c);
    std::stable_sort(v.begin(), v.end(), [](const CellResult* a, const CellResult* b) {
        return cell_key(a->spec) < cell_key(b->spec);
    });
    return v;
}

}  // namespace

std::string cells_csv(const std::vector<CellResult>& cells) {
    std::ostringstream os;
    os << "task,muscles,dur_s,kernel,fold,accuracy\n";
    for (const auto* c : sorted_cells(cells)) {
        const std::string prefix = to_string(c->spec.task) + "," + join_muscles(c->spec.muscles) +
                                   "," + io::format_double(c->spec.dur_s) + "," +
                                   svm::to_string(c->spec.kernel.kind) + ",";
        if (!c->sufficient) {
            os << prefix << "NA,insufficient_data\n";
            continue;
        }
        for (std::size_t f = 0; f < c->cv.accuracies.size(); ++f) {
            os << prefix << f << ',' << io::format_double(c->cv.accuracies[f]) << '\n';
        }
    }
    return os.str();
}

std::string cells_summary_csv(const std::vector<CellResult>& cells) {
    std::ostringstream os;
    os << "task,muscles,dur_s,kernel,status,n_neg,n_pos,mean,std,balanced_mean\n";
    for (const auto* c : sorted_cells(cells)) {
        os << to_string(c->spec.task) << ',' << join_muscles(c->spec.muscles) << ','
           << io::format_double(c->spec.dur_s) << ',' << svm::to_string(c->spec.kernel.kind) << ','
           << (c->sufficient ? "ok" : "insufficient_data") << ',' << c->n_neg << ',' << c->n_pos
           << ',';
        if (c->sufficient) {
            os << io::format_double(c->cv.mean) << ',' << io::format_double(c->cv.std) << ','
               << io::format_double(c->cv.balanced_mean) << '\n';
        } else {
            os << "NA,NA,NA\n";
        }
    }
    return os.str();
}

std::string sweep_csv(const SweepReport& report) {
    std::ostringstream os;
    os << "size,mean,std,best_subset,best_accuracy\n";
    for (const auto& s : report.sizes) {
        os << s.size << ',';
        if (s.sufficient) {
            os << io::format_double(s.mean) << ',' << io::format_double(s.std) << ','
               << join_muscles(s.best_subset) << ',' << io::format_double(s.best) << '\n';
        } else {
            os << "NA,NA,NA,NA\n";
        }
    }
    return os.str();
}

std::string sweep_subsets_csv(const SweepReport& report) {
    std::ostringstream os;
    os << "size,muscles,status,accuracy\n";
    for (const auto& s : report.sizes) {
        for (const auto& sub : s.subsets) {
            os << s.size << ',' << join_muscles(sub.muscles) << ','
               << (sub.sufficient ? "ok," + io::format_double(sub.accuracy) : std::string("insufficient_data,NA"))
               << '\n';
        }
    }
    return os.str();
}

nlohmann::json to_json(const CellResult& cell) {
    nlohmann::json j{{"task", to_string(cell.spec.task)},
                     {"muscles", cell.spec.muscles},
                     {"dur_s", cell.spec.dur_s},
                     {"kernel", svm::to_string(cell.spec.kernel.kind)},
                     {"status", cell.sufficient ? "ok" : "insufficient_data"},
                     {"n_neg", cell.n_neg},
                     {"n_pos", cell.n_pos}};
    if (cell.sufficient) {
        j["mean"] = cell.cv.mean;
        j["std"] = cell.cv.std;
        j["balanced_mean"] = cell.cv.balanced_mean;
        j["folds"] = cell.cv.k;
        j["reps"] = cell.cv.reps;
        j["seed"] = cell.cv.seed;
        j["accuracies"] = cell.cv.accuracies;
    }
    return j;
}

nlohmann::json to_json(const SweepReport& report) {
    nlohmann::json sizes = nlohmann::json::array();
    for (const auto& s : report.sizes) {
        nlohmann::json subsets = nlohmann::json::array();
        for (const auto& sub : s.subsets) {
            subsets.push_back({{"muscles", sub.muscles},
                               {"status", sub.sufficient ? "ok" : "insufficient_data"},
                               {"accuracy", sub.accuracy}});
        }
        sizes.push_back({{"size", s.size},
                         {"status", s.sufficient ? "ok" : "insufficient_data"},
                         {"mean", s.mean},
                         {"std", s.std},
                         {"best", s.best},
                         {"best_subset", s.best_subset},
                         {"subsets", subsets}});
    }
    return {{"task", to_string(report.task)},
            {"dur_s", report.dur_s},
            {"kernel", svm::to_string(report.kernel.kind)},
            {"sizes", sizes}};
}

void emit_cells(const std::filesystem::path& path, const std::vector<CellResult>& cells) {
    io::write_file_atomic(path, cells_csv(cells));
}

void emit_sweep(const std::filesystem::path& path, const SweepReport& report) {
    io::write_file_atomic(path, sweep_csv(report));
}

}  // namespace cmc::experiment
