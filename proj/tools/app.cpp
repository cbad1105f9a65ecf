#include "app.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>
#include <type_traits>

#include "cmc/error.hpp"
#include "cmc/ingest.hpp"
#include "cmc/io.hpp"
#include "cmc/parallel.hpp"
#include "cmc/sigcore.hpp"
#include "cmc/spectral.hpp"

namespace cmc::app {

namespace fs = std::filesystem;
using nlohmann::json;
using experiment::Task;

namespace {

std::string stat_name(spectral::FeatureStat s) { return s == spectral::FeatureStat::max ? "max" : "mean"; }

std::string taper_name(spectral::Taper t) { return t == spectral::Taper::hann ? "hann" : "rectangular"; }

json z_max_json(double z) {
    if (std::isinf(z)) return "inf";
    return z;
}

// Reads typed values out of one JSON object, collecting problems instead of
// throwing and flagging keys nobody asked for.
class Reader {
public:
    Reader(const json& obj, std::string where, std::vector<std::string>& problems)
        : obj_(obj), where_(std::move(where)), problems_(problems) {
        if (!obj_.is_object()) problem("", "must be an object");
    }

    ~Reader() {
        if (!obj_.is_object()) return;
        for (const auto& [key, value] : obj_.items()) {
            if (!seen_.count(key)) problem(key, "unknown key");
        }
    }

    Reader(const Reader&) = delete;
    Reader& operator=(const Reader&) = delete;

    const json* find(const std::string& key) {
        seen_.insert(key);
        if (!obj_.is_object() || !obj_.contains(key)) return nullptr;
        return &obj_.at(key);
    }

    void number(const std::string& key, double& dst) {
        if (const json* v = find(key)) {
            if (v->is_number()) {
                dst = v->get<double>();
            } else {
                problem(key, "must be a number");
            }
        }
    }

    template <typename Int>
    void integer(const std::string& key, Int& dst) {
        if (const json* v = find(key)) {
            if (!v->is_number_integer()) {
                problem(key, "must be an integer");
            } else if (!std::is_signed_v<Int> && !v->is_number_unsigned() && v->get<std::int64_t>() < 0) {
                problem(key, "must be non-negative");
            } else {
                dst = v->get<Int>();
            }
        }
    }

    void boolean(const std::string& key, bool& dst) {
        if (const json* v = find(key)) {
            if (v->is_boolean()) {
                dst = v->get<bool>();
            } else {
                problem(key, "must be true or false");
            }
        }
    }

    void string(const std::string& key, std::string& dst) {
        if (const json* v = find(key)) {
            if (v->is_string()) {
                dst = v->get<std::string>();
            } else {
                problem(key, "must be a string");
            }
        }
    }

    void strings(const std::string& key, std::vector<std::string>& dst) {
        if (const json* v = find(key)) {
            if (!v->is_array() || !std::all_of(v->begin(), v->end(), [](const json& e) { return e.is_string(); })) {
                problem(key, "must be an array of strings");
                return;
            }
            dst = v->get<std::vector<std::string>>();
        }
    }

    /// Parses a string-valued key with a conversion that throws InvalidArgument.
    template <typename T, typename Parse>
    void parsed(const std::string& key, T& dst, Parse parse) {
        std::string s;
        if (!find(key)) return;
        string(key, s);
        if (s.empty()) return;
        try {
            dst = parse(s);
        } catch (const InvalidArgument& e) {
            problem(key, e.what());
        }
    }

    void problem(const std::string& key, const std::string& what) {
        problems_.push_back(where_ + key + ": " + what);
    }

    const std::string& where() const { return where_; }

private:
    const json& obj_;
    std::string where_;
    std::vector<std::string>& problems_;
    std::set<std::string> seen_;
};

spectral::Taper parse_taper(const std::string& s) {
    if (s == "hann") return spectral::Taper::hann;
    if (s == "rectangular") return spectral::Taper::rectangular;
    throw InvalidArgument("unknown taper '" + s + "' (expected hann or rectangular)");
}

spectral::FeatureStat parse_stat(const std::string& s) {
    if (s == "mean") return spectral::FeatureStat::mean;
    if (s == "max") return spectral::FeatureStat::max;
    throw InvalidArgument("unknown feature statistic '" + s + "' (expected mean or max)");
}

}  // namespace

json to_json(const RunConfig& c) {
    json kernels = json::array();
    for (auto k : c.kernels) kernels.push_back(svm::to_string(k));
    const auto& p = c.pipeline;
    const auto& sv = c.synth_validate;
    const auto& sd = c.synth_dataset;
    return {
        {"dataset", c.dataset},
        {"out", c.out},
        {"seed", c.seed},
        {"jobs", c.jobs},
        {"task", experiment::to_string(c.task)},
        {"durations", c.durations},
        {"kernels", kernels},
        {"muscles", c.muscles},
        {"include_all_muscles", c.include_all_muscles},
        {"eeg_channel", p.eeg_channel},
        {"bandpass", {{"lo_hz", p.band.lo_hz}, {"hi_hz", p.band.hi_hz}, {"order", p.band.order}}},
        {"welch",
         {{"window_s", p.welch.window_s},
          {"overlap", p.welch.overlap},
          {"taper", taper_name(p.welch.taper)},
          {"detrend", p.welch.detrend}}},
        {"feature_stat", stat_name(p.feature_stat)},
        {"z_max", z_max_json(p.z_max)},
        {"rectify_emg", p.rectify_emg},
        {"svm",
         {{"c", c.cv.c},
          {"gamma", c.cv.gamma > 0.0 ? json(c.cv.gamma) : json("auto")},
          {"folds", c.cv.folds},
          {"reps", c.cv.reps},
          {"tol", c.cv.tol},
          {"max_passes", c.cv.max_passes}}},
        {"synth_validate",
         {{"gain", sv.gain},
          {"band_lo_hz", sv.band_lo_hz},
          {"band_hi_hz", sv.band_hi_hz},
          {"filter_order", sv.filter_order},
          {"target_coherence", sv.target_coherence},
          {"target_freq_hz", sv.target_freq_hz},
          {"trials", sv.trials},
          {"trial_s", sv.trial_s},
          {"fs", sv.fs}}},
        {"synth_dataset",
         {{"subject", sd.subject},
          {"fs", sd.fs},
          {"trials_per_class", sd.trials_per_class},
          {"trial_s", sd.trial_s},
          {"activation_start_s", sd.activation_start_s},
          {"activation_end_s", sd.activation_end_s},
          {"onset_jitter_s", sd.onset_jitter_s},
          {"modulation_depth", sd.modulation_depth},
          {"coupling_lo_hz", sd.coupling_lo_hz},
          {"coupling_hi_hz", sd.coupling_hi_hz},
          {"coherence_a", sd.coherence_a},
          {"coherence_b", sd.coherence_b},
          {"weight_task", sd.weight_task},
          {"extra_eeg_channels", sd.extra_eeg_channels},
          {"muscles", sd.muscles},
          {"seed", sd.seed}}},
    };
}

RunConfig config_from_json(const json& j) {
    RunConfig c;
    std::vector<std::string> problems;
    {
        Reader r(j, "", problems);
        r.string("dataset", c.dataset);
        r.string("out", c.out);
        r.integer("seed", c.seed);
        r.integer("jobs", c.jobs);
        r.parsed("task", c.task, experiment::parse_task);
        if (const json* v = r.find("durations")) {
            if (!v->is_array() || v->empty() ||
                !std::all_of(v->begin(), v->end(), [](const json& e) { return e.is_number(); })) {
                r.problem("durations", "must be a non-empty array of numbers");
            } else {
                c.durations = v->get<std::vector<double>>();
            }
        }
        std::vector<std::string> kernels;
        r.strings("kernels", kernels);
        if (r.find("kernels")) {
            c.kernels.clear();
            for (const auto& k : kernels) {
                try {
                    c.kernels.push_back(svm::parse_kernel(k));
                } catch (const InvalidArgument& e) {
                    r.problem("kernels", e.what());
                }
            }
        }
        r.strings("muscles", c.muscles);
        r.boolean("include_all_muscles", c.include_all_muscles);
        r.string("eeg_channel", c.pipeline.eeg_channel);
        if (const json* v = r.find("bandpass")) {
            Reader b(*v, "bandpass.", problems);
            b.number("lo_hz", c.pipeline.band.lo_hz);
            b.number("hi_hz", c.pipeline.band.hi_hz);
            b.integer("order", c.pipeline.band.order);
        }
        if (const json* v = r.find("welch")) {
            Reader w(*v, "welch.", problems);
            w.number("window_s", c.pipeline.welch.window_s);
            w.number("overlap", c.pipeline.welch.overlap);
            w.parsed("taper", c.pipeline.welch.taper, parse_taper);
            w.boolean("detrend", c.pipeline.welch.detrend);
        }
        r.parsed("feature_stat", c.pipeline.feature_stat, parse_stat);
        if (const json* v = r.find("z_max")) {
            if (v->is_number()) {
                c.pipeline.z_max = v->get<double>();
            } else if (v->is_string() && v->get<std::string>() == "inf") {
                c.pipeline.z_max = std::numeric_limits<double>::infinity();
            } else {
                r.problem("z_max", "must be a number or \"inf\"");
            }
        }
        r.boolean("rectify_emg", c.pipeline.rectify_emg);
        if (const json* v = r.find("svm")) {
            Reader s(*v, "svm.", problems);
            s.number("c", c.cv.c);
            if (const json* g = s.find("gamma")) {
                if (g->is_number()) {
                    c.cv.gamma = g->get<double>();
                } else if (g->is_string() && g->get<std::string>() == "auto") {
                    c.cv.gamma = 0.0;
                } else {
                    s.problem("gamma", "must be a positive number or \"auto\"");
                }
            }
            s.integer("folds", c.cv.folds);
            s.integer("reps", c.cv.reps);
            s.number("tol", c.cv.tol);
            s.integer("max_passes", c.cv.max_passes);
        }
        if (const json* v = r.find("synth_validate")) {
            Reader s(*v, "synth_validate.", problems);
            auto& sv = c.synth_validate;
            s.number("gain", sv.gain);
            s.number("band_lo_hz", sv.band_lo_hz);
            s.number("band_hi_hz", sv.band_hi_hz);
            s.integer("filter_order", sv.filter_order);
            s.number("target_coherence", sv.target_coherence);
            s.number("target_freq_hz", sv.target_freq_hz);
            s.integer("trials", sv.trials);
            s.number("trial_s", sv.trial_s);
            s.number("fs", sv.fs);
        }
        if (const json* v = r.find("synth_dataset")) {
            Reader s(*v, "synth_dataset.", problems);
            auto& sd = c.synth_dataset;
            s.string("subject", sd.subject);
            s.number("fs", sd.fs);
            s.integer("trials_per_class", sd.trials_per_class);
            s.number("trial_s", sd.trial_s);
            s.number("activation_start_s", sd.activation_start_s);
            s.number("activation_end_s", sd.activation_end_s);
            s.number("onset_jitter_s", sd.onset_jitter_s);
            s.number("modulation_depth", sd.modulation_depth);
            s.number("coupling_lo_hz", sd.coupling_lo_hz);
            s.number("coupling_hi_hz", sd.coupling_hi_hz);
            s.number("coherence_a", sd.coherence_a);
            s.number("coherence_b", sd.coherence_b);
            s.boolean("weight_task", sd.weight_task);
            s.integer("extra_eeg_channels", sd.extra_eeg_channels);
            s.strings("muscles", sd.muscles);
            s.integer("seed", sd.seed);
        }
    }

    // Value checks owned by the modules.
    for (double d : c.durations) {
        if (!segmentation::is_valid_duration(d)) {
            problems.push_back("durations: " + io::format_double(d) + " is not one of 1, 2, 4");
        }
    }
    if (c.kernels.empty()) problems.push_back("kernels: at least one kernel is required");
    if (c.jobs < 0) problems.push_back("jobs: must be >= 0");
    try {
        sigcore::validate(c.pipeline.band, 500.0);
    } catch (const InvalidArgument& e) {
        problems.push_back(std::string("bandpass: ") + e.what());
    }
    if (!(c.pipeline.welch.window_s > 0.0)) problems.push_back("welch.window_s: must be positive");
    if (!(c.pipeline.welch.overlap >= 0.0 && c.pipeline.welch.overlap < 1.0)) {
        problems.push_back("welch.overlap: must lie in [0, 1)");
    }
    if (!(c.pipeline.z_max > 0.0)) problems.push_back("z_max: must be positive");
    if (!(c.cv.c > 0.0)) problems.push_back("svm.c: must be positive");
    if (c.cv.gamma < 0.0) problems.push_back("svm.gamma: must be positive or \"auto\"");
    if (c.cv.folds < 2) problems.push_back("svm.folds: must be >= 2");
    if (c.cv.reps < 1) problems.push_back("svm.reps: must be >= 1");
    if (!(c.cv.tol > 0.0)) problems.push_back("svm.tol: must be positive");
    if (c.cv.max_passes < 1) problems.push_back("svm.max_passes: must be >= 1");
    const auto& sv = c.synth_validate;
    if (!(sv.target_coherence > 0.0 && sv.target_coherence <= 1.0)) {
        problems.push_back("synth_validate.target_coherence: must lie in (0, 1]");
    }
    if (sv.trials < 1) problems.push_back("synth_validate.trials: must be >= 1");
    if (!(sv.trial_s >= 1.0)) problems.push_back("synth_validate.trial_s: must be >= 1");
    try {
        synth::CouplingModel m;
        m.band_lo_hz = sv.band_lo_hz;
        m.band_hi_hz = sv.band_hi_hz;
        m.filter_order = sv.filter_order;
        m.fs = sv.fs;
        m.gain = sv.gain;
        synth::validate(m);
    } catch (const InvalidArgument& e) {
        problems.push_back(std::string("synth_validate: ") + e.what());
    }

    if (!problems.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw InvalidArgument(msg);
    }
    return c;
}

void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw InvalidArgument("override '" + assignment + "' is not of the form key=value");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot - start);
        if (part.empty()) throw InvalidArgument("override '" + assignment + "' has an empty key segment");
        if (!node->is_object()) throw InvalidArgument("override '" + assignment + "': '" + part + "' is not inside an object");
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        start = dot + 1;
    }
}

RunConfig resolve_config(const std::string& config_file, const std::vector<std::string>& overrides) {
    json doc = to_json(RunConfig{});
    if (!config_file.empty()) {
        const auto text = io::read_file(config_file);
        const json file = json::parse(text, nullptr, false);
        if (file.is_discarded() || !file.is_object()) {
            throw InvalidArgument("config file " + config_file + " is not a JSON object");
        }
        doc.merge_patch(file);
    }
    for (const auto& o : overrides) apply_override(doc, o);
    return config_from_json(doc);
}

namespace {

struct Context {
    const RunConfig& cfg;
    fs::path out;
    Execution exec;
    std::ostream& log;
    std::vector<std::string> outputs;

    void write(const fs::path& rel, const std::string& content) {
        io::write_file_atomic(out / rel, content);
        outputs.push_back(rel.generic_string());
    }
};

std::string class_name(Task t, int label) {
    if (t == Task::light_vs_heavy) return label < 0 ? "light" : "heavy";
    return label < 0 ? "sandpaper" : "silk";
}

std::string dur_tag(double d) { return io::format_double(d) + "s"; }

ingest::Dataset load_dataset(const RunConfig& cfg) {
    if (cfg.dataset.empty()) throw InvalidArgument("no dataset given (use --dataset or the 'dataset' key)");
    if (!fs::exists(cfg.dataset)) throw IoError("dataset path does not exist: " + cfg.dataset);
    return ingest::Dataset::load(cfg.dataset);
}

std::vector<std::string> selected_muscles(const RunConfig& cfg, const experiment::Experiment& exp) {
    if (cfg.muscles.empty()) return exp.muscles();
    auto m = experiment::canonical_order(cfg.muscles);
    for (const auto& name : m) {
        if (std::find(exp.muscles().begin(), exp.muscles().end(), name) == exp.muscles().end()) {
            throw InvalidArgument("dataset has no EMG channel '" + name + "'");
        }
    }
    return m;
}

void cmd_preprocess(Context& ctx) {
    const auto ds = load_dataset(ctx.cfg);
    experiment::Experiment exp(ds, ctx.cfg.pipeline, ctx.cfg.cv, ctx.cfg.seed, ctx.exec);
    const auto muscles = selected_muscles(ctx.cfg, exp);
    std::ostringstream seg_csv;
    std::ostringstream rej_csv;
    seg_csv << "dur_s,muscle,trial_id,recording,t0_s,start_index,n_samples,file,eeg_channel,emg_channel\n";
    rej_csv << "dur_s,trial_id,muscle,reason\n";
    std::size_t kept = 0;
    std::size_t rejected = 0;
    for (double dur : ctx.cfg.durations) {
        const auto batch = exp.segment(dur);
        for (const auto& m : muscles) {
            const auto& entries = batch.by_muscle.at(m);
            if (entries.empty()) continue;
            const fs::path rel = fs::path("segments") / dur_tag(dur) / (m + ".bin");
            std::vector<std::vector<float>> channels;
            for (std::size_t i = 0; i < entries.size(); ++i) {
                const auto& e = entries[i];
                for (const auto* ts : {&e.segment.eeg, &e.segment.emg}) {
                    std::vector<float> ch(ts->size());
                    for (std::size_t k = 0; k < ch.size(); ++k) ch[k] = static_cast<float>((*ts)[k]);
                    channels.push_back(std::move(ch));
                }
                seg_csv << io::format_double(dur) << ',' << m << ',' << e.segment.trial_id << ','
                        << e.recording << ',' << io::format_double(e.t0_s) << ','
                        << e.segment.start_index << ',' << e.segment.eeg.size() << ','
                        << rel.generic_string() << ',' << 2 * i << ',' << 2 * i + 1 << '\n';
            }
            const fs::path target = ctx.out / rel;
            fs::create_directories(target.parent_path());
            fs::path tmp = target;
            tmp += ".tmp";
            ingest::write_recording(tmp, channels);
            fs::rename(tmp, target);
            ctx.outputs.push_back(rel.generic_string());
            kept += entries.size();
        }
        for (const auto& r : batch.rejections) {
            if (std::find(muscles.begin(), muscles.end(), r.muscle) == muscles.end()) continue;
            rej_csv << io::format_double(r.dur_s) << ',' << r.trial_id << ',' << r.muscle << ','
                    << r.reason << '\n';
            ++rejected;
        }
    }
    ctx.write("segments.csv", seg_csv.str());
    ctx.write("rejections.csv", rej_csv.str());
    ctx.log << "preprocess: " << kept << " segments kept, " << rejected << " rejected\n";
}

void cmd_cmc(Context& ctx) {
    const auto ds = load_dataset(ctx.cfg);
    experiment::Experiment exp(ds, ctx.cfg.pipeline, ctx.cfg.cv, ctx.cfg.seed, ctx.exec);
    const auto muscles = selected_muscles(ctx.cfg, exp);
    const Task task = ctx.cfg.task;
    std::map<int, int> label_of;
    for (const auto& lt : experiment::label_trials(ds.manifest(), task)) label_of[lt.trial_id] = lt.label;

    std::ostringstream feat_csv;
    feat_csv << "dur_s,muscle,trial_id,class";
    for (const auto& b : spectral::default_bands()) feat_csv << ',' << b.name;
    feat_csv << '\n';
    json summary{{"task", experiment::to_string(task)}, {"durations", json::array()}};

    for (double dur : ctx.cfg.durations) {
        json dur_entry{{"dur_s", dur}, {"spectra", json::array()}};
        std::size_t l = 0;
        for (const auto& m : muscles) {
            const auto& feats = exp.features(m, dur);
            std::map<int, std::vector<spectral::CmcSpectrum>> by_class;
            for (const auto& tf : feats) {
                const auto it = label_of.find(tf.trial_id);
                feat_csv << io::format_double(dur) << ',' << m << ',' << tf.trial_id << ','
                         << (it == label_of.end() ? "none" : class_name(task, it->second));
                for (double v : tf.features) feat_csv << ',' << io::format_double(v);
                feat_csv << '\n';
                if (it != label_of.end()) by_class[it->second].push_back(tf.cmc);
            }
            for (int label : {-1, 1}) {
                const auto& spectra = by_class[label];
                const std::string cls = class_name(task, label);
                if (spectra.empty()) {
                    dur_entry["spectra"].push_back({{"muscle", m}, {"class", cls}, {"trials", 0}});
                    continue;
                }
                const fs::path rel = fs::path("cmc") / (experiment::to_string(task) + "_" + m + "_" +
                                                        dur_tag(dur) + "_" + cls + ".csv");
                ctx.write(rel, spectral::stats_csv(spectral::trial_stats(spectra)));
                dur_entry["spectra"].push_back(
                    {{"muscle", m}, {"class", cls}, {"trials", spectra.size()}, {"file", rel.generic_string()}});
            }
        }
        const auto n = static_cast<std::size_t>(std::llround(dur * ds.manifest().fs));
        const auto win = static_cast<std::size_t>(std::llround(ctx.cfg.pipeline.welch.window_s * ds.manifest().fs));
        const auto step = std::max<std::size_t>(
            1, win - static_cast<std::size_t>(std::llround(ctx.cfg.pipeline.welch.overlap * static_cast<double>(win))));
        l = spectral::subwindow_count(n, win, step);
        dur_entry["subwindows"] = l;
        if (l >= 2) dur_entry["confidence_level_95"] = spectral::confidence_level(l, 0.05);
        summary["durations"].push_back(dur_entry);
    }
    ctx.write("features.csv", feat_csv.str());
    ctx.write("cmc_summary.json", summary.dump(2) + "\n");
    ctx.log << "cmc: spectra for " << muscles.size() << " muscles x " << ctx.cfg.durations.size()
            << " durations\n";
}

svm::KernelSpec kernel_spec(const RunConfig& cfg, svm::KernelKind k) {
    return {k, k == svm::KernelKind::rbf ? cfg.cv.gamma : 0.0};
}

void cmd_classify(Context& ctx) {
    const auto ds = load_dataset(ctx.cfg);
    experiment::Experiment exp(ds, ctx.cfg.pipeline, ctx.cfg.cv, ctx.cfg.seed, ctx.exec);
    const auto muscles = selected_muscles(ctx.cfg, exp);
    std::vector<experiment::CellResult> cells;
    for (double dur : ctx.cfg.durations) {
        for (auto k : ctx.cfg.kernels) {
            std::vector<std::vector<std::string>> sets;
            for (const auto& m : muscles) sets.push_back({m});
            if (ctx.cfg.include_all_muscles && muscles.size() > 1) sets.push_back(muscles);
            for (const auto& s : sets) {
                cells.push_back(exp.run_cell({ctx.cfg.task, dur, kernel_spec(ctx.cfg, k), s}));
            }
        }
    }
    ctx.write("classify/cells.csv", experiment::cells_csv(cells));
    ctx.write("classify/summary.csv", experiment::cells_summary_csv(cells));
    json arr = json::array();
    for (const auto& c : cells) arr.push_back(experiment::to_json(c));
    std::stable_sort(arr.begin(), arr.end(), [](const json& a, const json& b) {
        return std::tie(a["task"], a["muscles"], a["dur_s"], a["kernel"]) <
               std::tie(b["task"], b["muscles"], b["dur_s"], b["kernel"]);
    });
    ctx.write("classify/cells.json", arr.dump(2) + "\n");
    ctx.log << experiment::cells_summary_csv(cells);
}

void cmd_sweep(Context& ctx) {
    const auto ds = load_dataset(ctx.cfg);
    experiment::Experiment exp(ds, ctx.cfg.pipeline, ctx.cfg.cv, ctx.cfg.seed, ctx.exec);
    const auto muscles = selected_muscles(ctx.cfg, exp);
    for (double dur : ctx.cfg.durations) {
        for (auto k : ctx.cfg.kernels) {
            const auto rep = exp.run_sweep(ctx.cfg.task, dur, kernel_spec(ctx.cfg, k), muscles);
            const std::string stem = "sweep/" + experiment::to_string(ctx.cfg.task) + "_" + dur_tag(dur) +
                                     "_" + svm::to_string(k);
            ctx.write(stem + ".csv", experiment::sweep_csv(rep));
            ctx.write(stem + "_subsets.csv", experiment::sweep_subsets_csv(rep));
            ctx.write(stem + ".json", experiment::to_json(rep).dump(2) + "\n");
            ctx.log << stem << '\n' << experiment::sweep_csv(rep);
        }
    }
}

void cmd_synth_validate(Context& ctx) {
    const auto& sv = ctx.cfg.synth_validate;
    synth::CouplingModel m;
    m.gain = sv.gain;
    m.band_lo_hz = sv.band_lo_hz;
    m.band_hi_hz = sv.band_hi_hz;
    m.filter_order = sv.filter_order;
    m.fs = sv.fs;
    m.seed = ctx.cfg.seed;
    const auto n = static_cast<std::size_t>(std::llround(sv.trial_s * sv.fs));
    const auto& welch = ctx.cfg.pipeline.welch;

    // Evaluate the oracle on the estimator's own grid.
    const std::vector<double> probe(n, 0.0);
    const auto grid = spectral::welch_spectra(probe, probe, sv.fs, welch).sx.freqs;
    double f0 = sv.target_freq_hz;
    if (!(f0 > 0.0)) f0 = sigcore::center_frequency(m.band(), sv.fs);
    const auto nearest = std::min_element(grid.begin(), grid.end(), [&](double a, double b) {
        return std::fabs(a - f0) < std::fabs(b - f0);
    });
    const auto k0 = static_cast<std::size_t>(nearest - grid.begin());
    f0 = grid[k0];
    if (sv.gain == 0.0) throw InvalidArgument("synth_validate: gain 0 leaves nothing to couple");
    m.noise_var = synth::noise_var_for_coherence(m, f0, sv.target_coherence);

    std::vector<spectral::CmcSpectrum> spectra(sv.trials);
    std::size_t l = 0;
    for_each_index(sv.trials, ctx.exec, [&](std::size_t i) {
        const auto [x, y] = synth::generate_pair(synth::for_trial(m, i), n);
        const auto w = spectral::welch_spectra(x, y, welch);
        spectra[i] = spectral::cmc(w);
        if (i == 0) l = w.subwindows;
    });
    const auto stats = spectral::trial_stats(spectra);
    const auto theory = synth::theoretical_coherence(m, stats.freqs);

    std::ostringstream csv;
    csv << "freq_hz,estimated_mean,theoretical,abs_error\n";
    double max_band_err = 0.0;
    for (std::size_t k = 0; k < stats.freqs.size(); ++k) {
        const double err = std::fabs(stats.mean[k] - theory[k]);
        csv << io::format_double(stats.freqs[k]) << ',' << io::format_double(stats.mean[k]) << ','
            << io::format_double(theory[k]) << ',' << io::format_double(err) << '\n';
        if (stats.freqs[k] >= sv.band_lo_hz && stats.freqs[k] < sv.band_hi_hz) {
            max_band_err = std::max(max_band_err, err);
        }
    }
    const double err0 = std::fabs(stats.mean[k0] - theory[k0]);
    ctx.write("synth_validate.csv", csv.str());
    const json summary{{"f0_hz", f0},
                       {"noise_var", m.noise_var},
                       {"trials", sv.trials},
                       {"subwindows", l},
                       {"estimated_at_f0", stats.mean[k0]},
                       {"theoretical_at_f0", theory[k0]},
                       {"abs_error_at_f0", err0},
                       {"max_abs_error_in_band", max_band_err}};
    ctx.write("synth_validate.json", summary.dump(2) + "\n");
    ctx.log << "synth-validate: f0 = " << io::format_double(f0) << " Hz, estimated "
            << io::format_double(stats.mean[k0]) << ", theoretical " << io::format_double(theory[k0])
            << ", abs error " << io::format_double(err0) << '\n';
}

void cmd_validate_dataset(Context& ctx) {
    if (ctx.cfg.dataset.empty()) throw InvalidArgument("no dataset given (use --dataset or the 'dataset' key)");
    json report;
    try {
        const auto ds = ingest::Dataset::load(ctx.cfg.dataset);
        const auto& m = ds.manifest();
        json counts = json::array();
        for (const auto& c : ingest::check_reference_counts(m)) {
            counts.push_back({{"condition", c.condition},
                              {"expected", c.expected},
                              {"actual", c.actual},
                              {"matches", c.matches()}});
            ctx.log << c.condition << ": " << c.actual << " (reference " << c.expected << ")"
                    << (c.matches() ? "" : " differs") << '\n';
        }
        report = {{"valid", true},
                  {"problems", json::array()},
                  {"subject", m.subject},
                  {"profile", m.profile},
                  {"fs", m.fs},
                  {"eeg_channels", m.eeg_channels.size()},
                  {"emg_channels", m.emg_channels.size()},
                  {"recordings", m.recordings.size()},
                  {"trials", m.trials.size()},
                  {"reference_counts", counts}};
        ctx.write("validation.json", report.dump(2) + "\n");
        ctx.log << "dataset is valid: " << m.trials.size() << " trials\n";
    } catch (const ValidationError& e) {
        report = {{"valid", false}, {"problems", e.problems()}};
        ctx.write("validation.json", report.dump(2) + "\n");
        throw;
    }
}

void cmd_synth_dataset(Context& ctx) {
    const auto n = synth::write_dataset(ctx.cfg.synth_dataset, ctx.out);
    ctx.outputs.push_back(ingest::kManifestName);
    for (const auto& r : ingest::Dataset::load(ctx.out).manifest().recordings) ctx.outputs.push_back(r.file);
    ctx.log << "synth-dataset: " << n << " trials written to " << ctx.out.string() << '\n';
}

}  // namespace

int run_command(const std::string& command, const RunConfig& cfg, std::ostream& out,
                std::ostream& err) {
    const auto& known = commands();
    if (std::find(known.begin(), known.end(), command) == known.end()) {
        err << "cmc: unknown command '" << command << "'\n";
        return 2;
    }
    Context ctx{cfg, fs::path(cfg.out), cfg.jobs == 1 ? Execution::serial : Execution::parallel, out, {}};
    json status{{"command", command}, {"status", "running"}};
    try {
        if (cfg.jobs > 0) set_max_threads(cfg.jobs);
        io::write_file_atomic(ctx.out / "config.resolved.json", to_json(cfg).dump(2) + "\n");
        io::write_file_atomic(ctx.out / "run_status.json", status.dump(2) + "\n");

        if (command == "preprocess") {
            cmd_preprocess(ctx);
        } else if (command == "cmc") {
            cmd_cmc(ctx);
        } else if (command == "classify") {
            cmd_classify(ctx);
        } else if (command == "sweep") {
            cmd_sweep(ctx);
        } else if (command == "synth-validate") {
            cmd_synth_validate(ctx);
        } else if (command == "validate-dataset") {
            cmd_validate_dataset(ctx);
        } else {
            cmd_synth_dataset(ctx);
        }
        status["status"] = "ok";
        status["outputs"] = ctx.outputs;
        io::write_file_atomic(ctx.out / "run_status.json", status.dump(2) + "\n");
        return 0;
    } catch (const std::exception& e) {
        err << "cmc " << command << ": error: " << e.what() << '\n';
        status["status"] = "failed";
        status["error"] = e.what();
        if (const auto* v = dynamic_cast<const ValidationError*>(&e)) status["problems"] = v->problems();
        // Anything listed here was written before the failure and is partial.
        status["partial_outputs"] = ctx.outputs;
        try {
            io::write_file_atomic(ctx.out / "run_status.json", status.dump(2) + "\n");
        } catch (const std::exception& inner) {
            err << "cmc " << command << ": cannot record failure: " << inner.what() << '\n';
        }
        return 1;
    }
}

}  // namespace cmc::app
