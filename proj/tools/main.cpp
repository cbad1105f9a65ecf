#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "app.hpp"
#include "cmc/error.hpp"

namespace {

std::string json_list(const std::vector<std::string>& items, bool quote) {
    std::string s = "[";
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) s += ',';
        s += quote ? "\"" + items[i] + "\"" : items[i];
    }
    return s + "]";
}

struct Flags {
    std::string config;
    std::optional<std::string> dataset, out, task, eeg_channel, feature_stat, z_max, gamma;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::optional<double> c;
    std::optional<std::size_t> folds, reps;
    std::vector<std::string> durations, kernels, muscles, sets;

    std::vector<std::string> overrides() const {
        std::vector<std::string> o;
        auto str = [&](const char* key, const std::optional<std::string>& v) {
            if (v) o.push_back(std::string(key) + "=\"" + *v + "\"");
        };
        str("dataset", dataset);
        str("out", out);
        str("task", task);
        str("eeg_channel", eeg_channel);
        str("feature_stat", feature_stat);
        if (seed) o.push_back("seed=" + std::to_string(*seed));
        if (jobs) o.push_back("jobs=" + std::to_string(*jobs));
        if (c) o.push_back("svm.c=" + std::to_string(*c));
        if (folds) o.push_back("svm.folds=" + std::to_string(*folds));
        if (reps) o.push_back("svm.reps=" + std::to_string(*reps));
        if (gamma) o.push_back("svm.gamma=" + (*gamma == "auto" ? std::string("\"auto\"") : *gamma));
        if (z_max) o.push_back("z_max=" + (*z_max == "inf" ? std::string("\"inf\"") : *z_max));
        if (!durations.empty()) o.push_back("durations=" + json_list(durations, false));
        if (!kernels.empty()) o.push_back("kernels=" + json_list(kernels, true));
        if (!muscles.empty()) o.push_back("muscles=" + json_list(muscles, true));
        o.insert(o.end(), sets.begin(), sets.end());
        return o;
    }
};

void add_common(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "JSON run configuration");
    sub->add_option("--dataset", f.dataset, "dataset root holding manifest.json");
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--seed", f.seed, "master seed");
    sub->add_option("--jobs", f.jobs, "worker cap (1 = serial path)");
    sub->add_option("--task", f.task, "light_vs_heavy or sandpaper_vs_silk");
    sub->add_option("--eeg-channel", f.eeg_channel, "EEG channel paired with each muscle");
    sub->add_option("--durations", f.durations, "segment durations in seconds")->delimiter(',');
    sub->add_option("--kernels", f.kernels, "linear and/or rbf")->delimiter(',');
    sub->add_option("--muscles", f.muscles, "EMG channels to use")->delimiter(',');
    sub->add_option("--c", f.c, "SVM box constraint");
    sub->add_option("--gamma", f.gamma, "RBF gamma or 'auto'");
    sub->add_option("--folds", f.folds, "cross-validation folds");
    sub->add_option("--reps", f.reps, "cross-validation repetitions");
    sub->add_option("--z-max", f.z_max, "artifact limit in robust SDs or 'inf'");
    sub->add_option("--feature-stat", f.feature_stat, "band statistic: mean or max");
    sub->add_option("--set", f.sets, "override any config key, e.g. welch.overlap=0.5");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cortico-muscular coherence analysis"};
    app.require_subcommand(1);
    Flags flags;
    const std::vector<std::pair<std::string, std::string>> help{
        {"preprocess", "segment trials and write the segment cache"},
        {"cmc", "per-class CMC spectra and band features"},
        {"classify", "cross-validated accuracy per muscle and duration"},
        {"sweep", "accuracy over every muscle subset"},
        {"synth-validate", "compare the estimator with the synthetic coupling oracle"},
        {"validate-dataset", "check a dataset against the manifest schema"},
        {"synth-dataset", "write a synthetic two-class dataset"},
    };
    for (const auto& [name, text] : help) add_common(app.add_subcommand(name, text), flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    const std::string command = app.get_subcommands().front()->get_name();
    cmc::app::RunConfig cfg;
    try {
        cfg = cmc::app::resolve_config(flags.config, flags.overrides());
    } catch (const std::exception& e) {
        std::cerr << "cmc " << command << ": " << e.what() << '\n';
        return 2;
    }
    return cmc::app::run_command(command, cfg, std::cout, std::cerr);
}
