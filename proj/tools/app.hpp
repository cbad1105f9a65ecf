#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cmc/experiment.hpp"
#include "cmc/synth.hpp"

namespace cmc::app {

/// Oracle comparison run by synth-validate.
struct SynthValidateConfig {
    double gain = 1.0;
    double band_lo_hz = 13.0;
    double band_hi_hz = 30.0;
    int filter_order = 4;
    double target_coherence = 0.8;
    double target_freq_hz = 0.0;  ///< <= 0: grid bin nearest the band centre
    std::size_t trials = 200;
    double trial_s = 4.0;
    double fs = 500.0;
};

/// Everything a run depends on. Serialised next to every output set.
struct RunConfig {
    std::string dataset;
    std::string out = "out";
    std::uint64_t seed = 1;
    int jobs = 0;  ///< 0: runtime default, 1: serial reference path

    experiment::Task task = experiment::Task::light_vs_heavy;
    std::vector<double> durations{1.0, 2.0, 4.0};
    std::vector<svm::KernelKind> kernels{svm::KernelKind::linear, svm::KernelKind::rbf};
    std::vector<std::string> muscles;  ///< empty: every EMG channel of the dataset
    bool include_all_muscles = true;   ///< classify also runs the full-set cell

    experiment::PipelineConfig pipeline;
    experiment::CvConfig cv;

    SynthValidateConfig synth_validate;
    synth::DatasetSpec synth_dataset;
};

nlohmann::json to_json(const RunConfig& c);

/// Strict parse: unknown keys and invalid values are reported together in
/// one InvalidArgument. Missing keys keep their defaults.
RunConfig config_from_json(const nlohmann::json& j);

/// Applies "a.b.c=value" to a config document. The value is parsed as JSON
/// when possible and taken as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Defaults, then the config file (if any) merged in, then each override
/// in order. Throws InvalidArgument or IoError.
RunConfig resolve_config(const std::string& config_file, const std::vector<std::string>& overrides);

/// Runs one subcommand. Writes config.resolved.json and run_status.json in
/// the output directory. Returns the process exit code; errors are printed
/// to `err`.
int run_command(const std::string& command, const RunConfig& cfg, std::ostream& out,
                std::ostream& err);

inline const std::vector<std::string>& commands() {
    static const std::vector<std::string> c{"preprocess",     "cmc",
                                            "classify",       "sweep",
                                            "synth-validate", "validate-dataset",
                                            "synth-dataset"};
    return c;
}

}  // namespace cmc::app
