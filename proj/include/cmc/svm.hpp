#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cmc/parallel.hpp"

namespace cmc::svm {

/// Labelled feature vector; label is -1 or +1.
struct Sample {
    std::vector<double> features;
    int label = 1;
};

enum class KernelKind { linear, rbf };

std::string to_string(KernelKind k);
KernelKind parse_kernel(const std::string& name);

/// gamma <= 0 on an rbf kernel means "derive from the training data":
/// 1 / (d * mean feature variance).
struct KernelSpec {
    KernelKind kind = KernelKind::linear;
    double gamma = 0.0;
};

double kernel(const KernelSpec& k, std::span<const double> a, std::span<const double> b);

/// Per-feature z-score. Zero-variance features have scale 0 and map to 0.
struct Standardization {
    std::vector<double> mean;
    std::vector<double> scale;

    std::vector<double> apply(std::span<const double> x) const;
};

Standardization standardize_fit(std::span<const Sample> train);
std::vector<Sample> standardize_apply(const Standardization& s, std::span<const Sample> samples);

/// Identity transform of dimension d.
Standardization identity_standardization(std::size_t d);

struct TrainParams {
    double c = 1.0;
    double tol = 1e-3;
    int max_passes = 20;  ///< cap on sweeps over the full training set
    std::uint64_t seed = 0;
    bool standardize = true;
};

/// Trained binary classifier. Support vectors are stored in standardised
/// coordinates; `decision` standardises its input first.
struct SvmModel {
    KernelSpec kernel;  ///< gamma resolved
    double c = 1.0;
    std::vector<std::vector<double>> support_vectors;
    std::vector<double> coefficients;  ///< alpha_i * y_i
    double bias = 0.0;
    Standardization standardization;

    std::size_t dimension() const noexcept { return standardization.mean.size(); }

    /// sum_i coef_i K(sv_i, z) + bias with z the standardised input.
    double decision(std::span<const double> x) const;
};

/// Full dual state, for optimality checks.
struct TrainResult {
    SvmModel model;
    std::vector<double> alpha;  ///< one per training sample, in input order
    std::vector<std::vector<double>> train_features;  ///< as seen by the kernel
    std::size_t full_passes = 0;
    std::size_t steps = 0;
    bool converged = false;
};

/// Platt's sequential minimal optimisation with the two working-set
/// heuristics. Throws InvalidArgument on a single-class set, non-finite
/// features, inconsistent dimensions or c <= 0.
TrainResult train_smo_full(std::span<const Sample> samples, const KernelSpec& kernel,
                           const TrainParams& params);
SvmModel train_smo(std::span<const Sample> samples, const KernelSpec& kernel,
                   const TrainParams& params);

/// Sign of the decision function; an exact 0 maps to +1.
/// Throws InvalidArgument on a dimension mismatch.
int predict(const SvmModel& model, std::span<const double> x);

/// W(alpha) = sum alpha - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij.
double dual_objective(std::span<const double> alpha, std::span<const std::vector<double>> x,
                      std::span<const int> labels, const KernelSpec& kernel);

/// Fraction of matching labels.
double accuracy(std::span<const int> predicted, std::span<const int> actual);
/// Mean of the per-class recalls over the classes present.
double balanced_accuracy(std::span<const int> predicted, std::span<const int> actual);

struct CvReport {
    std::vector<double> accuracies;           ///< rep-major, fold-minor
    std::vector<double> balanced_accuracies;  ///< same order
    double mean = 0.0;
    double std = 0.0;  ///< population
    double balanced_mean = 0.0;
    std::size_t k = 0;
    std::size_t reps = 0;
    std::uint64_t seed = 0;
};

/// Repeated stratified k-fold. Standardisation and an auto gamma are fit on
/// each training fold only. Throws InsufficientData when a class has fewer
/// than k members.
CvReport cross_validate(std::span<const Sample> samples, const KernelSpec& kernel,
                        const TrainParams& params, std::size_t k, std::size_t reps,
                        std::uint64_t seed, Execution exec = Execution::parallel);

/// Versioned, self-describing JSON layout (see docs/formats.md).
nlohmann::json to_json(const SvmModel& m);
SvmModel model_from_json(const nlohmann::json& j);
void save_model(const std::filesystem::path& path, const SvmModel& m);
SvmModel load_model(const std::filesystem::path& path);

}  // namespace cmc::svm
