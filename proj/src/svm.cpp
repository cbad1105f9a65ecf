#include "cmc/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cmc/error.hpp"
#include "cmc/io.hpp"
#include "cmc/random.hpp"

namespace cmc::svm {

std::string to_string(KernelKind k) { return k == KernelKind::linear ? "linear" : "rbf"; }

KernelKind parse_kernel(const std::string& name) {
    if (name == "linear") return KernelKind::linear;
    if (name == "rbf") return KernelKind::rbf;
    throw InvalidArgument("unknown kernel '" + name + "' (expected linear or rbf)");
}

double kernel(const KernelSpec& k, std::span<const double> a, std::span<const double> b) {
    if (k.kind == KernelKind::linear) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        return s;
    }
    double d2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        d2 += d * d;
    }
    return std::exp(-k.gamma * d2);
}

std::vector<double> Standardization::apply(std::span<const double> x) const {
    if (x.size() != mean.size()) {
        throw InvalidArgument("standardize: expected " + std::to_string(mean.size()) +
                              " features, got " + std::to_string(x.size()));
    }
    std::vector<double> z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        z[i] = scale[i] > 0.0 ? (x[i] - mean[i]) / scale[i] : 0.0;
    }
    return z;
}

Standardization standardize_fit(std::span<const Sample> train) {
    if (train.empty()) throw InvalidArgument("standardize_fit: empty training set");
    const std::size_t d = train.front().features.size();
    const auto n = static_cast<double>(train.size());
    Standardization s{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
    for (const auto& smp : train) {
        for (std::size_t j = 0; j < d; ++j) s.mean[j] += smp.features[j];
    }
    for (double& m : s.mean) m /= n;
    for (const auto& smp : train) {
        for (std::size_t j = 0; j < d; ++j) {
            const double dv = smp.features[j] - s.mean[j];
            s.scale[j] += dv * dv;
        }
    }
    for (std::size_t j = 0; j < d; ++j) {
        const double var = s.scale[j] / n;
        // Columns equal up to rounding count as constant.
        const double floor = 1e-24 * std::max(1.0, s.mean[j] * s.mean[j]);
        s.scale[j] = var > floor ? std::sqrt(var) : 0.0;
    }
    return s;
}

std::vector<Sample> standardize_apply(const Standardization& s, std::span<const Sample> samples) {
    std::vector<Sample> out;
    out.reserve(samples.size());
    for (const auto& smp : samples) out.push_back({s.apply(smp.features), smp.label});
    return out;
}

Standardization identity_standardization(std::size_t d) {
    return {std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
}

double SvmModel::decision(std::span<const double> x) const {
    const auto z = standardization.apply(x);
    double f = bias;
    for (std::size_t i = 0; i < support_vectors.size(); ++i) {
        f += coefficients[i] * svm::kernel(kernel, support_vectors[i], z);
    }
    return f;
}

int predict(const SvmModel& model, std::span<const double> x) {
    if (x.size() != model.dimension()) {
        throw InvalidArgument("predict: model expects " + std::to_string(model.dimension()) +
                              " features, got " + std::to_string(x.size()));
    }
    return model.decision(x) >= 0.0 ? 1 : -1;
}

double dual_objective(std::span<const double> alpha, std::span<const std::vector<double>> x,
                      std::span<const int> labels, const KernelSpec& kern) {
    double lin = 0.0;
    double quad = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        lin += alpha[i];
        if (alpha[i] == 0.0) continue;
        for (std::size_t j = 0; j < alpha.size(); ++j) {
            if (alpha[j] == 0.0) continue;
            quad += alpha[i] * alpha[j] * labels[i] * labels[j] * kernel(kern, x[i], x[j]);
        }
    }
    return lin - 0.5 * quad;
}

namespace {

class Smo {
public:
    Smo(std::vector<std::vector<double>> x, std::vector<int> y, const KernelSpec& kern,
        const TrainParams& p)
        : x_(std::move(x)), y_(std::move(y)), n_(y_.size()), c_(p.c), tol_(p.tol),
          alpha_(n_, 0.0), err_(n_), k_(n_ * n_), rng_(rng::make_stream(p.seed, 0x5a0)) {
        for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t j = i; j < n_; ++j) {
                const double v = kernel(kern, x_[i], x_[j]);
                k_[i * n_ + j] = v;
                k_[j * n_ + i] = v;
            }
            err_[i] = -static_cast<double>(y_[i]);  // f = 0 initially
        }
    }

    void run(int max_passes) {
        bool examine_all = true;
        std::size_t changed = 0;
        const std::size_t step_cap = 1000 * n_ + 100000;
        while ((changed > 0 || examine_all) && steps_ < step_cap) {
            changed = 0;
            if (examine_all) {
                if (full_passes_ >= static_cast<std::size_t>(std::max(max_passes, 1))) break;
                ++full_passes_;
                for (std::size_t i = 0; i < n_; ++i) changed += examine(i);
            } else {
                for (std::size_t i = 0; i < n_; ++i) {
                    if (is_free(i)) changed += examine(i);
                }
            }
            if (examine_all) {
                examine_all = false;
                if (changed == 0) {
                    // The bias carried over from the last step can sit outside the
                    // interval the bound multipliers allow; refit it and go on if
                    // that exposes violators.
                    refit_bias();
                    if (!any_violator()) {
                        converged_ = true;
                        break;
                    }
                    examine_all = true;
                }
            } else if (changed == 0) {
                examine_all = true;
            }
        }
    }

    const std::vector<double>& alpha() const { return alpha_; }
    double bias() const { return b_; }
    std::vector<std::vector<double>>& features() { return x_; }
    std::size_t full_passes() const { return full_passes_; }
    std::size_t steps() const { return steps_; }
    bool converged() const { return converged_; }

private:
    double kij(std::size_t i, std::size_t j) const { return k_[i * n_ + j]; }
    bool is_free(std::size_t i) const { return alpha_[i] > 0.0 && alpha_[i] < c_; }

    double snap(double a) const {
        const double eps = 1e-12 * c_;
        if (a < eps) return 0.0;
        if (a > c_ - eps) return c_;
        return a;
    }

    bool violates(std::size_t i) const {
        const double r = err_[i] * y_[i];
        return (r < -tol_ && alpha_[i] < c_) || (r > tol_ && alpha_[i] > 0.0);
    }

    bool any_violator() const {
        for (std::size_t i = 0; i < n_; ++i) {
            if (violates(i)) return true;
        }
        return false;
    }

    // Mean over free multipliers, else the midpoint of the interval left by
    // the bound ones.
    void refit_bias() {
        double free_sum = 0.0;
        std::size_t free_count = 0;
        double lo = -std::numeric_limits<double>::infinity();
        double hi = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n_; ++i) {
            const double y = y_[i];
            const double target = b_ - err_[i];  // bias putting y f(x_i) exactly at 1
            if (is_free(i)) {
                free_sum += target;
                ++free_count;
            } else if ((alpha_[i] <= 0.0) == (y > 0.0)) {
                lo = std::max(lo, target);
            } else {
                hi = std::min(hi, target);
            }
        }
        double b_new = b_;
        if (free_count > 0) {
            b_new = free_sum / static_cast<double>(free_count);
        } else if (std::isfinite(lo) && std::isfinite(hi)) {
            b_new = 0.5 * (lo + hi);
        } else if (std::isfinite(lo)) {
            b_new = std::max(b_, lo);
        } else if (std::isfinite(hi)) {
            b_new = std::min(b_, hi);
        }
        const double db = b_new - b_;
        for (double& e : err_) e += db;
        b_ = b_new;
    }

    std::size_t examine(std::size_t i2) {
        if (!violates(i2)) return 0;
        // Second-choice heuristic: maximise |E1 - E2| over free multipliers.
        std::size_t free_count = 0;
        std::size_t best = n_;
        double best_gap = -1.0;
        for (std::size_t i = 0; i < n_; ++i) {
            if (!is_free(i)) continue;
            ++free_count;
            const double gap = std::fabs(err_[i] - err_[i2]);
            if (gap > best_gap) {
                best_gap = gap;
                best = i;
            }
        }
        if (free_count > 1 && best < n_ && take_step(best, i2)) return 1;

        const std::size_t start_free = rng::uniform_index(rng_, n_);
        for (std::size_t t = 0; t < n_; ++t) {
            const std::size_t i1 = (start_free + t) % n_;
            if (is_free(i1) && take_step(i1, i2)) return 1;
        }
        const std::size_t start_all = rng::uniform_index(rng_, n_);
        for (std::size_t t = 0; t < n_; ++t) {
            const std::size_t i1 = (start_all + t) % n_;
            if (take_step(i1, i2)) return 1;
        }
        return 0;
    }

    bool take_step(std::size_t i1, std::size_t i2) {
        if (i1 == i2) return false;
        const double a1 = alpha_[i1];
        const double a2 = alpha_[i2];
        const double y1 = y_[i1];
        const double y2 = y_[i2];
        const double e1 = err_[i1];
        const double e2 = err_[i2];
        const double s = y1 * y2;

        double lo, hi;
        if (y1 != y2) {
            lo = std::max(0.0, a2 - a1);
            hi = std::min(c_, c_ + a2 - a1);
        } else {
            lo = std::max(0.0, a1 + a2 - c_);
            hi = std::min(c_, a1 + a2);
        }
        if (hi - lo <= 1e-14 * c_) return false;

        const double k11 = kij(i1, i1);
        const double k12 = kij(i1, i2);
        const double k22 = kij(i2, i2);
        const double eta = k11 + k22 - 2.0 * k12;

        double a2_new;
        if (eta > 1e-14) {
            a2_new = std::clamp(a2 + y2 * (e1 - e2) / eta, lo, hi);
        } else {
            // Objective at both ends of the feasible segment.
            const double f1 = y1 * e1 - a1 * k11 - s * a2 * k12;
            const double f2 = y2 * e2 - s * a1 * k12 - a2 * k22;
            const double l1 = a1 + s * (a2 - lo);
            const double h1 = a1 + s * (a2 - hi);
            const double obj_lo = l1 * f1 + lo * f2 + 0.5 * l1 * l1 * k11 + 0.5 * lo * lo * k22 +
                                  s * lo * l1 * k12;
            const double obj_hi = h1 * f1 + hi * f2 + 0.5 * h1 * h1 * k11 + 0.5 * hi * hi * k22 +
                                  s * hi * h1 * k12;
            if (obj_lo < obj_hi - 1e-12) {
                a2_new = lo;
            } else if (obj_lo > obj_hi + 1e-12) {
                a2_new = hi;
            } else {
                a2_new = a2;
            }
        }
        if (std::fabs(a2_new - a2) < 1e-10 * (a2_new + a2 + 1e-10)) return false;

        double a1_new = a1 + s * (a2 - a2_new);
        // Exact arithmetic keeps both in [0, C]; values a rounding error away
        // from a bound are put on it so they are not mistaken for free ones.
        a1_new = snap(a1_new);
        a2_new = snap(a2_new);

        const double d1 = y1 * (a1_new - a1);
        const double d2 = y2 * (a2_new - a2);
        const double b1 = b_ - e1 - d1 * k11 - d2 * k12;
        const double b2 = b_ - e2 - d1 * k12 - d2 * k22;
        double b_new;
        if (a1_new > 0.0 && a1_new < c_) {
            b_new = b1;
        } else if (a2_new > 0.0 && a2_new < c_) {
            b_new = b2;
        } else {
            b_new = 0.5 * (b1 + b2);
        }
        const double db = b_new - b_;
        for (std::size_t i = 0; i < n_; ++i) {
            err_[i] += d1 * kij(i1, i) + d2 * kij(i2, i) + db;
        }
        alpha_[i1] = a1_new;
        alpha_[i2] = a2_new;
        b_ = b_new;
        ++steps_;
        return true;
    }

    std::vector<std::vector<double>> x_;
    std::vector<int> y_;
    std::size_t n_;
    double c_;
    double tol_;
    std::vector<double> alpha_;
    std::vector<double> err_;
    std::vector<double> k_;
    double b_ = 0.0;
    std::mt19937_64 rng_;
    std::size_t full_passes_ = 0;
    std::size_t steps_ = 0;
    bool converged_ = false;
};

double auto_gamma(const std::vector<std::vector<double>>& x) {
    const std::size_t d = x.front().size();
    const auto n = static_cast<double>(x.size());
    double total_var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        double m = 0.0;
        for (const auto& r : x) m += r[j];
        m /= n;
        double v = 0.0;
        for (const auto& r : x) v += (r[j] - m) * (r[j] - m);
        total_var += v / n;
    }
    const double mean_var = total_var / static_cast<double>(d);
    return mean_var > 0.0 ? 1.0 / (static_cast<double>(d) * mean_var) : 1.0 / static_cast<double>(d);
}

}  // namespace

TrainResult train_smo_full(std::span<const Sample> samples, const KernelSpec& kern,
                           const TrainParams& params) {
    if (!(params.c > 0.0)) throw InvalidArgument("train_smo: C must be positive");
    if (samples.empty()) throw InvalidArgument("train_smo: no samples");
    const std::size_t d = samples.front().features.size();
    if (d == 0) throw InvalidArgument("train_smo: samples have no features");
    bool has_pos = false;
    bool has_neg = false;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (s.features.size() != d) {
            throw InvalidArgument("train_smo: sample " + std::to_string(i) + " has " +
                                  std::to_string(s.features.size()) + " features, expected " +
                                  std::to_string(d));
        }
        for (double v : s.features) {
            if (!std::isfinite(v)) {
                throw InvalidArgument("train_smo: sample " + std::to_string(i) +
                                      " has a non-finite feature");
            }
        }
        if (s.label == 1) {
            has_pos = true;
        } else if (s.label == -1) {
            has_neg = true;
        } else {
            throw InvalidArgument("train_smo: labels must be -1 or +1");
        }
    }
    if (!has_pos || !has_neg) throw InvalidArgument("train_smo: training set holds a single class");

    const Standardization stdz =
        params.standardize ? standardize_fit(samples) : identity_standardization(d);
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    x.reserve(samples.size());
    y.reserve(samples.size());
    for (const auto& s : samples) {
        x.push_back(stdz.apply(s.features));
        y.push_back(s.label);
    }

    KernelSpec resolved = kern;
    if (resolved.kind == KernelKind::rbf && !(resolved.gamma > 0.0)) resolved.gamma = auto_gamma(x);

    Smo smo(std::move(x), std::move(y), resolved, params);
    smo.run(params.max_passes);

    TrainResult r;
    r.alpha = smo.alpha();
    r.train_features = std::move(smo.features());
    r.full_passes = smo.full_passes();
    r.steps = smo.steps();
    r.converged = smo.converged();
    r.model.kernel = resolved;
    r.model.c = params.c;
    r.model.bias = smo.bias();
    r.model.standardization = stdz;
    for (std::size_t i = 0; i < r.alpha.size(); ++i) {
        if (r.alpha[i] > 0.0) {
            r.model.support_vectors.push_back(r.train_features[i]);
            r.model.coefficients.push_back(r.alpha[i] * samples[i].label);
        }
    }
    return r;
}

SvmModel train_smo(std::span<const Sample> samples, const KernelSpec& kern, const TrainParams& params) {
    return train_smo_full(samples, kern, params).model;
}

double accuracy(std::span<const int> predicted, std::span<const int> actual) {
    if (predicted.size() != actual.size() || actual.empty()) {
        throw InvalidArgument("accuracy: need equally sized, non-empty label lists");
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < actual.size(); ++i) correct += predicted[i] == actual[i];
    return static_cast<double>(correct) / static_cast<double>(actual.size());
}

double balanced_accuracy(std::span<const int> predicted, std::span<const int> actual) {
    if (predicted.size() != actual.size() || actual.empty()) {
        throw InvalidArgument("balanced_accuracy: need equally sized, non-empty label lists");
    }
    std::size_t tp = 0, np = 0, tn = 0, nn = 0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        const bool ok = predicted[i] == actual[i];
        if (actual[i] == 1) {
            ++np;
            tp += ok;
        } else {
            ++nn;
            tn += ok;
        }
    }
    // A class absent from the fold contributes nothing.
    double sum = 0.0;
    int classes = 0;
    if (np > 0) {
        sum += static_cast<double>(tp) / static_cast<double>(np);
        ++classes;
    }
    if (nn > 0) {
        sum += static_cast<double>(tn) / static_cast<double>(nn);
        ++classes;
    }
    return sum / classes;
}

CvReport cross_validate(std::span<const Sample> samples, const KernelSpec& kern,
                        const TrainParams& params, std::size_t k, std::size_t reps,
                        std::uint64_t seed, Execution exec) {
    if (k < 2) throw InvalidArgument("cross_validate: need k >= 2");
    if (reps < 1) throw InvalidArgument("cross_validate: need reps >= 1");
    std::vector<std::size_t> neg;
    std::vector<std::size_t> pos;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        (samples[i].label == 1 ? pos : neg).push_back(i);
    }
    if (neg.size() < k || pos.size() < k) {
        throw InsufficientData("cross_validate: classes have " + std::to_string(neg.size()) +
                               " and " + std::to_string(pos.size()) + " members, need >= " +
                               std::to_string(k) + " each for " + std::to_string(k) + " folds");
    }

    // fold_of[rep][sample]
    std::vector<std::vector<std::size_t>> fold_of(reps, std::vector<std::size_t>(samples.size()));
    for (std::size_t r = 0; r < reps; ++r) {
        auto gen = rng::make_stream(seed, r);
        for (auto* cls : {&neg, &pos}) {
            auto order = *cls;
            rng::shuffle(order, gen);
            for (std::size_t j = 0; j < order.size(); ++j) fold_of[r][order[j]] = j % k;
        }
    }

    CvReport rep;
    rep.k = k;
    rep.reps = reps;
    rep.seed = seed;
    rep.accuracies.assign(reps * k, 0.0);
    rep.balanced_accuracies.assign(reps * k, 0.0);

    for_each_index(reps * k, exec, [&](std::size_t cell) {
        const std::size_t r = cell / k;
        const std::size_t f = cell % k;
        std::vector<Sample> train;
        std::vector<const Sample*> test;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (fold_of[r][i] == f) {
                test.push_back(&samples[i]);
            } else {
                train.push_back(samples[i]);
            }
        }
        TrainParams p = params;
        p.seed = rng::splitmix64(seed ^ (0x9e37ULL * (cell + 1)));
        const SvmModel model = train_smo(train, kern, p);
        std::vector<int> predicted;
        std::vector<int> actual;
        for (const Sample* s : test) {
            predicted.push_back(predict(model, s->features));
            actual.push_back(s->label);
        }
        rep.accuracies[cell] = accuracy(predicted, actual);
        rep.balanced_accuracies[cell] = balanced_accuracy(predicted, actual);
    });

    const auto n = static_cast<double>(rep.accuracies.size());
    rep.mean = std::accumulate(rep.accuracies.begin(), rep.accuracies.end(), 0.0) / n;
    rep.balanced_mean =
        std::accumulate(rep.balanced_accuracies.begin(), rep.balanced_accuracies.end(), 0.0) / n;
    double ss = 0.0;
    for (double a : rep.accuracies) ss += (a - rep.mean) * (a - rep.mean);
    rep.std = std::sqrt(ss / n);
    return rep;
}

nlohmann::json to_json(const SvmModel& m) {
    return {
        {"format", "cmc-svm-model"},
        {"version", 1},
        {"kernel", {{"kind", to_string(m.kernel.kind)}, {"gamma", m.kernel.gamma}}},
        {"c", m.c},
        {"bias", m.bias},
        {"dimension", m.dimension()},
        {"support_vectors", m.support_vectors},
        {"coefficients", m.coefficients},
        {"standardization", {{"mean", m.standardization.mean}, {"scale", m.standardization.scale}}},
    };
}

SvmModel model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != "cmc-svm-model") {
            throw InvalidArgument("model file: unexpected format tag");
        }
        if (j.at("version").get<int>() != 1) throw InvalidArgument("model file: unsupported version");
        SvmModel m;
        m.kernel.kind = parse_kernel(j.at("kernel").at("kind").get<std::string>());
        m.kernel.gamma = j.at("kernel").at("gamma").get<double>();
        m.c = j.at("c").get<double>();
        m.bias = j.at("bias").get<double>();
        m.support_vectors = j.at("support_vectors").get<std::vector<std::vector<double>>>();
        m.coefficients = j.at("coefficients").get<std::vector<double>>();
        m.standardization.mean = j.at("standardization").at("mean").get<std::vector<double>>();
        m.standardization.scale = j.at("standardization").at("scale").get<std::vector<double>>();
        const std::size_t d = j.at("dimension").get<std::size_t>();
        bool ok = m.coefficients.size() == m.support_vectors.size() &&
                  m.standardization.mean.size() == d && m.standardization.scale.size() == d;
        for (const auto& sv : m.support_vectors) ok = ok && sv.size() == d;
        if (!ok) throw InvalidArgument("model file: inconsistent array sizes");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("model file: ") + e.what());
    }
}

void save_model(const std::filesystem::path& path, const SvmModel& m) {
    io::write_file_atomic(path, to_json(m).dump(2) + "\n");
}

SvmModel load_model(const std::filesystem::path& path) {
    try {
        return model_from_json(nlohmann::json::parse(io::read_file(path)));
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError(path.string() + ": malformed model file: " + e.what());
    }
}

}  // namespace cmc::svm
