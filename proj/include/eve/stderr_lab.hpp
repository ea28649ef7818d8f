#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace eve::stderr_lab {

struct GaussianSpec {
    double mu = 0.0;
    double sigma = 1.0;

    // Throws unless sigma > 0 and both fields are finite.
    static GaussianSpec make(double mu, double sigma);
};

// Estimators evaluated on one dataset of N draws.
enum class Estimator {
    PopVariance,         // s^2
    BatchMeanVariance,   // s-bar^2 over the N/B batch means
    PopStd,              // s
    ScaledPopStd,        // s / sqrt(B)
    BatchMeanStd,        // s-bar
    EveRelativeStd,      // sqrt((1/B)(q - gbar^2) / gbar^2), q = mean square of all N draws
    AdamRelativeStd,     // s-bar / |mean of batch means|
};

const char* to_string(Estimator e);

struct TrialSummary {
    std::string statistic;
    std::size_t trials = 0;
    double mean = 0.0;
    double empirical_se = 0.0;
    std::optional<double> predicted_se;
};

// (1/N) sum g^2 - ((1/N) sum g)^2, clamped at zero.
double pop_variance_estimator(std::span<const double> samples);

// ((N-1)/N) sqrt(2/(N-1)) sigma^2. Requires N >= 2.
double se_s2_exact(std::size_t n, double sigma);
// sqrt(2/N) sigma^2.
double se_s2_approx(std::size_t n, double sigma);

// Means of consecutive groups of `batch_size` samples. batch_size must divide N.
std::vector<double> batch_means(std::span<const double> samples, std::size_t batch_size);

double evaluate(Estimator e, std::span<const double> samples, std::size_t batch_size);

// Independent N-sample Gaussian dataset for trial `trial` of a run seeded
// with `seed`. Each trial has its own generator stream.
std::vector<double> draw_trial(const GaussianSpec& spec, std::size_t n, std::uint64_t seed,
                               std::uint64_t trial);

// Standard deviation (divisor trials - 1) of the estimator across `trials`
// independent datasets. predicted_se is filled for estimators with a
// closed-form or delta-method prediction.
TrialSummary mc_se(Estimator e, const GaussianSpec& spec, std::size_t n, std::size_t batch_size,
                   std::size_t trials, std::uint64_t seed);

struct RatioRow {
    std::size_t batch_size = 0;
    std::size_t trials = 0;
    double se_eta = 0.0;
    double se_eta_bar = 0.0;
    double ratio = 0.0;
    double predicted = 0.0;  // 1 / sqrt(B)
};

// Eve-style vs Adam-style relative-std estimators on the same trial datasets.
std::vector<RatioRow> se_ratio_report(const GaussianSpec& spec, std::size_t n,
                                      std::span<const std::size_t> batch_sizes, std::size_t trials,
                                      std::uint64_t seed);

void write_ratio_report(std::ostream& out, std::span<const RatioRow> rows);

}  // namespace eve::stderr_lab
