#include "eve/stderr_lab.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

namespace eve::stderr_lab {

GaussianSpec GaussianSpec::make(double mu, double sigma) {
    if (!std::isfinite(mu)) throw std::invalid_argument("GaussianSpec: mu must be finite");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw std::invalid_argument("GaussianSpec: sigma must be > 0");
    }
    return {mu, sigma};
}

const char* to_string(Estimator e) {
    switch (e) {
        case Estimator::PopVariance: return "s2";
        case Estimator::BatchMeanVariance: return "s2_bar";
        case Estimator::PopStd: return "s";
        case Estimator::ScaledPopStd: return "s_over_sqrt_b";
        case Estimator::BatchMeanStd: return "s_bar";
        case Estimator::EveRelativeStd: return "eta";
        case Estimator::AdamRelativeStd: return "eta_bar";
    }
    return "unknown";
}

double pop_variance_estimator(std::span<const double> samples) {
    if (samples.empty()) throw std::invalid_argument("pop_variance_estimator: no samples");
    double sum = 0.0;
    double sum_sq = 0.0;
    for (double x : samples) {
        sum += x;
        sum_sq += x * x;
    }
    if (std::all_of(samples.begin(), samples.end(), [&](double x) { return x == samples[0]; })) {
        return 0.0;
    }
    const double n = static_cast<double>(samples.size());
    const double mean = sum / n;
    return std::max(sum_sq / n - mean * mean, 0.0);
}

double se_s2_exact(std::size_t n, double sigma) {
    if (n < 2) throw std::invalid_argument("se_s2_exact: need N >= 2");
    const double nd = static_cast<double>(n);
    return (nd - 1.0) / nd * std::sqrt(2.0 / (nd - 1.0)) * sigma * sigma;
}

double se_s2_approx(std::size_t n, double sigma) {
    if (n < 1) throw std::invalid_argument("se_s2_approx: need N >= 1");
    return std::sqrt(2.0 / static_cast<double>(n)) * sigma * sigma;
}

std::vector<double> batch_means(std::span<const double> samples, std::size_t batch_size) {
    if (batch_size == 0 || samples.size() % batch_size != 0) {
        throw std::invalid_argument("batch_means: batch size " + std::to_string(batch_size) +
                                    " does not divide N = " + std::to_string(samples.size()));
    }
    std::vector<double> means(samples.size() / batch_size);
    for (std::size_t i = 0; i < means.size(); ++i) {
        double s = 0.0;
        for (std::size_t b = 0; b < batch_size; ++b) s += samples[i * batch_size + b];
        means[i] = s / static_cast<double>(batch_size);
    }
    return means;
}

namespace {

double mean_of(std::span<const double> xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

bool needs_batches(Estimator e) {
    return e == Estimator::BatchMeanVariance || e == Estimator::BatchMeanStd ||
           e == Estimator::AdamRelativeStd;
}

double sample_std(std::span<const double> xs) {
    const double m = mean_of(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace

double evaluate(Estimator e, std::span<const double> samples, std::size_t batch_size) {
    if (batch_size == 0) throw std::invalid_argument("evaluate: batch size must be positive");
    const double B = static_cast<double>(batch_size);
    switch (e) {
        case Estimator::PopVariance: return pop_variance_estimator(samples);
        case Estimator::PopStd: return std::sqrt(pop_variance_estimator(samples));
        case Estimator::ScaledPopStd: return std::sqrt(pop_variance_estimator(samples) / B);
        case Estimator::BatchMeanVariance: return pop_variance_estimator(batch_means(samples, batch_size));
        case Estimator::BatchMeanStd:
            return std::sqrt(pop_variance_estimator(batch_means(samples, batch_size)));
        case Estimator::EveRelativeStd: {
            const double g = mean_of(samples);
            return std::sqrt(pop_variance_estimator(samples) / (B * g * g));
        }
        case Estimator::AdamRelativeStd: {
            const auto means = batch_means(samples, batch_size);
            const double g = mean_of(means);
            return std::sqrt(pop_variance_estimator(means) / (g * g));
        }
    }
    return 0.0;
}

std::vector<double> draw_trial(const GaussianSpec& spec, std::size_t n, std::uint64_t seed,
                               std::uint64_t trial) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> dist(spec.mu, spec.sigma);
    std::vector<double> out(n);
    for (double& x : out) x = dist(rng);
    return out;
}

namespace {

std::optional<double> predicted(Estimator e, const GaussianSpec& spec, std::size_t n,
                                std::size_t batch_size) {
    const double sigma = spec.sigma;
    const double B = static_cast<double>(batch_size);
    const double se_s2 = se_s2_exact(n, sigma);
    // sqrt(2B/N) sigma^2 / B
    const double se_s2_bar = std::sqrt(2.0 * B / static_cast<double>(n)) * sigma * sigma / B;
    switch (e) {
        case Estimator::PopVariance: return se_s2;
        case Estimator::BatchMeanVariance: return se_s2_bar;
        case Estimator::PopStd: return se_s2 / (2.0 * sigma);
        case Estimator::ScaledPopStd: return se_s2 / (2.0 * sigma * std::sqrt(B));
        case Estimator::BatchMeanStd: return std::sqrt(B) / (2.0 * sigma) * se_s2_bar;
        case Estimator::EveRelativeStd: return se_s2 / (2.0 * sigma * std::sqrt(B) * std::abs(spec.mu));
        case Estimator::AdamRelativeStd: return std::sqrt(B) / (2.0 * sigma) * se_s2_bar / std::abs(spec.mu);
    }
    return std::nullopt;
}

void check_run(std::size_t n, std::size_t batch_size, std::size_t trials, bool batched) {
    if (n < 2) throw std::invalid_argument("mc_se: need N >= 2");
    if (trials < 1000) throw std::invalid_argument("mc_se: need at least 1000 trials");
    if (batch_size == 0) throw std::invalid_argument("mc_se: batch size must be positive");
    if (batched && n % batch_size != 0) {
        throw std::invalid_argument("mc_se: batch size " + std::to_string(batch_size) +
                                    " does not divide N = " + std::to_string(n));
    }
}

}  // namespace

TrialSummary mc_se(Estimator e, const GaussianSpec& spec, std::size_t n, std::size_t batch_size,
                   std::size_t trials, std::uint64_t seed) {
    GaussianSpec::make(spec.mu, spec.sigma);
    check_run(n, batch_size, trials, needs_batches(e));
    std::vector<double> values(trials);
    for (std::size_t t = 0; t < trials; ++t) {
        values[t] = evaluate(e, draw_trial(spec, n, seed, t), batch_size);
    }
    TrialSummary out;
    out.statistic = to_string(e);
    out.trials = trials;
    out.mean = mean_of(values);
    out.empirical_se = sample_std(values);
    if (!((e == Estimator::EveRelativeStd || e == Estimator::AdamRelativeStd) && spec.mu == 0.0)) {
        out.predicted_se = predicted(e, spec, n, batch_size);
    }
    return out;
}

std::vector<RatioRow> se_ratio_report(const GaussianSpec& spec, std::size_t n,
                                      std::span<const std::size_t> batch_sizes, std::size_t trials,
                                      std::uint64_t seed) {
    GaussianSpec::make(spec.mu, spec.sigma);
    for (auto B : batch_sizes) check_run(n, B, trials, true);
    const std::size_t k = batch_sizes.size();
    std::vector<std::vector<double>> eta_vals(k, std::vector<double>(trials));
    std::vector<std::vector<double>> eta_bar_vals(k, std::vector<double>(trials));
    for (std::size_t t = 0; t < trials; ++t) {
        const auto samples = draw_trial(spec, n, seed, t);
        for (std::size_t i = 0; i < k; ++i) {
            eta_vals[i][t] = evaluate(Estimator::EveRelativeStd, samples, batch_sizes[i]);
            eta_bar_vals[i][t] = evaluate(Estimator::AdamRelativeStd, samples, batch_sizes[i]);
        }
    }
    std::vector<RatioRow> rows;
    for (std::size_t i = 0; i < k; ++i) {
        RatioRow r;
        r.batch_size = batch_sizes[i];
        r.trials = trials;
        r.se_eta = sample_std(eta_vals[i]);
        r.se_eta_bar = sample_std(eta_bar_vals[i]);
        r.ratio = r.se_eta / r.se_eta_bar;
        r.predicted = 1.0 / std::sqrt(static_cast<double>(batch_sizes[i]));
        rows.push_back(r);
    }
    return rows;
}

void write_ratio_report(std::ostream& out, std::span<const RatioRow> rows) {
    out << "B,trials,se_eta,se_eta_bar,ratio,predicted_inv_sqrt_b\n";
    for (const auto& r : rows) {
        out << fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.batch_size, r.trials,
                           r.se_eta, r.se_eta_bar, r.ratio, r.predicted);
    }
}

}  // namespace eve::stderr_lab
