#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eve/models.hpp"
#include "eve/optim.hpp"

namespace eve::harness {

enum class TaskKind { SyntheticClassification, SyntheticRegression, FileDataset };
enum class LossChoice { Auto, Squared, Logistic, Softmax };

// Flat `key = value` file; '#' starts a comment. Unknown keys are errors.
struct ExperimentConfig {
    TaskKind task = TaskKind::SyntheticClassification;
    std::filesystem::path data_path;
    std::size_t examples = 1000;
    std::size_t features = 2;
    std::size_t classes = 2;
    double separation = 4.0;
    double spread = 1.0;
    double noise = 0.1;
    double eval_fraction = 0.2;

    std::vector<std::size_t> hidden;
    Activation activation = Activation::Tanh;
    LossChoice loss = LossChoice::Auto;

    OptimizerKind optimizer = OptimizerKind::Adam;
    HyperParams hp;
    SamplingStrategy sampler = SamplingStrategy::ShuffledEpochs;
    std::size_t steps = 1000;
    std::size_t eval_every = 100;
    std::uint64_t seed = 0;
    std::optional<std::size_t> warmup;  // default ceil(10 / (1 - beta2))

    std::vector<std::size_t> sweep_batch_sizes{8, 32, 128};
    std::vector<OptimizerKind> sweep_optimizers{OptimizerKind::Adam, OptimizerKind::Eve};

    // stability probe
    double noise_mu = 1.0;
    double noise_sigma = 0.5;
    std::size_t noise_params = 8;

    // standard-error lab
    std::size_t stderr_n = 1024;
    std::vector<std::size_t> stderr_batch_sizes{4, 16, 64};
    std::size_t stderr_trials = 10000;
    double stderr_mu = 1.0;
    double stderr_sigma = 0.5;

    std::filesystem::path output;

    void validate() const;
    std::size_t effective_warmup() const;
};

ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

struct MetricsRow {
    std::uint64_t step = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double eval_loss = 0.0;
    double eval_accuracy = 0.0;
    double step_length = 0.0;
    double per_coord_abs_mean = 0.0;
    double step_length_running_std = 0.0;
};

struct TrainingSummary {
    double initial_train_loss = 0.0;
    double final_train_loss = 0.0;
    double final_train_accuracy = 0.0;
    double final_eval_loss = 0.0;
    double final_eval_accuracy = 0.0;
    double mean_step_length = 0.0;
    double std_step_length = 0.0;
};

struct TrainingRun {
    std::vector<MetricsRow> rows;
    TrainingSummary summary;
    std::vector<double> step_lengths;  // one per step, index 0 is step 1
    Params final_theta;
    // Eve variants only: per-coordinate comparison of the corrected and
    // uncorrected update computed from the same optimizer state each step.
    std::size_t shadow_checks = 0;
    std::size_t shadow_violations = 0;
    std::vector<double> shadow_no_correction_lengths;
    std::vector<double> shadow_corrected_lengths;
    bool examplewise_variance_seen = false;
};

struct TrainingHooks {
    std::function<void(std::uint64_t step, const Params& theta)> on_step;
};

struct Experiment {
    Dataset data;
    DataSplit split;
    Mlp model;
};

Experiment build_experiment(const ExperimentConfig& config);

TrainingRun run_training(const ExperimentConfig& config, const TrainingHooks& hooks = {});
TrainingRun run_training(const ExperimentConfig& config, const Experiment& experiment,
                         const TrainingHooks& hooks = {});

void write_metrics(std::ostream& out, std::span<const MetricsRow> rows);

struct SweepRow {
    OptimizerKind optimizer = OptimizerKind::Adam;
    std::size_t batch_size = 0;
    TrainingSummary summary;
};

// One run per (optimizer, B); every arm shares data, split, init and seed.
std::vector<SweepRow> run_batch_sweep(const ExperimentConfig& config,
                                      std::span<const std::size_t> batch_sizes);
void write_sweep(std::ostream& out, std::span<const SweepRow> rows);

struct NoiseSpec {
    double mu = 1.0;
    double sigma = 0.5;
    std::size_t param_count = 8;
};

struct StabilityResult {
    std::size_t warmup = 0;
    std::size_t measured_steps = 0;
    double mean_adam = 0.0;
    double mean_eve = 0.0;
    double std_adam = 0.0;
    double std_eve = 0.0;
    double ratio = 0.0;  // std_eve / std_adam, NaN when std_adam == 0
};

// Feeds one i.i.d. N(mu, sigma^2) examplewise gradient stream to Adam (batch
// means) and Eve (whole batches). Runs `warmup` steps, then reports step-length
// statistics over the following `steps` steps.
StabilityResult run_stability_probe(const NoiseSpec& noise, const HyperParams& hp,
                                    std::size_t steps, std::uint64_t seed,
                                    std::optional<std::size_t> warmup = std::nullopt);

struct AblationSummary {
    std::size_t warmup = 0;
    double mean_step_eve = 0.0;
    double mean_step_no_correction = 0.0;
    double step_ratio = 0.0;
    double final_eval_accuracy_eve = 0.0;
    double final_eval_accuracy_no_correction = 0.0;
    std::size_t shadow_checks = 0;
    std::size_t shadow_violations = 0;
    bool examplewise_variance_seen = false;
    // mean step (no correction) < mean step (eve) after warmup, required
    // whenever examplewise variance was observed.
    bool direction_holds = false;
};

AblationSummary run_ablation(const ExperimentConfig& config);

// `metric,value` records.
void write_key_values(std::ostream& out,
                      std::span<const std::pair<std::string, std::string>> rows);
std::string format_double(double x);

}  // namespace eve::harness
