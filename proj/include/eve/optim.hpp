#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "eve/grad_stats.hpp"
#include "eve/param_block.hpp"

namespace eve {

struct HyperParams {
    double alpha = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;  // added outside the square root
    std::size_t batch_size = 1;

    // Throws std::invalid_argument when a field is out of range.
    void validate() const;
};

// Biased EMA accumulators for one parameter block.
struct MomentState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t t = 0;

    static MomentState zeros(std::size_t param_count) {
        return {std::vector<double>(param_count, 0.0), std::vector<double>(param_count, 0.0), 0};
    }
};

struct DebiasedMoments {
    std::vector<double> m_hat;
    std::vector<double> v_hat;
};

struct StepRecord {
    std::uint64_t step_number = 0;
    std::vector<double> update;  // applied delta theta
    double step_length = 0.0;    // Euclidean norm of update
    double per_coord_abs_mean = 0.0;
};

struct StepResult {
    ParamBlock theta;
    MomentState state;
    StepRecord record;
};

enum class OptimizerKind { Adam, Eve, EveNoCorrection };

const char* to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(const std::string& name);

// m / (1 - beta1^t), v / (1 - beta2^t). Requires t >= 1.
DebiasedMoments debias(const MomentState& state, const HyperParams& hp);

// Adam on the batch mean gradient.
StepResult adam_step(const ParamBlock& theta, const MomentState& state,
                     const StatVector& mean_grad, const HyperParams& hp);

// Eve: the second moment accumulates examplewise squares and is converted to a
// batch-gradient second moment before the update.
StepResult eve_step(const ParamBlock& theta, const MomentState& state, const GradBatch& g,
                    const HyperParams& hp);

// Eve without the batch-variance correction; the denominator uses the
// examplewise second moment directly.
StepResult eve_step_no_correction(const ParamBlock& theta, const MomentState& state,
                                  const GradBatch& g, const HyperParams& hp);

// Eve transition from already-reduced statistics. This is what the layerwise
// path uses: reduce a block's GradBatch, drop it, then step.
StepResult eve_step_from_moments(const ParamBlock& theta, const MomentState& state,
                                 const StatVector& mean_grad, const StatVector& raw_second,
                                 const HyperParams& hp, bool batch_correction = true);

// (1/B) v_e + (1 - 1/B) m^2, entrywise.
std::vector<double> corrected_second_moment(const DebiasedMoments& examplewise, std::size_t batch_size);

// Relative-std statistics. Coordinates with m_hat == 0 yield +inf.
std::vector<double> eta_bar(const DebiasedMoments& md);
std::vector<double> eta(const DebiasedMoments& md_examplewise, std::size_t batch_size);

// alpha / sqrt(eta^2 + 1): the epsilon-free per-coordinate step magnitude.
double sign_form_step_length(double alpha, double eta_value);

// Finite entries only; +inf sentinels are skipped. Returns NaN if none remain.
double finite_mean(std::span<const double> xs);

StepRecord make_step_record(std::uint64_t step, std::vector<double> update);

}  // namespace eve
