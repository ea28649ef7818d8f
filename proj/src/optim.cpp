#include "eve/optim.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace eve {

void HyperParams::validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("beta1 must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("beta2 must lie in [0, 1)");
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw std::invalid_argument("epsilon must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
}

const char* to_string(OptimizerKind kind) {
    switch (kind) {
        case OptimizerKind::Adam: return "adam";
        case OptimizerKind::Eve: return "eve";
        case OptimizerKind::EveNoCorrection: return "eve-no-correction";
    }
    return "unknown";
}

OptimizerKind parse_optimizer(const std::string& name) {
    if (name == "adam") return OptimizerKind::Adam;
    if (name == "eve") return OptimizerKind::Eve;
    if (name == "eve-no-correction") return OptimizerKind::EveNoCorrection;
    throw std::invalid_argument("unknown optimizer '" + name + "'");
}

DebiasedMoments debias(const MomentState& state, const HyperParams& hp) {
    if (state.t == 0) throw std::invalid_argument("debias: timestep must be >= 1");
    const double t = static_cast<double>(state.t);
    const double c1 = 1.0 - std::pow(hp.beta1, t);
    const double c2 = 1.0 - std::pow(hp.beta2, t);
    DebiasedMoments out{state.m, state.v};
    for (double& x : out.m_hat) x /= c1;
    for (double& x : out.v_hat) x /= c2;
    return out;
}

StepRecord make_step_record(std::uint64_t step, std::vector<double> update) {
    StepRecord rec;
    rec.step_number = step;
    double sq = 0.0;
    double abs_sum = 0.0;
    for (double d : update) {
        sq += d * d;
        abs_sum += std::abs(d);
    }
    rec.step_length = std::sqrt(sq);
    rec.per_coord_abs_mean = update.empty() ? 0.0 : abs_sum / static_cast<double>(update.size());
    rec.update = std::move(update);
    return rec;
}

namespace {

void check_dims(const ParamBlock& theta, const MomentState& state, std::size_t grad_size,
                const char* who) {
    if (theta.size() != grad_size || state.m.size() != grad_size || state.v.size() != grad_size) {
        throw std::invalid_argument(std::string(who) + ": dimension mismatch in block '" +
                                    theta.block_id + "' (theta " + std::to_string(theta.size()) +
                                    ", grad " + std::to_string(grad_size) + ", state " +
                                    std::to_string(state.m.size()) + ")");
    }
}

// Lines 5, 9, 10: advance t and fold the new statistics into the EMAs.
MomentState accumulate(const MomentState& state, std::span<const double> first,
                       std::span<const double> second, const HyperParams& hp) {
    MomentState next = state;
    next.t = state.t + 1;
    for (std::size_t p = 0; p < first.size(); ++p) {
        next.m[p] = hp.beta1 * state.m[p] + (1.0 - hp.beta1) * first[p];
        next.v[p] = hp.beta2 * state.v[p] + (1.0 - hp.beta2) * second[p];
    }
    return next;
}

// Line 14 given the final second-moment estimate.
StepResult apply(const ParamBlock& theta, MomentState next, const std::vector<double>& m_hat,
                 const std::vector<double>& v_hat, const HyperParams& hp) {
    std::vector<double> update(m_hat.size());
    ParamBlock out = theta;
    for (std::size_t p = 0; p < m_hat.size(); ++p) {
        update[p] = -hp.alpha * m_hat[p] / (std::sqrt(v_hat[p]) + hp.epsilon);
        out.values[p] += update[p];
    }
    auto rec = make_step_record(next.t, std::move(update));
    return {std::move(out), std::move(next), std::move(rec)};
}

}  // namespace

StepResult adam_step(const ParamBlock& theta, const MomentState& state,
                     const StatVector& mean_grad, const HyperParams& hp) {
    check_dims(theta, state, mean_grad.size(), "adam_step");
    std::vector<double> squared(mean_grad.size());
    for (std::size_t p = 0; p < squared.size(); ++p) {
        const double g = mean_grad.values[p];
        if (!std::isfinite(g)) throw std::invalid_argument("adam_step: non-finite gradient");
        squared[p] = g * g;
    }
    auto next = accumulate(state, mean_grad.values, squared, hp);
    auto md = debias(next, hp);
    return apply(theta, std::move(next), md.m_hat, md.v_hat, hp);
}

std::vector<double> corrected_second_moment(const DebiasedMoments& examplewise,
                                            std::size_t batch_size) {
    const double inv_b = 1.0 / static_cast<double>(batch_size);
    std::vector<double> out(examplewise.v_hat.size());
    for (std::size_t p = 0; p < out.size(); ++p) {
        const double m = examplewise.m_hat[p];
        out[p] = inv_b * examplewise.v_hat[p] + (1.0 - inv_b) * (m * m);
    }
    return out;
}

StepResult eve_step_from_moments(const ParamBlock& theta, const MomentState& state,
                                 const StatVector& mean_grad, const StatVector& raw_second,
                                 const HyperParams& hp, bool batch_correction) {
    check_dims(theta, state, mean_grad.size(), "eve_step");
    if (raw_second.size() != mean_grad.size()) {
        throw std::invalid_argument("eve_step: mean and second moment sizes differ");
    }
    auto next = accumulate(state, mean_grad.values, raw_second.values, hp);
    auto md = debias(next, hp);
    if (batch_correction) {
        auto v_batch = corrected_second_moment(md, hp.batch_size);
        return apply(theta, std::move(next), md.m_hat, v_batch, hp);
    }
    return apply(theta, std::move(next), md.m_hat, md.v_hat, hp);
}

namespace {

StepResult eve_impl(const ParamBlock& theta, const MomentState& state, const GradBatch& g,
                    const HyperParams& hp, bool batch_correction) {
    if (g.batch_size() != hp.batch_size) {
        throw std::invalid_argument("eve_step: GradBatch has " + std::to_string(g.batch_size()) +
                                    " examples but batch_size is " + std::to_string(hp.batch_size));
    }
    return eve_step_from_moments(theta, state, batch_mean(g), raw_second_moment(g), hp,
                                 batch_correction);
}

}  // namespace

StepResult eve_step(const ParamBlock& theta, const MomentState& state, const GradBatch& g,
                    const HyperParams& hp) {
    return eve_impl(theta, state, g, hp, true);
}

StepResult eve_step_no_correction(const ParamBlock& theta, const MomentState& state,
                                  const GradBatch& g, const HyperParams& hp) {
    return eve_impl(theta, state, g, hp, false);
}

namespace {

std::vector<double> relative_std(const DebiasedMoments& md, double scale) {
    std::vector<double> out(md.m_hat.size());
    for (std::size_t p = 0; p < out.size(); ++p) {
        const double m2 = md.m_hat[p] * md.m_hat[p];
        if (m2 == 0.0) {
            out[p] = std::numeric_limits<double>::infinity();
            continue;
        }
        out[p] = std::sqrt(std::max(md.v_hat[p] - m2, 0.0) / (scale * m2));
    }
    return out;
}

}  // namespace

std::vector<double> eta_bar(const DebiasedMoments& md) { return relative_std(md, 1.0); }

std::vector<double> eta(const DebiasedMoments& md_examplewise, std::size_t batch_size) {
    if (batch_size == 0) throw std::invalid_argument("eta: batch size must be positive");
    return relative_std(md_examplewise, static_cast<double>(batch_size));
}

double sign_form_step_length(double alpha, double eta_value) {
    if (eta_value < 0.0) throw std::invalid_argument("sign_form_step_length: eta must be >= 0");
    return alpha / std::sqrt(eta_value * eta_value + 1.0);
}

double finite_mean(std::span<const double> xs) {
    double sum = 0.0;
    std::size_t n = 0;
    for (double x : xs) {
        if (!std::isfinite(x)) continue;
        sum += x;
        ++n;
    }
    return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(n);
}

}  // namespace eve
