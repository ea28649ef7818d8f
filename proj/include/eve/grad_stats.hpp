#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace eve {

using BlockId = std::string;

// B examplewise gradients for one parameter block, stored row-major
// (row b = gradient of example b).
class GradBatch {
public:
    GradBatch(BlockId block_id, std::size_t batch_size, std::size_t param_count,
              std::vector<double> values);

    const BlockId& block_id() const { return block_id_; }
    std::size_t batch_size() const { return batch_size_; }
    std::size_t param_count() const { return param_count_; }

    double at(std::size_t example, std::size_t param) const {
        return values_[example * param_count_ + param];
    }
    std::span<const double> row(std::size_t example) const {
        return {values_.data() + example * param_count_, param_count_};
    }
    std::span<const double> values() const { return values_; }

private:
    BlockId block_id_;
    std::size_t batch_size_;
    std::size_t param_count_;
    std::vector<double> values_;
};

enum class StatKind { Mean, RawSecondMoment, Variance, Median, MAD, KthMoment };

const char* to_string(StatKind kind);

struct StatVector {
    BlockId block_id;
    StatKind kind = StatKind::Mean;
    unsigned moment_order = 0;  // only meaningful for KthMoment
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
};

// Column statistics. Every reduction sums examples in ascending order with a
// single accumulator per parameter, so results are bit-reproducible.
StatVector batch_mean(const GradBatch& g);
StatVector raw_second_moment(const GradBatch& g);

// Population variance (divisor B), E[g^2] - E[g]^2, clamped at zero.
StatVector examplewise_variance(const GradBatch& g);

// Variance sum law: Var(mean of B iid draws) = Var(single draw) / B.
StatVector batch_variance_from_examplewise(const StatVector& examplewise_var,
                                           std::size_t batch_size);

struct GenericStat {
    StatKind kind = StatKind::Median;
    unsigned k = 0;

    static GenericStat median() { return {StatKind::Median, 0}; }
    static GenericStat mad() { return {StatKind::MAD, 0}; }
    static GenericStat kth_moment(unsigned k) { return {StatKind::KthMoment, k}; }
};

// Median (mean of the two middle order statistics for even B), mean absolute
// deviation about the mean, or the raw k-th moment (1/B) sum g^k.
StatVector generic_statistic(const GradBatch& g, GenericStat stat);

}  // namespace eve
