#include "eve/grad_stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace eve {

GradBatch::GradBatch(BlockId block_id, std::size_t batch_size, std::size_t param_count,
                     std::vector<double> values)
    : block_id_(std::move(block_id)),
      batch_size_(batch_size),
      param_count_(param_count),
      values_(std::move(values)) {
    if (batch_size_ == 0 || param_count_ == 0) {
        throw std::invalid_argument("GradBatch: batch size and parameter count must be positive");
    }
    if (values_.size() != batch_size_ * param_count_) {
        throw std::invalid_argument("GradBatch: expected " + std::to_string(batch_size_) + "x" +
                                    std::to_string(param_count_) + " values, got " +
                                    std::to_string(values_.size()));
    }
    for (double x : values_) {
        if (!std::isfinite(x)) {
            throw std::invalid_argument("GradBatch: non-finite gradient entry in block '" +
                                        block_id_ + "'");
        }
    }
}

const char* to_string(StatKind kind) {
    switch (kind) {
        case StatKind::Mean: return "mean";
        case StatKind::RawSecondMoment: return "raw_second_moment";
        case StatKind::Variance: return "variance";
        case StatKind::Median: return "median";
        case StatKind::MAD: return "mad";
        case StatKind::KthMoment: return "kth_moment";
    }
    return "unknown";
}

namespace {

double int_power(double x, unsigned k) {
    double r = x;
    for (unsigned i = 1; i < k; ++i) r *= x;
    return r;
}

// (1/B) sum_b map(g[b][p]) for every column p, examples visited in order.
template <class Map>
std::vector<double> column_average(const GradBatch& g, Map map) {
    const std::size_t B = g.batch_size();
    const std::size_t P = g.param_count();
    std::vector<double> acc(P, 0.0);
    for (std::size_t b = 0; b < B; ++b) {
        auto row = g.row(b);
        for (std::size_t p = 0; p < P; ++p) acc[p] += map(row[p]);
    }
    const double denom = static_cast<double>(B);
    for (double& a : acc) a /= denom;
    return acc;
}

StatVector make(const GradBatch& g, StatKind kind, std::vector<double> values, unsigned k = 0) {
    return StatVector{g.block_id(), kind, k, std::move(values)};
}

}  // namespace

StatVector batch_mean(const GradBatch& g) {
    return make(g, StatKind::Mean, column_average(g, [](double x) { return x; }));
}

StatVector raw_second_moment(const GradBatch& g) {
    return make(g, StatKind::RawSecondMoment,
                column_average(g, [](double x) { return int_power(x, 2); }));
}

StatVector examplewise_variance(const GradBatch& g) {
    auto mean = batch_mean(g).values;
    auto var = raw_second_moment(g).values;
    // Constant columns are exactly zero; E[g^2] - E[g]^2 would leave rounding residue.
    std::vector<bool> constant(g.param_count(), true);
    auto first = g.row(0);
    for (std::size_t b = 1; b < g.batch_size(); ++b) {
        auto row = g.row(b);
        for (std::size_t p = 0; p < row.size(); ++p) {
            if (row[p] != first[p]) constant[p] = false;
        }
    }
    for (std::size_t p = 0; p < var.size(); ++p) {
        var[p] = constant[p] ? 0.0 : std::max(var[p] - mean[p] * mean[p], 0.0);
    }
    return make(g, StatKind::Variance, std::move(var));
}

StatVector batch_variance_from_examplewise(const StatVector& examplewise_var,
                                           std::size_t batch_size) {
    if (batch_size == 0) {
        throw std::invalid_argument("batch_variance_from_examplewise: batch size must be positive");
    }
    if (examplewise_var.kind != StatKind::Variance) {
        throw std::invalid_argument("batch_variance_from_examplewise: input is not a variance");
    }
    StatVector out = examplewise_var;
    const double denom = static_cast<double>(batch_size);
    for (double& v : out.values) {
        if (v < 0.0) throw std::invalid_argument("batch_variance_from_examplewise: negative variance");
        v /= denom;
    }
    return out;
}

StatVector generic_statistic(const GradBatch& g, GenericStat stat) {
    const std::size_t B = g.batch_size();
    const std::size_t P = g.param_count();
    switch (stat.kind) {
        case StatKind::Median: {
            std::vector<double> out(P);
            std::vector<double> column(B);
            for (std::size_t p = 0; p < P; ++p) {
                for (std::size_t b = 0; b < B; ++b) column[b] = g.at(b, p);
                std::sort(column.begin(), column.end());
                out[p] = B % 2 == 1 ? column[B / 2] : 0.5 * (column[B / 2 - 1] + column[B / 2]);
            }
            return make(g, StatKind::Median, std::move(out));
        }
        case StatKind::MAD: {
            const auto mean = batch_mean(g).values;
            std::vector<double> acc(P, 0.0);
            for (std::size_t b = 0; b < B; ++b) {
                auto row = g.row(b);
                for (std::size_t p = 0; p < P; ++p) acc[p] += std::abs(row[p] - mean[p]);
            }
            for (double& a : acc) a /= static_cast<double>(B);
            return make(g, StatKind::MAD, std::move(acc));
        }
        case StatKind::KthMoment: {
            if (stat.k < 1) throw std::invalid_argument("generic_statistic: moment order must be >= 1");
            const unsigned k = stat.k;
            return make(g, StatKind::KthMoment,
                        column_average(g, [k](double x) { return int_power(x, k); }), k);
        }
        default:
            throw std::invalid_argument(std::string("generic_statistic: unsupported kind ") +
                                        to_string(stat.kind));
    }
}

}  // namespace eve
