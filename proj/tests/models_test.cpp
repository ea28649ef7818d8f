#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "eve/models.hpp"

using namespace eve;

namespace {

Dataset random_regression(std::size_t n, std::size_t dim, std::uint64_t seed) {
    return make_linear_regression(n, dim, 0.5, seed);
}

Mlp mlp(std::vector<std::size_t> sizes, Activation act, LossKind loss) {
    return Mlp(ModelSpec{std::move(sizes), act, loss});
}

// Straightforward forward pass written against the documented layout.
double reference_loss(const ModelSpec& spec, const Params& theta, std::span<const double> x,
                      double y) {
    std::vector<double> a(x.begin(), x.end());
    const std::size_t L = spec.layer_sizes.size() - 1;
    for (std::size_t l = 0; l < L; ++l) {
        const auto& W = theta[2 * l].values;
        const auto& b = theta[2 * l + 1].values;
        const std::size_t in = spec.layer_sizes[l], out = spec.layer_sizes[l + 1];
        std::vector<double> z(out);
        for (std::size_t i = 0; i < out; ++i) {
            z[i] = b[i];
            for (std::size_t j = 0; j < in; ++j) z[i] += W[i * in + j] * a[j];
            if (l + 1 < L) {
                if (spec.hidden_activation == Activation::Tanh) z[i] = std::tanh(z[i]);
                if (spec.hidden_activation == Activation::Relu) z[i] = std::max(z[i], 0.0);
            }
        }
        a = z;
    }
    switch (spec.loss) {
        case LossKind::SquaredError: return 0.5 * (a[0] - y) * (a[0] - y);
        case LossKind::LogisticCrossEntropy: return std::log(1.0 + std::exp(a[0])) - y * a[0];
        case LossKind::SoftmaxCrossEntropy: {
            double s = 0.0;
            for (double z : a) s += std::exp(z);
            return std::log(s) - a[static_cast<std::size_t>(y)];
        }
    }
    return 0.0;
}

std::vector<std::size_t> iota(std::size_t n) {
    std::vector<std::size_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = i;
    return v;
}

double rel_diff(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

}  // namespace

TEST(ForwardLoss, LinearZeroWeightsZeroTarget) {
    const auto m = mlp({3, 1}, Activation::Identity, LossKind::SquaredError);
    Params theta = m.init_params(1);
    for (auto& blk : theta) std::fill(blk.values.begin(), blk.values.end(), 0.0);
    const std::vector<double> x{1.0, -2.0, 3.0};
    EXPECT_EQ(m.forward_loss(theta, x, 0.0), 0.0);
}

TEST(ForwardLoss, LogisticAtZeroLogitIsLn2) {
    const auto m = mlp({2, 1}, Activation::Identity, LossKind::LogisticCrossEntropy);
    Params theta = m.init_params(1);
    for (auto& blk : theta) std::fill(blk.values.begin(), blk.values.end(), 0.0);
    const std::vector<double> x{0.7, 0.1};
    EXPECT_DOUBLE_EQ(m.forward_loss(theta, x, 0.0), std::numbers::ln2);
    EXPECT_DOUBLE_EQ(m.forward_loss(theta, x, 1.0), std::numbers::ln2);
    EXPECT_THROW(m.forward_loss(theta, x, 0.5), std::invalid_argument);
}

TEST(ForwardLoss, MatchesReferenceImplementation) {
    const auto data = make_gaussian_blobs(20, 4, 3, 1.0, 1.0, 5);
    for (auto act : {Activation::Tanh, Activation::Relu, Activation::Identity}) {
        const auto m = mlp({4, 6, 5, 3}, act, LossKind::SoftmaxCrossEntropy);
        const auto theta = m.init_params(9);
        for (std::size_t d = 0; d < data.size(); ++d) {
            const double got = m.forward_loss(theta, data.input(d), data.targets[d]);
            const double want = reference_loss(m.spec(), theta, data.input(d), data.targets[d]);
            EXPECT_LE(rel_diff(got, want), 1e-12);
        }
    }
}

TEST(ForwardLoss, RejectsShapeMismatch) {
    const auto m = mlp({3, 2}, Activation::Tanh, LossKind::SoftmaxCrossEntropy);
    auto theta = m.init_params(1);
    const std::vector<double> x{1.0, 2.0};
    EXPECT_THROW(m.forward_loss(theta, x, 0.0), std::invalid_argument);
    theta.pop_back();
    const std::vector<double> x3{1.0, 2.0, 3.0};
    EXPECT_THROW(m.forward_loss(theta, x3, 0.0), std::invalid_argument);
    EXPECT_THROW(mlp({3, 2}, Activation::Tanh, LossKind::SquaredError), std::invalid_argument);
}

TEST(ExamplewiseGrad, LinearRegressionRowIsResidualTimesInput) {
    const auto m = mlp({3, 1}, Activation::Identity, LossKind::SquaredError);
    auto theta = m.init_params(2);
    theta[1].values[0] = 0.0;  // no bias: row = (w.x - y) x
    const auto data = random_regression(5, 3, 4);
    const auto batch = iota(5);
    const auto g = examplewise_grad_block(m, theta, data, batch, "dense0.weight");
    ASSERT_EQ(g.batch_size(), 5u);
    ASSERT_EQ(g.param_count(), 3u);
    for (std::size_t b = 0; b < 5; ++b) {
        const auto x = data.input(b);
        double r = -data.targets[b];
        for (std::size_t j = 0; j < 3; ++j) r += theta[0].values[j] * x[j];
        for (std::size_t j = 0; j < 3; ++j) EXPECT_LE(rel_diff(g.at(b, j), r * x[j]), 1e-14);
    }
}

TEST(ExamplewiseGrad, DuplicatedExampleGivesIdenticalRows) {
    const auto m = mlp({2, 4, 3}, Activation::Tanh, LossKind::SoftmaxCrossEntropy);
    const auto theta = m.init_params(3);
    const auto data = make_gaussian_blobs(10, 2, 3, 2.0, 1.0, 1);
    const std::vector<std::size_t> batch{4, 7, 4};
    for (const auto& id : m.backward_block_order()) {
        const auto g = examplewise_grad_block(m, theta, data, batch, id);
        for (std::size_t p = 0; p < g.param_count(); ++p) EXPECT_EQ(g.at(0, p), g.at(2, p));
    }
}

TEST(ExamplewiseGrad, UnknownBlockRejected) {
    const auto m = mlp({2, 2}, Activation::Tanh, LossKind::SoftmaxCrossEntropy);
    const auto data = make_gaussian_blobs(4, 2, 2, 1.0, 1.0, 1);
    const auto batch = iota(4);
    EXPECT_THROW(examplewise_grad_block(m, m.init_params(1), data, batch, "dense7.weight"),
                 std::invalid_argument);
}

TEST(ExamplewiseGrad, MatchesFiniteDifferences) {
    const auto m = mlp({3, 5, 4, 3}, Activation::Tanh, LossKind::SoftmaxCrossEntropy);
    const auto theta = m.init_params(12);
    const auto data = make_gaussian_blobs(4, 3, 3, 1.5, 1.0, 8);
    const auto batch = iota(4);

    // Flat layout: blocks in forward order, as flatten() produces.
    std::vector<std::vector<double>> analytic(4);
    for (const auto& blk : theta) {
        const auto g = examplewise_grad_block(m, theta, data, batch, blk.block_id);
        for (std::size_t b = 0; b < 4; ++b) {
            auto row = g.row(b);
            analytic[b].insert(analytic[b].end(), row.begin(), row.end());
        }
    }
    std::size_t checked = 0;
    for (std::size_t b = 0; b < 4; ++b) {
        const auto fd = finite_difference_grad(m, theta, data.input(b), data.targets[b], 1e-5);
        ASSERT_EQ(fd.size(), analytic[b].size());
        for (std::size_t p = 0; p < fd.size(); ++p) {
            if (std::abs(analytic[b][p]) <= 1e-8) continue;
            ++checked;
            EXPECT_LE(rel_diff(analytic[b][p], fd[p]), 1e-5) << "b=" << b << " p=" << p;
        }
    }
    EXPECT_GT(checked, 50u);
}

TEST(ExamplewiseGrad, MeanMatchesOnePassBatchGradient) {
    for (auto loss : {LossKind::SoftmaxCrossEntropy, LossKind::LogisticCrossEntropy}) {
        const std::size_t out = loss == LossKind::SoftmaxCrossEntropy ? 2 : 1;
        const auto m = mlp({2, 7, 5, out}, Activation::Relu, loss);
        const auto theta = m.init_params(4);
        const auto data = make_gaussian_blobs(64, 2, 2, 2.0, 1.0, 3);
        const auto batch = iota(32);
        const auto one_pass = batch_gradient(m, theta, data, batch);
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const auto ew = batch_mean(examplewise_grad_block(m, theta, data, batch, theta[i].block_id));
            ASSERT_EQ(one_pass[i].block_id, theta[i].block_id);
            for (std::size_t p = 0; p < ew.size(); ++p) {
                EXPECT_NEAR(ew.values[p], one_pass[i].values[p],
                            1e-10 * std::max(1.0, std::abs(one_pass[i].values[p])));
            }
        }
    }
}

namespace {

struct Reductions {
    std::vector<double> mean, raw, var, median;
    bool operator==(const Reductions&) const = default;
};

Reductions reduce_all(const GradBatch& g) {
    return {batch_mean(g).values, raw_second_moment(g).values, examplewise_variance(g).values,
            generic_statistic(g, GenericStat::median()).values};
}

}  // namespace

TEST(StreamingBackprop, BitIdenticalToMaterialized) {
    const auto m = mlp({4, 8, 6, 3}, Activation::Tanh, LossKind::SoftmaxCrossEntropy);
    const auto theta = m.init_params(6);
    const auto data = make_gaussian_blobs(50, 4, 3, 1.0, 1.0, 2);
    const std::vector<std::size_t> batch{3, 14, 15, 9, 26, 5, 35, 8};
    const auto streamed = streaming_backprop(m, theta, data, batch, reduce_all);
    const auto materialized = materialized_backprop(m, theta, data, batch, reduce_all);
    ASSERT_EQ(streamed.size(), 6u);
    ASSERT_EQ(streamed.size(), materialized.size());
    const auto order = m.backward_block_order();
    for (std::size_t i = 0; i < streamed.size(); ++i) {
        EXPECT_EQ(streamed[i].block_id, order[i]);
        EXPECT_EQ(streamed[i].block_id, materialized[i].block_id);
        EXPECT_TRUE(streamed[i].value == materialized[i].value);
    }
}

TEST(StreamingBackprop, VisitsOutputLayerFirst) {
    const auto m = mlp({2, 3, 3, 2}, Activation::Tanh, LossKind::SoftmaxCrossEntropy);
    EXPECT_EQ(m.backward_block_order(),
              (std::vector<BlockId>{"dense2.weight", "dense2.bias", "dense1.weight", "dense1.bias",
                                    "dense0.weight", "dense0.bias"}));
}

TEST(StreamingBackprop, EachBlockMatchesSingleBlockExtraction) {
    const auto m = mlp({3, 1}, Activation::Identity, LossKind::SquaredError);
    const auto theta = m.init_params(1);
    const auto data = random_regression(10, 3, 2);
    const auto batch = iota(10);
    const auto streamed = streaming_backprop(m, theta, data, batch, reduce_all);
    for (const auto& r : streamed) {
        EXPECT_TRUE(r.value == reduce_all(examplewise_grad_block(m, theta, data, batch, r.block_id)));
    }
}

TEST(StreamingBackprop, PeakBufferIsLargestBlock) {
    const auto m = mlp({5, 9, 3}, Activation::Tanh, LossKind::SoftmaxCrossEntropy);  // 4 blocks
    const auto theta = m.init_params(2);
    const auto data = make_gaussian_blobs(40, 5, 3, 1.0, 1.0, 2);
    const auto batch = iota(16);
    std::size_t max_block = 0, sum_blocks = 0;
    for (const auto& blk : theta) {
        max_block = std::max(max_block, 16 * blk.size());
        sum_blocks += 16 * blk.size();
    }
    BufferMeter streaming_meter, materialized_meter;
    streaming_backprop(m, theta, data, batch, [](const GradBatch& g) { return g.param_count(); },
                       &streaming_meter);
    materialized_backprop(m, theta, data, batch, [](const GradBatch& g) { return g.param_count(); },
                          &materialized_meter);
    EXPECT_EQ(streaming_meter.peak(), max_block);
    EXPECT_EQ(streaming_meter.live(), 0u);
    EXPECT_EQ(materialized_meter.peak(), sum_blocks);
    EXPECT_LT(streaming_meter.peak(), materialized_meter.peak());
}

TEST(StreamingBackprop, ConsumerFailureAbortsSweep) {
    const auto m = mlp({2, 4, 2}, Activation::Tanh, LossKind::SoftmaxCrossEntropy);
    const auto theta = m.init_params(2);
    const auto data = make_gaussian_blobs(8, 2, 2, 1.0, 1.0, 2);
    const auto batch = iota(4);
    BufferMeter meter;
    int visited = 0;
    auto consumer = [&](const GradBatch&) {
        if (++visited == 2) throw std::runtime_error("consumer failed");
        return 0;
    };
    EXPECT_THROW(streaming_backprop(m, theta, data, batch, consumer, &meter), std::runtime_error);
    EXPECT_EQ(visited, 2);
    EXPECT_EQ(meter.live(), 0u);
}

TEST(FiniteDifference, Examples) {
    const std::vector<double> three{3.0};
    auto sq = [](std::span<const double> t) { return t[0] * t[0]; };
    EXPECT_NEAR(finite_difference_grad(sq, three, 1e-5)[0], 6.0, 1e-9);

    const std::vector<double> pt{1.0, -2.0, 0.5};
    for (double g : finite_difference_grad([](std::span<const double>) { return 4.2; }, pt, 1e-5)) {
        EXPECT_EQ(g, 0.0);
    }
    EXPECT_THROW(finite_difference_grad(sq, three, 0.0), std::invalid_argument);
}

TEST(FiniteDifference, LogisticModelMatchesAnalytic) {
    const auto m = mlp({3, 1}, Activation::Identity, LossKind::LogisticCrossEntropy);
    const auto theta = m.init_params(31);
    const auto data = make_gaussian_blobs(6, 3, 2, 1.0, 1.0, 7);
    const auto batch = iota(6);
    for (std::size_t b = 0; b < 6; ++b) {
        const std::vector<std::size_t> single{b};
        const auto analytic = flatten({{"dense0.weight", 1, 3,
                                        batch_gradient(m, theta, data, single)[0].values},
                                       {"dense0.bias", 1, 1,
                                        batch_gradient(m, theta, data, single)[1].values}});
        const auto fd = finite_difference_grad(m, theta, data.input(b), data.targets[b], 1e-5);
        for (std::size_t p = 0; p < fd.size(); ++p) {
            if (std::abs(analytic[p]) > 1e-8) {
                EXPECT_LE(rel_diff(analytic[p], fd[p]), 1e-5);
            }
        }
    }
}

TEST(BatchSampler, ShuffledEpochsCoverPool) {
    std::vector<std::size_t> pool{2, 3, 5, 7, 11, 13, 17, 19};
    BatchSampler s(pool, 4, SamplingStrategy::ShuffledEpochs, 1);
    for (int epoch = 0; epoch < 3; ++epoch) {
        std::multiset<std::size_t> seen;
        for (int i = 0; i < 2; ++i) {
            auto b = s.next();
            EXPECT_EQ(b.size(), 4u);
            seen.insert(b.begin(), b.end());
        }
        EXPECT_EQ(seen, std::multiset<std::size_t>(pool.begin(), pool.end()));
    }
}

TEST(BatchSampler, WithReplacementStaysInPool) {
    std::vector<std::size_t> pool{10, 20, 30};
    BatchSampler s(pool, 16, SamplingStrategy::WithReplacement, 3);
    for (int i = 0; i < 10; ++i) {
        for (auto idx : s.next()) EXPECT_TRUE(idx == 10 || idx == 20 || idx == 30);
    }
}

TEST(BatchSampler, DeterministicPerSeed) {
    BatchSampler a(iota(100), 7, SamplingStrategy::ShuffledEpochs, 42);
    BatchSampler b(iota(100), 7, SamplingStrategy::ShuffledEpochs, 42);
    BatchSampler c(iota(100), 7, SamplingStrategy::ShuffledEpochs, 43);
    bool differs = false;
    for (int i = 0; i < 50; ++i) {
        auto x = a.next();
        EXPECT_EQ(x, b.next());
        if (x != c.next()) differs = true;
    }
    EXPECT_TRUE(differs);
}

TEST(BatchSampler, RejectsOversizedBatch) {
    EXPECT_THROW(BatchSampler(iota(3), 4, SamplingStrategy::ShuffledEpochs, 0), std::invalid_argument);
    EXPECT_THROW(BatchSampler(iota(3), 0, SamplingStrategy::ShuffledEpochs, 0), std::invalid_argument);
}

TEST(Dataset, ParseDelimited) {
    std::istringstream in("# x1, x2, y\n1.5, 2, 0\n\n-3;4e-1;1\n  5\t6 1\n");
    const auto d = parse_delimited(in);
    EXPECT_EQ(d.size(), 3u);
    EXPECT_EQ(d.feature_dim, 2u);
    EXPECT_EQ(d.inputs, (std::vector<double>{1.5, 2, -3, 0.4, 5, 6}));
    EXPECT_EQ(d.targets, (std::vector<double>{0, 1, 1}));
}

TEST(Dataset, ParseErrors) {
    std::istringstream ragged("1,2,3\n1,2\n");
    EXPECT_THROW(parse_delimited(ragged), std::runtime_error);
    std::istringstream bad("1,abc,3\n");
    EXPECT_THROW(parse_delimited(bad), std::runtime_error);
    std::istringstream single("1\n");
    EXPECT_THROW(parse_delimited(single), std::runtime_error);
    std::istringstream empty("# nothing\n");
    EXPECT_THROW(parse_delimited(empty), std::invalid_argument);
    EXPECT_THROW(load_delimited("/nonexistent/file.csv"), std::runtime_error);
}

TEST(Dataset, GeneratorsAreSeedDeterministic) {
    EXPECT_EQ(make_gaussian_blobs(30, 3, 3, 2.0, 0.5, 9).inputs,
              make_gaussian_blobs(30, 3, 3, 2.0, 0.5, 9).inputs);
    EXPECT_NE(make_gaussian_blobs(30, 3, 3, 2.0, 0.5, 9).inputs,
              make_gaussian_blobs(30, 3, 3, 2.0, 0.5, 10).inputs);
    const auto q = make_quadratic_regression(20, 2, 0.0, 1);
    EXPECT_EQ(q.size(), 20u);
    EXPECT_NO_THROW(q.validate());
}

TEST(Dataset, SplitIsPartition) {
    const auto s = split_train_eval(101, 0.2, 5);
    EXPECT_EQ(s.eval.size(), 20u);
    EXPECT_EQ(s.train.size(), 81u);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    all.insert(s.eval.begin(), s.eval.end());
    EXPECT_EQ(all.size(), 101u);
}
