#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "eve/grad_stats.hpp"
#include "eve/param_block.hpp"

namespace eve {

// D examples, row-major features, one scalar target per example. For
// classification the target holds the class index.
struct Dataset {
    std::size_t feature_dim = 0;
    std::vector<double> inputs;
    std::vector<double> targets;

    std::size_t size() const { return targets.size(); }
    std::span<const double> input(std::size_t d) const {
        return {inputs.data() + d * feature_dim, feature_dim};
    }
    void validate() const;
};

// One example per line: features then target, separated by commas,
// semicolons or whitespace. Blank lines and lines starting with '#' are skipped.
Dataset parse_delimited(std::istream& in);
Dataset load_delimited(const std::filesystem::path& path);

// Classes are labelled round-robin; class centres sit on a circle of radius
// `separation` in the first two feature dimensions.
Dataset make_gaussian_blobs(std::size_t n, std::size_t dim, std::size_t classes,
                            double separation, double spread, std::uint64_t seed);
Dataset make_linear_regression(std::size_t n, std::size_t dim, double noise, std::uint64_t seed);
Dataset make_quadratic_regression(std::size_t n, std::size_t dim, double noise, std::uint64_t seed);

struct DataSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> eval;
};

// Deterministic shuffled split; eval receives floor(eval_fraction * D) examples.
DataSplit split_train_eval(std::size_t dataset_size, double eval_fraction, std::uint64_t seed);

enum class SamplingStrategy { ShuffledEpochs, WithReplacement };

// Draws index batches from a pool of dataset indices.
class BatchSampler {
public:
    BatchSampler(std::vector<std::size_t> pool, std::size_t batch_size, SamplingStrategy strategy,
                 std::uint64_t seed);

    std::vector<std::size_t> next();
    std::size_t batch_size() const { return batch_size_; }

private:
    std::vector<std::size_t> pool_;
    std::size_t batch_size_;
    SamplingStrategy strategy_;
    std::mt19937_64 rng_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
};

enum class Activation { Identity, Tanh, Relu };
enum class LossKind { SquaredError, LogisticCrossEntropy, SoftmaxCrossEntropy };

Activation parse_activation(const std::string& name);
const char* to_string(Activation a);

struct ModelSpec {
    // Input width, hidden widths..., output width.
    std::vector<std::size_t> layer_sizes;
    Activation hidden_activation = Activation::Tanh;
    LossKind loss = LossKind::SoftmaxCrossEntropy;
};

// Fully connected network: dense layers with the hidden activation between
// them and an identity output feeding the loss. Dense layer l owns the blocks
// "dense<l>.weight" (out x in) and "dense<l>.bias".
//
// Losses per example: squared error 0.5 * (z - y)^2, logistic cross-entropy
// log(1 + e^z) - y z for y in {0, 1}, softmax cross-entropy
// logsumexp(z) - z_y.
class Mlp {
public:
    explicit Mlp(ModelSpec spec);

    const ModelSpec& spec() const { return spec_; }
    std::size_t dense_layers() const { return spec_.layer_sizes.size() - 1; }
    std::size_t input_dim() const { return spec_.layer_sizes.front(); }
    std::size_t output_dim() const { return spec_.layer_sizes.back(); }

    static BlockId weight_id(std::size_t layer);
    static BlockId bias_id(std::size_t layer);

    // Glorot-uniform weights, zero biases, in forward block order.
    Params init_params(std::uint64_t seed) const;
    void check_params(const Params& theta) const;

    // Block ids in the order streaming backprop visits them (output first).
    std::vector<BlockId> backward_block_order() const;

    std::vector<double> forward(const Params& theta, std::span<const double> x) const;
    double forward_loss(const Params& theta, std::span<const double> x, double target) const;
    double mean_loss(const Params& theta, const Dataset& data,
                     std::span<const std::size_t> indices) const;
    std::size_t predict_class(const Params& theta, std::span<const double> x) const;
    double accuracy(const Params& theta, const Dataset& data,
                    std::span<const std::size_t> indices) const;

private:
    ModelSpec spec_;
};

// Counts live examplewise-gradient elements so tests can check peak usage.
class BufferMeter {
public:
    void acquire(std::size_t n) {
        live_ += n;
        if (live_ > peak_) peak_ = live_;
    }
    void release(std::size_t n) { live_ -= n; }
    std::size_t live() const { return live_; }
    std::size_t peak() const { return peak_; }
    void reset() { live_ = peak_ = 0; }

private:
    std::size_t live_ = 0;
    std::size_t peak_ = 0;
};

// Backprops the batch once and hands each block's B x P examplewise gradient
// to `visit`, output layer first. Each GradBatch is destroyed before the next
// block's is built, so at most one block of examplewise gradients is live.
void visit_examplewise_blocks(const Mlp& model, const Params& theta, const Dataset& data,
                              std::span<const std::size_t> batch,
                              const std::function<void(const GradBatch&)>& visit,
                              BufferMeter* meter = nullptr);

template <class R>
struct BlockResult {
    BlockId block_id;
    R value;
};

template <class Consumer>
auto streaming_backprop(const Mlp& model, const Params& theta, const Dataset& data,
                        std::span<const std::size_t> batch, Consumer&& consumer,
                        BufferMeter* meter = nullptr)
    -> std::vector<BlockResult<std::invoke_result_t<Consumer&, const GradBatch&>>> {
    using R = std::invoke_result_t<Consumer&, const GradBatch&>;
    std::vector<BlockResult<R>> out;
    visit_examplewise_blocks(
        model, theta, data, batch,
        [&](const GradBatch& g) { out.push_back({g.block_id(), consumer(g)}); }, meter);
    return out;
}

// Every block's examplewise gradients at once, in backward block order.
std::vector<GradBatch> materialize_examplewise(const Mlp& model, const Params& theta,
                                               const Dataset& data,
                                               std::span<const std::size_t> batch,
                                               BufferMeter* meter = nullptr);

template <class Consumer>
auto materialized_backprop(const Mlp& model, const Params& theta, const Dataset& data,
                           std::span<const std::size_t> batch, Consumer&& consumer,
                           BufferMeter* meter = nullptr)
    -> std::vector<BlockResult<std::invoke_result_t<Consumer&, const GradBatch&>>> {
    using R = std::invoke_result_t<Consumer&, const GradBatch&>;
    auto all = materialize_examplewise(model, theta, data, batch, meter);
    std::vector<BlockResult<R>> out;
    out.reserve(all.size());
    for (const auto& g : all) out.push_back({g.block_id(), consumer(g)});
    return out;
}

GradBatch examplewise_grad_block(const Mlp& model, const Params& theta, const Dataset& data,
                                 std::span<const std::size_t> batch, const BlockId& block_id);

// Gradient of the batch-mean loss, accumulated example by example without
// forming examplewise matrices. Blocks in forward order, kind Mean.
std::vector<StatVector> batch_gradient(const Mlp& model, const Params& theta, const Dataset& data,
                                       std::span<const std::size_t> batch);

std::vector<double> flatten(const Params& theta);
void unflatten(std::span<const double> flat, Params& theta);

// Central differences (f(x + h e_p) - f(x - h e_p)) / 2h.
std::vector<double> finite_difference_grad(const std::function<double(std::span<const double>)>& f,
                                           std::span<const double> theta, double h);

// Same, for the single-example loss of a model; flat layout matches flatten().
std::vector<double> finite_difference_grad(const Mlp& model, const Params& theta,
                                           std::span<const double> x, double target, double h);

}  // namespace eve
