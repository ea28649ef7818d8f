#include "eve/models.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace eve {

// ---------------------------------------------------------------- datasets

void Dataset::validate() const {
    if (size() == 0) throw std::invalid_argument("Dataset: no examples");
    if (feature_dim == 0) throw std::invalid_argument("Dataset: feature dimension must be positive");
    if (inputs.size() != size() * feature_dim) {
        throw std::invalid_argument("Dataset: inputs do not match D x feature_dim");
    }
    for (double x : inputs) {
        if (!std::isfinite(x)) throw std::invalid_argument("Dataset: non-finite input");
    }
    for (double y : targets) {
        if (!std::isfinite(y)) throw std::invalid_argument("Dataset: non-finite target");
    }
}

namespace {

std::vector<double> parse_numeric_line(const std::string& line, std::size_t line_no) {
    std::vector<double> fields;
    const char* p = line.data();
    const char* end = p + line.size();
    auto is_sep = [](char c) { return c == ',' || c == ';' || c == ' ' || c == '\t' || c == '\r'; };
    while (p < end) {
        while (p < end && is_sep(*p)) ++p;
        if (p == end) break;
        double value = 0.0;
        auto [next, ec] = std::from_chars(p, end, value);
        if (ec != std::errc{} || (next < end && !is_sep(*next))) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": malformed number");
        }
        fields.push_back(value);
        p = next;
    }
    return fields;
}

}  // namespace

Dataset parse_delimited(std::istream& in) {
    Dataset data;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        auto fields = parse_numeric_line(line, line_no);
        if (fields.size() < 2) {
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": need at least one feature and a target");
        }
        if (width == 0) {
            width = fields.size();
        } else if (fields.size() != width) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": expected " +
                                     std::to_string(width) + " columns, got " +
                                     std::to_string(fields.size()));
        }
        data.inputs.insert(data.inputs.end(), fields.begin(), fields.end() - 1);
        data.targets.push_back(fields.back());
    }
    data.feature_dim = width == 0 ? 0 : width - 1;
    data.validate();
    return data;
}

Dataset load_delimited(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset '" + path.string() + "'");
    try {
        return parse_delimited(in);
    } catch (const std::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

Dataset make_gaussian_blobs(std::size_t n, std::size_t dim, std::size_t classes,
                            double separation, double spread, std::uint64_t seed) {
    if (n == 0 || dim == 0 || classes < 2) {
        throw std::invalid_argument("make_gaussian_blobs: need n >= 1, dim >= 1, classes >= 2");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, spread);
    Dataset data;
    data.feature_dim = dim;
    data.inputs.reserve(n * dim);
    data.targets.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = i % classes;
        std::vector<double> centre(dim, 0.0);
        if (dim == 1) {
            centre[0] = separation * static_cast<double>(c);
        } else {
            const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) /
                                 static_cast<double>(classes);
            centre[0] = separation * std::cos(angle);
            centre[1] = separation * std::sin(angle);
        }
        for (std::size_t j = 0; j < dim; ++j) data.inputs.push_back(centre[j] + noise(rng));
        data.targets.push_back(static_cast<double>(c));
    }
    return data;
}

namespace {

Dataset make_regression(std::size_t n, std::size_t dim, double noise_std, std::uint64_t seed,
                        bool quadratic) {
    if (n == 0 || dim == 0) throw std::invalid_argument("regression generator: need n, dim >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    std::vector<double> w(dim);
    for (double& wi : w) wi = unit(rng);
    Dataset data;
    data.feature_dim = dim;
    for (std::size_t i = 0; i < n; ++i) {
        double y = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            const double x = unit(rng);
            data.inputs.push_back(x);
            y += w[j] * x;
            if (quadratic) y += 0.5 * x * x;
        }
        data.targets.push_back(y + noise_std * unit(rng));
    }
    return data;
}

}  // namespace

Dataset make_linear_regression(std::size_t n, std::size_t dim, double noise, std::uint64_t seed) {
    return make_regression(n, dim, noise, seed, false);
}

Dataset make_quadratic_regression(std::size_t n, std::size_t dim, double noise, std::uint64_t seed) {
    return make_regression(n, dim, noise, seed, true);
}

DataSplit split_train_eval(std::size_t dataset_size, double eval_fraction, std::uint64_t seed) {
    if (!(eval_fraction >= 0.0 && eval_fraction < 1.0)) {
        throw std::invalid_argument("split_train_eval: eval fraction must lie in [0, 1)");
    }
    std::vector<std::size_t> order(dataset_size);
    for (std::size_t i = 0; i < dataset_size; ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_eval = static_cast<std::size_t>(eval_fraction * static_cast<double>(dataset_size));
    DataSplit split;
    split.eval.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_eval));
    split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_eval), order.end());
    std::sort(split.eval.begin(), split.eval.end());
    std::sort(split.train.begin(), split.train.end());
    return split;
}

BatchSampler::BatchSampler(std::vector<std::size_t> pool, std::size_t batch_size,
                           SamplingStrategy strategy, std::uint64_t seed)
    : pool_(std::move(pool)), batch_size_(batch_size), strategy_(strategy), rng_(seed) {
    if (batch_size_ == 0) throw std::invalid_argument("BatchSampler: batch size must be positive");
    if (pool_.empty()) throw std::invalid_argument("BatchSampler: empty index pool");
    if (strategy_ == SamplingStrategy::ShuffledEpochs && batch_size_ > pool_.size()) {
        throw std::invalid_argument("BatchSampler: batch size " + std::to_string(batch_size_) +
                                    " exceeds pool of " + std::to_string(pool_.size()));
    }
    order_ = pool_;
    cursor_ = order_.size();
}

std::vector<std::size_t> BatchSampler::next() {
    std::vector<std::size_t> batch(batch_size_);
    if (strategy_ == SamplingStrategy::WithReplacement) {
        std::uniform_int_distribution<std::size_t> pick(0, pool_.size() - 1);
        for (auto& i : batch) i = pool_[pick(rng_)];
        return batch;
    }
    // Partial trailing batches are dropped; each epoch is a fresh permutation.
    if (cursor_ + batch_size_ > order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        cursor_ = 0;
    }
    std::copy_n(order_.begin() + static_cast<std::ptrdiff_t>(cursor_), batch_size_, batch.begin());
    cursor_ += batch_size_;
    return batch;
}

// ---------------------------------------------------------------- model

Activation parse_activation(const std::string& name) {
    if (name == "identity") return Activation::Identity;
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::Relu;
    throw std::invalid_argument("unknown activation '" + name + "'");
}

const char* to_string(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Tanh: return "tanh";
        case Activation::Relu: return "relu";
    }
    return "unknown";
}

Mlp::Mlp(ModelSpec spec) : spec_(std::move(spec)) {
    if (spec_.layer_sizes.size() < 2) throw std::invalid_argument("Mlp: need input and output sizes");
    for (auto s : spec_.layer_sizes) {
        if (s == 0) throw std::invalid_argument("Mlp: layer sizes must be positive");
    }
    switch (spec_.loss) {
        case LossKind::SquaredError:
        case LossKind::LogisticCrossEntropy:
            if (output_dim() != 1) throw std::invalid_argument("Mlp: scalar loss needs output width 1");
            break;
        case LossKind::SoftmaxCrossEntropy:
            if (output_dim() < 2) throw std::invalid_argument("Mlp: softmax needs output width >= 2");
            break;
    }
}

BlockId Mlp::weight_id(std::size_t layer) { return "dense" + std::to_string(layer) + ".weight"; }
BlockId Mlp::bias_id(std::size_t layer) { return "dense" + std::to_string(layer) + ".bias"; }

Params Mlp::init_params(std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    Params theta;
    for (std::size_t l = 0; l < dense_layers(); ++l) {
        const std::size_t in = spec_.layer_sizes[l];
        const std::size_t out = spec_.layer_sizes[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        std::uniform_real_distribution<double> u(-limit, limit);
        ParamBlock w{weight_id(l), out, in, std::vector<double>(out * in)};
        for (double& x : w.values) x = u(rng);
        theta.push_back(std::move(w));
        theta.push_back(ParamBlock{bias_id(l), out, 1, std::vector<double>(out, 0.0)});
    }
    return theta;
}

void Mlp::check_params(const Params& theta) const {
    if (theta.size() != 2 * dense_layers()) {
        throw std::invalid_argument("Mlp: expected " + std::to_string(2 * dense_layers()) +
                                    " parameter blocks, got " + std::to_string(theta.size()));
    }
    for (std::size_t l = 0; l < dense_layers(); ++l) {
        const auto& w = theta[2 * l];
        const auto& b = theta[2 * l + 1];
        const std::size_t in = spec_.layer_sizes[l];
        const std::size_t out = spec_.layer_sizes[l + 1];
        if (w.block_id != weight_id(l) || w.values.size() != in * out) {
            throw std::invalid_argument("Mlp: block '" + w.block_id + "' has wrong id or shape");
        }
        if (b.block_id != bias_id(l) || b.values.size() != out) {
            throw std::invalid_argument("Mlp: block '" + b.block_id + "' has wrong id or shape");
        }
    }
}

std::vector<BlockId> Mlp::backward_block_order() const {
    std::vector<BlockId> ids;
    for (std::size_t l = dense_layers(); l-- > 0;) {
        ids.push_back(weight_id(l));
        ids.push_back(bias_id(l));
    }
    return ids;
}

namespace {

double activate(Activation a, double z) {
    switch (a) {
        case Activation::Identity: return z;
        case Activation::Tanh: return std::tanh(z);
        case Activation::Relu: return z > 0.0 ? z : 0.0;
    }
    return z;
}

// Derivative expressed through the pre-activation z and output a.
double activate_grad(Activation a, double z, double out) {
    switch (a) {
        case Activation::Identity: return 1.0;
        case Activation::Tanh: return 1.0 - out * out;
        case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
    }
    return 1.0;
}

// Per-example activations: acts[0] is the input, acts[l + 1] the output of
// dense layer l (pre-activation kept in pre[l]).
struct Trace {
    std::vector<std::vector<double>> acts;
    std::vector<std::vector<double>> pre;
};

Trace trace_forward(const Mlp& model, const Params& theta, std::span<const double> x) {
    const auto& sizes = model.spec().layer_sizes;
    if (x.size() != model.input_dim()) {
        throw std::invalid_argument("Mlp: input has " + std::to_string(x.size()) +
                                    " features, model expects " + std::to_string(model.input_dim()));
    }
    Trace tr;
    tr.acts.emplace_back(x.begin(), x.end());
    const std::size_t L = model.dense_layers();
    for (std::size_t l = 0; l < L; ++l) {
        const auto& w = theta[2 * l].values;
        const auto& b = theta[2 * l + 1].values;
        const std::size_t in = sizes[l];
        const std::size_t out = sizes[l + 1];
        const auto& a_in = tr.acts.back();
        std::vector<double> z(out);
        for (std::size_t i = 0; i < out; ++i) {
            double s = b[i];
            for (std::size_t j = 0; j < in; ++j) s += w[i * in + j] * a_in[j];
            z[i] = s;
        }
        std::vector<double> a(out);
        const Activation act = l + 1 == L ? Activation::Identity : model.spec().hidden_activation;
        for (std::size_t i = 0; i < out; ++i) a[i] = activate(act, z[i]);
        tr.pre.push_back(std::move(z));
        tr.acts.push_back(std::move(a));
    }
    return tr;
}

double log1p_exp(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

std::size_t class_index(double target, std::size_t classes) {
    if (!(target >= 0.0) || target != std::floor(target) || target >= static_cast<double>(classes)) {
        throw std::invalid_argument("class target " + std::to_string(target) + " not in [0, " +
                                    std::to_string(classes) + ")");
    }
    return static_cast<std::size_t>(target);
}

double loss_value(LossKind loss, std::span<const double> z, double y) {
    switch (loss) {
        case LossKind::SquaredError: {
            const double r = z[0] - y;
            return 0.5 * r * r;
        }
        case LossKind::LogisticCrossEntropy:
            if (y != 0.0 && y != 1.0) throw std::invalid_argument("logistic target must be 0 or 1");
            return log1p_exp(z[0]) - y * z[0];
        case LossKind::SoftmaxCrossEntropy: {
            const std::size_t c = class_index(y, z.size());
            const double zmax = *std::max_element(z.begin(), z.end());
            double s = 0.0;
            for (double zi : z) s += std::exp(zi - zmax);
            return zmax + std::log(s) - z[c];
        }
    }
    return 0.0;
}

std::vector<double> loss_grad(LossKind loss, std::span<const double> z, double y) {
    std::vector<double> dz(z.size());
    switch (loss) {
        case LossKind::SquaredError:
            dz[0] = z[0] - y;
            break;
        case LossKind::LogisticCrossEntropy:
            if (y != 0.0 && y != 1.0) throw std::invalid_argument("logistic target must be 0 or 1");
            dz[0] = sigmoid(z[0]) - y;
            break;
        case LossKind::SoftmaxCrossEntropy: {
            const std::size_t c = class_index(y, z.size());
            const double zmax = *std::max_element(z.begin(), z.end());
            double s = 0.0;
            for (std::size_t k = 0; k < z.size(); ++k) {
                dz[k] = std::exp(z[k] - zmax);
                s += dz[k];
            }
            for (double& d : dz) d /= s;
            dz[c] -= 1.0;
            break;
        }
    }
    return dz;
}

// delta for layer l-1 from delta of layer l (through W_l and the hidden activation).
std::vector<double> propagate_delta(const Mlp& model, const Params& theta, const Trace& tr,
                                    std::size_t l, const std::vector<double>& delta) {
    const auto& sizes = model.spec().layer_sizes;
    const std::size_t in = sizes[l];
    const std::size_t out = sizes[l + 1];
    const auto& w = theta[2 * l].values;
    std::vector<double> prev(in, 0.0);
    for (std::size_t i = 0; i < out; ++i) {
        for (std::size_t j = 0; j < in; ++j) prev[j] += w[i * in + j] * delta[i];
    }
    const auto& z = tr.pre[l - 1];
    const auto& a = tr.acts[l];
    for (std::size_t j = 0; j < in; ++j) {
        prev[j] *= activate_grad(model.spec().hidden_activation, z[j], a[j]);
    }
    return prev;
}

void check_batch(const Dataset& data, std::span<const std::size_t> batch) {
    if (batch.empty()) throw std::invalid_argument("backprop: empty batch");
    for (auto i : batch) {
        if (i >= data.size()) throw std::out_of_range("backprop: example index out of range");
    }
}

}  // namespace

std::vector<double> Mlp::forward(const Params& theta, std::span<const double> x) const {
    check_params(theta);
    return trace_forward(*this, theta, x).acts.back();
}

double Mlp::forward_loss(const Params& theta, std::span<const double> x, double target) const {
    auto z = forward(theta, x);
    return loss_value(spec_.loss, z, target);
}

double Mlp::mean_loss(const Params& theta, const Dataset& data,
                      std::span<const std::size_t> indices) const {
    if (indices.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (auto i : indices) s += forward_loss(theta, data.input(i), data.targets[i]);
    return s / static_cast<double>(indices.size());
}

std::size_t Mlp::predict_class(const Params& theta, std::span<const double> x) const {
    auto z = forward(theta, x);
    if (spec_.loss == LossKind::LogisticCrossEntropy) return z[0] > 0.0 ? 1 : 0;
    if (spec_.loss == LossKind::SquaredError) {
        throw std::invalid_argument("predict_class: regression model has no classes");
    }
    return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

double Mlp::accuracy(const Params& theta, const Dataset& data,
                     std::span<const std::size_t> indices) const {
    if (indices.empty() || spec_.loss == LossKind::SquaredError) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    std::size_t hits = 0;
    for (auto i : indices) {
        if (static_cast<double>(predict_class(theta, data.input(i))) == data.targets[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(indices.size());
}

// ---------------------------------------------------------------- backprop

void visit_examplewise_blocks(const Mlp& model, const Params& theta, const Dataset& data,
                              std::span<const std::size_t> batch,
                              const std::function<void(const GradBatch&)>& visit,
                              BufferMeter* meter) {
    model.check_params(theta);
    check_batch(data, batch);
    const std::size_t B = batch.size();
    const auto& sizes = model.spec().layer_sizes;

    std::vector<Trace> traces;
    traces.reserve(B);
    std::vector<std::vector<double>> deltas;
    deltas.reserve(B);
    for (auto i : batch) {
        traces.push_back(trace_forward(model, theta, data.input(i)));
        deltas.push_back(loss_grad(model.spec().loss, traces.back().acts.back(), data.targets[i]));
    }

    auto emit = [&](BlockId id, std::size_t P, auto fill_row) {
        std::vector<double> values(B * P);
        for (std::size_t b = 0; b < B; ++b) fill_row(b, std::span<double>(values.data() + b * P, P));
        if (meter) meter->acquire(B * P);
        try {
            GradBatch g(std::move(id), B, P, std::move(values));
            visit(g);
        } catch (...) {
            if (meter) meter->release(B * P);
            throw;
        }
        if (meter) meter->release(B * P);
    };

    for (std::size_t l = model.dense_layers(); l-- > 0;) {
        const std::size_t in = sizes[l];
        const std::size_t out = sizes[l + 1];
        emit(Mlp::weight_id(l), out * in, [&](std::size_t b, std::span<double> row) {
            const auto& a = traces[b].acts[l];
            const auto& d = deltas[b];
            for (std::size_t i = 0; i < out; ++i) {
                for (std::size_t j = 0; j < in; ++j) row[i * in + j] = d[i] * a[j];
            }
        });
        emit(Mlp::bias_id(l), out, [&](std::size_t b, std::span<double> row) {
            std::copy(deltas[b].begin(), deltas[b].end(), row.begin());
        });
        if (l > 0) {
            for (std::size_t b = 0; b < B; ++b) {
                deltas[b] = propagate_delta(model, theta, traces[b], l, deltas[b]);
            }
        }
    }
}

std::vector<GradBatch> materialize_examplewise(const Mlp& model, const Params& theta,
                                               const Dataset& data,
                                               std::span<const std::size_t> batch,
                                               BufferMeter* meter) {
    std::vector<GradBatch> all;
    visit_examplewise_blocks(model, theta, data, batch, [&](const GradBatch& g) {
        all.push_back(g);
        if (meter) meter->acquire(g.values().size());
    }, nullptr);
    if (meter) {
        for (const auto& g : all) meter->release(g.values().size());
    }
    return all;
}

GradBatch examplewise_grad_block(const Mlp& model, const Params& theta, const Dataset& data,
                                 std::span<const std::size_t> batch, const BlockId& block_id) {
    const auto order = model.backward_block_order();
    if (std::find(order.begin(), order.end(), block_id) == order.end()) {
        throw std::invalid_argument("examplewise_grad_block: unknown block '" + block_id + "'");
    }
    std::optional<GradBatch> found;
    visit_examplewise_blocks(model, theta, data, batch, [&](const GradBatch& g) {
        if (g.block_id() == block_id) found.emplace(g);
    });
    return std::move(*found);
}

std::vector<StatVector> batch_gradient(const Mlp& model, const Params& theta, const Dataset& data,
                                       std::span<const std::size_t> batch) {
    model.check_params(theta);
    check_batch(data, batch);
    const auto& sizes = model.spec().layer_sizes;
    std::vector<StatVector> sums;
    for (const auto& blk : theta) {
        sums.push_back(StatVector{blk.block_id, StatKind::Mean, 0, std::vector<double>(blk.size(), 0.0)});
    }
    for (auto idx : batch) {
        const auto tr = trace_forward(model, theta, data.input(idx));
        auto delta = loss_grad(model.spec().loss, tr.acts.back(), data.targets[idx]);
        for (std::size_t l = model.dense_layers(); l-- > 0;) {
            const std::size_t in = sizes[l];
            const std::size_t out = sizes[l + 1];
            auto& gw = sums[2 * l].values;
            auto& gb = sums[2 * l + 1].values;
            const auto& a = tr.acts[l];
            for (std::size_t i = 0; i < out; ++i) {
                for (std::size_t j = 0; j < in; ++j) gw[i * in + j] += delta[i] * a[j];
                gb[i] += delta[i];
            }
            if (l > 0) delta = propagate_delta(model, theta, tr, l, delta);
        }
    }
    const double denom = static_cast<double>(batch.size());
    for (auto& s : sums) {
        for (double& x : s.values) x /= denom;
    }
    return sums;
}

// ---------------------------------------------------------------- oracles

std::vector<double> flatten(const Params& theta) {
    std::vector<double> flat;
    for (const auto& blk : theta) flat.insert(flat.end(), blk.values.begin(), blk.values.end());
    return flat;
}

void unflatten(std::span<const double> flat, Params& theta) {
    std::size_t total = 0;
    for (const auto& blk : theta) total += blk.size();
    if (flat.size() != total) throw std::invalid_argument("unflatten: size mismatch");
    std::size_t off = 0;
    for (auto& blk : theta) {
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), blk.size(), blk.values.begin());
        off += blk.size();
    }
}

std::vector<double> finite_difference_grad(const std::function<double(std::span<const double>)>& f,
                                           std::span<const double> theta, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_difference_grad: h must be > 0");
    std::vector<double> x(theta.begin(), theta.end());
    std::vector<double> grad(x.size());
    for (std::size_t p = 0; p < x.size(); ++p) {
        const double orig = x[p];
        x[p] = orig + h;
        const double up = f(x);
        x[p] = orig - h;
        const double down = f(x);
        x[p] = orig;
        grad[p] = (up - down) / (2.0 * h);
    }
    return grad;
}

std::vector<double> finite_difference_grad(const Mlp& model, const Params& theta,
                                           std::span<const double> x, double target, double h) {
    Params work = theta;
    auto f = [&](std::span<const double> flat) {
        unflatten(flat, work);
        return model.forward_loss(work, x, target);
    };
    return finite_difference_grad(f, flatten(theta), h);
}

}  // namespace eve
