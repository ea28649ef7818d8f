#include "eve/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

namespace eve::harness {

// ---------------------------------------------------------------- config

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || end != text.data() + text.size()) {
        throw std::invalid_argument("config key '" + key + "': cannot parse '" + text + "'");
    }
    return value;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    for (char c : text) {
        if (c == ',') {
            out.push_back(trim(item));
            item.clear();
        } else {
            item += c;
        }
    }
    if (!trim(item).empty() || !out.empty()) out.push_back(trim(item));
    return out;
}

std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& text) {
    std::vector<std::size_t> out;
    if (text.empty()) return out;
    for (const auto& item : split_list(text)) out.push_back(parse_number<std::size_t>(key, item));
    return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;
        auto size_field = [](std::size_t ExperimentConfig::*f) {
            return [f](ExperimentConfig& c, const std::string& k, const std::string& v) {
                c.*f = parse_number<std::size_t>(k, v);
            };
        };
        auto double_field = [](double ExperimentConfig::*f) {
            return [f](ExperimentConfig& c, const std::string& k, const std::string& v) {
                c.*f = parse_number<double>(k, v);
            };
        };
        t["task"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            if (v == "synthetic-classification") c.task = TaskKind::SyntheticClassification;
            else if (v == "synthetic-regression") c.task = TaskKind::SyntheticRegression;
            else if (v == "file-dataset") c.task = TaskKind::FileDataset;
            else throw std::invalid_argument("config key '" + k + "': unknown task '" + v + "'");
        };
        t["data_path"] = [](ExperimentConfig& c, const std::string&, const std::string& v) {
            c.data_path = v;
        };
        t["examples"] = size_field(&ExperimentConfig::examples);
        t["features"] = size_field(&ExperimentConfig::features);
        t["classes"] = size_field(&ExperimentConfig::classes);
        t["separation"] = double_field(&ExperimentConfig::separation);
        t["spread"] = double_field(&ExperimentConfig::spread);
        t["noise"] = double_field(&ExperimentConfig::noise);
        t["eval_fraction"] = double_field(&ExperimentConfig::eval_fraction);
        t["hidden"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.hidden = parse_size_list(k, v);
        };
        t["activation"] = [](ExperimentConfig& c, const std::string&, const std::string& v) {
            c.activation = parse_activation(v);
        };
        t["loss"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            if (v == "auto") c.loss = LossChoice::Auto;
            else if (v == "squared") c.loss = LossChoice::Squared;
            else if (v == "logistic") c.loss = LossChoice::Logistic;
            else if (v == "softmax") c.loss = LossChoice::Softmax;
            else throw std::invalid_argument("config key '" + k + "': unknown loss '" + v + "'");
        };
        t["optimizer"] = [](ExperimentConfig& c, const std::string&, const std::string& v) {
            c.optimizer = parse_optimizer(v);
        };
        t["alpha"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.hp.alpha = parse_number<double>(k, v);
        };
        t["beta1"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.hp.beta1 = parse_number<double>(k, v);
        };
        t["beta2"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.hp.beta2 = parse_number<double>(k, v);
        };
        t["epsilon"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.hp.epsilon = parse_number<double>(k, v);
        };
        t["batch_size"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.hp.batch_size = parse_number<std::size_t>(k, v);
        };
        t["sampler"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            if (v == "shuffled-epochs") c.sampler = SamplingStrategy::ShuffledEpochs;
            else if (v == "with-replacement") c.sampler = SamplingStrategy::WithReplacement;
            else throw std::invalid_argument("config key '" + k + "': unknown sampler '" + v + "'");
        };
        t["steps"] = size_field(&ExperimentConfig::steps);
        t["eval_every"] = size_field(&ExperimentConfig::eval_every);
        t["seed"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.seed = parse_number<std::uint64_t>(k, v);
        };
        t["warmup"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.warmup = parse_number<std::size_t>(k, v);
        };
        t["sweep_batch_sizes"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.sweep_batch_sizes = parse_size_list(k, v);
        };
        t["sweep_optimizers"] = [](ExperimentConfig& c, const std::string&, const std::string& v) {
            c.sweep_optimizers.clear();
            for (const auto& item : split_list(v)) c.sweep_optimizers.push_back(parse_optimizer(item));
        };
        t["noise_mu"] = double_field(&ExperimentConfig::noise_mu);
        t["noise_sigma"] = double_field(&ExperimentConfig::noise_sigma);
        t["noise_params"] = size_field(&ExperimentConfig::noise_params);
        t["stderr_n"] = size_field(&ExperimentConfig::stderr_n);
        t["stderr_batch_sizes"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.stderr_batch_sizes = parse_size_list(k, v);
        };
        t["stderr_trials"] = size_field(&ExperimentConfig::stderr_trials);
        t["stderr_mu"] = double_field(&ExperimentConfig::stderr_mu);
        t["stderr_sigma"] = double_field(&ExperimentConfig::stderr_sigma);
        t["output"] = [](ExperimentConfig& c, const std::string&, const std::string& v) {
            c.output = v;
        };
        return t;
    }();
    return table;
}

}  // namespace

void ExperimentConfig::validate() const {
    hp.validate();
    if (steps < 1) throw std::invalid_argument("config: steps must be >= 1");
    if (eval_every < 1) throw std::invalid_argument("config: eval_every must be >= 1");
    if (!(eval_fraction >= 0.0 && eval_fraction < 1.0)) {
        throw std::invalid_argument("config: eval_fraction must lie in [0, 1)");
    }
    if (task == TaskKind::FileDataset && data_path.empty()) {
        throw std::invalid_argument("config: file-dataset task needs data_path");
    }
    if (task != TaskKind::FileDataset && (examples == 0 || features == 0)) {
        throw std::invalid_argument("config: examples and features must be positive");
    }
    if (task == TaskKind::SyntheticClassification && classes < 2) {
        throw std::invalid_argument("config: classes must be >= 2");
    }
    if (!(noise_sigma >= 0.0)) throw std::invalid_argument("config: noise_sigma must be >= 0");
    if (noise_params == 0) throw std::invalid_argument("config: noise_params must be positive");
}

std::size_t ExperimentConfig::effective_warmup() const {
    if (warmup) return *warmup;
    return static_cast<std::size_t>(std::ceil(10.0 / (1.0 - hp.beta2) - 1e-9));
}

ExperimentConfig parse_config(std::istream& in) {
    ExperimentConfig config;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(line_no) +
                                        ": expected key = value");
        }
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        const auto it = setters().find(key);
        if (it == setters().end()) {
            throw std::invalid_argument("config line " + std::to_string(line_no) +
                                        ": unknown key '" + key + "'");
        }
        it->second(config, key, value);
    }
    config.validate();
    return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path.string() + "'");
    return parse_config(in);
}

// ---------------------------------------------------------------- training

namespace {

bool integer_labels(const Dataset& data) {
    return std::all_of(data.targets.begin(), data.targets.end(),
                       [](double y) { return y >= 0.0 && y == std::floor(y); });
}

LossKind resolve_loss(const ExperimentConfig& config, std::size_t& outputs, const Dataset& data) {
    std::size_t classes = config.classes;
    bool classification = config.task == TaskKind::SyntheticClassification;
    if (config.task == TaskKind::FileDataset) {
        classification = config.loss != LossChoice::Squared && integer_labels(data);
        if (classification) {
            classes = static_cast<std::size_t>(
                          *std::max_element(data.targets.begin(), data.targets.end())) + 1;
            classes = std::max<std::size_t>(classes, 2);
        }
    }
    LossKind loss;
    switch (config.loss) {
        case LossChoice::Squared: loss = LossKind::SquaredError; break;
        case LossChoice::Logistic: loss = LossKind::LogisticCrossEntropy; break;
        case LossChoice::Softmax: loss = LossKind::SoftmaxCrossEntropy; break;
        case LossChoice::Auto:
        default:
            if (!classification) loss = LossKind::SquaredError;
            else loss = classes == 2 ? LossKind::LogisticCrossEntropy : LossKind::SoftmaxCrossEntropy;
    }
    if (loss != LossKind::SquaredError && !classification) {
        throw std::invalid_argument("config: classification loss on a regression task");
    }
    if (loss == LossKind::LogisticCrossEntropy && classes != 2) {
        throw std::invalid_argument("config: logistic loss needs exactly 2 classes");
    }
    outputs = loss == LossKind::SoftmaxCrossEntropy ? classes : 1;
    return loss;
}

struct Welford {
    std::size_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;
    void push(double x) {
        ++n;
        const double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }
    double std() const { return n < 2 ? 0.0 : std::sqrt(m2 / static_cast<double>(n - 1)); }
};

MetricsRow evaluate_row(const Experiment& ex, const Params& theta, std::uint64_t step,
                        double step_length, double abs_mean, double running_std) {
    MetricsRow row;
    row.step = step;
    row.train_loss = ex.model.mean_loss(theta, ex.data, ex.split.train);
    row.train_accuracy = ex.model.accuracy(theta, ex.data, ex.split.train);
    row.eval_loss = ex.model.mean_loss(theta, ex.data, ex.split.eval);
    row.eval_accuracy = ex.model.accuracy(theta, ex.data, ex.split.eval);
    row.step_length = step_length;
    row.per_coord_abs_mean = abs_mean;
    row.step_length_running_std = running_std;
    if (!std::isfinite(row.train_loss)) {
        throw std::runtime_error("non-finite training loss at step " + std::to_string(step));
    }
    return row;
}

std::size_t block_index(const Params& theta, const BlockId& id) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
        if (theta[i].block_id == id) return i;
    }
    throw std::logic_error("no parameter block '" + id + "'");
}

}  // namespace

Experiment build_experiment(const ExperimentConfig& config) {
    config.validate();
    Dataset data;
    switch (config.task) {
        case TaskKind::SyntheticClassification:
            data = make_gaussian_blobs(config.examples, config.features, config.classes,
                                       config.separation, config.spread, config.seed);
            break;
        case TaskKind::SyntheticRegression:
            data = make_linear_regression(config.examples, config.features, config.noise, config.seed);
            break;
        case TaskKind::FileDataset:
            data = load_delimited(config.data_path);
            break;
    }
    std::size_t outputs = 1;
    const LossKind loss = resolve_loss(config, outputs, data);
    ModelSpec spec;
    spec.layer_sizes.push_back(data.feature_dim);
    spec.layer_sizes.insert(spec.layer_sizes.end(), config.hidden.begin(), config.hidden.end());
    spec.layer_sizes.push_back(outputs);
    spec.hidden_activation = config.activation;
    spec.loss = loss;
    auto split = split_train_eval(data.size(), config.eval_fraction, config.seed + 1);
    if (config.hp.batch_size > split.train.size()) {
        throw std::invalid_argument("config: batch_size " + std::to_string(config.hp.batch_size) +
                                    " exceeds training examples " + std::to_string(split.train.size()));
    }
    return Experiment{std::move(data), std::move(split), Mlp(std::move(spec))};
}

TrainingRun run_training(const ExperimentConfig& config, const TrainingHooks& hooks) {
    return run_training(config, build_experiment(config), hooks);
}

TrainingRun run_training(const ExperimentConfig& config, const Experiment& ex,
                         const TrainingHooks& hooks) {
    config.validate();
    const auto& hp = config.hp;
    if (hp.batch_size > ex.split.train.size()) {
        throw std::invalid_argument("batch_size exceeds training examples");
    }
    Params theta = ex.model.init_params(config.seed + 2);
    std::vector<MomentState> states;
    for (const auto& blk : theta) states.push_back(MomentState::zeros(blk.size()));
    BatchSampler sampler(ex.split.train, hp.batch_size, config.sampler, config.seed + 3);

    TrainingRun run;
    run.step_lengths.reserve(config.steps);
    Welford running;
    run.rows.push_back(evaluate_row(ex, theta, 0, 0.0, 0.0, 0.0));
    run.summary.initial_train_loss = run.rows.front().train_loss;

    const bool is_eve = config.optimizer != OptimizerKind::Adam;
    const bool correction = config.optimizer == OptimizerKind::Eve;
    for (std::uint64_t step = 1; step <= config.steps; ++step) {
        const auto batch = sampler.next();
        std::vector<std::vector<double>> updates(theta.size());
        if (!is_eve) {
            const auto grads = batch_gradient(ex.model, theta, ex.data, batch);
            for (std::size_t i = 0; i < theta.size(); ++i) {
                auto r = adam_step(theta[i], states[i], grads[i], hp);
                theta[i] = std::move(r.theta);
                states[i] = std::move(r.state);
                updates[i] = std::move(r.record.update);
            }
        } else {
            // Reduce each block as backprop reaches it; the examplewise
            // matrix is dropped before the next block is formed.
            const auto stats = streaming_backprop(
                ex.model, theta, ex.data, batch,
                [](const GradBatch& g) { return std::make_pair(batch_mean(g), raw_second_moment(g)); });
            std::vector<StepResult> results(theta.size());
            std::vector<std::size_t> order;
            double sq_corrected = 0.0;
            double sq_plain = 0.0;
            for (const auto& s : stats) {
                const std::size_t i = block_index(theta, s.block_id);
                const auto& [mean, raw] = s.value;
                results[i] = eve_step_from_moments(theta[i], states[i], mean, raw, hp, correction);
                order.push_back(i);

                // Same state, other variant: the two differ only in the final
                // denominator, so this isolates the line-13 correction.
                const auto shadow =
                    eve_step_from_moments(theta[i], states[i], mean, raw, hp, !correction);
                const auto& corrected = correction ? results[i].record : shadow.record;
                const auto& plain = correction ? shadow.record : results[i].record;
                for (std::size_t p = 0; p < corrected.update.size(); ++p) {
                    ++run.shadow_checks;
                    if (std::abs(plain.update[p]) > std::abs(corrected.update[p])) {
                        ++run.shadow_violations;
                    }
                    const double var = raw.values[p] - mean.values[p] * mean.values[p];
                    if (var > 1e-12 * raw.values[p]) run.examplewise_variance_seen = true;
                }
                sq_corrected += corrected.step_length * corrected.step_length;
                sq_plain += plain.step_length * plain.step_length;
            }
            run.shadow_corrected_lengths.push_back(std::sqrt(sq_corrected));
            run.shadow_no_correction_lengths.push_back(std::sqrt(sq_plain));
            for (std::size_t i : order) {
                theta[i] = std::move(results[i].theta);
                states[i] = std::move(results[i].state);
                updates[i] = std::move(results[i].record.update);
            }
        }
        std::vector<double> flat;
        for (auto& u : updates) flat.insert(flat.end(), u.begin(), u.end());
        const auto rec = make_step_record(step, std::move(flat));
        if (!std::isfinite(rec.step_length)) {
            throw std::runtime_error("non-finite update at step " + std::to_string(step));
        }
        run.step_lengths.push_back(rec.step_length);
        running.push(rec.step_length);
        if (hooks.on_step) hooks.on_step(step, theta);
        if (step % config.eval_every == 0 || step == config.steps) {
            run.rows.push_back(evaluate_row(ex, theta, step, rec.step_length,
                                            rec.per_coord_abs_mean, running.std()));
        }
    }

    const auto& last = run.rows.back();
    run.summary.final_train_loss = last.train_loss;
    run.summary.final_train_accuracy = last.train_accuracy;
    run.summary.final_eval_loss = last.eval_loss;
    run.summary.final_eval_accuracy = last.eval_accuracy;
    run.summary.mean_step_length = running.mean;
    run.summary.std_step_length = running.std();
    run.final_theta = std::move(theta);
    return run;
}

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    return fmt::format("{:.17g}", x);
}

void write_metrics(std::ostream& out, std::span<const MetricsRow> rows) {
    out << "step,train_loss,train_accuracy,eval_loss,eval_accuracy,step_length,"
           "per_coord_abs_mean,step_length_running_std\n";
    for (const auto& r : rows) {
        out << r.step << ',' << format_double(r.train_loss) << ',' << format_double(r.train_accuracy)
            << ',' << format_double(r.eval_loss) << ',' << format_double(r.eval_accuracy) << ','
            << format_double(r.step_length) << ',' << format_double(r.per_coord_abs_mean) << ','
            << format_double(r.step_length_running_std) << '\n';
    }
}

// ---------------------------------------------------------------- sweeps

std::vector<SweepRow> run_batch_sweep(const ExperimentConfig& config,
                                      std::span<const std::size_t> batch_sizes) {
    if (batch_sizes.empty()) throw std::invalid_argument("sweep: empty batch size list");
    if (config.sweep_optimizers.empty()) throw std::invalid_argument("sweep: no optimizers");
    const auto ex = build_experiment(config);
    for (auto B : batch_sizes) {
        if (B == 0 || B > ex.split.train.size()) {
            throw std::invalid_argument("sweep: batch size " + std::to_string(B) +
                                        " outside [1, " + std::to_string(ex.split.train.size()) + "]");
        }
    }
    std::vector<SweepRow> rows;
    for (auto B : batch_sizes) {
        for (auto opt : config.sweep_optimizers) {
            ExperimentConfig arm = config;
            arm.optimizer = opt;
            arm.hp.batch_size = B;
            rows.push_back({opt, B, run_training(arm, ex).summary});
        }
    }
    return rows;
}

void write_sweep(std::ostream& out, std::span<const SweepRow> rows) {
    out << "optimizer,batch_size,initial_train_loss,final_train_loss,final_train_accuracy,"
           "final_eval_loss,final_eval_accuracy,mean_step_length,std_step_length\n";
    for (const auto& r : rows) {
        const auto& s = r.summary;
        out << to_string(r.optimizer) << ',' << r.batch_size << ',' << format_double(s.initial_train_loss)
            << ',' << format_double(s.final_train_loss) << ',' << format_double(s.final_train_accuracy)
            << ',' << format_double(s.final_eval_loss) << ',' << format_double(s.final_eval_accuracy)
            << ',' << format_double(s.mean_step_length) << ',' << format_double(s.std_step_length)
            << '\n';
    }
}

// ---------------------------------------------------------------- probes

namespace {

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

MeanStd mean_std(std::span<const double> xs) {
    Welford w;
    for (double x : xs) w.push(x);
    return {w.mean, w.std()};
}

}  // namespace

StabilityResult run_stability_probe(const NoiseSpec& noise, const HyperParams& hp,
                                    std::size_t steps, std::uint64_t seed,
                                    std::optional<std::size_t> warmup) {
    hp.validate();
    if (steps < 2) throw std::invalid_argument("stability: need at least 2 measured steps");
    if (noise.param_count == 0) throw std::invalid_argument("stability: param_count must be positive");
    if (!(noise.sigma >= 0.0) || !std::isfinite(noise.mu)) {
        throw std::invalid_argument("stability: need finite mu and sigma >= 0");
    }
    StabilityResult result;
    result.warmup = warmup.value_or(
        static_cast<std::size_t>(std::ceil(10.0 / (1.0 - hp.beta2) - 1e-9)));
    result.measured_steps = steps;

    const std::size_t B = hp.batch_size;
    const std::size_t P = noise.param_count;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> unit(0.0, 1.0);

    ParamBlock theta_adam{"noise", P, 1, std::vector<double>(P, 0.0)};
    ParamBlock theta_eve = theta_adam;
    auto state_adam = MomentState::zeros(P);
    auto state_eve = MomentState::zeros(P);
    std::vector<double> adam_lengths;
    std::vector<double> eve_lengths;
    adam_lengths.reserve(steps);
    eve_lengths.reserve(steps);

    for (std::size_t step = 1; step <= result.warmup + steps; ++step) {
        std::vector<double> values(B * P);
        for (double& x : values) x = noise.mu + noise.sigma * unit(rng);
        const GradBatch g("noise", B, P, std::move(values));
        auto ra = adam_step(theta_adam, state_adam, batch_mean(g), hp);
        auto re = eve_step(theta_eve, state_eve, g, hp);
        theta_adam = std::move(ra.theta);
        state_adam = std::move(ra.state);
        theta_eve = std::move(re.theta);
        state_eve = std::move(re.state);
        if (step > result.warmup) {
            adam_lengths.push_back(ra.record.step_length);
            eve_lengths.push_back(re.record.step_length);
        }
    }
    const auto a = mean_std(adam_lengths);
    const auto e = mean_std(eve_lengths);
    result.mean_adam = a.mean;
    result.std_adam = a.std;
    result.mean_eve = e.mean;
    result.std_eve = e.std;
    result.ratio = a.std > 0.0 ? e.std / a.std : std::numeric_limits<double>::quiet_NaN();
    return result;
}

AblationSummary run_ablation(const ExperimentConfig& config) {
    const auto ex = build_experiment(config);
    AblationSummary out;
    out.warmup = config.effective_warmup();
    if (out.warmup >= config.steps) {
        throw std::invalid_argument("ablation: warmup " + std::to_string(out.warmup) +
                                    " leaves no steps to measure (steps = " +
                                    std::to_string(config.steps) + ")");
    }
    ExperimentConfig eve_cfg = config;
    eve_cfg.optimizer = OptimizerKind::Eve;
    ExperimentConfig plain_cfg = config;
    plain_cfg.optimizer = OptimizerKind::EveNoCorrection;
    const auto eve_run = run_training(eve_cfg, ex);
    const auto plain_run = run_training(plain_cfg, ex);

    auto after_warmup = [&](const std::vector<double>& xs) {
        return std::span<const double>(xs).subspan(out.warmup);
    };
    out.mean_step_eve = mean_std(after_warmup(eve_run.step_lengths)).mean;
    out.mean_step_no_correction = mean_std(after_warmup(plain_run.step_lengths)).mean;
    out.step_ratio = out.mean_step_no_correction / out.mean_step_eve;
    out.final_eval_accuracy_eve = eve_run.summary.final_eval_accuracy;
    out.final_eval_accuracy_no_correction = plain_run.summary.final_eval_accuracy;
    out.shadow_checks = eve_run.shadow_checks;
    out.shadow_violations = eve_run.shadow_violations;
    out.examplewise_variance_seen =
        eve_run.examplewise_variance_seen || plain_run.examplewise_variance_seen;
    out.direction_holds =
        !out.examplewise_variance_seen || out.mean_step_no_correction < out.mean_step_eve;
    return out;
}

void write_key_values(std::ostream& out,
                      std::span<const std::pair<std::string, std::string>> rows) {
    out << "metric,value\n";
    for (const auto& [k, v] : rows) out << k << ',' << v << '\n';
}

}  // namespace eve::harness
