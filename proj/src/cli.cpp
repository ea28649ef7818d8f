#include "eve/cli.hpp"

#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "eve/harness.hpp"
#include "eve/stderr_lab.hpp"

namespace eve::cli {

namespace {

using harness::format_double;

void write_file(const std::filesystem::path& path, const std::string& contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open output '" + path.string() + "'");
    f << contents;
    f.flush();
    if (!f) throw std::runtime_error("failed writing '" + path.string() + "'");
}

std::string cmd_train(const harness::ExperimentConfig& config, std::ostream& out) {
    const auto run = harness::run_training(config);
    std::ostringstream csv;
    harness::write_metrics(csv, run.rows);
    out << fmt::format("{}: {} steps, final train loss {}, eval accuracy {}\n",
                       to_string(config.optimizer), config.steps,
                       format_double(run.summary.final_train_loss),
                       format_double(run.summary.final_eval_accuracy));
    return csv.str();
}

std::string cmd_sweep(const harness::ExperimentConfig& config, std::ostream& out) {
    const auto rows = harness::run_batch_sweep(config, config.sweep_batch_sizes);
    std::ostringstream csv;
    harness::write_sweep(csv, rows);
    out << fmt::format("sweep: {} runs\n", rows.size());
    return csv.str();
}

std::string cmd_ablate(const harness::ExperimentConfig& config, std::ostream& out) {
    const auto s = harness::run_ablation(config);
    std::vector<std::pair<std::string, std::string>> kv{
        {"warmup", std::to_string(s.warmup)},
        {"mean_step_eve", format_double(s.mean_step_eve)},
        {"mean_step_no_correction", format_double(s.mean_step_no_correction)},
        {"step_ratio", format_double(s.step_ratio)},
        {"final_eval_accuracy_eve", format_double(s.final_eval_accuracy_eve)},
        {"final_eval_accuracy_no_correction", format_double(s.final_eval_accuracy_no_correction)},
        {"shadow_checks", std::to_string(s.shadow_checks)},
        {"shadow_violations", std::to_string(s.shadow_violations)},
        {"examplewise_variance_seen", s.examplewise_variance_seen ? "1" : "0"},
        {"direction_holds", s.direction_holds ? "1" : "0"},
    };
    std::ostringstream csv;
    harness::write_key_values(csv, kv);
    out << fmt::format("ablation: step ratio (no correction / eve) {}\n", format_double(s.step_ratio));
    if (!s.direction_holds) {
        throw std::runtime_error("ablation check failed: uncorrected mean step length " +
                                 format_double(s.mean_step_no_correction) + " is not below Eve's " +
                                 format_double(s.mean_step_eve));
    }
    return csv.str();
}

std::string cmd_stability(const harness::ExperimentConfig& config, std::ostream& out) {
    harness::NoiseSpec noise{config.noise_mu, config.noise_sigma, config.noise_params};
    const auto r = harness::run_stability_probe(noise, config.hp, config.steps, config.seed,
                                                config.warmup);
    std::vector<std::pair<std::string, std::string>> kv{
        {"batch_size", std::to_string(config.hp.batch_size)},
        {"warmup", std::to_string(r.warmup)},
        {"measured_steps", std::to_string(r.measured_steps)},
        {"mean_step_adam", format_double(r.mean_adam)},
        {"mean_step_eve", format_double(r.mean_eve)},
        {"std_adam", format_double(r.std_adam)},
        {"std_eve", format_double(r.std_eve)},
        {"ratio", format_double(r.ratio)},
    };
    std::ostringstream csv;
    harness::write_key_values(csv, kv);
    out << fmt::format("stability: std eve / std adam = {}\n", format_double(r.ratio));
    return csv.str();
}

std::string cmd_stderr(const harness::ExperimentConfig& config, std::ostream& out) {
    const auto spec = stderr_lab::GaussianSpec::make(config.stderr_mu, config.stderr_sigma);
    const auto rows = stderr_lab::se_ratio_report(spec, config.stderr_n, config.stderr_batch_sizes,
                                                  config.stderr_trials, config.seed);
    std::ostringstream csv;
    stderr_lab::write_ratio_report(csv, rows);
    for (const auto& r : rows) {
        out << fmt::format("B={}: SE(eta)/SE(eta_bar) = {} (1/sqrt(B) = {})\n", r.batch_size,
                           format_double(r.ratio), format_double(r.predicted));
    }
    return csv.str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Examplewise-gradient optimizer experiments (Adam, Eve)", "evebench"};
    app.require_subcommand(1);

    struct Command {
        const char* name;
        const char* help;
        std::string (*fn)(const harness::ExperimentConfig&, std::ostream&);
    };
    const Command commands[] = {
        {"train", "Train one model and write per-eval metrics", cmd_train},
        {"sweep", "Run every optimizer over sweep_batch_sizes", cmd_sweep},
        {"ablate", "Compare Eve with and without the batch-variance correction", cmd_ablate},
        {"stability", "Step-length stability on a synthetic gradient stream", cmd_stability},
        {"stderr", "Monte-Carlo standard errors of eta vs eta_bar", cmd_stderr},
    };
    std::string config_path;
    std::string out_path;
    for (const auto& c : commands) {
        auto* sub = app.add_subcommand(c.name, c.help);
        sub->add_option("--config", config_path, "Experiment config (key = value)")->required();
        sub->add_option("--out", out_path, "Output CSV path")->required();
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, e_stream;
        const int code = app.exit(e, o, e_stream);
        out << o.str();
        err << e_stream.str();
        return code;
    }

    try {
        const auto config = harness::load_config(config_path);
        for (const auto& c : commands) {
            if (app.got_subcommand(c.name)) {
                write_file(out_path, c.fn(config, out));
                return 0;
            }
        }
        err << "no subcommand\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace eve::cli
