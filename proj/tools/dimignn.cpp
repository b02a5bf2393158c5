// Command-line entry point: train, evaluate, predict, ablate and
// standalone neighbor selection over CSV series.

#include "dimignn/checkpoint.hpp"
#include "dimignn/model.hpp"
#include "dimignn/series.hpp"
#include "dimignn/tip.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace {

using namespace dimignn;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct DataFlags {
    std::string data_path;
    bool synthetic = false;
    int synth_n = 8;
    int synth_c = 3;
    int synth_t = 2000;
    int synth_groups = 2;
    int synth_lag = 8;
    double synth_weight = 0.8;
    int synth_period = 24;
    double synth_amp = 1.0;
    double synth_noise = 0.5;
    std::string time_col, var_col;
    std::vector<std::string> attr_cols;
};

struct RunFlags {
    DataFlags data;
    ModelConfig cfg;
    double train_frac = 0.7;
    double val_frac = 0.1;
    int stride = 1;
    int eval_stride = 1;
    std::string out_dir = "dimignn_out";
    std::string dump_data;
    bool denorm = false;
};

void add_data_options(CLI::App* cmd, DataFlags& f) {
    cmd->add_option("--data", f.data_path, "Input series CSV (long format)");
    cmd->add_flag("--synthetic", f.synthetic, "Generate a coupled synthetic dataset instead of reading CSV");
    cmd->add_option("--synth-n", f.synth_n, "Synthetic: variable count");
    cmd->add_option("--synth-c", f.synth_c, "Synthetic: attributes per variable");
    cmd->add_option("--synth-t", f.synth_t, "Synthetic: series length");
    cmd->add_option("--synth-groups", f.synth_groups, "Synthetic: similarity groups (0 = independent)");
    cmd->add_option("--synth-lag", f.synth_lag, "Synthetic: cross-group coupling lag");
    cmd->add_option("--synth-weight", f.synth_weight, "Synthetic: coupling weight");
    cmd->add_option("--synth-period", f.synth_period, "Synthetic: seasonal period");
    cmd->add_option("--synth-amp", f.synth_amp, "Synthetic: seasonal amplitude");
    cmd->add_option("--synth-noise", f.synth_noise, "Synthetic: process noise sigma");
    cmd->add_option("--time-col", f.time_col, "CSV timestamp column name");
    cmd->add_option("--var-col", f.var_col, "CSV variable-id column name");
    cmd->add_option("--attrs", f.attr_cols, "CSV attribute columns, target first")->delimiter(',');
}

void add_model_options(CLI::App* cmd, ModelConfig& cfg, std::string& norm, std::string& fusion) {
    cmd->add_option("--t-in", cfg.input_len, "Input window length");
    cmd->add_option("--tau", cfg.horizon, "Forecast horizon");
    cmd->add_option("--ls", cfg.segment_len, "Segment length");
    cmd->add_option("--blocks", cfg.blocks, "Encoder block count");
    cmd->add_option("--hidden", cfg.hidden, "Hidden width");
    cmd->add_option("--heads", cfg.heads, "Attention heads");
    cmd->add_option("--k", cfg.k_neighbors, "Neighbors per variable");
    cmd->add_option("--lambda", cfg.lambda, "Similarity/diversity balance in [0,1]");
    cmd->add_option("--norm", norm, "Normalization: dyt|layernorm");
    cmd->add_option("--fusion", fusion, "Scale fusion: dmfm|sum|mean");
    cmd->add_option("--dnsm", cfg.dnsm_enabled,
                    "Diversity-aware selection on/off (off ranks by similarity alone)");
    cmd->add_option("--d-fuse", cfg.d_fuse, "Fusion network width");
    cmd->add_option("--lr", cfg.lr, "Adam learning rate");
    cmd->add_option("--epochs", cfg.epochs, "Training epochs");
    cmd->add_option("--batch", cfg.batch_size, "Mini-batch size");
    cmd->add_option("--patience", cfg.patience, "Early-stopping patience (epochs)");
    cmd->add_option("--seed", cfg.seed, "Seed for init, shuffling and synthetic data");
}

SeriesTensor load_series(const DataFlags& f, std::uint64_t seed) {
    if (f.synthetic) {
        CouplingGraph graph = CouplingGraph::cross_group_ring(f.synth_n, f.synth_lag, f.synth_weight);
        SynthOptions opts;
        opts.group_count = f.synth_groups;
        opts.period = f.synth_period;
        opts.seasonal_amp = f.synth_amp;
        opts.noise_sigma = f.synth_noise;
        return synth_coupled(f.synth_n, f.synth_c, f.synth_t, seed, graph, opts);
    }
    if (f.data_path.empty()) {
        throw ConfigError("no input: provide --data <csv> or --synthetic");
    }
    CsvSchema schema;
    schema.time_column = f.time_col;
    schema.variable_column = f.var_col;
    schema.attribute_columns = f.attr_cols;
    return load_csv(f.data_path, schema);
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write: " + path);
    out << content;
}

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history) {
    std::ostringstream os;
    os.precision(17);
    os << "epoch,train_mse,val_mse\n";
    for (const auto& row : history) {
        os << row.epoch << ',' << row.train_mse << ',' << row.val_mse << '\n';
    }
    write_text(path, os.str());
}

void write_alpha_csv(const std::string& path, const std::vector<std::vector<double>>& rows) {
    std::ostringstream os;
    os.precision(17);
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) os << ',';
            os << row[i];
        }
        os << '\n';
    }
    write_text(path, os.str());
}

json report_to_json(const ForecastReport& rep) {
    json j;
    j["mse"] = rep.mse;
    j["mae"] = rep.mae;
    if (!rep.alpha_mean.empty()) j["alpha_mean"] = rep.alpha_mean;
    json per = json::array();
    for (const auto& [mse, mae] : rep.per_horizon) {
        per.push_back({{"mse", mse}, {"mae", mae}});
    }
    j["per_horizon"] = std::move(per);
    return j;
}

/// Test-split metrics in denormalized units: undo the target scaling per
/// variable before scoring.
ForecastReport evaluate_denormalized(const Model& model, const WindowedDataset& data,
                                     const NormStats& stats) {
    ForecastReport rep;
    std::vector<double> h_se(data.horizon, 0.0), h_ae(data.horizon, 0.0);
    const int n = data.series.n_vars;
    for (std::size_t i = 0; i < data.size(); ++i) {
        Tensor pred = model_forward(model, data.input(i));
        Tensor target = data.target(i);
        double se = 0.0, ae = 0.0;
        for (int h = 0; h < data.horizon; ++h) {
            for (int v = 0; v < n; ++v) {
                const double p = stats.denorm_target(pred.at({h, v, 0}), v);
                const double t = stats.denorm_target(target.at({h, v, 0}), v);
                const double d = p - t;
                se += d * d;
                ae += std::fabs(d);
                h_se[h] += d * d;
                h_ae[h] += std::fabs(d);
            }
        }
        rep.mse += se / (data.horizon * n);
        rep.mae += ae / (data.horizon * n);
    }
    rep.mse /= static_cast<double>(data.size());
    rep.mae /= static_cast<double>(data.size());
    for (int h = 0; h < data.horizon; ++h) {
        const double cnt = static_cast<double>(data.size()) * n;
        rep.per_horizon.emplace_back(h_se[h] / cnt, h_ae[h] / cnt);
    }
    return rep;
}

struct TrainedRun {
    Model model;
    TrainResult result;
    NormStats stats;
    SplitSeries splits;
    std::vector<std::string> variable_names;
};

TrainedRun run_training(const RunFlags& flags) {
    SeriesTensor series = load_series(flags.data, flags.cfg.seed);
    if (!flags.dump_data.empty()) write_series_csv(series, flags.dump_data);

    SplitSeries splits = split_chronological(series, flags.train_frac, flags.val_frac,
                                             1.0 - flags.train_frac - flags.val_frac,
                                             flags.cfg.input_len, flags.cfg.horizon);
    NormStats stats = NormStats::fit(splits.train);
    for (int id : stats.constant_channels) {
        std::cerr << "note: channel " << id << " is constant in the training split; "
                  << "passing it through unscaled\n";
    }
    SplitSeries norm;
    norm.train = stats.apply(splits.train);
    norm.val = stats.apply(splits.val);
    norm.test = stats.apply(splits.test);

    WindowedDataset train_ds = make_windows(norm.train, flags.cfg.input_len, flags.cfg.horizon, flags.stride);
    WindowedDataset val_ds = make_windows(norm.val, flags.cfg.input_len, flags.cfg.horizon, flags.eval_stride);

    TrainedRun run{Model::init(flags.cfg, series.n_vars, series.c_attrs), {}, stats, std::move(norm),
                   series.variable_names};
    run.result = train(run.model, train_ds, val_ds);
    return run;
}

int cmd_train(const RunFlags& flags, const std::string& config_echo) {
    std::filesystem::create_directories(flags.out_dir);
    auto in_out = [&](const std::string& name) { return (std::filesystem::path(flags.out_dir) / name).string(); };
    write_text(in_out("config.txt"), config_echo);

    TrainedRun run = run_training(flags);
    WindowedDataset test_ds = make_windows(run.splits.test, flags.cfg.input_len, flags.cfg.horizon,
                                           flags.eval_stride);

    std::vector<std::vector<double>> alpha_rows;
    ForecastReport model_rep = evaluate(run.model, test_ds, &alpha_rows);
    ForecastReport persist_rep = persistence_baseline(test_ds);

    save_checkpoint(run.model, run.stats, run.variable_names, in_out("checkpoint.json"));
    write_text(in_out("normstats.json"), run.stats.to_json());
    write_history_csv(in_out("history.csv"), run.result.history);
    if (!alpha_rows.empty()) write_alpha_csv(in_out("alpha_weights.csv"), alpha_rows);

    json metrics;
    metrics["test"] = report_to_json(model_rep);
    metrics["persistence"] = report_to_json(persist_rep);
    metrics["units"] = "normalized";
    if (flags.denorm) {
        metrics["test_denormalized"] = report_to_json(evaluate_denormalized(run.model, test_ds, run.stats));
    }
    metrics["best_epoch"] = run.result.best_epoch;
    metrics["epochs_run"] = run.result.history.size();
    metrics["improvement_over_persistence"] =
        persist_rep.mse > 0.0 ? 1.0 - model_rep.mse / persist_rep.mse : 0.0;
    write_text(in_out("metrics.json"), metrics.dump(2) + "\n");

    std::cout << "trained " << run.result.history.size() << " epoch(s), best epoch "
              << run.result.best_epoch << "\n"
              << "test mse " << model_rep.mse << "  mae " << model_rep.mae
              << "  (persistence mse " << persist_rep.mse << ")\n"
              << "artifacts in " << flags.out_dir << "\n";
    return kExitOk;
}

int cmd_evaluate(const std::string& checkpoint_path, const DataFlags& data_flags, int stride,
                 bool denorm, const std::string& out_dir) {
    auto [model, meta] = load_checkpoint(checkpoint_path);
    SeriesTensor series = load_series(data_flags, meta.cfg.seed);
    if (series.n_vars != meta.n_vars || series.c_attrs != meta.c_attrs) {
        throw ConfigError("data has N=" + std::to_string(series.n_vars) + " C=" +
                          std::to_string(series.c_attrs) + " but the checkpoint expects N=" +
                          std::to_string(meta.n_vars) + " C=" + std::to_string(meta.c_attrs));
    }
    WindowedDataset ds = make_windows(meta.norm.apply(series), meta.cfg.input_len,
                                      meta.cfg.horizon, stride);
    std::vector<std::vector<double>> alpha_rows;
    ForecastReport rep = evaluate(model, ds, &alpha_rows);
    ForecastReport persist = persistence_baseline(ds);

    json out;
    out["model"] = report_to_json(rep);
    out["persistence"] = report_to_json(persist);
    out["units"] = "normalized";
    if (denorm) out["model_denormalized"] = report_to_json(evaluate_denormalized(model, ds, meta.norm));
    out["windows"] = ds.size();
    std::cout << out.dump(2) << "\n";

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_text((std::filesystem::path(out_dir) / "metrics.json").string(), out.dump(2) + "\n");
        if (!alpha_rows.empty()) {
            write_alpha_csv((std::filesystem::path(out_dir) / "alpha_weights.csv").string(), alpha_rows);
        }
    }
    return kExitOk;
}

int cmd_predict(const std::string& checkpoint_path, const DataFlags& data_flags,
                const std::string& out_dir, bool keep_normalized) {
    auto [model, meta] = load_checkpoint(checkpoint_path);
    SeriesTensor series = load_series(data_flags, meta.cfg.seed);
    if (series.n_vars != meta.n_vars || series.c_attrs != meta.c_attrs) {
        throw ConfigError("data has N=" + std::to_string(series.n_vars) + " C=" +
                          std::to_string(series.c_attrs) + " but the checkpoint expects N=" +
                          std::to_string(meta.n_vars) + " C=" + std::to_string(meta.c_attrs));
    }
    if (series.t_len < meta.cfg.input_len) {
        throw ConfigError("input covers " + std::to_string(series.t_len) + " steps but the model needs " +
                          std::to_string(meta.cfg.input_len));
    }

    SeriesTensor normalized = meta.norm.apply(series);
    SeriesTensor tail = normalized.time_range(normalized.t_len - meta.cfg.input_len, meta.cfg.input_len);
    Tensor x({meta.cfg.input_len, meta.n_vars, meta.c_attrs}, tail.values);

    ForwardArtifacts arts;
    ForwardOptions opts;
    opts.capture = &arts;
    Tensor pred = model_forward(model, x, opts);

    std::filesystem::create_directories(out_dir);
    std::ostringstream os;
    os.precision(17);
    os << "step";
    for (const auto& name : meta.variable_names) os << ',' << name;
    os << '\n';
    for (int h = 0; h < meta.cfg.horizon; ++h) {
        os << (h + 1);
        for (int v = 0; v < meta.n_vars; ++v) {
            double value = pred.at({h, v, 0});
            if (!keep_normalized) value = meta.norm.denorm_target(value, v);
            os << ',' << value;
        }
        os << '\n';
    }
    write_text((std::filesystem::path(out_dir) / "forecast.csv").string(), os.str());
    if (!arts.fusion_alpha.empty()) {
        write_alpha_csv((std::filesystem::path(out_dir) / "alpha.csv").string(), {arts.fusion_alpha});
    }
    std::cout << "forecast written to " << out_dir << "\n";
    return kExitOk;
}

struct AblateOutcome {
    std::string name;
    std::vector<std::uint64_t> seeds;
    std::vector<double> mse, mae;
    double mean_mse = 0.0, mean_mae = 0.0;
};

int cmd_ablate(const RunFlags& base, int n_seeds, int jobs, bool assert_order,
               const std::string& config_echo) {
    std::filesystem::create_directories(base.out_dir);
    write_text((std::filesystem::path(base.out_dir) / "config.txt").string(), config_echo);

    struct Variant {
        std::string name;
        std::function<void(ModelConfig&)> tweak;
    };
    const std::vector<Variant> variants = {
        {"full", [](ModelConfig&) {}},
        {"wo_dyt", [](ModelConfig& c) { c.norm = NormKind::LayerNorm; }},
        {"wo_dnsm", [](ModelConfig& c) { c.dnsm_enabled = false; }},
        {"wo_dmfm", [](ModelConfig& c) { c.fusion = FusionKind::Sum; }},
    };

    struct Job {
        std::size_t variant;
        std::uint64_t seed;
        double mse = 0.0, mae = 0.0;
    };
    std::vector<Job> jobs_list;
    for (std::size_t v = 0; v < variants.size(); ++v) {
        for (int s = 0; s < n_seeds; ++s) {
            jobs_list.push_back({v, base.cfg.seed + static_cast<std::uint64_t>(s), 0.0, 0.0});
        }
    }

    auto run_one = [&](Job& job) {
        RunFlags flags = base;
        flags.cfg.seed = job.seed;
        variants[job.variant].tweak(flags.cfg);
        TrainedRun run = run_training(flags);
        WindowedDataset test_ds = make_windows(run.splits.test, flags.cfg.input_len,
                                               flags.cfg.horizon, flags.eval_stride);
        ForecastReport rep = evaluate(run.model, test_ds);
        job.mse = rep.mse;
        job.mae = rep.mae;
    };

    if (jobs <= 1) {
        for (auto& job : jobs_list) run_one(job);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < jobs; ++w) {
            pool.emplace_back([&] {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= jobs_list.size()) return;
                    run_one(jobs_list[i]);
                }
            });
        }
        for (auto& t : pool) t.join();
    }

    std::vector<AblateOutcome> outcomes(variants.size());
    for (std::size_t v = 0; v < variants.size(); ++v) outcomes[v].name = variants[v].name;
    for (const auto& job : jobs_list) {
        auto& o = outcomes[job.variant];
        o.seeds.push_back(job.seed);
        o.mse.push_back(job.mse);
        o.mae.push_back(job.mae);
    }
    for (auto& o : outcomes) {
        for (std::size_t i = 0; i < o.mse.size(); ++i) {
            o.mean_mse += o.mse[i];
            o.mean_mae += o.mae[i];
        }
        o.mean_mse /= static_cast<double>(o.mse.size());
        o.mean_mae /= static_cast<double>(o.mae.size());
    }

    std::ostringstream runs_csv;
    runs_csv.precision(17);
    runs_csv << "config,seed,test_mse,test_mae\n";
    for (const auto& job : jobs_list) {
        runs_csv << variants[job.variant].name << ',' << job.seed << ',' << job.mse << ',' << job.mae << '\n';
    }
    write_text((std::filesystem::path(base.out_dir) / "runs.csv").string(), runs_csv.str());

    std::ostringstream summary_csv;
    summary_csv.precision(17);
    summary_csv << "config,seeds,mean_mse,mean_mae\n";
    for (const auto& o : outcomes) {
        summary_csv << o.name << ',';
        for (std::size_t i = 0; i < o.seeds.size(); ++i) {
            if (i) summary_csv << ' ';
            summary_csv << o.seeds[i];
        }
        summary_csv << ',' << o.mean_mse << ',' << o.mean_mae << '\n';
    }
    write_text((std::filesystem::path(base.out_dir) / "summary.csv").string(), summary_csv.str());

    std::cout << "config     mean_mse     mean_mae   (over " << n_seeds << " seed(s))\n";
    for (const auto& o : outcomes) {
        std::cout << o.name;
        for (std::size_t pad = o.name.size(); pad < 11; ++pad) std::cout << ' ';
        std::cout << o.mean_mse << "   " << o.mean_mae << "\n";
    }

    if (assert_order) {
        const double full = outcomes[0].mean_mse;
        if (full > outcomes[2].mean_mse || full > outcomes[3].mean_mse) {
            std::cerr << "assert-order failed: full=" << full
                      << " wo_dnsm=" << outcomes[2].mean_mse
                      << " wo_dmfm=" << outcomes[3].mean_mse << "\n";
            return kExitRuntime;
        }
    }
    return kExitOk;
}

int cmd_select_neighbors(const std::string& profiles_path, int k, double lambda,
                         const std::string& out_path) {
    std::ifstream in(profiles_path);
    if (!in) throw DataError("cannot open profiles CSV: " + profiles_path);
    std::vector<std::vector<double>> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t pos = 0;
                row.push_back(std::stod(cell, &pos));
            } catch (...) {
                numeric = false;
                break;
            }
        }
        if (!numeric) {
            if (line_no == 1) continue;  // tolerate a header row
            throw DataError("profiles row " + std::to_string(line_no) + " is not numeric");
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw DataError("profiles row " + std::to_string(line_no) + " has a different width");
        }
        rows.push_back(std::move(row));
    }
    if (rows.size() < 2) throw ConfigError("profiles CSV needs at least 2 variable rows");

    const int n = static_cast<int>(rows.size());
    const int c = static_cast<int>(rows.front().size());
    if (k < 1 || k > n - 1) {
        throw ConfigError("k must lie in [1, N-1]; got k=" + std::to_string(k) + " with N=" +
                          std::to_string(n));
    }
    if (lambda < 0.0 || lambda > 1.0) throw ConfigError("lambda must lie in [0, 1]");

    VariableProfile profile;
    profile.n_vars = n;
    profile.c_attrs = c;
    profile.data.reserve(static_cast<std::size_t>(n) * c);
    for (const auto& row : rows) profile.data.insert(profile.data.end(), row.begin(), row.end());

    DnsmConfig cfg;
    cfg.k = k;
    cfg.lambda = lambda;
    NeighborMatrix nm = dnsm_select(profile, cfg);

    std::ostringstream os;
    for (int i = 0; i < n; ++i) {
        for (int m = 0; m < k; ++m) {
            if (m) os << ',';
            os << (nm.at(i, m) + 1);  // 1-indexed ids, selection order preserved
        }
        os << '\n';
    }
    if (out_path.empty()) {
        std::cout << os.str();
    } else {
        write_text(out_path, os.str());
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"dimignn: multivariate time-series forecasting with diversity-aware "
                 "neighbor selection and dynamic multi-scale fusion"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default(true);
    app.set_config("--config", "", "Flat key=value config file (echoed config.txt round-trips)");

    RunFlags train_flags;
    std::string train_norm = "dyt", train_fusion = "dmfm";
    CLI::App* train_cmd = app.add_subcommand("train", "Train a model and write its artifacts");
    train_cmd->fallthrough();
    add_data_options(train_cmd, train_flags.data);
    add_model_options(train_cmd, train_flags.cfg, train_norm, train_fusion);
    train_cmd->add_option("--train-frac", train_flags.train_frac, "Chronological training fraction");
    train_cmd->add_option("--val-frac", train_flags.val_frac, "Chronological validation fraction");
    train_cmd->add_option("--stride", train_flags.stride, "Training window stride");
    train_cmd->add_option("--eval-stride", train_flags.eval_stride, "Validation/test window stride");
    train_cmd->add_option("--out", train_flags.out_dir, "Output directory");
    train_cmd->add_option("--dump-data", train_flags.dump_data, "Also write the (possibly synthetic) series CSV here");
    train_cmd->add_flag("--denorm", train_flags.denorm, "Also report test metrics in original units");

    std::string eval_checkpoint, eval_out;
    DataFlags eval_data;
    int eval_stride = 1;
    bool eval_denorm = false;
    CLI::App* eval_cmd = app.add_subcommand("evaluate", "Score a checkpoint over a series");
    eval_cmd->fallthrough();
    eval_cmd->add_option("--checkpoint", eval_checkpoint, "Checkpoint JSON")->required();
    add_data_options(eval_cmd, eval_data);
    eval_cmd->add_option("--stride", eval_stride, "Window stride");
    eval_cmd->add_flag("--denorm", eval_denorm, "Also report metrics in original units");
    eval_cmd->add_option("--out", eval_out, "Optional output directory for metrics and fusion weights");

    std::string pred_checkpoint, pred_out = "dimignn_out";
    DataFlags pred_data;
    bool pred_keep_norm = false;
    CLI::App* pred_cmd = app.add_subcommand("predict", "Forecast the horizon after the last input window");
    pred_cmd->fallthrough();
    pred_cmd->add_option("--checkpoint", pred_checkpoint, "Checkpoint JSON")->required();
    add_data_options(pred_cmd, pred_data);
    pred_cmd->add_option("--out", pred_out, "Output directory");
    pred_cmd->add_flag("--keep-normalized", pred_keep_norm, "Emit normalized rather than original units");

    RunFlags ablate_flags;
    std::string ablate_norm = "dyt", ablate_fusion = "dmfm";
    int ablate_seeds = 5;
    int ablate_jobs = 1;
    bool assert_order = false;
    CLI::App* ablate_cmd = app.add_subcommand("ablate", "Compare full model against its ablations");
    ablate_cmd->fallthrough();
    add_data_options(ablate_cmd, ablate_flags.data);
    add_model_options(ablate_cmd, ablate_flags.cfg, ablate_norm, ablate_fusion);
    ablate_cmd->add_option("--train-frac", ablate_flags.train_frac, "Chronological training fraction");
    ablate_cmd->add_option("--val-frac", ablate_flags.val_frac, "Chronological validation fraction");
    ablate_cmd->add_option("--stride", ablate_flags.stride, "Training window stride");
    ablate_cmd->add_option("--eval-stride", ablate_flags.eval_stride, "Validation/test window stride");
    ablate_cmd->add_option("--out", ablate_flags.out_dir, "Output directory");
    ablate_cmd->add_option("--seeds", ablate_seeds, "Seeds per configuration")->check(CLI::PositiveNumber);
    ablate_cmd->add_option("--jobs", ablate_jobs, "Parallel training workers");
    ablate_cmd->add_flag("--assert-order", assert_order,
                         "Exit nonzero unless full-model mean MSE <= both wo_dnsm and wo_dmfm");

    std::string sel_profiles, sel_out;
    int sel_k = 3;
    double sel_lambda = 0.7;
    CLI::App* sel_cmd = app.add_subcommand("select-neighbors", "Run neighbor selection on profile vectors");
    sel_cmd->fallthrough();
    sel_cmd->add_option("--profiles", sel_profiles, "CSV of N profile rows, C columns")->required();
    sel_cmd->add_option("--k", sel_k, "Neighbors per variable");
    sel_cmd->add_option("--lambda", sel_lambda, "Similarity/diversity balance in [0,1]");
    sel_cmd->add_option("--out", sel_out, "Output CSV (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (train_cmd->parsed()) {
            train_flags.cfg.norm = parse_norm_kind(train_norm);
            train_flags.cfg.fusion = parse_fusion_kind(train_fusion);
            return cmd_train(train_flags, app.config_to_str(true, false));
        }
        if (eval_cmd->parsed()) {
            return cmd_evaluate(eval_checkpoint, eval_data, eval_stride, eval_denorm, eval_out);
        }
        if (pred_cmd->parsed()) {
            return cmd_predict(pred_checkpoint, pred_data, pred_out, pred_keep_norm);
        }
        if (ablate_cmd->parsed()) {
            ablate_flags.cfg.norm = parse_norm_kind(ablate_norm);
            ablate_flags.cfg.fusion = parse_fusion_kind(ablate_fusion);
            return cmd_ablate(ablate_flags, ablate_seeds, ablate_jobs, assert_order,
                              app.config_to_str(true, false));
        }
        if (sel_cmd->parsed()) {
            return cmd_select_neighbors(sel_profiles, sel_k, sel_lambda, sel_out);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
