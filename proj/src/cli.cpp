#include <filesystem>
#include <iostream>
#include <sstream>

#include "cpnet/checkpoint.hpp"
#include "cpnet/config.hpp"
#include "cpnet/layers.hpp"

namespace cpnet {

namespace {

namespace fs = std::filesystem;

Dataset load_dataset(const RunSpec& spec) {
    if (spec.data == "synth") return synth_generate(spec.synth);
    return load_csv(spec.data);
}

std::string path_in(const RunSpec& spec, const std::string& name) {
    return (fs::path(spec.out) / name).string();
}

std::string metrics_csv_cell(const Metrics& m) {
    return format_double(m.mse) + "," + format_double(m.mae);
}

// Timing sidecar: the one artifact allowed to differ between reruns of an
// identical spec, so wall-clock numbers never leak into the reports.
std::string timings_json(const std::vector<std::pair<std::string, double>>& entries) {
    std::ostringstream out;
    out << "{\n";
    for (size_t i = 0; i < entries.size(); ++i) {
        out << "  \"" << entries[i].first << "\": " << format_double(entries[i].second)
            << (i + 1 < entries.size() ? "," : "") << "\n";
    }
    out << "}\n";
    return out.str();
}

void save_model(const RunSpec& spec, const CPNetModel& model, const std::string& stem) {
    const std::string ckpt = path_in(spec, stem);
    save_checkpoint(ckpt, model.params());
    write_arch_file(ckpt + ".arch", model.config());
}

void cmd_train(const RunSpec& spec) {
    const Dataset raw = load_dataset(spec);
    const ModelConfig mc = apply_ablation(spec.model, spec.variant);
    TrainedRun run =
        run_training(mc, raw, split_protocol_from(spec.split), spec.train, spec.command);
    write_text_file(path_in(spec, "report.txt"), report_to_text(run.report));
    save_model(spec, run.model, "model.ckpt");
    write_text_file(
        path_in(spec, "timings.json"),
        timings_json({{"train_seconds", run.report.train_seconds},
                      {"seconds_per_epoch", run.report.train_seconds /
                                                static_cast<double>(run.report.epochs.size())}}));
}

void cmd_eval(const RunSpec& spec) {
    const Dataset raw = load_dataset(spec);
    const ModelConfig mc = read_arch_file(spec.checkpoint + ".arch");
    CPNetModel model(mc, spec.train.seed);
    load_checkpoint(spec.checkpoint, model.params());

    const DataSplits splits = split_dataset(raw, mc.input_len, mc.horizon,
                                            split_protocol_from(spec.split));
    const Scaler scaler = fit_scaler(raw, splits.train);
    const Dataset scaled = apply_scaler(raw, scaler);
    const SplitRange& range = spec.eval_split == "train"  ? splits.train
                              : spec.eval_split == "val" ? splits.val
                                                         : splits.test;
    const Metrics m = evaluate_model(model, scaled, range, spec.raw_scale ? &scaler : nullptr);

    std::ostringstream out;
    out << "format=cpnet-eval-v1\n";
    out << "dataset=" << raw.name << "\n";
    out << "checkpoint=" << spec.checkpoint << "\n";
    out << "eval_split=" << spec.eval_split << "\n";
    out << "scale=" << (spec.raw_scale ? "raw" : "standardized") << "\n";
    out << "input_len=" << mc.input_len << "\n";
    out << "horizon=" << mc.horizon << "\n";
    out << "branches=" << branches_to_string(mc.branches) << "\n";
    out << "mse=" << format_double(m.mse) << "\n";
    out << "mae=" << format_double(m.mae) << "\n";
    out << "n_points=" << m.n_points << "\n";
    write_text_file(path_in(spec, "eval.txt"), out.str());
}

void cmd_ablate(const RunSpec& spec) {
    const Dataset raw = load_dataset(spec);
    const std::vector<AblationRow> rows =
        run_ablation(spec.model, raw, split_protocol_from(spec.split), spec.train, spec.variants);
    std::ostringstream csv;
    csv << "variant,mse,mae,delta_mse\n";
    std::vector<std::pair<std::string, double>> times;
    for (const AblationRow& row : rows) {
        csv << row.variant << "," << metrics_csv_cell(row.test) << ","
            << format_double(row.delta_mse) << "\n";
        write_text_file(path_in(spec, "report_" + row.variant + ".txt"),
                        report_to_text(row.report));
        times.emplace_back(row.variant + "_seconds", row.report.train_seconds);
    }
    write_text_file(path_in(spec, "ablation.csv"), csv.str());
    write_text_file(path_in(spec, "timings.json"), timings_json(times));
}

void cmd_sweep_lookback(const RunSpec& spec) {
    const Dataset raw = load_dataset(spec);
    const std::vector<LookbackRow> rows = sweep_lookback(
        spec.model, raw, split_protocol_from(spec.split), spec.train, spec.lookbacks);
    std::ostringstream csv;
    csv << "input_len,mse,mae,seconds_per_epoch\n";
    std::vector<std::pair<std::string, double>> times;
    for (const LookbackRow& row : rows) {
        csv << row.input_len << "," << metrics_csv_cell(row.test) << ","
            << format_double(row.seconds_per_epoch) << "\n";
        write_text_file(path_in(spec, "report_I" + std::to_string(row.input_len) + ".txt"),
                        report_to_text(row.report));
        times.emplace_back("I" + std::to_string(row.input_len) + "_seconds",
                           row.report.train_seconds);
    }
    write_text_file(path_in(spec, "lookback.csv"), csv.str());
    write_text_file(path_in(spec, "timings.json"), timings_json(times));
}

void cmd_sweep_branches(const RunSpec& spec) {
    const Dataset raw = load_dataset(spec);
    const std::vector<BranchSweepRow> rows = sweep_branches(
        spec.model, raw, split_protocol_from(spec.split), spec.train, spec.branch_counts);
    std::ostringstream csv;
    csv << "n_branches,branches,mse,mae\n";
    std::vector<std::pair<std::string, double>> times;
    for (const BranchSweepRow& row : rows) {
        std::string ladder = branches_to_string(row.branches);
        for (char& ch : ladder) {
            if (ch == ',') ch = ';';  // keep the CSV cell comma-free
        }
        csv << row.n_branches << "," << ladder << "," << metrics_csv_cell(row.test) << "\n";
        write_text_file(path_in(spec, "report_n" + std::to_string(row.n_branches) + ".txt"),
                        report_to_text(row.report));
        times.emplace_back("n" + std::to_string(row.n_branches) + "_seconds",
                           row.report.train_seconds);
    }
    write_text_file(path_in(spec, "branches.csv"), csv.str());
    write_text_file(path_in(spec, "timings.json"), timings_json(times));
}

void cmd_bench(const RunSpec& spec) {
    const BenchReport rep =
        benchmark_runtime(spec.model, spec.lookbacks, spec.bench_steps, spec.bench_batch,
                          spec.bench_windows_per_epoch, spec.train.seed);
    std::ostringstream csv;
    csv << "input_len,train_step_ms,infer_ms,epoch_ms,measured_steps\n";
    for (const BenchRow& row : rep.rows) {
        csv << row.input_len << "," << format_double(row.train_step_ms) << ","
            << format_double(row.infer_ms) << "," << format_double(row.epoch_ms) << ","
            << row.measured_steps << "\n";
    }
    write_text_file(path_in(spec, "bench.csv"), csv.str());
    std::ostringstream summary;
    summary << "slope_ms_per_unit=" << format_double(rep.slope_ms_per_unit) << "\n"
            << "intercept_ms=" << format_double(rep.intercept_ms) << "\n"
            << "r2=" << format_double(rep.r2) << "\n"
            << "max_min_ratio=" << format_double(rep.max_min_ratio) << "\n";
    write_text_file(path_in(spec, "bench_summary.txt"), summary.str());
}

void cmd_synth(const RunSpec& spec) {
    write_csv(synth_generate(spec.synth), path_in(spec, "synth.csv"));
}

void dispatch(const RunSpec& spec) {
    if (spec.command == "train") {
        cmd_train(spec);
    } else if (spec.command == "eval") {
        cmd_eval(spec);
    } else if (spec.command == "ablate") {
        cmd_ablate(spec);
    } else if (spec.command == "sweep-lookback") {
        cmd_sweep_lookback(spec);
    } else if (spec.command == "sweep-branches") {
        cmd_sweep_branches(spec);
    } else if (spec.command == "bench") {
        cmd_bench(spec);
    } else {
        cmd_synth(spec);
    }
}

// Usage-level validation, done before anything touches the filesystem.
void check_spec(const RunSpec& spec) {
    const bool needs_data = spec.command == "train" || spec.command == "eval" ||
                            spec.command == "ablate" || spec.command == "sweep-lookback" ||
                            spec.command == "sweep-branches";
    if (needs_data && spec.data.empty()) {
        throw CliError("missing dataset: pass --data <csv path> or --data synth (with synth_* keys)");
    }
    if (spec.command == "eval" && spec.checkpoint.empty()) {
        throw CliError("missing checkpoint: pass --checkpoint <path to model.ckpt>");
    }
    try {
        // Only `train` uses spec.model as-is; sweeps and bench rewrite
        // input_len or branches per run and validate each materialized config.
        if (spec.command == "train") apply_ablation(spec.model, spec.variant).validate();
        spec.train.validate();
    } catch (const std::invalid_argument& e) {
        throw CliError(e.what());
    }
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    std::string sentinel;
    try {
        const RunSpec spec = parse_cli(args);
        if (spec.command == "help") {
            std::cout << usage_text();
            return 0;
        }
        check_spec(spec);
        std::error_code ec;
        fs::create_directories(spec.out, ec);
        if (ec) throw CliError("cannot create output directory '" + spec.out + "': " + ec.message());

        // Resolved config goes down first so any partial run is reproducible;
        // the sentinel flags outputs as incomplete until the very end.
        write_text_file(path_in(spec, "config.resolved"), resolved_config_text(spec));
        sentinel = path_in(spec, "_INCOMPLETE");
        write_text_file(sentinel, "run in progress or aborted; outputs may be partial\n");

        dispatch(spec);

        fs::remove(sentinel);
        return 0;
    } catch (const CliError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace cpnet
