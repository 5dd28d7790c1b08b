#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cpnet/data.hpp"
#include "cpnet/model.hpp"

namespace cpnet {

struct TrainConfig {
    double lr = 1e-3;
    int batch_size = 32;  // windows per optimizer step; each window yields one row per channel
    int max_epochs = 100;
    int patience = 10;  // epochs without val-MSE improvement before stopping
    std::uint64_t seed = 42;
    double grad_clip = 0.0;      // global L2 max-norm; 0 disables
    double weight_decay = 0.0;   // L2 coefficient applied inside the optimizer; 0 disables

    void validate() const;
};

struct Metrics {
    double mse = 0.0;
    double mae = 0.0;
    std::int64_t n_points = 0;  // (window, step, channel) triples
};

// Streaming accumulator so evaluation can batch forwards without keeping
// every prediction in memory. Means are over all points seen.
struct MetricsAccum {
    double se = 0.0, ae = 0.0;
    std::int64_t n = 0;

    void add(const Tensor& pred, const Tensor& truth);
    Metrics finish() const;
};

struct EpochRecord {
    double train_loss = 0.0;  // point-weighted mean of batch-mean MSE (normalized scale)
    double val_mse = 0.0;     // standardized-scale validation MSE at stride 1
};

struct RunReport {
    std::string command = "train";
    std::string dataset;
    ModelConfig model;
    TrainConfig train_config;
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;  // 1-based epoch whose parameters were kept
    bool early_stopped = false;
    Metrics test;  // standardized scale
    std::int64_t param_count = 0;
    double train_seconds = 0.0;  // wall clock; kept out of the deterministic report body
};

// Minimizes batch-mean MSE on instance-normalized horizon outputs with Adam,
// early-stops on validation MSE, and leaves the model holding the parameters
// of its best validation epoch. `scaled` must already be standardized.
// Non-finite values anywhere in a step abort with a diagnostic.
RunReport train_model(CPNetModel& model, const Dataset& scaled, const DataSplits& splits,
                      const TrainConfig& cfg);

// Stride-1 MSE/MAE over every (window, step, channel) triple of the split,
// on the standardized scale; pass the fitted scaler to measure on the raw
// scale instead.
Metrics evaluate_model(const CPNetModel& model, const Dataset& scaled, const SplitRange& split,
                       const Scaler* to_raw_scale = nullptr);

// split + scale + init + train in one call, the shape every experiment shares.
struct TrainedRun {
    CPNetModel model;
    Scaler scaler;
    DataSplits splits;
    RunReport report;
};

TrainedRun run_training(const ModelConfig& mc, const Dataset& raw, SplitProtocol protocol,
                        const TrainConfig& tc, const std::string& command = "train");

// Trains one model per requested variant with identical seed, splits, and
// hyperparameters. delta_mse is relative to the "full" variant when listed,
// otherwise to the first row.
struct AblationRow {
    std::string variant;
    Metrics test;
    double delta_mse = 0.0;
    RunReport report;
};

std::vector<AblationRow> run_ablation(const ModelConfig& base, const Dataset& raw,
                                      SplitProtocol protocol, const TrainConfig& tc,
                                      const std::vector<std::string>& variants);

// Ordered pool whose prefixes define the n-branch ladder used by sweep_branches.
extern const std::vector<BranchConfig> kBranchPool;  // (4,2),(8,4),(16,8),(24,12)

struct BranchSweepRow {
    int n_branches = 0;
    std::vector<BranchConfig> branches;
    Metrics test;
    RunReport report;
};

std::vector<BranchSweepRow> sweep_branches(const ModelConfig& base, const Dataset& raw,
                                           SplitProtocol protocol, const TrainConfig& tc,
                                           const std::vector<int>& n_list);

struct LookbackRow {
    int input_len = 0;
    Metrics test;
    double seconds_per_epoch = 0.0;
    RunReport report;
};

std::vector<LookbackRow> sweep_lookback(const ModelConfig& base, const Dataset& raw,
                                        SplitProtocol protocol, const TrainConfig& tc,
                                        const std::vector<int>& lookbacks);

// Synthetic-input scaling benchmark: median wall time of a full optimizer
// step (forward + backward + update) and of an inference-only forward, per
// look-back length, after discarding warm-up steps; plus a linear fit of
// step time against look-back. epoch_ms projects one epoch of
// `windows_per_epoch` windows at the measured step time.
struct BenchRow {
    int input_len = 0;
    double train_step_ms = 0.0;
    double infer_ms = 0.0;
    double epoch_ms = 0.0;
    int measured_steps = 0;
};

struct BenchReport {
    std::vector<BenchRow> rows;
    double slope_ms_per_unit = 0.0;
    double intercept_ms = 0.0;
    double r2 = 0.0;
    double max_min_ratio = 0.0;  // train_step_ms at max I over min I
};

BenchReport benchmark_runtime(const ModelConfig& base, const std::vector<int>& lookbacks,
                              int measured_steps = 20, int batch_windows = 8,
                              int windows_per_epoch = 1000, std::uint64_t seed = 42);

// ---- report serialization ----------------------------------------------

// Shortest decimal that parses back to exactly the same double.
std::string format_double(double v);

// Deterministic structured-text report: key=value header followed by a
// per-epoch CSV table. Wall-clock timings are deliberately absent so the
// bytes depend only on (config, seed, data); round-trips through
// parse_report_text with every value bit-identical.
std::string report_to_text(const RunReport& report);
RunReport parse_report_text(const std::string& text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// CPNET_THREADS cap (default 1); sweep trainings fan out up to this width.
int thread_cap();

}  // namespace cpnet
