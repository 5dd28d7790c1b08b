#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cpnet/tensor.hpp"

namespace cpnet {

// In-memory T x N table, time major. `name` drives split-protocol detection
// for the ETT family.
struct Dataset {
    std::string name;
    std::string granularity;  // "h", "15min", "synthetic", ... (opaque label)
    int n_cols = 0;
    std::vector<std::string> col_names;
    std::vector<std::string> timestamps;  // length T
    std::vector<double> values;           // T*N row-major

    std::int64_t rows() const { return static_cast<std::int64_t>(timestamps.size()); }
    double at(std::int64_t t, int c) const { return values[static_cast<size_t>(t) * n_cols + c]; }
};

// ETT-format CSV: header row, first column a date string, remaining columns
// numeric variates. Rejects missing or non-numeric cells with the offending
// row and column in the message.
Dataset load_csv(const std::string& path);

// Row range a split may read: [begin, end). For val/test, begin already
// backs up input_len steps into the preceding split so the first target
// right after the boundary gets its full look-back context.
struct SplitRange {
    std::int64_t begin = 0, end = 0;
    std::int64_t length() const { return end - begin; }
};

struct DataSplits {
    SplitRange train, val, test;
};

enum class SplitProtocol { auto_detect, ett_hourly, ett_minute, ratio };

// ETTh*: 12/4/4 months of hourly steps (8640/2880/2880); ETTm*: the same
// months at 15-minute granularity (34560/11520/11520); otherwise 0.7/0.1/0.2
// chronological ratios. auto_detect keys off the dataset name.
DataSplits split_dataset(const Dataset& ds, int input_len, int horizon,
                         SplitProtocol protocol = SplitProtocol::auto_detect);

// Per-column z-score fitted on the train range only.
struct Scaler {
    std::vector<double> mean, std;  // std floored at 1e-8
};

Scaler fit_scaler(const Dataset& ds, const SplitRange& train);
Dataset apply_scaler(const Dataset& ds, const Scaler& s);
Dataset invert_scaler(const Dataset& ds, const Scaler& s);

// Origins of sliding windows inside a split: x covers [origin, origin+I),
// y covers [origin+I, origin+I+O), and windows never cross split.end.
std::vector<std::int64_t> window_origins(const SplitRange& split, int input_len, int horizon,
                                         int stride = 1);

// Assemble windows into channel-independent rows: for each origin, each
// column becomes one row. Returns {x_rows [B*N, I], y_rows [B*N, O]}.
std::pair<Tensor, Tensor> gather_window_rows(const Dataset& ds,
                                             const std::vector<std::int64_t>& origins,
                                             int input_len, int horizon);

// Serialize back to the same CSV layout load_csv reads; numeric cells use
// the shortest decimal that parses back to the identical double.
void write_csv(const Dataset& ds, const std::string& path);

// Synthetic sum-of-sines fixture with per-channel random phases and
// Gaussian noise; fully determined by the seed.
struct SynthComponent {
    double period = 24.0;
    double amplitude = 1.0;
};

struct SynthSpec {
    std::int64_t length = 1000;  // T
    int channels = 1;            // N
    std::vector<SynthComponent> components = {{24.0, 1.0}};
    double noise_std = 0.0;
    std::uint64_t seed = 42;
};

Dataset synth_generate(const SynthSpec& spec);

}  // namespace cpnet
