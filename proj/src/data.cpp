#include "cpnet/data.hpp"

#include <algorithm>
#include <charconv>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cpnet/rng.hpp"

namespace cpnet {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_cell(const std::string& cell, std::int64_t row, int col) {
    std::string trimmed = cell;
    while (!trimmed.empty() && (trimmed.back() == '\r' || trimmed.back() == ' ')) trimmed.pop_back();
    size_t start = trimmed.find_first_not_of(' ');
    if (start == std::string::npos) {
        throw std::runtime_error("csv: missing value at data row " + std::to_string(row) +
                                 ", column " + std::to_string(col));
    }
    trimmed = trimmed.substr(start);
    const char* begin = trimmed.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0') {
        throw std::runtime_error("csv: non-numeric value '" + trimmed + "' at data row " +
                                 std::to_string(row) + ", column " + std::to_string(col));
    }
    if (!std::isfinite(v)) {
        throw std::runtime_error("csv: non-finite value at data row " + std::to_string(row) +
                                 ", column " + std::to_string(col));
    }
    return v;
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

std::string basename_no_ext(const std::string& path) {
    size_t slash = path.find_last_of("/\\");
    std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
    size_t dot = base.find_last_of('.');
    if (dot != std::string::npos && dot > 0) base = base.substr(0, dot);
    return base;
}

void check_split_fits(const SplitRange& r, const char* which, int input_len, int horizon) {
    std::int64_t need = static_cast<std::int64_t>(input_len) + horizon;
    if (r.length() < need) {
        throw std::invalid_argument("split: " + std::string(which) + " range holds " +
                                    std::to_string(r.length()) + " rows but one window needs " +
                                    std::to_string(need));
    }
}

}  // namespace

Dataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("csv: cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("csv: '" + path + "' is empty");
    std::vector<std::string> header = split_line(strip_cr(line));
    if (header.size() < 2) {
        throw std::runtime_error("csv: '" + path + "' needs a date column plus at least one variate");
    }

    Dataset ds;
    ds.name = basename_no_ext(path);
    ds.n_cols = static_cast<int>(header.size()) - 1;
    ds.col_names.assign(header.begin() + 1, header.end());

    std::int64_t row = 0;
    while (std::getline(in, line)) {
        line = strip_cr(line);
        if (line.empty()) continue;
        std::vector<std::string> cells = split_line(line);
        if (static_cast<int>(cells.size()) != ds.n_cols + 1) {
            throw std::runtime_error("csv: data row " + std::to_string(row) + " has " +
                                     std::to_string(cells.size()) + " cells, expected " +
                                     std::to_string(ds.n_cols + 1));
        }
        ds.timestamps.push_back(cells[0]);
        for (int c = 0; c < ds.n_cols; ++c) {
            ds.values.push_back(parse_cell(cells[c + 1], row, c + 1));
        }
        ++row;
    }
    if (ds.rows() == 0) throw std::runtime_error("csv: '" + path + "' has a header but no data rows");
    return ds;
}

DataSplits split_dataset(const Dataset& ds, int input_len, int horizon, SplitProtocol protocol) {
    if (input_len < 1 || horizon < 1) {
        throw std::invalid_argument("split: input_len and horizon must be positive");
    }
    const std::int64_t T = ds.rows();

    if (protocol == SplitProtocol::auto_detect) {
        std::string n = lower(ds.name);
        if (n.rfind("etth", 0) == 0) {
            protocol = SplitProtocol::ett_hourly;
        } else if (n.rfind("ettm", 0) == 0) {
            protocol = SplitProtocol::ett_minute;
        } else {
            protocol = SplitProtocol::ratio;
        }
    }

    const std::int64_t I = input_len;
    DataSplits s;
    if (protocol == SplitProtocol::ett_hourly || protocol == SplitProtocol::ett_minute) {
        // 12 months train, 4 val, 4 test; months of 30 days at the dataset's step.
        const std::int64_t month = protocol == SplitProtocol::ett_hourly ? 30 * 24 : 30 * 24 * 4;
        const std::int64_t b1 = 12 * month, b2 = 16 * month, b3 = 20 * month;
        if (T < b3) {
            throw std::invalid_argument("split: dataset '" + ds.name + "' has " + std::to_string(T) +
                                        " rows but this ETT protocol expects at least " +
                                        std::to_string(b3));
        }
        if (I >= b1) {
            throw std::invalid_argument("split: input_len " + std::to_string(I) +
                                        " exceeds the first split boundary " + std::to_string(b1));
        }
        s.train = {0, b1};
        s.val = {b1 - I, b2};
        s.test = {b2 - I, b3};
    } else {
        const std::int64_t n_train = static_cast<std::int64_t>(0.7 * static_cast<double>(T));
        const std::int64_t n_test = static_cast<std::int64_t>(0.2 * static_cast<double>(T));
        const std::int64_t n_val = T - n_train - n_test;
        if (n_train <= I || n_val < 1 || n_test < 1) {
            throw std::invalid_argument("split: dataset with " + std::to_string(T) +
                                        " rows is too short for input_len " + std::to_string(I));
        }
        s.train = {0, n_train};
        s.val = {n_train - I, n_train + n_val};
        s.test = {T - n_test - I, T};
    }
    check_split_fits(s.train, "train", input_len, horizon);
    check_split_fits(s.val, "val", input_len, horizon);
    check_split_fits(s.test, "test", input_len, horizon);
    return s;
}

Scaler fit_scaler(const Dataset& ds, const SplitRange& train) {
    if (train.begin < 0 || train.end > ds.rows() || train.length() < 1) {
        throw std::invalid_argument("scaler: train range out of bounds");
    }
    const int N = ds.n_cols;
    const double n = static_cast<double>(train.length());
    Scaler s;
    s.mean.assign(N, 0.0);
    s.std.assign(N, 0.0);
    for (int c = 0; c < N; ++c) {
        double acc = 0.0;
        for (std::int64_t t = train.begin; t < train.end; ++t) acc += ds.at(t, c);
        s.mean[c] = acc / n;
        double sq = 0.0;
        for (std::int64_t t = train.begin; t < train.end; ++t) {
            double d = ds.at(t, c) - s.mean[c];
            sq += d * d;
        }
        s.std[c] = std::max(std::sqrt(sq / n), 1e-8);
    }
    return s;
}

Dataset apply_scaler(const Dataset& ds, const Scaler& s) {
    if (static_cast<int>(s.mean.size()) != ds.n_cols) {
        throw std::invalid_argument("scaler: fitted on " + std::to_string(s.mean.size()) +
                                    " columns, dataset has " + std::to_string(ds.n_cols));
    }
    Dataset out = ds;
    for (std::int64_t t = 0; t < ds.rows(); ++t) {
        for (int c = 0; c < ds.n_cols; ++c) {
            out.values[static_cast<size_t>(t) * ds.n_cols + c] = (ds.at(t, c) - s.mean[c]) / s.std[c];
        }
    }
    return out;
}

Dataset invert_scaler(const Dataset& ds, const Scaler& s) {
    if (static_cast<int>(s.mean.size()) != ds.n_cols) {
        throw std::invalid_argument("scaler: fitted on " + std::to_string(s.mean.size()) +
                                    " columns, dataset has " + std::to_string(ds.n_cols));
    }
    Dataset out = ds;
    for (std::int64_t t = 0; t < ds.rows(); ++t) {
        for (int c = 0; c < ds.n_cols; ++c) {
            out.values[static_cast<size_t>(t) * ds.n_cols + c] = ds.at(t, c) * s.std[c] + s.mean[c];
        }
    }
    return out;
}

std::vector<std::int64_t> window_origins(const SplitRange& split, int input_len, int horizon,
                                         int stride) {
    if (stride < 1) throw std::invalid_argument("windows: stride must be positive");
    const std::int64_t span = split.length() - input_len - horizon;
    if (span < 0) {
        throw std::invalid_argument("windows: split of " + std::to_string(split.length()) +
                                    " rows cannot fit input_len " + std::to_string(input_len) +
                                    " plus horizon " + std::to_string(horizon));
    }
    std::vector<std::int64_t> origins;
    origins.reserve(static_cast<size_t>(span / stride + 1));
    for (std::int64_t k = 0; k * stride <= span; ++k) origins.push_back(split.begin + k * stride);
    return origins;
}

std::pair<Tensor, Tensor> gather_window_rows(const Dataset& ds,
                                             const std::vector<std::int64_t>& origins,
                                             int input_len, int horizon) {
    if (origins.empty()) throw std::invalid_argument("windows: empty origin list");
    const int N = ds.n_cols;
    const std::int64_t B = static_cast<std::int64_t>(origins.size());
    for (std::int64_t o : origins) {
        if (o < 0 || o + input_len + horizon > ds.rows()) {
            throw std::invalid_argument("windows: origin " + std::to_string(o) +
                                        " runs past the dataset end");
        }
    }
    std::vector<double> x(static_cast<size_t>(B) * N * input_len);
    std::vector<double> y(static_cast<size_t>(B) * N * horizon);
    for (std::int64_t b = 0; b < B; ++b) {
        const std::int64_t o = origins[static_cast<size_t>(b)];
        for (int c = 0; c < N; ++c) {
            const size_t rx = static_cast<size_t>(b * N + c);
            for (int t = 0; t < input_len; ++t) x[rx * input_len + t] = ds.at(o + t, c);
            for (int t = 0; t < horizon; ++t) y[rx * horizon + t] = ds.at(o + input_len + t, c);
        }
    }
    return {tensor_from({static_cast<int>(B) * N, input_len}, std::move(x)),
            tensor_from({static_cast<int>(B) * N, horizon}, std::move(y))};
}

void write_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("csv: cannot open '" + path + "' for writing");
    out << "date";
    for (const std::string& name : ds.col_names) out << ',' << name;
    out << '\n';
    char buf[64];
    for (std::int64_t t = 0; t < ds.rows(); ++t) {
        out << ds.timestamps[static_cast<size_t>(t)];
        for (int c = 0; c < ds.n_cols; ++c) {
            const auto res = std::to_chars(buf, buf + sizeof(buf), ds.at(t, c));
            out << ',' << std::string_view(buf, static_cast<size_t>(res.ptr - buf));
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("csv: write to '" + path + "' failed");
}

Dataset synth_generate(const SynthSpec& spec) {
    if (spec.length < 1) throw std::invalid_argument("synth: length must be positive");
    if (spec.channels < 1) throw std::invalid_argument("synth: channels must be positive");
    if (spec.components.empty()) throw std::invalid_argument("synth: need at least one component");
    for (const SynthComponent& c : spec.components) {
        if (c.period <= 0.0) throw std::invalid_argument("synth: component period must be positive");
    }
    if (spec.noise_std < 0.0) throw std::invalid_argument("synth: noise_std must be non-negative");

    constexpr double two_pi = 6.283185307179586476925286766559;
    Rng rng(spec.seed);
    const int N = spec.channels;
    const size_t K = spec.components.size();
    std::vector<double> phase(static_cast<size_t>(N) * K);
    for (double& p : phase) p = rng.uniform(0.0, two_pi);

    Dataset ds;
    ds.name = "synth";
    ds.granularity = "synthetic";
    ds.n_cols = N;
    for (int c = 0; c < N; ++c) ds.col_names.push_back("s" + std::to_string(c));
    ds.timestamps.reserve(static_cast<size_t>(spec.length));
    ds.values.reserve(static_cast<size_t>(spec.length) * N);
    for (std::int64_t t = 0; t < spec.length; ++t) {
        ds.timestamps.push_back(std::to_string(t));
        for (int c = 0; c < N; ++c) {
            double v = 0.0;
            for (size_t k = 0; k < K; ++k) {
                const SynthComponent& comp = spec.components[k];
                v += comp.amplitude *
                     std::sin(two_pi * static_cast<double>(t) / comp.period + phase[c * K + k]);
            }
            if (spec.noise_std > 0.0) v += spec.noise_std * rng.gaussian();
            ds.values.push_back(v);
        }
    }
    return ds;
}

}  // namespace cpnet
