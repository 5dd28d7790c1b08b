#include "cpnet/train.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "cpnet/layers.hpp"
#include "cpnet/rng.hpp"

namespace cpnet {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Map channel-independent rows back to the raw scale: row r of a [B*N, L]
// block belongs to column r % N.
Tensor rows_to_raw(const Tensor& rows, const Scaler& scaler, int n_cols) {
    const int B = rows.extent(0), L = rows.extent(1);
    std::vector<double> out(static_cast<size_t>(B) * L);
    for (int r = 0; r < B; ++r) {
        const int c = r % n_cols;
        for (int t = 0; t < L; ++t) {
            out[static_cast<size_t>(r) * L + t] =
                rows.value_at(static_cast<std::int64_t>(r) * L + t) * scaler.std[c] +
                scaler.mean[c];
        }
    }
    return tensor_from({B, L}, std::move(out));
}

// Run fn(0..count-1), fanning out up to CPNET_THREADS workers. Tasks must be
// independent; the first exception wins and is rethrown after joining.
void run_indexed_tasks(std::size_t count, const std::function<void(std::size_t)>& fn) {
    const int workers = std::min<int>(thread_cap(), static_cast<int>(count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count || failed.load()) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    failed.store(true);
                    return;
                }
            }
        });
    }
    for (std::thread& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

double median(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const size_t n = xs.size();
    if (n == 0) return 0.0;
    return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

void linear_fit(const std::vector<double>& x, const std::vector<double>& y, double& slope,
                double& intercept, double& r2) {
    const size_t n = x.size();
    if (n < 2) {
        slope = 0.0;
        intercept = n == 1 ? y[0] : 0.0;
        r2 = 0.0;
        return;
    }
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    slope = sxy / sxx;
    intercept = my - slope * mx;
    double ss_res = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double e = y[i] - (intercept + slope * x[i]);
        ss_res += e * e;
    }
    r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
}

}  // namespace

void TrainConfig::validate() const {
    if (!std::isfinite(lr) || lr < 0.0) throw std::invalid_argument("train: lr must be finite and >= 0");
    if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (max_epochs < 1) throw std::invalid_argument("train: max_epochs must be >= 1");
    if (patience < 1) throw std::invalid_argument("train: patience must be >= 1");
    if (!std::isfinite(grad_clip) || grad_clip < 0.0) {
        throw std::invalid_argument("train: grad_clip must be finite and >= 0");
    }
    if (!std::isfinite(weight_decay) || weight_decay < 0.0) {
        throw std::invalid_argument("train: weight_decay must be finite and >= 0");
    }
}

void MetricsAccum::add(const Tensor& pred, const Tensor& truth) {
    if (pred.shape() != truth.shape()) {
        throw std::invalid_argument("metrics: prediction shape " + shape_to_string(pred.shape()) +
                                    " vs target shape " + shape_to_string(truth.shape()));
    }
    const Array& p = pred.array();
    const Array& t = truth.array();
    for (std::int64_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - t[i];
        se += d * d;
        ae += std::abs(d);
    }
    n += p.size();
}

Metrics MetricsAccum::finish() const {
    if (n == 0) throw std::logic_error("metrics: no points accumulated");
    return {se / static_cast<double>(n), ae / static_cast<double>(n), n};
}

Metrics evaluate_model(const CPNetModel& model, const Dataset& scaled, const SplitRange& split,
                       const Scaler* to_raw_scale) {
    const ModelConfig& mc = model.config();
    const int N = scaled.n_cols;
    if (to_raw_scale && static_cast<int>(to_raw_scale->mean.size()) != N) {
        throw std::invalid_argument("evaluate: scaler column count does not match dataset");
    }
    const std::vector<std::int64_t> origins = window_origins(split, mc.input_len, mc.horizon, 1);
    const ParamView plain(model.params());
    MetricsAccum acc;
    const size_t chunk = 256;
    for (size_t k = 0; k < origins.size(); k += chunk) {
        const size_t hi = std::min(k + chunk, origins.size());
        const std::vector<std::int64_t> part(origins.begin() + static_cast<std::ptrdiff_t>(k),
                                             origins.begin() + static_cast<std::ptrdiff_t>(hi));
        auto [x, y] = gather_window_rows(scaled, part, mc.input_len, mc.horizon);
        auto [xn, stats] = normalize_rows(x);
        Tensor pred = denormalize_rows(model.forward_rows(xn, plain), stats);
        if (to_raw_scale) {
            pred = rows_to_raw(pred, *to_raw_scale, N);
            y = rows_to_raw(y, *to_raw_scale, N);
        }
        acc.add(pred, y);
    }
    return acc.finish();
}

RunReport train_model(CPNetModel& model, const Dataset& scaled, const DataSplits& splits,
                      const TrainConfig& cfg) {
    cfg.validate();
    const ModelConfig& mc = model.config();
    std::vector<std::int64_t> origins = window_origins(splits.train, mc.input_len, mc.horizon, 1);

    RunReport rep;
    rep.dataset = scaled.name;
    rep.model = mc;
    rep.train_config = cfg;
    rep.param_count = model.param_count();

    Adam adam(AdamConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.grad_clip, cfg.weight_decay});
    Rng shuffle_rng(derive_seed(cfg.seed, 1));
    Rng dropout_rng(derive_seed(cfg.seed, 2));
    Rng* drop = mc.dropout > 0.0 ? &dropout_rng : nullptr;
    double best_val = std::numeric_limits<double>::infinity();
    int stale = 0;
    ParamStore best_params = model.params();
    const auto t0 = Clock::now();

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(origins);
        double loss_sum = 0.0;
        std::int64_t points = 0;
        for (size_t k = 0; k < origins.size(); k += static_cast<size_t>(cfg.batch_size)) {
            const size_t hi = std::min(k + static_cast<size_t>(cfg.batch_size), origins.size());
            const std::vector<std::int64_t> batch(origins.begin() + static_cast<std::ptrdiff_t>(k),
                                                  origins.begin() + static_cast<std::ptrdiff_t>(hi));
            try {
                auto [x, y] = gather_window_rows(scaled, batch, mc.input_len, mc.horizon);
                auto [xn, stats] = normalize_rows(x);
                const Tensor yn = normalize_with_stats_rows(y, stats);
                Graph graph;
                const ParamView view(model.params(), graph);
                const Tensor loss = mse(model.forward_rows(xn, view, drop), yn);
                backward(loss);
                adam.step(model.params(), graph, view);
                const std::int64_t batch_points = xn.extent(0) * static_cast<std::int64_t>(mc.horizon);
                loss_sum += loss.value_at(0) * static_cast<double>(batch_points);
                points += batch_points;
            } catch (const std::runtime_error& e) {
                throw std::runtime_error("train: diverged at epoch " + std::to_string(epoch + 1) +
                                         ", step " + std::to_string(k / cfg.batch_size + 1) + ": " +
                                         e.what());
            }
        }
        EpochRecord rec;
        rec.train_loss = loss_sum / static_cast<double>(points);
        rec.val_mse = evaluate_model(model, scaled, splits.val).mse;
        rep.epochs.push_back(rec);
        if (rec.val_mse < best_val) {
            best_val = rec.val_mse;
            rep.best_epoch = epoch + 1;
            best_params = model.params();
            stale = 0;
        } else if (++stale >= cfg.patience) {
            rep.early_stopped = true;
            break;
        }
    }

    model.params() = best_params;
    rep.train_seconds = seconds_since(t0);
    rep.test = evaluate_model(model, scaled, splits.test);
    return rep;
}

TrainedRun run_training(const ModelConfig& mc, const Dataset& raw, SplitProtocol protocol,
                        const TrainConfig& tc, const std::string& command) {
    mc.validate();
    tc.validate();
    const DataSplits splits = split_dataset(raw, mc.input_len, mc.horizon, protocol);
    const Scaler scaler = fit_scaler(raw, splits.train);
    const Dataset scaled = apply_scaler(raw, scaler);
    CPNetModel model(mc, tc.seed);
    RunReport report = train_model(model, scaled, splits, tc);
    report.command = command;
    return {std::move(model), scaler, splits, std::move(report)};
}

const std::vector<BranchConfig> kBranchPool = {{4, 2}, {8, 4}, {16, 8}, {24, 12}};

std::vector<AblationRow> run_ablation(const ModelConfig& base, const Dataset& raw,
                                      SplitProtocol protocol, const TrainConfig& tc,
                                      const std::vector<std::string>& variants) {
    if (variants.empty()) throw std::invalid_argument("ablation: variant list is empty");
    for (const std::string& v : variants) apply_ablation(base, v);  // validate names up front

    std::vector<AblationRow> rows(variants.size());
    run_indexed_tasks(variants.size(), [&](std::size_t i) {
        TrainedRun run = run_training(apply_ablation(base, variants[i]), raw, protocol, tc, "ablate");
        rows[i].variant = variants[i];
        rows[i].test = run.report.test;
        rows[i].report = std::move(run.report);
    });

    size_t ref = 0;
    for (size_t i = 0; i < variants.size(); ++i) {
        if (variants[i] == "full") ref = i;
    }
    for (AblationRow& row : rows) row.delta_mse = row.test.mse - rows[ref].test.mse;
    return rows;
}

std::vector<BranchSweepRow> sweep_branches(const ModelConfig& base, const Dataset& raw,
                                           SplitProtocol protocol, const TrainConfig& tc,
                                           const std::vector<int>& n_list) {
    if (n_list.empty()) throw std::invalid_argument("branch sweep: empty count list");
    for (int n : n_list) {
        if (n < 1 || n > static_cast<int>(kBranchPool.size())) {
            throw std::invalid_argument("branch sweep: count " + std::to_string(n) +
                                        " outside 1.." + std::to_string(kBranchPool.size()));
        }
    }
    std::vector<BranchSweepRow> rows(n_list.size());
    run_indexed_tasks(n_list.size(), [&](std::size_t i) {
        ModelConfig mc = base;
        mc.branches.assign(kBranchPool.begin(), kBranchPool.begin() + n_list[i]);
        TrainedRun run = run_training(mc, raw, protocol, tc, "sweep-branches");
        rows[i].n_branches = n_list[i];
        rows[i].branches = mc.branches;
        rows[i].test = run.report.test;
        rows[i].report = std::move(run.report);
    });
    return rows;
}

std::vector<LookbackRow> sweep_lookback(const ModelConfig& base, const Dataset& raw,
                                        SplitProtocol protocol, const TrainConfig& tc,
                                        const std::vector<int>& lookbacks) {
    if (lookbacks.empty()) throw std::invalid_argument("lookback sweep: empty lookback list");
    std::vector<LookbackRow> rows(lookbacks.size());
    run_indexed_tasks(lookbacks.size(), [&](std::size_t i) {
        ModelConfig mc = base;
        mc.input_len = lookbacks[i];
        TrainedRun run = run_training(mc, raw, protocol, tc, "sweep-lookback");
        rows[i].input_len = lookbacks[i];
        rows[i].test = run.report.test;
        rows[i].seconds_per_epoch =
            run.report.train_seconds / static_cast<double>(run.report.epochs.size());
        rows[i].report = std::move(run.report);
    });
    return rows;
}

BenchReport benchmark_runtime(const ModelConfig& base, const std::vector<int>& lookbacks,
                              int measured_steps, int batch_windows, int windows_per_epoch,
                              std::uint64_t seed) {
    if (measured_steps < 1) throw std::invalid_argument("bench: measured_steps must be >= 1");
    if (batch_windows < 1) throw std::invalid_argument("bench: batch_windows must be >= 1");
    if (windows_per_epoch < 1) throw std::invalid_argument("bench: windows_per_epoch must be >= 1");

    BenchReport out;
    for (int I : lookbacks) {
        ModelConfig mc = base;
        mc.input_len = I;
        mc.validate();
        CPNetModel model(mc, seed);
        Rng rng(derive_seed(seed, 999));
        const int O = mc.horizon;
        std::vector<double> xs(static_cast<size_t>(batch_windows) * I);
        std::vector<double> ys(static_cast<size_t>(batch_windows) * O);
        for (double& v : xs) v = rng.uniform(-1.0, 1.0);
        for (double& v : ys) v = rng.uniform(-1.0, 1.0);
        const Tensor x = tensor_from({batch_windows, I}, std::move(xs));
        const Tensor y = tensor_from({batch_windows, O}, std::move(ys));

        Adam adam(AdamConfig{0.0, 0.9, 0.999, 1e-8, 0.0});  // full update cost, zero drift
        auto train_step = [&] {
            Graph graph;
            const ParamView view(model.params(), graph);
            const Tensor loss = mse(model.forward_rows(x, view), y);
            backward(loss);
            adam.step(model.params(), graph, view);
        };
        for (int w = 0; w < 3; ++w) train_step();
        std::vector<double> step_ms(static_cast<size_t>(measured_steps));
        for (double& ms : step_ms) {
            const auto t0 = Clock::now();
            train_step();
            ms = seconds_since(t0) * 1e3;
        }

        const ParamView plain(model.params());
        for (int w = 0; w < 3; ++w) model.forward_rows(x, plain);
        std::vector<double> infer_ms(static_cast<size_t>(measured_steps));
        for (double& ms : infer_ms) {
            const auto t0 = Clock::now();
            model.forward_rows(x, plain);
            ms = seconds_since(t0) * 1e3;
        }

        BenchRow row;
        row.input_len = I;
        row.train_step_ms = median(step_ms);
        row.infer_ms = median(infer_ms);
        row.epoch_ms = row.train_step_ms *
                       std::ceil(static_cast<double>(windows_per_epoch) / batch_windows);
        row.measured_steps = measured_steps;
        out.rows.push_back(row);
    }

    if (!out.rows.empty()) {
        std::vector<double> xs, ys;
        double lo_i = out.rows.front().input_len, lo_t = out.rows.front().train_step_ms;
        double hi_i = lo_i, hi_t = lo_t;
        for (const BenchRow& r : out.rows) {
            xs.push_back(static_cast<double>(r.input_len));
            ys.push_back(r.train_step_ms);
            if (r.input_len < lo_i) {
                lo_i = r.input_len;
                lo_t = r.train_step_ms;
            }
            if (r.input_len > hi_i) {
                hi_i = r.input_len;
                hi_t = r.train_step_ms;
            }
        }
        linear_fit(xs, ys, out.slope_ms_per_unit, out.intercept_ms, out.r2);
        out.max_min_ratio = lo_t > 0.0 ? hi_t / lo_t : 0.0;
    }
    return out;
}

// ---- report serialization ----------------------------------------------

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

double parse_double_strict(const std::string& s, const std::string& key) {
    const char* begin = s.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0') {
        throw std::runtime_error("report: bad number '" + s + "' for " + key);
    }
    return v;
}

std::int64_t parse_int_strict(const std::string& s, const std::string& key) {
    const char* begin = s.c_str();
    char* end = nullptr;
    const long long v = std::strtoll(begin, &end, 10);
    if (end == begin || *end != '\0') {
        throw std::runtime_error("report: bad integer '" + s + "' for " + key);
    }
    return v;
}

std::uint64_t parse_u64_strict(const std::string& s, const std::string& key) {
    const char* begin = s.c_str();
    char* end = nullptr;
    const unsigned long long v = std::strtoull(begin, &end, 10);
    if (end == begin || *end != '\0') {
        throw std::runtime_error("report: bad integer '" + s + "' for " + key);
    }
    return v;
}

bool parse_bool_strict(const std::string& s, const std::string& key) {
    if (s == "0") return false;
    if (s == "1") return true;
    throw std::runtime_error("report: bad flag '" + s + "' for " + key + "', expected 0 or 1");
}

}  // namespace

std::string report_to_text(const RunReport& r) {
    std::ostringstream out;
    out << "format=cpnet-report-v1\n";
    out << "command=" << r.command << "\n";
    out << "dataset=" << r.dataset << "\n";
    out << "seed=" << r.train_config.seed << "\n";
    out << "input_len=" << r.model.input_len << "\n";
    out << "horizon=" << r.model.horizon << "\n";
    out << "branches=" << branches_to_string(r.model.branches) << "\n";
    out << "embed_channels=" << r.model.embed_channels << "\n";
    out << "hidden=" << r.model.hidden << "\n";
    out << "dilated_kernel=" << r.model.dilated_kernel << "\n";
    out << "dropout=" << format_double(r.model.dropout) << "\n";
    out << "ablate_tp=" << (r.model.ablate_tp ? 1 : 0) << "\n";
    out << "ablate_cs=" << (r.model.ablate_cs ? 1 : 0) << "\n";
    out << "lr=" << format_double(r.train_config.lr) << "\n";
    out << "batch_size=" << r.train_config.batch_size << "\n";
    out << "max_epochs=" << r.train_config.max_epochs << "\n";
    out << "patience=" << r.train_config.patience << "\n";
    out << "grad_clip=" << format_double(r.train_config.grad_clip) << "\n";
    out << "weight_decay=" << format_double(r.train_config.weight_decay) << "\n";
    out << "param_count=" << r.param_count << "\n";
    out << "best_epoch=" << r.best_epoch << "\n";
    out << "early_stopped=" << (r.early_stopped ? 1 : 0) << "\n";
    out << "test_mse=" << format_double(r.test.mse) << "\n";
    out << "test_mae=" << format_double(r.test.mae) << "\n";
    out << "test_points=" << r.test.n_points << "\n";
    out << "epochs=" << r.epochs.size() << "\n";
    out << "epoch,train_loss,val_mse\n";
    for (size_t e = 0; e < r.epochs.size(); ++e) {
        out << (e + 1) << "," << format_double(r.epochs[e].train_loss) << ","
            << format_double(r.epochs[e].val_mse) << "\n";
    }
    return out.str();
}

RunReport parse_report_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    auto next_line = [&](const char* what) {
        if (!std::getline(in, line)) {
            throw std::runtime_error(std::string("report: truncated before ") + what);
        }
        if (!line.empty() && line.back() == '\r') line.pop_back();
    };

    next_line("format line");
    if (line != "format=cpnet-report-v1") {
        throw std::runtime_error("report: unrecognized format line '" + line + "'");
    }

    RunReport r;
    std::int64_t epoch_count = -1;
    for (;;) {
        next_line("epoch table");
        if (line == "epoch,train_loss,val_mse") break;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("report: expected key=value, got '" + line + "'");
        }
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "command") {
            r.command = val;
        } else if (key == "dataset") {
            r.dataset = val;
        } else if (key == "seed") {
            r.train_config.seed = parse_u64_strict(val, key);
        } else if (key == "input_len") {
            r.model.input_len = static_cast<int>(parse_int_strict(val, key));
        } else if (key == "horizon") {
            r.model.horizon = static_cast<int>(parse_int_strict(val, key));
        } else if (key == "branches") {
            r.model.branches = parse_branches(val);
        } else if (key == "embed_channels") {
            r.model.embed_channels = static_cast<int>(parse_int_strict(val, key));
        } else if (key == "hidden") {
            r.model.hidden = static_cast<int>(parse_int_strict(val, key));
        } else if (key == "dilated_kernel") {
            r.model.dilated_kernel = static_cast<int>(parse_int_strict(val, key));
        } else if (key == "dropout") {
            r.model.dropout = parse_double_strict(val, key);
        } else if (key == "ablate_tp") {
            r.model.ablate_tp = parse_bool_strict(val, key);
        } else if (key == "ablate_cs") {
            r.model.ablate_cs = parse_bool_strict(val, key);
        } else if (key == "lr") {
            r.train_config.lr = parse_double_strict(val, key);
        } else if (key == "batch_size") {
            r.train_config.batch_size = static_cast<int>(parse_int_strict(val, key));
        } else if (key == "max_epochs") {
            r.train_config.max_epochs = static_cast<int>(parse_int_strict(val, key));
        } else if (key == "patience") {
            r.train_config.patience = static_cast<int>(parse_int_strict(val, key));
        } else if (key == "grad_clip") {
            r.train_config.grad_clip = parse_double_strict(val, key);
        } else if (key == "weight_decay") {
            r.train_config.weight_decay = parse_double_strict(val, key);
        } else if (key == "param_count") {
            r.param_count = parse_int_strict(val, key);
        } else if (key == "best_epoch") {
            r.best_epoch = static_cast<int>(parse_int_strict(val, key));
        } else if (key == "early_stopped") {
            r.early_stopped = parse_bool_strict(val, key);
        } else if (key == "test_mse") {
            r.test.mse = parse_double_strict(val, key);
        } else if (key == "test_mae") {
            r.test.mae = parse_double_strict(val, key);
        } else if (key == "test_points") {
            r.test.n_points = parse_int_strict(val, key);
        } else if (key == "epochs") {
            epoch_count = parse_int_strict(val, key);
        } else {
            throw std::runtime_error("report: unknown key '" + key + "'");
        }
    }
    if (epoch_count < 0) throw std::runtime_error("report: missing epochs count");
    for (std::int64_t e = 0; e < epoch_count; ++e) {
        next_line("epoch row");
        std::stringstream row(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        if (cells.size() != 3) {
            throw std::runtime_error("report: epoch row '" + line + "' needs 3 cells");
        }
        if (parse_int_strict(cells[0], "epoch") != e + 1) {
            throw std::runtime_error("report: epoch rows out of order at '" + line + "'");
        }
        EpochRecord rec;
        rec.train_loss = parse_double_strict(cells[1], "train_loss");
        rec.val_mse = parse_double_strict(cells[2], "val_mse");
        r.epochs.push_back(rec);
    }
    return r;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

int thread_cap() {
    const char* env = std::getenv("CPNET_THREADS");
    if (!env || !*env) return 1;
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1 || v > 1024) {
        throw std::runtime_error("CPNET_THREADS must be a positive integer (got '" +
                                 std::string(env) + "')");
    }
    return static_cast<int>(v);
}

}  // namespace cpnet
