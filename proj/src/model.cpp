#include "cpnet/model.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string_view>

namespace cpnet {

std::string branches_to_string(const std::vector<BranchConfig>& branches) {
    std::ostringstream os;
    for (size_t i = 0; i < branches.size(); ++i) {
        if (i) os << ',';
        os << branches[i].token_length << ':' << branches[i].sampling_rate;
    }
    return os.str();
}

std::vector<BranchConfig> parse_branches(const std::string& text) {
    if (text.empty() || text.back() == ',') {
        throw std::invalid_argument("branches: empty or dangling entry in '" + text + "'");
    }
    std::vector<BranchConfig> out;
    std::istringstream is(text);
    std::string item;
    while (std::getline(is, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) {
            throw std::invalid_argument("branches: expected TL:SR pairs, got '" + item + "'");
        }
        try {
            size_t used1 = 0, used2 = 0;
            const int tl = std::stoi(item.substr(0, colon), &used1);
            const int sr = std::stoi(item.substr(colon + 1), &used2);
            if (used1 != colon || used2 != item.size() - colon - 1) {
                throw std::invalid_argument("trailing characters");
            }
            out.push_back({tl, sr});
        } catch (const std::exception&) {
            throw std::invalid_argument("branches: cannot parse pair '" + item + "'");
        }
    }
    if (out.empty()) throw std::invalid_argument("branches: empty list");
    return out;
}

void ModelConfig::validate() const {
    if (input_len < 2) throw std::invalid_argument("model config: input_len must be >= 2");
    if (horizon < 1) throw std::invalid_argument("model config: horizon must be >= 1");
    if (branches.empty()) throw std::invalid_argument("model config: no branches");
    if (embed_channels < 1) throw std::invalid_argument("model config: embed_channels must be >= 1");
    if (hidden < 1) throw std::invalid_argument("model config: hidden must be >= 1");
    if (dilated_kernel < 1 || dilated_kernel % 2 == 0) {
        throw std::invalid_argument("model config: dilated_kernel must be odd and >= 1");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) {
        throw std::invalid_argument("model config: dropout must be in [0, 1)");
    }
    for (const BranchConfig& b : branches) {
        if (b.token_length < 1) throw std::invalid_argument("model config: token_length must be >= 1");
        if (b.token_length > input_len) {
            throw std::invalid_argument("model config: token_length " +
                                        std::to_string(b.token_length) + " exceeds input_len " +
                                        std::to_string(input_len));
        }
        if (b.sampling_rate < 1) throw std::invalid_argument("model config: sampling_rate must be >= 1");
    }
}

const std::vector<std::string>& ablation_variants() {
    static const std::vector<std::string> v = {"full", "no_tp", "no_cs", "no_tp_cs"};
    return v;
}

ModelConfig apply_ablation(ModelConfig cfg, const std::string& variant) {
    if (variant == "full") return cfg;
    if (variant == "no_tp" || variant == "no_tp_cs") {
        for (BranchConfig& b : cfg.branches) b.token_length = 1;
        cfg.ablate_tp = true;
    }
    if (variant == "no_cs" || variant == "no_tp_cs") {
        for (BranchConfig& b : cfg.branches) b.sampling_rate = 1;
        cfg.dilated_kernel = 1;
        cfg.ablate_cs = true;
    }
    if (variant != "no_tp" && variant != "no_cs" && variant != "no_tp_cs") {
        throw std::invalid_argument("unknown ablation variant '" + variant + "'");
    }
    return cfg;
}

int branch_repr_length(const ModelConfig& cfg, const BranchConfig& branch) {
    const int total = cfg.input_len + cfg.horizon;
    return (total + branch.sampling_rate - 1) / branch.sampling_rate;
}

// ---- normalization ----

namespace {

NormStats stats_over_segments(const Array& data, std::int64_t groups, std::int64_t len,
                              std::int64_t group_stride, std::int64_t elem_stride) {
    NormStats s;
    s.mean.resize(groups);
    s.std.resize(groups);
    for (std::int64_t g = 0; g < groups; ++g) {
        double acc = 0.0;
        for (std::int64_t i = 0; i < len; ++i) acc += data(g * group_stride + i * elem_stride);
        const double mean = acc / static_cast<double>(len);
        double sq = 0.0;
        for (std::int64_t i = 0; i < len; ++i) {
            const double d = data(g * group_stride + i * elem_stride) - mean;
            sq += d * d;
        }
        // population std with the eps floor for constant series
        s.mean[g] = mean;
        s.std[g] = std::max(std::sqrt(sq / static_cast<double>(len)), kNormEps);
    }
    return s;
}

}  // namespace

std::pair<Tensor, NormStats> instance_normalize(const Tensor& x) {
    if (x.rank() != 2) throw std::invalid_argument("instance_normalize: expects [I, N]");
    if (x.tracked()) throw std::invalid_argument("instance_normalize: graph-tracked input");
    const std::int64_t len = x.extent(0), n = x.extent(1);
    if (len < 2) throw std::invalid_argument("instance_normalize: window must have >= 2 steps");
    // channel c strides by N through the flat [I, N] layout
    NormStats s = stats_over_segments(x.array(), n, len, 1, n);
    Array out(x.numel());
    for (std::int64_t t = 0; t < len; ++t) {
        for (std::int64_t c = 0; c < n; ++c) {
            out(t * n + c) = (x.array()(t * n + c) - s.mean[c]) / s.std[c];
        }
    }
    return {Tensor(x.shape(), std::move(out)), std::move(s)};
}

Tensor instance_denormalize(const Tensor& y, const NormStats& stats) {
    if (y.rank() != 2) throw std::invalid_argument("instance_denormalize: expects [O, N]");
    if (y.tracked()) throw std::invalid_argument("instance_denormalize: graph-tracked input");
    const std::int64_t len = y.extent(0), n = y.extent(1);
    if (static_cast<std::int64_t>(stats.mean.size()) != n) {
        throw std::invalid_argument("instance_denormalize: stats cover " +
                                    std::to_string(stats.mean.size()) + " channels, tensor has " +
                                    std::to_string(n));
    }
    Array out(y.numel());
    for (std::int64_t t = 0; t < len; ++t) {
        for (std::int64_t c = 0; c < n; ++c) {
            out(t * n + c) = y.array()(t * n + c) * stats.std[c] + stats.mean[c];
        }
    }
    return Tensor(y.shape(), std::move(out));
}

std::pair<Tensor, NormStats> normalize_rows(const Tensor& x) {
    if (x.rank() != 2) throw std::invalid_argument("normalize_rows: expects [B, L]");
    if (x.tracked()) throw std::invalid_argument("normalize_rows: graph-tracked input");
    const std::int64_t rows = x.extent(0), len = x.extent(1);
    if (len < 2) throw std::invalid_argument("normalize_rows: rows must have >= 2 steps");
    NormStats s = stats_over_segments(x.array(), rows, len, len, 1);
    Array out(x.numel());
    for (std::int64_t r = 0; r < rows; ++r) {
        out.segment(r * len, len) = (x.array().segment(r * len, len) - s.mean[r]) / s.std[r];
    }
    return {Tensor(x.shape(), std::move(out)), std::move(s)};
}

Tensor normalize_with_stats_rows(const Tensor& y, const NormStats& s) {
    if (y.rank() != 2) throw std::invalid_argument("normalize_with_stats_rows: expects [B, L]");
    const std::int64_t rows = y.extent(0), len = y.extent(1);
    if (static_cast<std::int64_t>(s.mean.size()) != rows) {
        throw std::invalid_argument("normalize_with_stats_rows: row count mismatch");
    }
    Array out(y.numel());
    for (std::int64_t r = 0; r < rows; ++r) {
        out.segment(r * len, len) = (y.array().segment(r * len, len) - s.mean[r]) / s.std[r];
    }
    return Tensor(y.shape(), std::move(out));
}

Tensor denormalize_rows(const Tensor& y, const NormStats& s) {
    if (y.rank() != 2) throw std::invalid_argument("denormalize_rows: expects [B, L]");
    if (y.tracked()) throw std::invalid_argument("denormalize_rows: graph-tracked input");
    const std::int64_t rows = y.extent(0), len = y.extent(1);
    if (static_cast<std::int64_t>(s.mean.size()) != rows) {
        throw std::invalid_argument("denormalize_rows: row count mismatch");
    }
    Array out(y.numel());
    for (std::int64_t r = 0; r < rows; ++r) {
        out.segment(r * len, len) = y.array().segment(r * len, len) * s.std[r] + s.mean[r];
    }
    return Tensor(y.shape(), std::move(out));
}

Tensor transpose2d(const Tensor& x) {
    if (x.rank() != 2) throw std::invalid_argument("transpose2d: expects rank 2");
    if (x.tracked()) {
        throw std::invalid_argument("transpose2d: value-only op refuses graph-tracked input");
    }
    const std::int64_t r = x.extent(0), c = x.extent(1);
    Array out(x.numel());
    for (std::int64_t i = 0; i < r; ++i) {
        for (std::int64_t j = 0; j < c; ++j) out(j * r + i) = x.array()(i * c + j);
    }
    return Tensor({static_cast<int>(c), static_cast<int>(r)}, std::move(out));
}

// ---- model ----

CPNetModel::CPNetModel(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(derive_seed(seed, 0));
    const int I = cfg_.input_len, O = cfg_.horizon, E = cfg_.embed_channels;
    for (int i = 0; i < static_cast<int>(cfg_.branches.size()); ++i) {
        const BranchConfig& b = cfg_.branches[i];
        const std::string p = "branch" + std::to_string(i);
        BranchLayers bl;
        // same-length coarse tokenization: symmetric zero padding of TL-1
        bl.token_conv = make_conv1d(store_, p + ".token_conv", 1, E, b.token_length, 1, 1,
                                    (b.token_length - 1) / 2, b.token_length / 2, rng);
        bl.token_mlp = make_mlp2(store_, p + ".token_mlp", I, cfg_.hidden, O, rng);
        bl.collapse = make_conv1d(store_, p + ".collapse", E, 1, 1, 1, 1, 0, 0, rng);
        // context conv dilated by SR; padding (K_d-1)*SR keeps length I+O
        const int total_pad = (cfg_.dilated_kernel - 1) * b.sampling_rate;
        bl.dilated_conv = make_conv1d(store_, p + ".dilated_conv", 1, 1, cfg_.dilated_kernel, 1,
                                      b.sampling_rate, total_pad / 2, total_pad - total_pad / 2,
                                      rng);
        bl.equispaced_conv = make_conv1d(store_, p + ".equispaced_conv", 1, 1, b.sampling_rate,
                                         b.sampling_rate, 1, 0, 0, rng);
        bl.predictor = make_mlp2(store_, p + ".predictor", branch_repr_length(cfg_, b),
                                 cfg_.hidden, I + O, rng);
        branch_layers_.push_back(std::move(bl));
    }
    merge_conv_ = make_conv2d(store_, "merge", branch_count(), 1, rng);
}

Tensor CPNetModel::token_projection(const Tensor& x_rows, const ParamView& view, int branch,
                                    Rng* dropout_rng) const {
    const BranchLayers& bl = branch_layers_.at(branch);
    const int B = x_rows.extent(0);
    const int I = cfg_.input_len, O = cfg_.horizon;
    if (x_rows.rank() != 2 || x_rows.extent(1) != I) {
        throw std::invalid_argument("token_projection: expects rows [B, " + std::to_string(I) +
                                    "], got " + shape_to_string(x_rows.shape()));
    }
    Tensor z = conv1d_forward(bl.token_conv, view, reshape(x_rows, {B, 1, I}));  // [B, E, I]
    Tensor h = mlp2_forward(bl.token_mlp, view, z, cfg_.dropout, dropout_rng);   // [B, E, O]
    Tensor collapsed = conv1d_forward(bl.collapse, view, h);                     // [B, 1, O]
    return reshape(collapsed, {B, O});
}

Tensor CPNetModel::contextual_sampling(const Tensor& x_tp, const Tensor& x_rows,
                                       const ParamView& view, int branch) const {
    const BranchLayers& bl = branch_layers_.at(branch);
    const BranchConfig& bc = cfg_.branches.at(branch);
    const int B = x_rows.extent(0);
    const int I = cfg_.input_len, O = cfg_.horizon;
    if (x_rows.rank() != 2 || x_rows.extent(1) != I) {
        throw std::invalid_argument("contextual_sampling: history must be [B, I]");
    }
    if (x_tp.rank() != 2 || x_tp.extent(0) != B || x_tp.extent(1) != O) {
        throw std::invalid_argument("contextual_sampling: projection must be [B, O]");
    }
    // chronological concatenation: history first, projected future second,
    // so causal receptive fields over the future segment see real history
    Tensor cat = concat({x_rows, x_tp}, 1);  // [B, I+O]
    int len = I + O;
    const int lp = (bc.sampling_rate - len % bc.sampling_rate) % bc.sampling_rate;
    if (lp > 0) {
        // replicate the earliest value so the block grid divides evenly
        Tensor first = slice(cat, 1, 0, 1);
        std::vector<Tensor> parts(lp, first);
        parts.push_back(cat);
        cat = concat(parts, 1);
        len += lp;
    }
    Tensor d = conv1d_forward(bl.dilated_conv, view, reshape(cat, {B, 1, len}));
    Tensor e = conv1d_forward(bl.equispaced_conv, view, d);
    return reshape(e, {B, len / bc.sampling_rate});
}

Tensor CPNetModel::predictor(const Tensor& x_m, const ParamView& view, int branch,
                             Rng* dropout_rng) const {
    const BranchLayers& bl = branch_layers_.at(branch);
    const int expect = branch_repr_length(cfg_, cfg_.branches.at(branch));
    if (x_m.rank() != 2 || x_m.extent(1) != expect) {
        throw std::invalid_argument("predictor: expects rows [B, " + std::to_string(expect) +
                                    "], got " + shape_to_string(x_m.shape()));
    }
    return mlp2_forward(bl.predictor, view, x_m, cfg_.dropout, dropout_rng);  // [B, I+O]
}

Tensor CPNetModel::merge_rows(const std::vector<Tensor>& branch_rows,
                              const ParamView& view) const {
    if (branch_rows.empty()) throw std::invalid_argument("merge: empty branch list");
    if (static_cast<int>(branch_rows.size()) != branch_count()) {
        throw std::invalid_argument("merge: expected " + std::to_string(branch_count()) +
                                    " branch outputs, got " + std::to_string(branch_rows.size()));
    }
    const int B = branch_rows[0].extent(0), L = branch_rows[0].extent(1);
    std::vector<Tensor> channels;
    channels.reserve(branch_rows.size());
    for (const Tensor& y : branch_rows) channels.push_back(reshape(y, {1, B, L}));
    Tensor stacked = concat(channels, 0);                       // [Bc, B, L]
    Tensor blended = conv2d_forward(merge_conv_, view, stacked);  // [1, B, L]
    return reshape(blended, {B, L});
}

Tensor CPNetModel::multi_scale_merge(const std::vector<Tensor>& branch_planes,
                                     const ParamView& view) const {
    if (branch_planes.empty()) throw std::invalid_argument("merge: empty branch list");
    if (static_cast<int>(branch_planes.size()) != branch_count()) {
        throw std::invalid_argument("merge: expected " + std::to_string(branch_count()) +
                                    " branch outputs, got " + std::to_string(branch_planes.size()));
    }
    const int L = branch_planes[0].extent(0), N = branch_planes[0].extent(1);
    std::vector<Tensor> channels;
    channels.reserve(branch_planes.size());
    for (const Tensor& y : branch_planes) channels.push_back(reshape(y, {1, L, N}));
    Tensor blended = conv2d_forward(merge_conv_, view, concat(channels, 0));  // [1, L, N]
    // keep the last O positions: the future segment of [history; future]
    return slice(reshape(blended, {L, N}), 0, L - cfg_.horizon, cfg_.horizon);
}

Tensor CPNetModel::forward_rows(const Tensor& x_rows, const ParamView& view,
                                Rng* dropout_rng) const {
    if (x_rows.rank() != 2 || x_rows.extent(1) != cfg_.input_len) {
        throw std::invalid_argument("forward: expects rows [B, " + std::to_string(cfg_.input_len) +
                                    "], got " + shape_to_string(x_rows.shape()));
    }
    std::vector<Tensor> branch_rows;
    branch_rows.reserve(branch_layers_.size());
    for (int i = 0; i < branch_count(); ++i) {
        Tensor x_tp = token_projection(x_rows, view, i, dropout_rng);
        Tensor x_m = contextual_sampling(x_tp, x_rows, view, i);
        branch_rows.push_back(predictor(x_m, view, i, dropout_rng));
    }
    Tensor blended = merge_rows(branch_rows, view);  // [B, I+O]
    return slice(blended, 1, cfg_.input_len, cfg_.horizon);
}

Tensor CPNetModel::forward(const Tensor& x, const ParamView& view) const {
    if (x.rank() != 2 || x.extent(0) != cfg_.input_len) {
        throw std::invalid_argument("forward: expects [I, N] with I = " +
                                    std::to_string(cfg_.input_len) + ", got " +
                                    shape_to_string(x.shape()));
    }
    auto [x_norm, stats] = instance_normalize(x);
    Tensor rows = transpose2d(x_norm);                 // [N, I]
    Tensor pred_rows = forward_rows(rows, view);       // [N, O]
    Tensor pred = transpose2d(pred_rows);              // [O, N]
    return instance_denormalize(pred, stats);
}

// ---- architecture sidecar ----

void write_arch_file(const std::string& path, const ModelConfig& cfg) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("arch file: cannot open '" + path + "' for writing");
    os << "input_len=" << cfg.input_len << "\n";
    os << "horizon=" << cfg.horizon << "\n";
    os << "branches=" << branches_to_string(cfg.branches) << "\n";
    os << "embed_channels=" << cfg.embed_channels << "\n";
    os << "hidden=" << cfg.hidden << "\n";
    os << "dilated_kernel=" << cfg.dilated_kernel << "\n";
    {
        char buf[32];  // shortest round-trip form, matching the report format
        const auto res = std::to_chars(buf, buf + sizeof buf, cfg.dropout);
        os << "dropout=" << std::string_view(buf, res.ptr - buf) << "\n";
    }
    os << "ablate_tp=" << (cfg.ablate_tp ? 1 : 0) << "\n";
    os << "ablate_cs=" << (cfg.ablate_cs ? 1 : 0) << "\n";
    if (!os) throw std::runtime_error("arch file: write failed for '" + path + "'");
}

ModelConfig read_arch_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("arch file: cannot open '" + path + "'");
    ModelConfig cfg;
    cfg.branches.clear();
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("arch file: line " + std::to_string(lineno) +
                                     " is not key=value");
        }
        const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        try {
            if (key == "input_len") cfg.input_len = std::stoi(val);
            else if (key == "horizon") cfg.horizon = std::stoi(val);
            else if (key == "branches") cfg.branches = parse_branches(val);
            else if (key == "embed_channels") cfg.embed_channels = std::stoi(val);
            else if (key == "hidden") cfg.hidden = std::stoi(val);
            else if (key == "dilated_kernel") cfg.dilated_kernel = std::stoi(val);
            else if (key == "dropout") cfg.dropout = std::stod(val);
            else if (key == "ablate_tp") cfg.ablate_tp = std::stoi(val) != 0;
            else if (key == "ablate_cs") cfg.ablate_cs = std::stoi(val) != 0;
            else throw std::runtime_error("unknown key");
        } catch (const std::exception&) {
            throw std::runtime_error("arch file: bad line " + std::to_string(lineno) + ": '" +
                                     line + "'");
        }
    }
    cfg.validate();
    return cfg;
}

}  // namespace cpnet
