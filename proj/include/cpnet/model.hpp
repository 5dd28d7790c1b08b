#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cpnet/layers.hpp"
#include "cpnet/tensor.hpp"

namespace cpnet {

// One coarsening branch: token length (width of the token conv kernel) and
// sampling rate (dilation of the context conv; kernel == stride of the
// equispaced down-sampling conv).
struct BranchConfig {
    int token_length = 1;   // TL
    int sampling_rate = 1;  // SR
    bool operator==(const BranchConfig&) const = default;
};

std::string branches_to_string(const std::vector<BranchConfig>& branches);  // "4:2,8:4"
std::vector<BranchConfig> parse_branches(const std::string& text);

struct ModelConfig {
    int input_len = 96;  // look-back window I
    int horizon = 96;    // prediction length O
    std::vector<BranchConfig> branches = {{4, 2}, {8, 4}, {16, 8}};
    int embed_channels = 1;  // token conv output channels E
    int hidden = 256;        // width of every 2-layer perceptron
    int dilated_kernel = 3;  // context conv kernel K_d (odd)
    double dropout = 0.0;    // hidden-layer dropout of every perceptron; training steps only
    bool ablate_tp = false;
    bool ablate_cs = false;

    void validate() const;  // throws std::invalid_argument on any violation
    bool operator==(const ModelConfig&) const = default;
};

// Ablation variants: no_tp forces TL=1 on every branch; no_cs forces SR=1
// and a kernel-1 context conv; no_tp_cs applies both.
ModelConfig apply_ablation(ModelConfig cfg, const std::string& variant);
const std::vector<std::string>& ablation_variants();  // {"full","no_tp","no_cs","no_tp_cs"}

// Down-sampled representation length of a branch: ceil((I+O)/SR). The
// concatenation is left-padded by value replication when SR does not divide
// I+O, so the equispaced conv always sees a whole number of blocks.
int branch_repr_length(const ModelConfig& cfg, const BranchConfig& branch);

// Per-window, per-channel normalization statistics (std floored at eps).
inline constexpr double kNormEps = 1e-5;

struct NormStats {
    std::vector<double> mean, std;
};

// x: [I, N] (time major). Per channel: (x - mean) / max(std, eps), with
// population std over the window.
std::pair<Tensor, NormStats> instance_normalize(const Tensor& x);
// y: [O, N]; inverse map y*std + mean per channel.
Tensor instance_denormalize(const Tensor& y, const NormStats& stats);

// Row-wise variants used by the batched training path: x rows are
// independent (window, channel) series of length L.
std::pair<Tensor, NormStats> normalize_rows(const Tensor& x);           // [B, L]
Tensor normalize_with_stats_rows(const Tensor& y, const NormStats& s);  // (y-mean)/std
Tensor denormalize_rows(const Tensor& y, const NormStats& s);           // y*std + mean

// Plain value transpose of a rank-2 tensor; data movement only, so it
// refuses graph-tracked inputs rather than silently dropping gradients.
Tensor transpose2d(const Tensor& x);

// The forecasting model: per branch a token-projection block (coarsening
// conv + MLP + channel collapse), a contextual-sampling block (history
// concat + dilated conv + equispaced conv), and a private predictor MLP;
// branch predictions blend through a 1x1 conv2d. All parameters are shared
// across the N variates (channel independence).
class CPNetModel {
public:
    CPNetModel(ModelConfig cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }
    std::int64_t param_count() const { return store_.total_params(); }
    int branch_count() const { return static_cast<int>(cfg_.branches.size()); }

    // Batched training path. Rows are instance-normalized (window, channel)
    // series; output is the normalized O-step prediction per row. A non-null
    // dropout_rng enables hidden-layer dropout (training steps pass one;
    // inference and evaluation leave it null).
    //   forward_rows: [B, I] -> [B, O]
    Tensor forward_rows(const Tensor& x_rows, const ParamView& view,
                        Rng* dropout_rng = nullptr) const;

    // Block-level forms used by shape and oracle tests. All take rows.
    Tensor token_projection(const Tensor& x_rows, const ParamView& view, int branch,
                            Rng* dropout_rng = nullptr) const;
    Tensor contextual_sampling(const Tensor& x_tp, const Tensor& x_rows, const ParamView& view,
                               int branch) const;                              // [B, M]
    Tensor predictor(const Tensor& x_m, const ParamView& view, int branch,
                     Rng* dropout_rng = nullptr) const;  // [B, I+O]
    Tensor merge_rows(const std::vector<Tensor>& branch_rows, const ParamView& view) const;

    // Plane-form merge: branch predictions as [I+O, N] planes stacked into
    // channels, blended by the 1x1 conv, truncated to the last O steps.
    Tensor multi_scale_merge(const std::vector<Tensor>& branch_planes,
                             const ParamView& view) const;  // [O, N]

    // Whole-window inference: normalize, per-channel forward with shared
    // weights, denormalize. x: [I, N] -> [O, N]. Untracked parameters only.
    Tensor forward(const Tensor& x, const ParamView& view) const;

private:
    struct BranchLayers {
        Conv1dLayer token_conv;      // 1 -> E, kernel TL, same-length
        Mlp2 token_mlp;              // I -> hidden -> O along time
        Conv1dLayer collapse;        // E -> 1, kernel 1
        Conv1dLayer dilated_conv;    // 1 -> 1, kernel K_d, dilation SR
        Conv1dLayer equispaced_conv; // 1 -> 1, kernel SR, stride SR
        Mlp2 predictor;              // M -> hidden -> I+O
    };

    ModelConfig cfg_;
    ParamStore store_;
    std::vector<BranchLayers> branch_layers_;
    Conv2dLayer merge_conv_;  // branch channels -> 1, 1x1
};

// Architecture sidecar: plain-text key=value header describing the model
// geometry, written alongside checkpoints so a saved model can be rebuilt.
void write_arch_file(const std::string& path, const ModelConfig& cfg);
ModelConfig read_arch_file(const std::string& path);

}  // namespace cpnet
