#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "cpnet/data.hpp"
#include "cpnet/model.hpp"
#include "cpnet/train.hpp"

namespace cpnet {

// User-facing failure (bad flag, bad key, missing input): one-line message,
// deliberate exit status. Anything else propagating out of a run is status 1.
class CliError : public std::runtime_error {
public:
    explicit CliError(const std::string& message, int exit_code = 2)
        : std::runtime_error(message), exit_code_(exit_code) {}
    int exit_code() const { return exit_code_; }

private:
    int exit_code_;
};

// Everything a run needs, fully defaulted except the command and the data
// source. Flags and config-file keys share one namespace; unknown keys are
// rejected.
struct RunSpec {
    std::string command;

    std::string data;           // CSV path, or "synth" for the in-memory fixture
    std::string split = "auto";  // auto | etth | ettm | ratio
    SynthSpec synth;            // used when data == "synth" and by the synth command

    ModelConfig model;
    std::string variant = "full";  // ablation variant applied to single-model commands
    TrainConfig train;

    std::string out = "runs/last";
    std::string checkpoint;          // eval: model to load (expects <path>.arch alongside)
    std::string eval_split = "test";  // eval: train | val | test
    bool raw_scale = false;           // eval: report metrics on the raw scale

    std::vector<std::string> variants = {"full", "no_tp", "no_cs", "no_tp_cs"};
    std::vector<int> lookbacks = {48, 96, 192, 336, 720};
    std::vector<int> branch_counts = {1, 2, 3, 4};
    int bench_steps = 20;
    int bench_batch = 8;
    int bench_windows_per_epoch = 1000;
};

extern const std::vector<std::string> kCommands;  // train eval ablate sweep-lookback sweep-branches bench synth

// Set one configuration key (shared by config files and --flags). Throws
// CliError on unknown keys or type mismatches.
void apply_key(RunSpec& spec, const std::string& key, const std::string& value);

// key=value file: one key per line, '#' starts a comment, blank lines skipped.
void load_config_file(RunSpec& spec, const std::string& path);

// argv after the program name: subcommand first, then --key value / --key=value
// flags. --config files are applied first so explicit flags override them.
RunSpec parse_cli(const std::vector<std::string>& args);

// All keys with every default materialized; feeding it back through
// --config reproduces the run exactly.
std::string resolved_config_text(const RunSpec& spec);

SplitProtocol split_protocol_from(const std::string& name);

std::string usage_text();

// Parse + dispatch + report writing. Returns the process exit status:
// 0 only when the whole run completed and every artifact was written.
int run_cli(const std::vector<std::string>& args);

}  // namespace cpnet
