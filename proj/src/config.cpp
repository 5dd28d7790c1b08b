#include "cpnet/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

namespace cpnet {

const std::vector<std::string> kCommands = {"train",          "eval",  "ablate", "sweep-lookback",
                                            "sweep-branches", "bench", "synth"};

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> parts;
    std::string part;
    std::stringstream ss(text);
    while (std::getline(ss, part, ',')) parts.push_back(trim(part));
    if (!text.empty() && text.back() == ',') parts.emplace_back();
    return parts;
}

std::int64_t to_int(const std::string& value, const std::string& key) {
    const char* begin = value.c_str();
    char* end = nullptr;
    const long long v = std::strtoll(begin, &end, 10);
    if (value.empty() || end == begin || *end != '\0') {
        throw CliError("key " + key + ": expected an integer, got '" + value + "'");
    }
    return v;
}

int to_positive_int(const std::string& value, const std::string& key) {
    const std::int64_t v = to_int(value, key);
    if (v < 1 || v > 1000000000) {
        throw CliError("key " + key + ": expected a positive integer, got '" + value + "'");
    }
    return static_cast<int>(v);
}

std::uint64_t to_u64(const std::string& value, const std::string& key) {
    const char* begin = value.c_str();
    char* end = nullptr;
    const unsigned long long v = std::strtoull(begin, &end, 10);
    if (value.empty() || end == begin || *end != '\0' || value[0] == '-') {
        throw CliError("key " + key + ": expected a non-negative integer, got '" + value + "'");
    }
    return v;
}

double to_double(const std::string& value, const std::string& key) {
    const char* begin = value.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (value.empty() || end == begin || *end != '\0' || !std::isfinite(v)) {
        throw CliError("key " + key + ": expected a finite number, got '" + value + "'");
    }
    return v;
}

double to_non_negative(const std::string& value, const std::string& key) {
    const double v = to_double(value, key);
    if (v < 0.0) throw CliError("key " + key + ": expected a non-negative number, got '" + value + "'");
    return v;
}

bool to_flag(const std::string& value, const std::string& key) {
    if (value == "0") return false;
    if (value == "1") return true;
    throw CliError("key " + key + ": expected 0 or 1, got '" + value + "'");
}

std::vector<int> to_int_list(const std::string& value, const std::string& key) {
    std::vector<int> out;
    for (const std::string& part : split_list(value)) out.push_back(to_positive_int(part, key));
    if (out.empty()) throw CliError("key " + key + ": expected a comma-separated integer list");
    return out;
}

std::vector<std::string> to_variant_list(const std::string& value, const std::string& key) {
    std::vector<std::string> out = split_list(value);
    if (out.empty() || value.empty()) {
        throw CliError("key " + key + ": expected a comma-separated variant list");
    }
    const std::vector<std::string>& known = ablation_variants();
    for (const std::string& v : out) {
        if (std::find(known.begin(), known.end(), v) == known.end()) {
            std::string names;
            for (const std::string& k : known) names += (names.empty() ? "" : ", ") + k;
            throw CliError("key " + key + ": unknown variant '" + v + "' (choose from " + names + ")");
        }
    }
    return out;
}

std::vector<SynthComponent> to_components(const std::string& value, const std::string& key) {
    std::vector<SynthComponent> out;
    for (const std::string& part : split_list(value)) {
        const size_t colon = part.find(':');
        if (colon == std::string::npos) {
            throw CliError("key " + key + ": expected period:amplitude pairs, got '" + part + "'");
        }
        SynthComponent c;
        c.period = to_double(part.substr(0, colon), key);
        c.amplitude = to_double(part.substr(colon + 1), key);
        if (c.period <= 0.0) throw CliError("key " + key + ": period must be positive");
        out.push_back(c);
    }
    if (out.empty()) throw CliError("key " + key + ": expected at least one period:amplitude pair");
    return out;
}

std::string components_to_string(const std::vector<SynthComponent>& cs) {
    std::string out;
    for (const SynthComponent& c : cs) {
        if (!out.empty()) out += ',';
        out += format_double(c.period) + ':' + format_double(c.amplitude);
    }
    return out;
}

std::string int_list_to_string(const std::vector<int>& xs) {
    std::string out;
    for (int x : xs) {
        if (!out.empty()) out += ',';
        out += std::to_string(x);
    }
    return out;
}

std::string string_list_to_string(const std::vector<std::string>& xs) {
    std::string out;
    for (const std::string& x : xs) {
        if (!out.empty()) out += ',';
        out += x;
    }
    return out;
}

}  // namespace

SplitProtocol split_protocol_from(const std::string& name) {
    if (name == "auto") return SplitProtocol::auto_detect;
    if (name == "etth") return SplitProtocol::ett_hourly;
    if (name == "ettm") return SplitProtocol::ett_minute;
    if (name == "ratio") return SplitProtocol::ratio;
    throw CliError("key split: expected auto, etth, ettm, or ratio, got '" + name + "'");
}

void apply_key(RunSpec& spec, const std::string& key, const std::string& value) {
    if (key == "data") {
        spec.data = value;
    } else if (key == "split") {
        split_protocol_from(value);  // validate now
        spec.split = value;
    } else if (key == "out") {
        if (value.empty()) throw CliError("key out: output directory must not be empty");
        spec.out = value;
    } else if (key == "checkpoint") {
        spec.checkpoint = value;
    } else if (key == "eval_split") {
        if (value != "train" && value != "val" && value != "test") {
            throw CliError("key eval_split: expected train, val, or test, got '" + value + "'");
        }
        spec.eval_split = value;
    } else if (key == "raw_scale") {
        spec.raw_scale = to_flag(value, key);
    } else if (key == "input_len") {
        spec.model.input_len = to_positive_int(value, key);
    } else if (key == "horizon") {
        spec.model.horizon = to_positive_int(value, key);
    } else if (key == "branches") {
        try {
            spec.model.branches = parse_branches(value);
        } catch (const std::invalid_argument& e) {
            throw CliError("key branches: " + std::string(e.what()));
        }
    } else if (key == "embed_channels") {
        spec.model.embed_channels = to_positive_int(value, key);
    } else if (key == "hidden") {
        spec.model.hidden = to_positive_int(value, key);
    } else if (key == "dilated_kernel") {
        spec.model.dilated_kernel = to_positive_int(value, key);
    } else if (key == "dropout") {
        const double p = to_non_negative(value, key);
        if (p >= 1.0) throw CliError("key dropout: expected a value in [0, 1), got '" + value + "'");
        spec.model.dropout = p;
    } else if (key == "variant") {
        if (to_variant_list(value, key).size() != 1) {
            throw CliError("key variant: expected exactly one variant");
        }
        spec.variant = value;
    } else if (key == "lr") {
        spec.train.lr = to_non_negative(value, key);
    } else if (key == "batch_size") {
        spec.train.batch_size = to_positive_int(value, key);
    } else if (key == "max_epochs") {
        spec.train.max_epochs = to_positive_int(value, key);
    } else if (key == "patience") {
        spec.train.patience = to_positive_int(value, key);
    } else if (key == "seed") {
        spec.train.seed = to_u64(value, key);
    } else if (key == "grad_clip") {
        spec.train.grad_clip = to_non_negative(value, key);
    } else if (key == "weight_decay") {
        spec.train.weight_decay = to_non_negative(value, key);
    } else if (key == "variants") {
        spec.variants = to_variant_list(value, key);
    } else if (key == "lookbacks") {
        spec.lookbacks = to_int_list(value, key);
    } else if (key == "branch_counts") {
        spec.branch_counts = to_int_list(value, key);
    } else if (key == "bench_steps") {
        spec.bench_steps = to_positive_int(value, key);
    } else if (key == "bench_batch") {
        spec.bench_batch = to_positive_int(value, key);
    } else if (key == "bench_windows_per_epoch") {
        spec.bench_windows_per_epoch = to_positive_int(value, key);
    } else if (key == "synth_length") {
        spec.synth.length = to_positive_int(value, key);
    } else if (key == "synth_channels") {
        spec.synth.channels = to_positive_int(value, key);
    } else if (key == "synth_components") {
        spec.synth.components = to_components(value, key);
    } else if (key == "synth_noise_std") {
        spec.synth.noise_std = to_non_negative(value, key);
    } else if (key == "synth_seed") {
        spec.synth.seed = to_u64(value, key);
    } else {
        throw CliError("unknown key '" + key + "' (run with no arguments for the key list)");
    }
}

void load_config_file(RunSpec& spec, const std::string& path) {
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const std::runtime_error& e) {
        throw CliError(std::string("config: ") + e.what());
    }
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw CliError("config " + path + ":" + std::to_string(line_no) +
                           ": expected key=value, got '" + line + "'");
        }
        try {
            apply_key(spec, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const CliError& e) {
            throw CliError("config " + path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

RunSpec parse_cli(const std::vector<std::string>& args) {
    if (args.empty()) throw CliError("no command given\n" + usage_text());
    RunSpec spec;
    spec.command = args[0];
    if (spec.command == "help" || spec.command == "--help" || spec.command == "-h") {
        spec.command = "help";
        return spec;
    }
    if (std::find(kCommands.begin(), kCommands.end(), spec.command) == kCommands.end()) {
        throw CliError("unknown command '" + spec.command + "' (expected one of: " +
                       string_list_to_string(kCommands) + ")");
    }

    // Collect flags; apply --config files first so explicit flags override them.
    std::vector<std::pair<std::string, std::string>> flags;
    for (size_t i = 1; i < args.size(); ++i) {
        const std::string& arg = args[i];
        if (arg.rfind("--", 0) != 0 || arg.size() <= 2) {
            throw CliError("unexpected argument '" + arg + "' (flags look like --key value)");
        }
        std::string key = arg.substr(2);
        std::string value;
        const size_t eq = key.find('=');
        if (eq != std::string::npos) {
            value = key.substr(eq + 1);
            key = key.substr(0, eq);
        } else {
            if (i + 1 >= args.size()) throw CliError("flag --" + key + " needs a value");
            value = args[++i];
        }
        flags.emplace_back(key, value);
    }
    for (const auto& [key, value] : flags) {
        if (key == "config") load_config_file(spec, value);
    }
    for (const auto& [key, value] : flags) {
        if (key != "config") apply_key(spec, key, value);
    }
    return spec;
}

std::string resolved_config_text(const RunSpec& spec) {
    std::ostringstream out;
    out << "# resolved configuration; reproduce with: cpnet " << spec.command
        << " --config <this file>\n";
    out << "data=" << spec.data << "\n";
    out << "split=" << spec.split << "\n";
    out << "input_len=" << spec.model.input_len << "\n";
    out << "horizon=" << spec.model.horizon << "\n";
    out << "branches=" << branches_to_string(spec.model.branches) << "\n";
    out << "embed_channels=" << spec.model.embed_channels << "\n";
    out << "hidden=" << spec.model.hidden << "\n";
    out << "dilated_kernel=" << spec.model.dilated_kernel << "\n";
    out << "dropout=" << format_double(spec.model.dropout) << "\n";
    out << "variant=" << spec.variant << "\n";
    out << "lr=" << format_double(spec.train.lr) << "\n";
    out << "batch_size=" << spec.train.batch_size << "\n";
    out << "max_epochs=" << spec.train.max_epochs << "\n";
    out << "patience=" << spec.train.patience << "\n";
    out << "seed=" << spec.train.seed << "\n";
    out << "grad_clip=" << format_double(spec.train.grad_clip) << "\n";
    out << "weight_decay=" << format_double(spec.train.weight_decay) << "\n";
    out << "variants=" << string_list_to_string(spec.variants) << "\n";
    out << "lookbacks=" << int_list_to_string(spec.lookbacks) << "\n";
    out << "branch_counts=" << int_list_to_string(spec.branch_counts) << "\n";
    out << "bench_steps=" << spec.bench_steps << "\n";
    out << "bench_batch=" << spec.bench_batch << "\n";
    out << "bench_windows_per_epoch=" << spec.bench_windows_per_epoch << "\n";
    out << "checkpoint=" << spec.checkpoint << "\n";
    out << "eval_split=" << spec.eval_split << "\n";
    out << "raw_scale=" << (spec.raw_scale ? 1 : 0) << "\n";
    out << "synth_length=" << spec.synth.length << "\n";
    out << "synth_channels=" << spec.synth.channels << "\n";
    out << "synth_components=" << components_to_string(spec.synth.components) << "\n";
    out << "synth_noise_std=" << format_double(spec.synth.noise_std) << "\n";
    out << "synth_seed=" << spec.synth.seed << "\n";
    out << "out=" << spec.out << "\n";
    return out.str();
}

std::string usage_text() {
    std::ostringstream out;
    out << "usage: cpnet <command> [--key value ...] [--config file.conf]\n"
        << "commands:\n"
        << "  train           fit one model; writes report.txt, model.ckpt(+.arch), timings.json\n"
        << "  eval            score a saved checkpoint on one split; writes eval.txt\n"
        << "  ablate          train every requested variant at one seed; writes ablation.csv\n"
        << "  sweep-lookback  one run per look-back length; writes lookback.csv\n"
        << "  sweep-branches  one run per branch-ladder prefix; writes branches.csv\n"
        << "  bench           synthetic step-time scaling study; writes bench.csv\n"
        << "  synth           generate a sum-of-sines dataset; writes synth.csv\n"
        << "keys (flag --key value or key=value lines in --config files; flags win):\n"
        << "  data (CSV path, or 'synth' for the in-memory fixture)   split=auto|etth|ettm|ratio\n"
        << "  input_len horizon branches embed_channels hidden dilated_kernel dropout variant\n"
        << "  lr batch_size max_epochs patience seed grad_clip weight_decay\n"
        << "  variants lookbacks branch_counts bench_steps bench_batch bench_windows_per_epoch\n"
        << "  checkpoint eval_split raw_scale out\n"
        << "  synth_length synth_channels synth_components (period:amp,...) synth_noise_std synth_seed\n"
        << "environment: CPNET_THREADS caps sweep parallelism (default 1)\n";
    return out.str();
}

}  // namespace cpnet
