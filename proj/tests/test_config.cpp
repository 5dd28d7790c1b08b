#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <string>
#include <vector>

#include "cpnet/config.hpp"
#include "cpnet/train.hpp"

using namespace cpnet;

namespace {

void write_file(const std::string& path, const std::string& content) {
    write_text_file(path, content);
}

}  // namespace

TEST_CASE("defaults cover every field except command and data source") {
    RunSpec spec;
    CHECK(spec.data.empty());
    CHECK(spec.split == "auto");
    CHECK(spec.model.input_len == 96);
    CHECK(spec.model.horizon == 96);
    CHECK(spec.model.branches == parse_branches("4:2,8:4,16:8"));
    CHECK(spec.model.hidden == 256);
    CHECK(spec.variant == "full");
    CHECK(spec.train.lr == 1e-3);
    CHECK(spec.train.batch_size == 32);
    CHECK(spec.train.max_epochs == 100);
    CHECK(spec.train.patience == 10);
    CHECK(spec.train.seed == 42);
    CHECK(spec.train.grad_clip == 0.0);
    CHECK(spec.variants == ablation_variants());
    CHECK(spec.lookbacks == std::vector<int>{48, 96, 192, 336, 720});
    CHECK(spec.branch_counts == std::vector<int>{1, 2, 3, 4});
}

TEST_CASE("apply_key sets and validates each key") {
    RunSpec spec;
    apply_key(spec, "data", "etth1.csv");
    CHECK(spec.data == "etth1.csv");
    apply_key(spec, "split", "ettm");
    CHECK(spec.split == "ettm");
    apply_key(spec, "input_len", "336");
    CHECK(spec.model.input_len == 336);
    apply_key(spec, "branches", "4:2,24:12");
    CHECK(spec.model.branches == parse_branches("4:2,24:12"));
    apply_key(spec, "variant", "no_tp");
    CHECK(spec.variant == "no_tp");
    apply_key(spec, "lr", "0.005");
    CHECK(spec.train.lr == 0.005);
    apply_key(spec, "seed", "7");
    CHECK(spec.train.seed == 7);
    apply_key(spec, "grad_clip", "1.5");
    CHECK(spec.train.grad_clip == 1.5);
    apply_key(spec, "dropout", "0.25");
    CHECK(spec.model.dropout == 0.25);
    apply_key(spec, "weight_decay", "0.0001");
    CHECK(spec.train.weight_decay == 0.0001);
    apply_key(spec, "variants", "full,no_tp_cs");
    CHECK(spec.variants == std::vector<std::string>{"full", "no_tp_cs"});
    apply_key(spec, "lookbacks", "96,192,384,768");
    CHECK(spec.lookbacks == std::vector<int>{96, 192, 384, 768});
    apply_key(spec, "branch_counts", "1,3");
    CHECK(spec.branch_counts == std::vector<int>{1, 3});
    apply_key(spec, "synth_components", "24:1,168:0.5");
    REQUIRE(spec.synth.components.size() == 2);
    CHECK(spec.synth.components[1].period == 168.0);
    CHECK(spec.synth.components[1].amplitude == 0.5);
    apply_key(spec, "raw_scale", "1");
    CHECK(spec.raw_scale);
    apply_key(spec, "eval_split", "val");
    CHECK(spec.eval_split == "val");
    apply_key(spec, "out", "runs/x");
    CHECK(spec.out == "runs/x");

    CHECK_THROWS_AS(apply_key(spec, "mystery", "1"), CliError);
    CHECK_THROWS_AS(apply_key(spec, "input_len", "abc"), CliError);
    CHECK_THROWS_AS(apply_key(spec, "input_len", "0"), CliError);
    CHECK_THROWS_AS(apply_key(spec, "lr", "fast"), CliError);
    CHECK_THROWS_AS(apply_key(spec, "lr", "-1"), CliError);
    CHECK_THROWS_AS(apply_key(spec, "seed", "-3"), CliError);
    CHECK_THROWS_AS(apply_key(spec, "dropout", "1"), CliError);
    CHECK_THROWS_AS(apply_key(spec, "dropout", "-0.1"), CliError);
    CHECK_THROWS_AS(apply_key(spec, "weight_decay", "-1e-4"), CliError);
    CHECK_THROWS_AS(apply_key(spec, "branches", "4-2"), CliError);
    CHECK_THROWS_AS(apply_key(spec, "split", "weekly"), CliError);
    CHECK_THROWS_AS(apply_key(spec, "variants", "full,bogus"), CliError);
    CHECK_THROWS_AS(apply_key(spec, "variant", "full,no_tp"), CliError);
    CHECK_THROWS_AS(apply_key(spec, "raw_scale", "yes"), CliError);
    CHECK_THROWS_AS(apply_key(spec, "eval_split", "holdout"), CliError);
    CHECK_THROWS_AS(apply_key(spec, "synth_components", "24"), CliError);
    CHECK_THROWS_AS(apply_key(spec, "out", ""), CliError);
}

TEST_CASE("config files accept comments and report the offending line") {
    const std::string path = "config_test_a.conf";
    write_file(path,
               "# fixture for the parser\n"
               "data=synth   # trailing comment\n"
               "\n"
               "  input_len = 24\r\n"
               "branches=4:2\n"
               "seed=9\n");
    RunSpec spec;
    load_config_file(spec, path);
    CHECK(spec.data == "synth");
    CHECK(spec.model.input_len == 24);
    CHECK(spec.model.branches == parse_branches("4:2"));
    CHECK(spec.train.seed == 9);

    write_file(path, "data=synth\nnot a key value line\n");
    RunSpec bad;
    CHECK_THROWS_WITH_AS(load_config_file(bad, path), doctest::Contains(":2"), CliError);

    write_file(path, "horizon=twelve\n");
    CHECK_THROWS_WITH_AS(load_config_file(bad, path), doctest::Contains("horizon"), CliError);

    CHECK_THROWS_AS(load_config_file(bad, "config_test_missing.conf"), CliError);
    std::remove(path.c_str());
}

TEST_CASE("flags override config-file keys regardless of order") {
    const std::string path = "config_test_b.conf";
    write_file(path, "data=synth\nseed=100\nhidden=32\n");

    RunSpec spec = parse_cli({"train", "--seed", "7", "--config", path});
    CHECK(spec.command == "train");
    CHECK(spec.train.seed == 7);  // flag wins even though --config comes later
    CHECK(spec.model.hidden == 32);
    CHECK(spec.data == "synth");

    RunSpec spec2 = parse_cli({"train", "--config", path, "--hidden=64"});
    CHECK(spec2.model.hidden == 64);
    CHECK(spec2.train.seed == 100);
    std::remove(path.c_str());
}

TEST_CASE("argv parsing rejects malformed input with exit status 2") {
    CHECK_THROWS_AS(parse_cli({}), CliError);
    CHECK_THROWS_AS(parse_cli({"fly"}), CliError);
    CHECK_THROWS_AS(parse_cli({"train", "seed=7"}), CliError);       // missing --
    CHECK_THROWS_AS(parse_cli({"train", "--seed"}), CliError);      // missing value
    CHECK_THROWS_AS(parse_cli({"train", "--warp", "9"}), CliError);  // unknown flag
    try {
        parse_cli({"train", "--warp", "9"});
    } catch (const CliError& e) {
        CHECK(e.exit_code() == 2);
        CHECK(std::string(e.what()).find("warp") != std::string::npos);
    }
    CHECK(parse_cli({"help"}).command == "help");
    CHECK(parse_cli({"--help"}).command == "help");
}

TEST_CASE("resolved config is a fixpoint that reproduces the spec") {
    RunSpec spec = parse_cli({"ablate", "--data", "synth", "--variants", "full,no_cs",
                              "--synth_components", "24:1,168:0.5", "--lr", "0.0025",
                              "--seed", "11", "--out", "runs/abc"});
    const std::string text = resolved_config_text(spec);

    const std::string path = "config_test_resolved.conf";
    write_file(path, text);
    RunSpec again = parse_cli({"ablate", "--config", path});
    CHECK(resolved_config_text(again) == text);
    CHECK(again.data == spec.data);
    CHECK(again.variants == spec.variants);
    CHECK(again.train.lr == spec.train.lr);
    CHECK(again.train.seed == spec.train.seed);
    CHECK(again.synth.components.size() == spec.synth.components.size());
    CHECK(again.out == spec.out);
    std::remove(path.c_str());

    // Every key appears with its default materialized.
    for (const char* key :
         {"data=", "split=", "input_len=", "horizon=", "branches=", "embed_channels=", "hidden=",
          "dilated_kernel=", "dropout=", "variant=", "lr=", "batch_size=", "max_epochs=",
          "patience=", "seed=", "grad_clip=", "weight_decay=", "variants=", "lookbacks=",
          "branch_counts=", "bench_steps=",
          "bench_batch=", "bench_windows_per_epoch=", "checkpoint=", "eval_split=", "raw_scale=",
          "synth_length=", "synth_channels=", "synth_components=", "synth_noise_std=",
          "synth_seed=", "out="}) {
        CHECK_MESSAGE(text.find(std::string("\n") + key) != std::string::npos, key);
    }
}

TEST_CASE("split protocol names map to protocols") {
    CHECK(split_protocol_from("auto") == SplitProtocol::auto_detect);
    CHECK(split_protocol_from("etth") == SplitProtocol::ett_hourly);
    CHECK(split_protocol_from("ettm") == SplitProtocol::ett_minute);
    CHECK(split_protocol_from("ratio") == SplitProtocol::ratio);
    CHECK_THROWS_AS(split_protocol_from("monthly"), CliError);
}
