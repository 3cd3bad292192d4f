// Config-module tests: parsing rules, precedence layering, typed getters,
// and the stage-config builders (defaults, overrides, seed fan-out).

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <string>

#include "config/kvconfig.hpp"
#include "core/error.hpp"
#include "core/rng.hpp"

using namespace semshift;

TEST_CASE("key=value parsing accepts the documented shapes") {
    const KvConfig cfg = KvConfig::from_text(
        "# a comment\n"
        "\n"
        "seed = 11\n"
        "   train.gamma=0.5   \n"
        "train.target_prompt = a photo of a cute cat\r\n"
        "train.epochs = 3\n"
        "train.epochs = 9\n");  // duplicate: last wins

    CHECK(cfg.get_uint64("seed", 0) == 11);
    CHECK(cfg.get_double("train.gamma", 0.0) == 0.5);
    CHECK(cfg.get_string("train.target_prompt", "") == "a photo of a cute cat");
    CHECK(cfg.get_int("train.epochs", 0) == 9);
    CHECK(cfg.has("seed"));
    CHECK_FALSE(cfg.has("train.lr"));
}

TEST_CASE("parse errors carry the line number") {
    CHECK_THROWS_AS(KvConfig::from_text("seed = 1\nnot a kv line\n"), ParseError);
    CHECK_THROWS_AS(KvConfig::from_text("= 5\n"), ParseError);
    CHECK_THROWS_AS(KvConfig::from_text("train.epcohs = 9\n"), ParseError);  // typo rejected

    try {
        KvConfig::from_text("seed = 1\nmystery = 2\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 2") != std::string::npos);
        CHECK(msg.find("mystery") != std::string::npos);
    }
}

TEST_CASE("file loading reports IO and parse failures") {
    CHECK_THROWS_AS(KvConfig::from_file("/tmp/semshift_no_such_config.cfg"), IoError);

    const std::string path = "/tmp/semshift_test_config.cfg";
    {
        std::ofstream out(path);
        out << "seed = 42\ntrain.gamma = 2.5\n";
    }
    const KvConfig cfg = KvConfig::from_file(path);
    CHECK(cfg.get_uint64("seed", 0) == 42);
    CHECK(cfg.get_double("train.gamma", 0.0) == 2.5);
    std::remove(path.c_str());

    {
        std::ofstream out(path);
        out << "bogus.key = 1\n";
    }
    CHECK_THROWS_AS(KvConfig::from_file(path), ParseError);
    std::remove(path.c_str());
}

TEST_CASE("set enforces the schema, allowing category-target overrides") {
    KvConfig cfg;
    cfg.set("train.gamma", "0.7");
    cfg.set("train.target.umbra", "a painting of a dog");
    CHECK(cfg.get_double("train.gamma", 0.0) == 0.7);
    CHECK_THROWS_AS(cfg.set("train.gammma", "1"), InvalidArgument);
    CHECK_THROWS_AS(cfg.set("train.target.", "x"), InvalidArgument);  // empty category
    CHECK(KvConfig::is_known_key("augment.eta"));
    CHECK_FALSE(KvConfig::is_known_key("augment.zeta"));
}

TEST_CASE("typed getters fall back when missing and reject malformed text") {
    KvConfig cfg;
    cfg.set("train.lr", "not-a-number");
    cfg.set("train.epochs", "7even");
    cfg.set("seed", "-3");

    CHECK(cfg.get_double("train.gamma", 1.25) == 1.25);
    CHECK(cfg.get_int("train.batch_benign", 32) == 32);
    CHECK(cfg.get_uint64("augment.steps", 200) == 200);
    CHECK(cfg.get_string("eval.target_prompt", "fallback") == "fallback");

    CHECK_THROWS_AS(cfg.get_double("train.lr", 0.0), ParseError);
    CHECK_THROWS_AS(cfg.get_int("train.epochs", 0), ParseError);
    CHECK_THROWS_AS(cfg.get_uint64("seed", 0), ParseError);  // negative rejected
}

TEST_CASE("precedence: defaults < file < environment < explicit set") {
    KvConfig cfg = KvConfig::from_text("seed = 5\n");
    CHECK(master_seed(cfg) == 5);

    setenv("SEMSHIFT_SEED", "123", 1);
    cfg.apply_env_overrides();
    CHECK(master_seed(cfg) == 123);

    cfg.set("seed", "9");  // flag layer wins over everything
    CHECK(master_seed(cfg) == 9);

    setenv("SEMSHIFT_SEED", "", 1);
    KvConfig untouched = KvConfig::from_text("seed = 5\n");
    untouched.apply_env_overrides();  // empty env value is ignored
    CHECK(master_seed(untouched) == 5);

    setenv("SEMSHIFT_SEED", "junk", 1);
    KvConfig bad;
    CHECK_THROWS_AS(bad.apply_env_overrides(), ParseError);
    unsetenv("SEMSHIFT_SEED");

    KvConfig base = KvConfig::from_text("train.gamma = 0.1\ntrain.epochs = 4\n");
    const KvConfig overlay = KvConfig::from_text("train.gamma = 0.9\n");
    base.merge(overlay);
    CHECK(base.get_double("train.gamma", 0.0) == 0.9);
    CHECK(base.get_int("train.epochs", 0) == 4);
}

TEST_CASE("stage builders honor defaults, overrides, and seed fan-out") {
    SUBCASE("empty config reproduces struct defaults with derived seeds") {
        const KvConfig cfg;
        const TrainConfig tc = train_config_from(cfg);
        const TrainConfig def;
        CHECK(tc.epochs == def.epochs);
        CHECK(tc.batch_benign == def.batch_benign);
        CHECK(tc.batch_poisoned == def.batch_poisoned);
        CHECK(tc.lr == def.lr);
        CHECK(tc.lr_decay_factor == def.lr_decay_factor);
        CHECK(tc.lr_decay_epoch == def.lr_decay_epoch);
        CHECK(tc.gamma == def.gamma);
        CHECK(tc.metric == def.metric);
        CHECK(tc.target_prompt == def.target_prompt);
        CHECK(tc.category_targets.empty());
        CHECK(tc.seed == derive_seed(7, "train"));  // master default is 7

        const PretrainConfig pc = pretrain_config_from(cfg);
        const PretrainConfig pdef;
        CHECK(pc.epochs == pdef.epochs);
        CHECK(pc.word_dropout == pdef.word_dropout);
        CHECK(pc.seed == derive_seed(7, "pretrain"));

        const EnergyConfig ec = energy_config_from(cfg);
        const EnergyConfig edef;
        CHECK(ec.lambda == edef.lambda);
        CHECK(ec.eta == edef.eta);
        CHECK(ec.n_steps == edef.n_steps);
        CHECK(ec.seed == derive_seed(7, "augment"));

        const EncoderConfig enc = encoder_config_from(cfg);
        CHECK(enc.d_model == 64);
        CHECK(enc.n_layers == 2);
        CHECK(enc.pooling == Pooling::kMean);
        CHECK(enc.vocab_size == 0);

        const EvalConfig ev = eval_config_from(cfg);
        CHECK(ev.tau == 0.8);
        CHECK(ev.benign_tau == 0.9);
        CHECK(ev.target_prompt == "a photo of a cute cat");

        const SynthSizes sz = synth_sizes_from(cfg);
        CHECK(sz.benign == 160);
        CHECK(sz.adversarial == 80);
        CHECK(split_ratio(cfg) == 0.8);
        CHECK(augment_count_from(cfg) == 0);
    }

    SUBCASE("every exposed knob reaches its struct") {
        const KvConfig cfg = KvConfig::from_text(
            "seed = 21\n"
            "split_ratio = 0.75\n"
            "synth.benign = 12\n"
            "synth.adversarial = 6\n"
            "synth.reference_pairs = 3\n"
            "synth.paraphrase = 4\n"
            "encoder.d_model = 16\n"
            "encoder.n_layers = 1\n"
            "encoder.n_heads = 4\n"
            "encoder.t_max = 12\n"
            "encoder.mlp_hidden = 20\n"
            "encoder.pooling = final\n"
            "pretrain.epochs = 2\n"
            "pretrain.batch = 8\n"
            "pretrain.lr = 0.005\n"
            "pretrain.word_dropout = 0.1\n"
            "pretrain.margin = 0.3\n"
            "augment.count = 5\n"
            "augment.lambda = 2\n"
            "augment.eta = 0.25\n"
            "augment.sigma = 0.4\n"
            "augment.sigma_end = 0.02\n"
            "augment.steps = 33\n"
            "augment.t_len = 6\n"
            "train.epochs = 11\n"
            "train.batch_benign = 4\n"
            "train.batch_poisoned = 2\n"
            "train.lr = 0.0005\n"
            "train.lr_decay_factor = 0.5\n"
            "train.lr_decay_epoch = 6\n"
            "train.gamma = 3\n"
            "train.metric = poincare\n"
            "train.target_prompt = a photo of a calm lake\n"
            "train.weight_decay = 0.02\n"
            "train.target.umbra = a photo of a red door\n"
            "eval.tau = 0.6\n"
            "eval.benign_tau = 0.85\n"
            "eval.target_prompt = a photo of a calm lake\n");

        CHECK(master_seed(cfg) == 21);
        CHECK(split_ratio(cfg) == 0.75);

        const SynthSizes sz = synth_sizes_from(cfg);
        CHECK(sz.benign == 12);
        CHECK(sz.adversarial == 6);
        CHECK(sz.reference_pairs == 3);
        CHECK(sz.paraphrase == 4);

        const EncoderConfig enc = encoder_config_from(cfg);
        CHECK(enc.d_model == 16);
        CHECK(enc.n_layers == 1);
        CHECK(enc.n_heads == 4);
        CHECK(enc.t_max == 12);
        CHECK(enc.mlp_hidden == 20);
        CHECK(enc.pooling == Pooling::kFinal);

        const PretrainConfig pc = pretrain_config_from(cfg);
        CHECK(pc.epochs == 2);
        CHECK(pc.batch == 8);
        CHECK(pc.lr == 0.005);
        CHECK(pc.word_dropout == 0.1);
        CHECK(pc.margin == 0.3);
        CHECK(pc.seed == derive_seed(21, "pretrain"));

        CHECK(augment_count_from(cfg) == 5);
        const EnergyConfig ec = energy_config_from(cfg);
        CHECK(ec.lambda == 2.0);
        CHECK(ec.eta == 0.25);
        CHECK(ec.sigma == 0.4);
        CHECK(ec.sigma_end == 0.02);
        CHECK(ec.n_steps == 33);
        CHECK(ec.t_len == 6);
        CHECK(ec.seed == derive_seed(21, "augment"));

        const TrainConfig tc = train_config_from(cfg);
        CHECK(tc.epochs == 11);
        CHECK(tc.batch_benign == 4);
        CHECK(tc.batch_poisoned == 2);
        CHECK(tc.lr == 0.0005);
        CHECK(tc.lr_decay_factor == 0.5);
        CHECK(tc.lr_decay_epoch == 6);
        CHECK(tc.gamma == 3.0);
        CHECK(tc.metric == Metric::kPoincare);
        CHECK(tc.target_prompt == "a photo of a calm lake");
        CHECK(tc.adamw.weight_decay == 0.02);
        REQUIRE(tc.category_targets.size() == 1);
        CHECK(tc.category_targets.at("umbra") == "a photo of a red door");
        CHECK(tc.seed == derive_seed(21, "train"));

        const EvalConfig ev = eval_config_from(cfg);
        CHECK(ev.tau == 0.6);
        CHECK(ev.benign_tau == 0.85);
        CHECK(ev.target_prompt == "a photo of a calm lake");
    }

    SUBCASE("builders reject out-of-range values") {
        KvConfig bad;
        bad.set("synth.benign", "0");
        CHECK_THROWS_AS(synth_sizes_from(bad), InvalidArgument);

        KvConfig badenc;
        badenc.set("encoder.d_model", "0");
        CHECK_THROWS_AS(encoder_config_from(badenc), InvalidArgument);

        KvConfig badpool;
        badpool.set("encoder.pooling", "middle");
        CHECK_THROWS_AS(encoder_config_from(badpool), ParseError);

        KvConfig badmetric;
        badmetric.set("train.metric", "euclid");
        CHECK_THROWS_AS(train_config_from(badmetric), ParseError);

        KvConfig badcount;
        badcount.set("augment.count", "-2");
        CHECK_THROWS_AS(augment_count_from(badcount), InvalidArgument);
    }
}
