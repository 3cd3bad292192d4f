// Black-box tests of the command-line binary: exit-code contract, flag and
// config layering, reproducibility, and the end-to-end pipeline. The binary
// path arrives via the SEMSHIFT_CLI environment variable (set by CTest).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace {

std::string cli_path() {
    const char* path = std::getenv("SEMSHIFT_CLI");
    REQUIRE_MESSAGE(path != nullptr,
                    "set SEMSHIFT_CLI to the semshift binary path before running");
    return path;
}

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr interleaved
};

// Runs `args` (appended to the binary path) through the shell, capturing
// combined output and the exit code.
RunResult run(const std::string& args) {
    const std::string cmd = cli_path() + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult result;
    char buf[4096];
    size_t n = 0;
    while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) result.output.append(buf, n);
    const int status = pclose(pipe);
    result.exit_code = (status >= 0 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
    return result;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), path);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

size_t line_count(const std::string& text) {
    size_t lines = 0;
    for (char c : text) {
        if (c == '\n') ++lines;
    }
    return lines;
}

const std::string kConf =
    "seed = 7\n"
    "synth.benign = 40\n"
    "synth.adversarial = 20\n"
    "synth.reference_pairs = 10\n"
    "synth.paraphrase = 15\n"
    "encoder.d_model = 32\n"
    "encoder.n_layers = 1\n"
    "encoder.n_heads = 2\n"
    "encoder.t_max = 16\n"
    "encoder.mlp_hidden = 48\n"
    "pretrain.epochs = 10\n"
    "pretrain.batch = 16\n"
    "pretrain.lr = 2e-3\n"
    "augment.steps = 40\n"
    "augment.count = 6\n"
    "augment.eta = 0.5\n"
    "train.epochs = 20\n"
    "train.batch_benign = 16\n"
    "train.batch_poisoned = 8\n"
    "train.lr = 1e-3\n"
    "train.lr_decay_epoch = 15\n"
    "train.gamma = 1.0\n";

// Full pipeline executed once through the binary; test cases inspect the
// resulting files.
struct Workspace {
    std::string dir = "/tmp/semshift_cli_ws";
    std::string conf = dir + "/run.conf";

    Workspace() {
        std::filesystem::remove_all(dir);
        std::filesystem::create_directories(dir);
        std::ofstream(conf) << kConf;

        auto stage = [&](const std::string& args) {
            RunResult r = run("--config " + conf + " " + args);
            CAPTURE(args);
            CAPTURE(r.output);
            REQUIRE(r.exit_code == 0);
            return r;
        };
        stage("gen-synth --out " + dir + " --benign 40 --adversarial 20");
        stage("pretrain-teacher --corpus " + dir + "/corpus.jsonl --out " + dir +
              "/teacher.ckpt");
        stage("augment --teacher " + dir + "/teacher.ckpt --corpus " + dir +
              "/corpus.jsonl --out " + dir + "/augmented.jsonl");
        stage("train --teacher " + dir + "/teacher.ckpt --corpus " + dir +
              "/corpus.jsonl --augmented " + dir + "/augmented.jsonl --out " + dir +
              "/student.ckpt --log " + dir + "/train_log.jsonl");
        eval_output = stage("eval --teacher " + dir + "/teacher.ckpt --student " + dir +
                            "/student.ckpt --corpus " + dir + "/corpus.jsonl --aux " + dir +
                            "/aux.json --out " + dir + "/report.json --export-projection " +
                            dir + "/projection.csv")
                          .output;
    }

    RunResult eval_rerun() const {
        return run("--config " + conf + " eval --teacher " + dir + "/teacher.ckpt --student " +
                   dir + "/student.ckpt --corpus " + dir + "/corpus.jsonl --aux " + dir +
                   "/aux.json --out " + dir + "/report.json");
    }

    std::string eval_output;
};

Workspace& ws() {
    static Workspace instance;
    return instance;
}

}  // namespace

TEST_CASE("version flag") {
    RunResult r = run("--version");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("semshift 0.1.0") != std::string::npos);
}

TEST_CASE("usage errors exit with code 2") {
    CHECK(run("").exit_code == 2);                         // no subcommand
    CHECK(run("frobnicate").exit_code == 2);               // unknown subcommand
    CHECK(run("gen-synth --benign 40").exit_code == 2);    // missing required flag
    CHECK(run("train --teacher a.ckpt").exit_code == 2);   // missing required flags
    CHECK(run("--config /tmp/no_such.conf gen-synth --benign 1 --adversarial 1").exit_code ==
          2);  // --config validates existence at parse time

    RunResult r = run("gen-synth --adversarial 20");
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("--benign") != std::string::npos);
}

TEST_CASE("help exits 0 and lists the subcommands") {
    RunResult r = run("--help");
    CHECK(r.exit_code == 0);
    for (const char* name : {"gen-synth", "pretrain-teacher", "augment", "train", "eval"}) {
        CAPTURE(name);
        CHECK(r.output.find(name) != std::string::npos);
    }
}

TEST_CASE("runtime failures exit with code 1 and explain themselves") {
    RunResult r = run("train --teacher /tmp/semshift_no_such.ckpt --corpus /tmp/x.jsonl --out /tmp/y.ckpt");
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("/tmp/semshift_no_such.ckpt") != std::string::npos);

    // zero-epoch pre-training is a rejected precondition, not a usage error
    Workspace& w = ws();
    RunResult zero = run("pretrain-teacher --corpus " + w.dir + "/corpus.jsonl --out /tmp/z.ckpt --epochs 0");
    CHECK(zero.exit_code == 1);
}

TEST_CASE("gen-synth is reproducible and seed-sensitive") {
    const std::string a = "/tmp/semshift_cli_gen_a";
    const std::string b = "/tmp/semshift_cli_gen_b";
    const std::string c = "/tmp/semshift_cli_gen_c";
    for (const auto& d : {a, b, c}) {
        std::filesystem::remove_all(d);
        std::filesystem::create_directories(d);
    }

    CHECK(run("gen-synth --out " + a + " --seed 7 --benign 200 --adversarial 100").exit_code ==
          0);
    CHECK(run("gen-synth --out " + b + " --seed 7 --benign 200 --adversarial 100").exit_code ==
          0);
    CHECK(run("gen-synth --out " + c + " --seed 8 --benign 200 --adversarial 100").exit_code ==
          0);

    for (const char* name : {"/corpus.jsonl", "/paraphrases.jsonl", "/aux.json"}) {
        CAPTURE(name);
        CHECK(read_file(a + name) == read_file(b + name));
    }
    CHECK(read_file(a + "/corpus.jsonl") != read_file(c + "/corpus.jsonl"));
}

TEST_CASE("seed precedence: config file < SEMSHIFT_SEED < --seed flag") {
    const std::string base = "/tmp/semshift_cli_prec";
    std::filesystem::remove_all(base);
    for (const char* sub : {"/file", "/env", "/flag", "/ref7", "/ref9"}) {
        std::filesystem::create_directories(base + sub);
    }
    const std::string conf = base + "/seed5.conf";
    std::ofstream(conf) << "seed = 5\n";

    // references: plain --seed runs
    CHECK(run("gen-synth --out " + base + "/ref7 --seed 7 --benign 30 --adversarial 10")
              .exit_code == 0);
    CHECK(run("gen-synth --out " + base + "/ref9 --seed 9 --benign 30 --adversarial 10")
              .exit_code == 0);
    const std::string corpus7 = read_file(base + "/ref7/corpus.jsonl");
    const std::string corpus9 = read_file(base + "/ref9/corpus.jsonl");
    REQUIRE(corpus7 != corpus9);

    // file seed alone
    CHECK(run("--config " + conf + " gen-synth --out " + base +
              "/file --benign 30 --adversarial 10")
              .exit_code == 0);
    CHECK(read_file(base + "/file/corpus.jsonl") != corpus7);

    // env overrides the file
    setenv("SEMSHIFT_SEED", "7", 1);
    CHECK(run("--config " + conf + " gen-synth --out " + base +
              "/env --benign 30 --adversarial 10")
              .exit_code == 0);
    // flag overrides the env
    CHECK(run("--config " + conf + " gen-synth --out " + base +
              "/flag --seed 9 --benign 30 --adversarial 10")
              .exit_code == 0);
    unsetenv("SEMSHIFT_SEED");

    CHECK(read_file(base + "/env/corpus.jsonl") == corpus7);
    CHECK(read_file(base + "/flag/corpus.jsonl") == corpus9);
}

TEST_CASE("pipeline artifacts and the eval summary") {
    Workspace& w = ws();
    for (const char* name : {"/corpus.jsonl", "/paraphrases.jsonl", "/aux.json",
                             "/teacher.ckpt", "/augmented.jsonl", "/student.ckpt",
                             "/train_log.jsonl", "/report.json", "/projection.csv"}) {
        CAPTURE(name);
        CHECK(std::filesystem::exists(w.dir + name));
    }

    // the eval subcommand prints a human summary of the headline metrics
    for (const char* label : {"target prompt", "sim_benign", "sim_advers", "sim_target",
                              "agreement@1", "trigger success rate"}) {
        CAPTURE(label);
        CHECK(w.eval_output.find(label) != std::string::npos);
    }
    CHECK(w.eval_output.find("a photo of a cute cat") != std::string::npos);

    const std::string report = read_file(w.dir + "/report.json");
    CHECK(report.find("\"sim_target\"") != std::string::npos);
    CHECK(report.find("\"metric_basis\"") != std::string::npos);

    const std::string csv = read_file(w.dir + "/projection.csv");
    CHECK(csv.rfind("x,y,role,category", 0) == 0);
    CHECK(line_count(csv) >= 2);
}

TEST_CASE("eval re-run is byte-reproducible") {
    Workspace& w = ws();
    const std::string first = read_file(w.dir + "/report.json");
    REQUIRE(w.eval_rerun().exit_code == 0);
    CHECK(read_file(w.dir + "/report.json") == first);
}

TEST_CASE("gamma sweep writes one row per gamma") {
    Workspace& w = ws();
    RunResult r = run("--config " + w.conf + " eval --teacher " + w.dir +
                      "/teacher.ckpt --student " + w.dir + "/student.ckpt --corpus " + w.dir +
                      "/corpus.jsonl --aux " + w.dir + "/aux.json --out " + w.dir +
                      "/report_sweep.json --gamma-sweep 0,1 --sweep-out " + w.dir +
                      "/sweep.csv");
    CAPTURE(r.output);
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.find("gamma sweep table written") != std::string::npos);

    const std::string csv = read_file(w.dir + "/sweep.csv");
    CHECK(csv.rfind("gamma,sim_benign,sim_advers,sim_target,agreement_at_1,agreement_at_5,"
                    "trigger_success_rate,benign_preservation_rate",
                    0) == 0);
    CHECK(line_count(csv) == 3);

    // default sweep path lands beside the report when --sweep-out is omitted
    RunResult d = run("--config " + w.conf + " eval --teacher " + w.dir +
                      "/teacher.ckpt --student " + w.dir + "/student.ckpt --corpus " + w.dir +
                      "/corpus.jsonl --aux " + w.dir + "/aux.json --out " + w.dir +
                      "/report_sweep.json --gamma-sweep 1");
    REQUIRE(d.exit_code == 0);
    CHECK(std::filesystem::exists(w.dir + "/gamma_sweep.csv"));

    // malformed gamma list is a runtime failure, not a crash
    RunResult bad = run("--config " + w.conf + " eval --teacher " + w.dir +
                        "/teacher.ckpt --student " + w.dir + "/student.ckpt --corpus " + w.dir +
                        "/corpus.jsonl --aux " + w.dir + "/aux.json --out " + w.dir +
                        "/report_sweep.json --gamma-sweep 1,banana");
    CHECK(bad.exit_code == 1);
}
