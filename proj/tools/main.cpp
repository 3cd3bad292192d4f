// semshift CLI: orchestrates the five pipeline stages through the public
// C API. Configuration layering, implemented by call order on the config
// handle:  built-in defaults < --config file < SEMSHIFT_SEED < flags.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <CLI11.hpp>

#include <semshift.h>

#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace {

struct ConfigDeleter {
    void operator()(semshift_config* cfg) const { semshift_config_free(cfg); }
};
using ConfigPtr = std::unique_ptr<semshift_config, ConfigDeleter>;

struct ReportDeleter {
    void operator()(semshift_report* r) const { semshift_report_free(r); }
};
using ReportPtr = std::unique_ptr<semshift_report, ReportDeleter>;

// One CLI flag bound to a config key; applied only when the user passed it,
// so unset flags never mask file or environment values.
struct Binding {
    CLI::Option* option = nullptr;
    std::string key;
    const std::string* value = nullptr;
};

int runtime_failure(const char* stage) {
    std::fprintf(stderr, "semshift %s: %s\n", stage, semshift_last_error());
    return 1;
}

// Builds the effective config: file first, then environment, then explicit
// flags. Returns 0 on success, 1 on failure (message already printed).
int build_config(const ConfigPtr& cfg, const std::string& config_path,
                 const std::vector<Binding>& bindings) {
    if (!config_path.empty() &&
        semshift_config_load_file(cfg.get(), config_path.c_str()) != SEMSHIFT_OK) {
        return runtime_failure("config");
    }
    if (semshift_config_apply_env(cfg.get()) != SEMSHIFT_OK) {
        return runtime_failure("config");
    }
    for (const Binding& b : bindings) {
        if (b.option->count() == 0) continue;
        if (semshift_config_set(cfg.get(), b.key.c_str(), b.value->c_str()) != SEMSHIFT_OK) {
            return runtime_failure("config");
        }
    }
    return 0;
}

void print_metric(const ReportPtr& report, const char* label, const char* name) {
    double value = 0.0;
    if (semshift_report_metric(report.get(), name, &value) == SEMSHIFT_OK) {
        std::printf("  %-26s %.4f\n", label, value);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"semshift — teacher-student encoder fine-tuning with a semantic trigger.\n"
                 "Pipeline: gen-synth -> pretrain-teacher -> augment -> train -> eval."};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("semshift ") + semshift_version());

    std::string config_path;
    app.add_option("--config", config_path, "key = value configuration file")
        ->check(CLI::ExistingFile);

    std::string seed;  // shared flag storage; registered per subcommand

    // ---- gen-synth ----------------------------------------------------------
    auto* gen = app.add_subcommand("gen-synth", "Generate the synthetic prompt corpus");
    std::string gen_out = ".";
    std::string gen_benign, gen_advers, gen_refs, gen_para;
    gen->add_option("--out", gen_out, "output directory (corpus.jsonl, paraphrases.jsonl, aux.json)");
    std::vector<Binding> gen_bind = {
        {gen->add_option("--benign", gen_benign, "number of benign prompts")->required(),
         "synth.benign", &gen_benign},
        {gen->add_option("--adversarial", gen_advers, "number of adversarial prompts")->required(),
         "synth.adversarial", &gen_advers},
        {gen->add_option("--reference-pairs", gen_refs, "number of reference prompt pairs"),
         "synth.reference_pairs", &gen_refs},
        {gen->add_option("--paraphrase", gen_para, "number of held-out paraphrase prompts"),
         "synth.paraphrase", &gen_para},
        {gen->add_option("--seed", seed, "master seed"), "seed", &seed},
    };

    // ---- pretrain-teacher ---------------------------------------------------
    auto* pre = app.add_subcommand("pretrain-teacher", "Pre-train the frozen reference encoder");
    std::string pre_corpus, pre_out;
    std::string pre_epochs;
    pre->add_option("--corpus", pre_corpus, "corpus JSONL")->required();
    pre->add_option("--out", pre_out, "teacher checkpoint path")->required();
    std::vector<Binding> pre_bind = {
        {pre->add_option("--epochs", pre_epochs, "pre-training epochs"), "pretrain.epochs",
         &pre_epochs},
        {pre->add_option("--seed", seed, "master seed"), "seed", &seed},
    };

    // ---- augment ------------------------------------------------------------
    auto* aug = app.add_subcommand("augment", "Expand adversarial prompts via energy-guided sampling");
    std::string aug_teacher, aug_corpus, aug_out;
    std::string aug_count, aug_steps;
    aug->add_option("--teacher", aug_teacher, "teacher checkpoint")->required();
    aug->add_option("--corpus", aug_corpus, "corpus JSONL (adversarial seeds)")->required();
    aug->add_option("--out", aug_out, "augmented records JSONL")->required();
    std::vector<Binding> aug_bind = {
        {aug->add_option("--count", aug_count, "prompts to generate (0 = one per seed)"),
         "augment.count", &aug_count},
        {aug->add_option("--steps", aug_steps, "sampler steps per prompt"), "augment.steps",
         &aug_steps},
        {aug->add_option("--seed", seed, "master seed"), "seed", &seed},
    };

    // ---- train --------------------------------------------------------------
    auto* train = app.add_subcommand("train", "Fine-tune a student encoder against the teacher");
    std::string train_teacher, train_corpus, train_augmented, train_out, train_log;
    std::string train_gamma, train_epochs, train_lr, train_metric;
    train->add_option("--teacher", train_teacher, "teacher checkpoint")->required();
    train->add_option("--corpus", train_corpus, "corpus JSONL")->required();
    train->add_option("--augmented", train_augmented, "augmented records JSONL (optional)");
    train->add_option("--out", train_out, "student checkpoint path")->required();
    train->add_option("--log", train_log, "epoch log JSONL (optional)");
    std::vector<Binding> train_bind = {
        {train->add_option("--gamma", train_gamma, "backdoor loss weight"), "train.gamma",
         &train_gamma},
        {train->add_option("--epochs", train_epochs, "fine-tuning epochs"), "train.epochs",
         &train_epochs},
        {train->add_option("--lr", train_lr, "learning rate"), "train.lr", &train_lr},
        {train->add_option("--metric", train_metric, "distance metric (cosine|mse|mae|poincare)"),
         "train.metric", &train_metric},
        {train->add_option("--seed", seed, "master seed"), "seed", &seed},
    };

    // ---- eval ---------------------------------------------------------------
    auto* eval = app.add_subcommand("eval", "Evaluate a student against the teacher");
    std::string eval_teacher, eval_student, eval_corpus, eval_aux, eval_out;
    std::string eval_projection, eval_sweep_gammas, eval_sweep_out, eval_augmented;
    std::string eval_tau, eval_benign_tau;
    eval->add_option("--teacher", eval_teacher, "teacher checkpoint")->required();
    eval->add_option("--student", eval_student, "student checkpoint")->required();
    eval->add_option("--corpus", eval_corpus, "corpus JSONL")->required();
    eval->add_option("--aux", eval_aux, "aux.json with class prompts")->required();
    eval->add_option("--out", eval_out, "metrics report JSON")->required();
    eval->add_option("--export-projection", eval_projection, "write 2-D PCA projection CSV");
    eval->add_option("--gamma-sweep", eval_sweep_gammas,
                     "comma-separated gamma list; retrains one student per value");
    eval->add_option("--sweep-out", eval_sweep_out,
                     "sweep table CSV (default: gamma_sweep.csv beside the report)");
    eval->add_option("--augmented", eval_augmented, "augmented records JSONL for sweep retraining");
    std::vector<Binding> eval_bind = {
        {eval->add_option("--tau", eval_tau, "trigger threshold"), "eval.tau", &eval_tau},
        {eval->add_option("--benign-tau", eval_benign_tau, "benign preservation threshold"),
         "eval.benign_tau", &eval_benign_tau},
        {eval->add_option("--seed", seed, "master seed"), "seed", &seed},
    };

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // exits 0 after printing help
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints the diagnostic
        return 2;
    }

    ConfigPtr cfg(semshift_config_create());
    if (!cfg) {
        std::fprintf(stderr, "semshift: out of memory\n");
        return 1;
    }

    if (gen->parsed()) {
        if (int rc = build_config(cfg, config_path, gen_bind)) return rc;
        if (semshift_gen_synth(cfg.get(), gen_out.c_str()) != SEMSHIFT_OK) {
            return runtime_failure("gen-synth");
        }
        std::printf("wrote corpus.jsonl, paraphrases.jsonl, aux.json to %s\n", gen_out.c_str());
        return 0;
    }

    if (pre->parsed()) {
        if (int rc = build_config(cfg, config_path, pre_bind)) return rc;
        if (semshift_pretrain_teacher(cfg.get(), pre_corpus.c_str(), pre_out.c_str()) !=
            SEMSHIFT_OK) {
            return runtime_failure("pretrain-teacher");
        }
        std::printf("wrote teacher checkpoint to %s\n", pre_out.c_str());
        return 0;
    }

    if (aug->parsed()) {
        if (int rc = build_config(cfg, config_path, aug_bind)) return rc;
        if (semshift_augment(cfg.get(), aug_teacher.c_str(), aug_corpus.c_str(),
                             aug_out.c_str()) != SEMSHIFT_OK) {
            return runtime_failure("augment");
        }
        std::printf("wrote augmented records to %s\n", aug_out.c_str());
        return 0;
    }

    if (train->parsed()) {
        if (int rc = build_config(cfg, config_path, train_bind)) return rc;
        if (semshift_train(cfg.get(), train_teacher.c_str(), train_corpus.c_str(),
                           train_augmented.empty() ? nullptr : train_augmented.c_str(),
                           train_out.c_str(),
                           train_log.empty() ? nullptr : train_log.c_str()) != SEMSHIFT_OK) {
            return runtime_failure("train");
        }
        std::printf("wrote student checkpoint to %s\n", train_out.c_str());
        return 0;
    }

    // eval
    if (int rc = build_config(cfg, config_path, eval_bind)) return rc;
    if (semshift_eval(cfg.get(), eval_teacher.c_str(), eval_student.c_str(),
                      eval_corpus.c_str(), eval_aux.c_str(), eval_out.c_str(),
                      eval_projection.empty() ? nullptr : eval_projection.c_str()) !=
        SEMSHIFT_OK) {
        return runtime_failure("eval");
    }

    ReportPtr report;
    {
        semshift_report* raw = nullptr;
        if (semshift_report_load(eval_out.c_str(), &raw) != SEMSHIFT_OK) {
            return runtime_failure("eval");
        }
        report.reset(raw);
    }
    std::printf("report written to %s\n", eval_out.c_str());
    std::printf("  %-26s %s\n", "target prompt", semshift_report_target_prompt(report.get()));
    print_metric(report, "sim_benign (mean)", "sim_benign.mean");
    print_metric(report, "sim_advers (mean)", "sim_advers.mean");
    print_metric(report, "sim_target (mean)", "sim_target.mean");
    print_metric(report, "agreement@1", "agreement_at_1");
    print_metric(report, "agreement@5", "agreement_at_5");
    print_metric(report, "trigger success rate", "trigger_success_rate");
    print_metric(report, "benign preservation", "benign_preservation_rate");

    if (!eval_sweep_gammas.empty()) {
        std::string sweep_path = eval_sweep_out;
        if (sweep_path.empty()) {
            sweep_path =
                (std::filesystem::path(eval_out).parent_path() / "gamma_sweep.csv").string();
        }
        if (semshift_gamma_sweep(cfg.get(), eval_teacher.c_str(), eval_corpus.c_str(),
                                 eval_augmented.empty() ? nullptr : eval_augmented.c_str(),
                                 eval_aux.c_str(), eval_sweep_gammas.c_str(),
                                 sweep_path.c_str()) != SEMSHIFT_OK) {
            return runtime_failure("eval --gamma-sweep");
        }
        std::printf("gamma sweep table written to %s\n", sweep_path.c_str());
    }
    return 0;
}
