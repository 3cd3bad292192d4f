// C API implementation: a thin exception-to-status bridge over the core
// library. Every entry point funnels through guarded(), which translates the
// exception hierarchy into semshift_status codes and stows the message in a
// thread-local slot for semshift_last_error().

#include "semshift.h"

#include <cstring>
#include <new>
#include <string>
#include <utility>
#include <vector>

#include "config/kvconfig.hpp"
#include "core/error.hpp"
#include "core/tape.hpp"
#include "data/record.hpp"
#include "encoder/model.hpp"
#include "eval/report.hpp"
#include "pipeline/pipeline.hpp"

struct semshift_config {
    semshift::KvConfig cfg;
    mutable std::string scratch;  // backs semshift_config_get
};

struct semshift_corpus {
    std::vector<semshift::PromptRecord> records;
};

struct semshift_encoder {
    semshift::Encoder enc;
};

struct semshift_report {
    semshift::MetricsReport report;
};

namespace {

thread_local std::string t_last_error;

int fail(int code, const std::string& what) {
    t_last_error = what;
    return code;
}

// Runs `fn`, mapping each library exception class onto its status code.
template <typename Fn>
int guarded(Fn&& fn) {
    try {
        fn();
        t_last_error.clear();
        return SEMSHIFT_OK;
    } catch (const semshift::ShapeError& e) {
        return fail(SEMSHIFT_SHAPE_ERROR, e.what());
    } catch (const semshift::ParseError& e) {
        return fail(SEMSHIFT_PARSE_ERROR, e.what());
    } catch (const semshift::NumericError& e) {
        return fail(SEMSHIFT_NUMERIC_ERROR, e.what());
    } catch (const semshift::StateError& e) {
        return fail(SEMSHIFT_STATE_ERROR, e.what());
    } catch (const semshift::IoError& e) {
        return fail(SEMSHIFT_IO_ERROR, e.what());
    } catch (const semshift::InvalidArgument& e) {
        return fail(SEMSHIFT_INVALID_ARGUMENT, e.what());
    } catch (const std::bad_alloc&) {
        return fail(SEMSHIFT_INTERNAL_ERROR, "out of memory");
    } catch (const std::exception& e) {
        return fail(SEMSHIFT_INTERNAL_ERROR, e.what());
    } catch (...) {
        return fail(SEMSHIFT_INTERNAL_ERROR, "unknown failure");
    }
}

int require(bool ok, const char* what) {
    if (ok) return SEMSHIFT_OK;
    return fail(SEMSHIFT_INVALID_ARGUMENT, what);
}

// NULL for an optional path parameter means "not requested".
std::string optional_path(const char* path) { return path ? std::string(path) : std::string(); }

}  // namespace

extern "C" {

const char* semshift_version(void) { return "0.1.0"; }

const char* semshift_last_error(void) { return t_last_error.c_str(); }

/* ---------------------------------------------------------------- config */

semshift_config* semshift_config_create(void) { return new (std::nothrow) semshift_config(); }

void semshift_config_free(semshift_config* cfg) { delete cfg; }

int semshift_config_load_file(semshift_config* cfg, const char* path) {
    if (int rc = require(cfg && path, "semshift_config_load_file: NULL argument")) return rc;
    return guarded([&] { cfg->cfg.merge(semshift::KvConfig::from_file(path)); });
}

int semshift_config_set(semshift_config* cfg, const char* key, const char* value) {
    if (int rc = require(cfg && key && value, "semshift_config_set: NULL argument")) return rc;
    return guarded([&] { cfg->cfg.set(key, value); });
}

int semshift_config_apply_env(semshift_config* cfg) {
    if (int rc = require(cfg != nullptr, "semshift_config_apply_env: NULL config")) return rc;
    return guarded([&] { cfg->cfg.apply_env_overrides(); });
}

const char* semshift_config_get(const semshift_config* cfg, const char* key) {
    if (!cfg || !key || !cfg->cfg.has(key)) return nullptr;
    cfg->scratch = cfg->cfg.get_string(key, "");
    return cfg->scratch.c_str();
}

/* ---------------------------------------------------------------- stages */

int semshift_gen_synth(const semshift_config* cfg, const char* out_dir) {
    if (int rc = require(cfg && out_dir, "semshift_gen_synth: NULL argument")) return rc;
    return guarded([&] { semshift::gen_synth_run(cfg->cfg, out_dir); });
}

int semshift_pretrain_teacher(const semshift_config* cfg, const char* corpus_jsonl,
                              const char* out_checkpoint) {
    if (int rc = require(cfg && corpus_jsonl && out_checkpoint,
                         "semshift_pretrain_teacher: NULL argument"))
        return rc;
    return guarded([&] { semshift::pretrain_run(cfg->cfg, corpus_jsonl, out_checkpoint); });
}

int semshift_augment(const semshift_config* cfg, const char* teacher_checkpoint,
                     const char* corpus_jsonl, const char* out_jsonl) {
    if (int rc = require(cfg && teacher_checkpoint && corpus_jsonl && out_jsonl,
                         "semshift_augment: NULL argument"))
        return rc;
    return guarded(
        [&] { semshift::augment_run(cfg->cfg, teacher_checkpoint, corpus_jsonl, out_jsonl); });
}

int semshift_train(const semshift_config* cfg, const char* teacher_checkpoint,
                   const char* corpus_jsonl, const char* augmented_jsonl,
                   const char* out_student, const char* out_log) {
    if (int rc = require(cfg && teacher_checkpoint && corpus_jsonl && out_student,
                         "semshift_train: NULL argument"))
        return rc;
    return guarded([&] {
        semshift::train_run(cfg->cfg, teacher_checkpoint, corpus_jsonl,
                            optional_path(augmented_jsonl), out_student, optional_path(out_log));
    });
}

int semshift_eval(const semshift_config* cfg, const char* teacher_checkpoint,
                  const char* student_checkpoint, const char* corpus_jsonl, const char* aux_json,
                  const char* out_report, const char* out_projection_csv) {
    if (int rc = require(cfg && teacher_checkpoint && student_checkpoint && corpus_jsonl &&
                             aux_json && out_report,
                         "semshift_eval: NULL argument"))
        return rc;
    return guarded([&] {
        semshift::eval_run(cfg->cfg, teacher_checkpoint, student_checkpoint, corpus_jsonl,
                           aux_json, out_report, optional_path(out_projection_csv));
    });
}

int semshift_gamma_sweep(const semshift_config* cfg, const char* teacher_checkpoint,
                         const char* corpus_jsonl, const char* augmented_jsonl,
                         const char* aux_json, const char* gammas, const char* out_csv) {
    if (int rc = require(cfg && teacher_checkpoint && corpus_jsonl && aux_json && gammas &&
                             out_csv,
                         "semshift_gamma_sweep: NULL argument"))
        return rc;
    return guarded([&] {
        semshift::gamma_sweep_run(cfg->cfg, teacher_checkpoint, corpus_jsonl,
                                  optional_path(augmented_jsonl), aux_json,
                                  semshift::parse_gamma_list(gammas), out_csv);
    });
}

/* ---------------------------------------------------------------- corpus */

int semshift_corpus_load(const char* jsonl_path, semshift_corpus** out) {
    if (int rc = require(jsonl_path && out, "semshift_corpus_load: NULL argument")) return rc;
    *out = nullptr;
    return guarded([&] {
        auto handle = new semshift_corpus{semshift::load_jsonl(jsonl_path)};
        *out = handle;
    });
}

int semshift_corpus_save(const semshift_corpus* corpus, const char* jsonl_path) {
    if (int rc = require(corpus && jsonl_path, "semshift_corpus_save: NULL argument")) return rc;
    return guarded([&] { semshift::save_jsonl(corpus->records, jsonl_path); });
}

size_t semshift_corpus_size(const semshift_corpus* corpus) {
    return corpus ? corpus->records.size() : 0;
}

const char* semshift_corpus_text(const semshift_corpus* corpus, size_t index) {
    if (!corpus || index >= corpus->records.size()) return nullptr;
    return corpus->records[index].text.c_str();
}

void semshift_corpus_free(semshift_corpus* corpus) { delete corpus; }

/* --------------------------------------------------------------- encoder */

int semshift_encoder_load(const char* checkpoint_path, semshift_encoder** out) {
    if (int rc = require(checkpoint_path && out, "semshift_encoder_load: NULL argument"))
        return rc;
    *out = nullptr;
    return guarded([&] {
        auto handle = new semshift_encoder{semshift::Encoder::load(checkpoint_path)};
        *out = handle;
    });
}

int semshift_encoder_save(const semshift_encoder* encoder, const char* checkpoint_path) {
    if (int rc = require(encoder && checkpoint_path, "semshift_encoder_save: NULL argument"))
        return rc;
    return guarded([&] { encoder->enc.save(checkpoint_path); });
}

int semshift_encoder_dim(const semshift_encoder* encoder) {
    return encoder ? static_cast<int>(encoder->enc.config().d_model) : -1;
}

int semshift_encoder_embed(const semshift_encoder* encoder, const char* text, double* out,
                           size_t out_len) {
    if (int rc = require(encoder && text && out, "semshift_encoder_embed: NULL argument"))
        return rc;
    return guarded([&] {
        const semshift::Tensor emb = encoder->enc.encode_text(text);
        if (emb.size() != out_len) {
            throw semshift::ShapeError("semshift_encoder_embed: buffer holds " +
                                       std::to_string(out_len) + " values, embedding has " +
                                       std::to_string(emb.size()));
        }
        std::memcpy(out, emb.data(), out_len * sizeof(double));
    });
}

int semshift_encoder_similarity(const semshift_encoder* a, const semshift_encoder* b,
                                const char* text, double* out) {
    if (int rc = require(a && b && text && out, "semshift_encoder_similarity: NULL argument"))
        return rc;
    return guarded(
        [&] { *out = semshift::cosine(a->enc.encode_text(text), b->enc.encode_text(text)); });
}

void semshift_encoder_free(semshift_encoder* encoder) { delete encoder; }

/* ---------------------------------------------------------------- report */

int semshift_report_load(const char* json_path, semshift_report** out) {
    if (int rc = require(json_path && out, "semshift_report_load: NULL argument")) return rc;
    *out = nullptr;
    return guarded([&] {
        auto handle = new semshift_report{semshift::load_report(json_path)};
        *out = handle;
    });
}

int semshift_report_metric(const semshift_report* report, const char* name, double* out) {
    if (int rc = require(report && name && out, "semshift_report_metric: NULL argument"))
        return rc;
    return guarded([&] {
        const semshift::MetricsReport& r = report->report;
        const std::string key(name);
        if (key == "sim_benign.mean") {
            *out = r.sim_benign.mean;
        } else if (key == "sim_benign.std") {
            *out = r.sim_benign.std;
        } else if (key == "sim_advers.mean") {
            *out = r.sim_advers.mean;
        } else if (key == "sim_advers.std") {
            *out = r.sim_advers.std;
        } else if (key == "sim_target.mean") {
            *out = r.sim_target.mean;
        } else if (key == "sim_target.std") {
            *out = r.sim_target.std;
        } else if (key == "agreement_at_1") {
            *out = r.agreement_at_1;
        } else if (key == "agreement_at_5") {
            *out = r.agreement_at_5;
        } else if (key == "trigger_success_rate") {
            *out = r.trigger_success_rate;
        } else if (key == "benign_preservation_rate") {
            *out = r.benign_preservation_rate;
        } else if (key == "benign_count") {
            *out = static_cast<double>(r.benign_count);
        } else if (key == "adversarial_count") {
            *out = static_cast<double>(r.adversarial_count);
        } else if (key == "tau") {
            *out = r.tau;
        } else if (key == "benign_tau") {
            *out = r.benign_tau;
        } else {
            throw semshift::InvalidArgument("semshift_report_metric: unknown metric '" + key +
                                            "'");
        }
    });
}

const char* semshift_report_target_prompt(const semshift_report* report) {
    return report ? report->report.target_prompt.c_str() : nullptr;
}

void semshift_report_free(semshift_report* report) { delete report; }

}  // extern "C"
