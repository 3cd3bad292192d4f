#include "pipeline/pipeline.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "core/error.hpp"
#include "core/rng.hpp"
#include "data/split.hpp"
#include "data/synth.hpp"
#include "eval/pca.hpp"

namespace semshift {

namespace {

using nlohmann::json;

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create output directory " + dir + ": " + ec.message());
    }
}

Encoder load_frozen(const std::string& path) {
    Encoder enc = Encoder::load(path);
    enc.freeze();
    return enc;
}

std::vector<PromptRecord> load_corpus_with_optional_augmented(const std::string& corpus_path,
                                                              const std::string& augmented_path) {
    std::vector<PromptRecord> records = load_jsonl(corpus_path);
    if (!augmented_path.empty()) {
        const std::vector<PromptRecord> extra = load_jsonl(augmented_path);
        records.insert(records.end(), extra.begin(), extra.end());
    }
    if (records.empty()) {
        throw InvalidArgument("corpus is empty: " + corpus_path);
    }
    return records;
}

void check_compatible(const Encoder& teacher, const Encoder& student) {
    if (teacher.vocab().hash() != student.vocab().hash()) {
        throw InvalidArgument("teacher and student checkpoints use different vocabularies");
    }
    if (teacher.config().d_model != student.config().d_model ||
        teacher.config().t_max != student.config().t_max ||
        teacher.config().pooling != student.config().pooling) {
        throw InvalidArgument("teacher and student checkpoints have incompatible dimensions");
    }
}

std::vector<PromptRecord> holdout_benign_of(const CorpusSplit& sp) {
    std::vector<PromptRecord> out;
    for (const PromptRecord& r : sp.validation) {
        if (r.role == Role::kBenign) out.push_back(r);
    }
    return out;
}

}  // namespace

GenSynthResult gen_synth_run(const KvConfig& cfg, const std::string& out_dir) {
    const SynthSizes sizes = synth_sizes_from(cfg);
    const uint64_t seed = derive_seed(master_seed(cfg), "synth");
    const SynthCorpus corpus = generate_synthetic_corpus(seed, sizes);

    ensure_dir(out_dir);
    save_jsonl(corpus.records, out_dir + "/corpus.jsonl");
    save_jsonl(corpus.paraphrases, out_dir + "/paraphrases.jsonl");

    json aux = json::object();
    aux["class_prompts"] = corpus.class_prompts;
    aux["insert_words"] = corpus.insert_words;
    json syn = json::object();
    for (const auto& [word, options] : corpus.synonyms) syn[word] = options;
    aux["synonyms"] = std::move(syn);
    const std::string aux_path = out_dir + "/aux.json";
    std::ofstream out(aux_path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open for writing: " + aux_path);
    }
    out << aux.dump(2) << '\n';
    if (!out) {
        throw IoError("failed writing: " + aux_path);
    }

    GenSynthResult res;
    res.records = corpus.records.size();
    res.paraphrases = corpus.paraphrases.size();
    res.class_prompts = corpus.class_prompts.size();
    return res;
}

PretrainResult pretrain_run(const KvConfig& cfg, const std::string& corpus_path,
                            const std::string& out_checkpoint) {
    const std::vector<PromptRecord> records = load_jsonl(corpus_path);
    if (records.empty()) {
        throw InvalidArgument("corpus is empty: " + corpus_path);
    }

    std::vector<std::string> words;
    std::vector<std::string> texts;
    texts.reserve(records.size());
    for (const PromptRecord& r : records) {
        texts.push_back(r.text);
        for (std::string& w : split_words(r.text)) words.push_back(std::move(w));
    }
    const Vocab vocab = Vocab::build(words);

    EncoderConfig ec = encoder_config_from(cfg);
    ec.vocab_size = vocab.size();
    Encoder enc(ec, vocab);
    enc.init_parameters(derive_seed(master_seed(cfg), "init"));

    const PretrainConfig pc = pretrain_config_from(cfg);
    const PretrainState st = pretrain(enc, texts, pc);
    enc.save(out_checkpoint);

    PretrainResult res;
    res.texts = texts.size();
    res.vocab_size = vocab.size();
    res.first_epoch_loss = st.epoch_loss.front();
    res.final_epoch_loss = st.epoch_loss.back();
    return res;
}

AugmentResult augment_run(const KvConfig& cfg, const std::string& teacher_path,
                          const std::string& corpus_path, const std::string& out_jsonl) {
    const Encoder teacher = load_frozen(teacher_path);
    const std::vector<PromptRecord> records = load_jsonl(corpus_path);

    std::vector<PromptRecord> seeds;
    for (const PromptRecord& r : records) {
        if (r.role == Role::kAdversarial && r.provenance != Provenance::kAugmented) {
            seeds.push_back(r);
        }
    }
    if (seeds.empty()) {
        throw InvalidArgument("no adversarial seed records in corpus: " + corpus_path);
    }

    int count = augment_count_from(cfg);
    if (count == 0) count = static_cast<int>(seeds.size());
    const EnergyConfig ecfg = energy_config_from(cfg);
    const std::vector<PromptRecord> produced = augment_corpus(seeds, ecfg, teacher, count);
    save_jsonl(produced, out_jsonl);

    AugmentResult res;
    res.seeds = seeds.size();
    res.produced = produced.size();
    return res;
}

TrainResult train_run(const KvConfig& cfg, const std::string& teacher_path,
                      const std::string& corpus_path, const std::string& augmented_path,
                      const std::string& out_student, const std::string& out_log) {
    const Encoder teacher = load_frozen(teacher_path);
    const std::vector<PromptRecord> records =
        load_corpus_with_optional_augmented(corpus_path, augmented_path);

    const CorpusSplit sp =
        split(records, split_ratio(cfg), derive_seed(master_seed(cfg), "split"));
    const std::vector<PromptRecord> holdout = holdout_benign_of(sp);

    const TrainConfig tc = train_config_from(cfg);
    Encoder student = teacher.clone_student();
    const TrainState st =
        fit(teacher, student, sp.train, tc, holdout.empty() ? nullptr : &holdout);
    student.save(out_student);
    if (!out_log.empty()) {
        write_train_log(st, out_log);
    }

    TrainResult res;
    res.epochs = st.epochs.size();
    res.steps = st.steps.size();
    res.final_loss_total = st.epochs.empty() ? 0.0 : st.epochs.back().loss_total;
    res.corpus_fingerprint = st.corpus_fingerprint;
    res.train_records = sp.train.size();
    res.validation_records = sp.validation.size();
    return res;
}

std::vector<std::string> load_class_prompts(const std::string& aux_path) {
    std::ifstream in(aux_path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open aux file: " + aux_path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) {
        throw IoError("failed reading aux file: " + aux_path);
    }
    json j;
    try {
        j = json::parse(buf.str());
    } catch (const json::parse_error& e) {
        throw ParseError(aux_path + ": not valid JSON: " + e.what());
    }
    if (!j.is_object() || !j.contains("class_prompts") || !j["class_prompts"].is_array()) {
        throw ParseError(aux_path + ": expected an object with a class_prompts array");
    }
    std::vector<std::string> out;
    for (const auto& v : j["class_prompts"]) {
        if (!v.is_string()) {
            throw ParseError(aux_path + ": class_prompts must hold strings");
        }
        out.push_back(v.get<std::string>());
    }
    return out;
}

MetricsReport eval_run(const KvConfig& cfg, const std::string& teacher_path,
                       const std::string& student_path, const std::string& corpus_path,
                       const std::string& aux_path, const std::string& out_report,
                       const std::string& out_projection) {
    const Encoder teacher = load_frozen(teacher_path);
    const Encoder student = Encoder::load(student_path);
    check_compatible(teacher, student);

    const std::vector<PromptRecord> records = load_jsonl(corpus_path);
    if (records.empty()) {
        throw InvalidArgument("corpus is empty: " + corpus_path);
    }
    const CorpusSplit sp =
        split(records, split_ratio(cfg), derive_seed(master_seed(cfg), "split"));
    const std::vector<std::string> class_prompts = load_class_prompts(aux_path);

    const EvalConfig ecfg = eval_config_from(cfg);
    const MetricsReport rep =
        build_report(teacher, student, sp.validation, class_prompts, ecfg);
    write_report(rep, out_report);

    if (!out_projection.empty()) {
        const PcaResult pca = pca_project(student, sp.validation);
        write_projection_csv(pca.points, out_projection);
    }
    return rep;
}

std::vector<double> parse_gamma_list(const std::string& text) {
    std::vector<double> out;
    std::string token;
    std::istringstream in(text);
    while (std::getline(in, token, ',')) {
        // trim spaces
        size_t b = token.find_first_not_of(" \t");
        size_t e = token.find_last_not_of(" \t");
        if (b == std::string::npos) {
            throw ParseError("gamma list has an empty entry: \"" + text + "\"");
        }
        const std::string t = token.substr(b, e - b + 1);
        errno = 0;
        char* end = nullptr;
        const double v = std::strtod(t.c_str(), &end);
        if (end != t.c_str() + t.size() || errno == ERANGE) {
            throw ParseError("gamma list entry is not a number: \"" + t + "\"");
        }
        if (v < 0.0) {
            throw InvalidArgument("gamma must be >= 0, got " + t);
        }
        out.push_back(v);
    }
    if (out.empty()) {
        throw ParseError("gamma list is empty");
    }
    return out;
}

std::vector<SweepRow> gamma_sweep_run(const KvConfig& cfg, const std::string& teacher_path,
                                      const std::string& corpus_path,
                                      const std::string& augmented_path,
                                      const std::string& aux_path,
                                      const std::vector<double>& gammas,
                                      const std::string& out_csv) {
    if (gammas.empty()) {
        throw InvalidArgument("gamma sweep needs at least one gamma");
    }
    const Encoder teacher = load_frozen(teacher_path);
    const std::vector<PromptRecord> records =
        load_corpus_with_optional_augmented(corpus_path, augmented_path);
    const CorpusSplit sp =
        split(records, split_ratio(cfg), derive_seed(master_seed(cfg), "split"));
    const std::vector<std::string> class_prompts = load_class_prompts(aux_path);
    const EvalConfig ecfg = eval_config_from(cfg);

    std::vector<SweepRow> rows;
    rows.reserve(gammas.size());
    for (const double gamma : gammas) {
        TrainConfig tc = train_config_from(cfg);
        tc.gamma = gamma;
        Encoder student = teacher.clone_student();
        fit(teacher, student, sp.train, tc);
        SweepRow row;
        row.gamma = gamma;
        row.report = build_report(teacher, student, sp.validation, class_prompts, ecfg);
        rows.push_back(std::move(row));
    }

    std::ofstream out(out_csv, std::ios::binary);
    if (!out) {
        throw IoError("cannot open sweep CSV for writing: " + out_csv);
    }
    out << "gamma,sim_benign,sim_advers,sim_target,agreement_at_1,agreement_at_5,"
           "trigger_success_rate,benign_preservation_rate\n";
    char buf[64];
    auto put = [&](double v, char sep) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << buf << sep;
    };
    for (const SweepRow& row : rows) {
        put(row.gamma, ',');
        put(row.report.sim_benign.mean, ',');
        put(row.report.sim_advers.mean, ',');
        put(row.report.sim_target.mean, ',');
        put(row.report.agreement_at_1, ',');
        put(row.report.agreement_at_5, ',');
        put(row.report.trigger_success_rate, ',');
        put(row.report.benign_preservation_rate, '\n');
    }
    if (!out) {
        throw IoError("failed writing sweep CSV: " + out_csv);
    }
    return rows;
}

}  // namespace semshift
