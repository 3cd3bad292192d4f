#include "train/trainer.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace semshift {

void TrainConfig::validate() const {
    if (epochs < 1) throw InvalidArgument("TrainConfig: epochs must be >= 1");
    if (batch_benign < 1) throw InvalidArgument("TrainConfig: batch_benign must be >= 1");
    if (batch_poisoned < 1) throw InvalidArgument("TrainConfig: batch_poisoned must be >= 1");
    if (!(lr >= 0.0)) throw InvalidArgument("TrainConfig: lr must be non-negative");
    if (!(lr_decay_factor > 0.0)) throw InvalidArgument("TrainConfig: lr_decay_factor must be positive");
    if (lr_decay_epoch < 0) throw InvalidArgument("TrainConfig: lr_decay_epoch must be >= 0");
    if (!(gamma >= 0.0)) throw InvalidArgument("TrainConfig: gamma must be non-negative");
    if (target_prompt.empty()) throw InvalidArgument("TrainConfig: target_prompt must be non-empty");
    for (const auto& [cat, prompt] : category_targets) {
        if (prompt.empty()) {
            throw InvalidArgument("TrainConfig: empty target prompt for category \"" + cat + "\"");
        }
    }
    adamw.validate();
}

const std::string& resolve_target_prompt(const TrainConfig& cfg, const std::string& category) {
    auto it = cfg.category_targets.find(category);
    return it != cfg.category_targets.end() ? it->second : cfg.target_prompt;
}

namespace {

std::vector<Value> flatten(const TapeParams& tp) {
    std::vector<Value> out;
    out.reserve(4 + 16 * tp.layers.size());
    out.push_back(tp.token_table);
    out.push_back(tp.pos_table);
    for (const auto& l : tp.layers) {
        out.push_back(l.ln1_gamma);
        out.push_back(l.ln1_beta);
        out.push_back(l.wq);
        out.push_back(l.bq);
        out.push_back(l.wk);
        out.push_back(l.bk);
        out.push_back(l.wv);
        out.push_back(l.bv);
        out.push_back(l.wo);
        out.push_back(l.bo);
        out.push_back(l.ln2_gamma);
        out.push_back(l.ln2_beta);
        out.push_back(l.w1);
        out.push_back(l.b1);
        out.push_back(l.w2);
        out.push_back(l.b2);
    }
    out.push_back(tp.lnf_gamma);
    out.push_back(tp.lnf_beta);
    return out;
}

// Mean of a non-empty list of scalar values, built on the tape.
Value mean_of(Tape& tape, const std::vector<Value>& terms) {
    (void)tape;
    Value acc = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
    return scale(acc, 1.0 / static_cast<double>(terms.size()));
}

}  // namespace

double mean_distillation_distance(const Encoder& teacher, const Encoder& student,
                                  const std::vector<PromptRecord>& records, Metric metric) {
    if (records.empty()) throw InvalidArgument("mean_distillation_distance: no records");
    double total = 0.0;
    for (const PromptRecord& r : records) {
        total += distance(student.encode_text(r.text), teacher.encode_text(r.text), metric);
    }
    return total / static_cast<double>(records.size());
}

double mean_target_distance(const Encoder& teacher, const Encoder& student,
                            const std::vector<PromptRecord>& records, const TrainConfig& cfg) {
    if (records.empty()) throw InvalidArgument("mean_target_distance: no records");
    std::map<std::string, Tensor> targets;
    double total = 0.0;
    for (const PromptRecord& r : records) {
        const std::string& prompt = resolve_target_prompt(cfg, r.category);
        auto it = targets.find(prompt);
        if (it == targets.end()) {
            it = targets.emplace(prompt, teacher.encode_text(prompt)).first;
        }
        total += distance(student.encode_text(r.text), it->second, cfg.metric);
    }
    return total / static_cast<double>(records.size());
}

TrainState fit(const Encoder& teacher, Encoder& student, const std::vector<PromptRecord>& records,
               const TrainConfig& cfg, const std::vector<PromptRecord>* holdout_benign) {
    cfg.validate();
    if (!teacher.frozen()) throw InvalidArgument("fit: teacher must be frozen");
    if (student.frozen()) throw StateError("fit: student is frozen");
    if (teacher.vocab().hash() != student.vocab().hash()) {
        throw InvalidArgument("fit: teacher and student vocabularies differ");
    }
    if (teacher.config().d_model != student.config().d_model ||
        teacher.config().pooling != student.config().pooling ||
        teacher.config().t_max != student.config().t_max) {
        throw InvalidArgument("fit: teacher and student configurations disagree");
    }

    // Pools.
    std::vector<std::size_t> benign_pool;
    std::vector<std::size_t> poisoned_pool;
    for (std::size_t i = 0; i < records.size(); ++i) {
        switch (records[i].role) {
            case Role::kBenign:
            case Role::kReferenceBenign:
                benign_pool.push_back(i);
                break;
            case Role::kAdversarial:
            case Role::kReferenceAdversarial:
                poisoned_pool.push_back(i);
                break;
        }
    }
    if (benign_pool.empty()) throw InvalidArgument("fit: no benign or reference-benign records");
    if (poisoned_pool.empty()) {
        throw InvalidArgument("fit: no adversarial or reference-adversarial records");
    }

    // Tokenize every pooled record once.
    const Vocab& vocab = student.vocab();
    const uint32_t t_max = student.config().t_max;
    std::vector<TokenSequence> tokens(records.size());
    for (std::size_t i : benign_pool) tokens[i] = tokenize(records[i].text, vocab, t_max);
    for (std::size_t i : poisoned_pool) tokens[i] = tokenize(records[i].text, vocab, t_max);

    // Teacher references: benign prompts keep their teacher embedding,
    // poisoned prompts aim at the teacher embedding of their target prompt.
    // The teacher is frozen, so both caches are computed exactly once.
    std::vector<Tensor> benign_ref;
    benign_ref.reserve(benign_pool.size());
    for (std::size_t i : benign_pool) benign_ref.push_back(teacher.encode(tokens[i]));

    std::map<std::string, Tensor> target_cache;
    std::vector<const Tensor*> poisoned_ref(records.size(), nullptr);
    for (std::size_t i : poisoned_pool) {
        const std::string& prompt = resolve_target_prompt(cfg, records[i].category);
        auto it = target_cache.find(prompt);
        if (it == target_cache.end()) {
            it = target_cache.emplace(prompt, teacher.encode_text(prompt)).first;
        }
        poisoned_ref[i] = &it->second;
    }
    std::map<std::size_t, std::size_t> benign_slot;  // record index -> benign_ref slot
    for (std::size_t s = 0; s < benign_pool.size(); ++s) benign_slot[benign_pool[s]] = s;

    TrainState state;
    state.corpus_fingerprint = corpus_fingerprint(records);
    state.benign_pool_size = benign_pool.size();
    state.poisoned_pool_size = poisoned_pool.size();
    state.steps_per_epoch =
        (benign_pool.size() + static_cast<std::size_t>(cfg.batch_benign) - 1) /
        static_cast<std::size_t>(cfg.batch_benign);

    AdamW opt(cfg.adamw);
    std::vector<Tensor*> param_ptrs;
    student.for_each_param_mut(
        [&](const std::string&, Tensor& t) { param_ptrs.push_back(&t); });

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double lr = epoch <= cfg.lr_decay_epoch || cfg.lr_decay_epoch == 0
                              ? cfg.lr
                              : cfg.lr * cfg.lr_decay_factor;

        std::vector<std::size_t> benign_order = benign_pool;
        {
            Rng rng(derive_seed(cfg.seed, "fit:benign", static_cast<uint64_t>(epoch)));
            rng.shuffle(benign_order);
        }
        std::vector<std::size_t> poisoned_order = poisoned_pool;
        {
            Rng rng(derive_seed(cfg.seed, "fit:poisoned", static_cast<uint64_t>(epoch)));
            rng.shuffle(poisoned_order);
        }
        std::size_t poisoned_cursor = 0;

        double ep_lb = 0.0, ep_lk = 0.0, ep_lt = 0.0;
        for (std::size_t step = 0; step < state.steps_per_epoch; ++step) {
            const std::size_t b0 = step * static_cast<std::size_t>(cfg.batch_benign);
            const std::size_t b1 =
                std::min(benign_order.size(), b0 + static_cast<std::size_t>(cfg.batch_benign));

            Tape tape;
            TapeParams tp = student.make_tape_params(tape);

            std::vector<Value> benign_terms;
            benign_terms.reserve(b1 - b0);
            for (std::size_t k = b0; k < b1; ++k) {
                const std::size_t i = benign_order[k];
                Value emb = student.encode_on_tape(tape, tp, tokens[i]);
                Value ref = tape.leaf(benign_ref[benign_slot[i]]);
                benign_terms.push_back(distance(emb, ref, cfg.metric));
            }
            Value loss_b = mean_of(tape, benign_terms);

            std::vector<Value> poisoned_terms;
            poisoned_terms.reserve(static_cast<std::size_t>(cfg.batch_poisoned));
            for (int k = 0; k < cfg.batch_poisoned; ++k) {
                const std::size_t i = poisoned_order[poisoned_cursor];
                poisoned_cursor = (poisoned_cursor + 1) % poisoned_order.size();
                Value emb = student.encode_on_tape(tape, tp, tokens[i]);
                Value ref = tape.leaf(*poisoned_ref[i]);
                poisoned_terms.push_back(distance(emb, ref, cfg.metric));
            }
            Value loss_k = mean_of(tape, poisoned_terms);
            Value loss_t = add(loss_b, scale(loss_k, cfg.gamma));

            GradMap grads = tape.backward(loss_t);
            std::vector<Value> param_values = flatten(tp);
            if (param_values.size() != param_ptrs.size()) {
                throw StateError("fit: parameter bookkeeping mismatch");
            }
            std::vector<const Tensor*> grad_ptrs;
            grad_ptrs.reserve(param_values.size());
            for (const Value& v : param_values) grad_ptrs.push_back(grads.try_get(v));
            opt.step(param_ptrs, grad_ptrs, lr);

            StepRecord rec;
            rec.epoch = epoch;
            rec.step = static_cast<int>(step) + 1;
            rec.loss_benign = loss_b.tensor().scalar_value();
            rec.loss_backdoor = loss_k.tensor().scalar_value();
            rec.loss_total = loss_t.tensor().scalar_value();
            rec.lr = lr;
            state.steps.push_back(rec);
            ep_lb += rec.loss_benign;
            ep_lk += rec.loss_backdoor;
            ep_lt += rec.loss_total;
        }

        EpochRecord er;
        er.epoch = epoch;
        const double ns = static_cast<double>(state.steps_per_epoch);
        er.loss_benign = ep_lb / ns;
        er.loss_backdoor = ep_lk / ns;
        er.loss_total = ep_lt / ns;
        er.lr = lr;
        if (holdout_benign != nullptr && !holdout_benign->empty()) {
            er.holdout_benign =
                mean_distillation_distance(teacher, student, *holdout_benign, cfg.metric);
        }
        state.epochs.push_back(er);
    }
    return state;
}

void write_train_log(const TrainState& state, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open train log for writing: " + path);
    for (const EpochRecord& er : state.epochs) {
        nlohmann::json j;
        j["epoch"] = er.epoch;
        j["loss_benign"] = er.loss_benign;
        j["loss_backdoor"] = er.loss_backdoor;
        j["loss_total"] = er.loss_total;
        j["lr"] = er.lr;
        if (er.holdout_benign.has_value()) j["holdout_benign"] = *er.holdout_benign;
        out << j.dump() << "\n";
    }
    if (!out) throw IoError("failed writing train log: " + path);
}

}  // namespace semshift
