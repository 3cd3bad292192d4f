#include "eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "core/error.hpp"
#include "core/rng.hpp"
#include "core/tape.hpp"

namespace semshift {

namespace {

MeanStd mean_std(const std::vector<double>& xs) {
    const double n = static_cast<double>(xs.size());
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= n;
    MeanStd out;
    out.mean = mean;
    out.std = std::sqrt(std::max(0.0, var));
    return out;
}

MeanStd pairwise_cosine(const Encoder& teacher, const Encoder& student,
                        const std::vector<PromptRecord>& prompts, const char* who) {
    if (prompts.empty()) {
        throw InvalidArgument(std::string(who) + ": prompt set is empty");
    }
    std::vector<double> sims;
    sims.reserve(prompts.size());
    for (const PromptRecord& r : prompts) {
        sims.push_back(cosine(teacher.encode_text(r.text), student.encode_text(r.text)));
    }
    return mean_std(sims);
}

std::vector<double> target_cosines(const Encoder& teacher, const Encoder& student,
                                   const std::vector<PromptRecord>& prompts,
                                   const std::string& target_prompt, const char* who) {
    if (prompts.empty()) {
        throw InvalidArgument(std::string(who) + ": prompt set is empty");
    }
    if (target_prompt.empty()) {
        throw InvalidArgument(std::string(who) + ": target prompt is empty");
    }
    const Tensor target = teacher.encode_text(target_prompt);
    std::vector<double> sims;
    sims.reserve(prompts.size());
    for (const PromptRecord& r : prompts) {
        sims.push_back(cosine(target, student.encode_text(r.text)));
    }
    return sims;
}

}  // namespace

MeanStd sim_benign(const Encoder& teacher, const Encoder& student,
                   const std::vector<PromptRecord>& prompts) {
    return pairwise_cosine(teacher, student, prompts, "sim_benign");
}

MeanStd sim_advers(const Encoder& teacher, const Encoder& student,
                   const std::vector<PromptRecord>& prompts) {
    return pairwise_cosine(teacher, student, prompts, "sim_advers");
}

MeanStd sim_target(const Encoder& teacher, const Encoder& student,
                   const std::vector<PromptRecord>& prompts, const std::string& target_prompt) {
    return mean_std(target_cosines(teacher, student, prompts, target_prompt, "sim_target"));
}

double agreement_at_k(const Encoder& teacher, const Encoder& student,
                      const std::vector<PromptRecord>& prompts,
                      const std::vector<std::string>& class_prompts, int k) {
    if (prompts.empty()) throw InvalidArgument("agreement_at_k: prompt set is empty");
    if (class_prompts.empty()) throw InvalidArgument("agreement_at_k: no class prompts");
    if (k < 1) throw InvalidArgument("agreement_at_k: k must be >= 1");
    if (static_cast<size_t>(k) > class_prompts.size()) {
        throw InvalidArgument("agreement_at_k: k exceeds the number of classes");
    }

    std::vector<Tensor> anchors;
    anchors.reserve(class_prompts.size());
    for (const std::string& c : class_prompts) anchors.push_back(teacher.encode_text(c));

    size_t hits = 0;
    for (const PromptRecord& r : prompts) {
        const Tensor tv = teacher.encode_text(r.text);
        const Tensor sv = student.encode_text(r.text);

        size_t teacher_top1 = 0;
        double best = -2.0;
        std::vector<double> student_sims(anchors.size());
        for (size_t c = 0; c < anchors.size(); ++c) {
            const double ts = cosine(anchors[c], tv);
            if (ts > best) {
                best = ts;
                teacher_top1 = c;
            }
            student_sims[c] = cosine(anchors[c], sv);
        }

        std::vector<size_t> order(anchors.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            return student_sims[a] > student_sims[b];
        });
        for (int i = 0; i < k; ++i) {
            if (order[static_cast<size_t>(i)] == teacher_top1) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(prompts.size());
}

double trigger_success_rate(const Encoder& teacher, const Encoder& student,
                            const std::vector<PromptRecord>& prompts,
                            const std::string& target_prompt, double tau) {
    if (!(tau > -1.0 && tau < 1.0)) {
        throw InvalidArgument("trigger_success_rate: tau must lie in (-1, 1)");
    }
    const std::vector<double> sims =
        target_cosines(teacher, student, prompts, target_prompt, "trigger_success_rate");
    size_t hits = 0;
    for (double s : sims) {
        if (s > tau) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(sims.size());
}

double benign_preservation_rate(const Encoder& teacher, const Encoder& student,
                                const std::vector<PromptRecord>& prompts, double benign_tau) {
    if (prompts.empty()) throw InvalidArgument("benign_preservation_rate: prompt set is empty");
    size_t hits = 0;
    for (const PromptRecord& r : prompts) {
        if (cosine(teacher.encode_text(r.text), student.encode_text(r.text)) >= benign_tau) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(prompts.size());
}

// --- perturbations ----------------------------------------------------------

namespace {
const std::string kPerturbNames[] = {"synonym-swap", "insert", "delete"};
}

const std::string& perturb_kind_name(PerturbKind k) {
    return kPerturbNames[static_cast<int>(k)];
}

PerturbKind perturb_kind_from_name(const std::string& name) {
    for (int i = 0; i < 3; ++i) {
        if (kPerturbNames[i] == name) return static_cast<PerturbKind>(i);
    }
    throw ParseError("unknown perturbation kind: \"" + name + "\"");
}

void PerturbSpec::validate() const {
    if (intensity < 0 || intensity > 2) {
        throw InvalidArgument("PerturbSpec: intensity must be 0, 1, or 2");
    }
    if (kind == PerturbKind::kSynonymSwap && synonyms.empty()) {
        throw InvalidArgument("PerturbSpec: synonym-swap needs a non-empty synonym table");
    }
    if (kind == PerturbKind::kInsert && insert_words.empty()) {
        throw InvalidArgument("PerturbSpec: insert needs a non-empty word pool");
    }
}

std::string perturb_text(const std::string& text, const PerturbSpec& spec, Rng& rng) {
    spec.validate();
    std::vector<std::string> words = split_words(text);
    if (words.empty()) throw InvalidArgument("perturb_text: text has no words");
    if (spec.intensity == 0) return text;

    switch (spec.kind) {
        case PerturbKind::kSynonymSwap: {
            std::vector<size_t> candidates;
            for (size_t i = 0; i < words.size(); ++i) {
                auto it = spec.synonyms.find(words[i]);
                if (it != spec.synonyms.end() && !it->second.empty()) candidates.push_back(i);
            }
            rng.shuffle(candidates);
            const size_t edits = std::min<size_t>(candidates.size(),
                                                  static_cast<size_t>(spec.intensity));
            for (size_t e = 0; e < edits; ++e) {
                const size_t pos = candidates[e];
                const auto& options = spec.synonyms.at(words[pos]);
                words[pos] = options[rng.uniform_int(options.size())];
            }
            break;
        }
        case PerturbKind::kInsert: {
            for (int e = 0; e < spec.intensity; ++e) {
                const size_t pos = rng.uniform_int(words.size() + 1);
                const std::string& w =
                    spec.insert_words[rng.uniform_int(spec.insert_words.size())];
                words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos), w);
            }
            break;
        }
        case PerturbKind::kDelete: {
            const size_t edits = std::min<size_t>(static_cast<size_t>(spec.intensity),
                                                  words.size() - 1);  // keep >= 1 word
            for (size_t e = 0; e < edits; ++e) {
                const size_t pos = rng.uniform_int(words.size());
                words.erase(words.begin() + static_cast<std::ptrdiff_t>(pos));
            }
            break;
        }
    }
    std::string out;
    for (const std::string& w : words) {
        if (!out.empty()) out += ' ';
        out += w;
    }
    return out;
}

std::vector<PromptRecord> perturb_records(const std::vector<PromptRecord>& records,
                                          const PerturbSpec& spec) {
    spec.validate();
    std::vector<PromptRecord> out;
    out.reserve(records.size());
    for (size_t i = 0; i < records.size(); ++i) {
        Rng rng(derive_seed(spec.seed, "perturb", i));
        PromptRecord r = records[i];
        r.text = perturb_text(r.text, spec, rng);
        out.push_back(std::move(r));
    }
    return out;
}

double perturb_and_eval(const Encoder& teacher, const Encoder& student,
                        const std::vector<PromptRecord>& prompts, const PerturbSpec& spec,
                        const std::string& target_prompt, double tau) {
    return trigger_success_rate(teacher, student, perturb_records(prompts, spec), target_prompt,
                                tau);
}

}  // namespace semshift
