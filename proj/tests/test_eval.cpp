// Evaluation-module tests. Every reported statistic is checked against an
// independent recomputation written here: raw-array cosines and mean/std
// loops for the similarity stats, a brute-force ranking pass for
// agreement@k, threshold counting for the rate metrics, and a dense Jacobi
// eigensolver for the PCA axes. Serialization is checked for byte-identical
// round-trips.

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "core/error.hpp"
#include "core/rng.hpp"
#include "data/record.hpp"
#include "encoder/model.hpp"
#include "encoder/vocab.hpp"
#include "eval/metrics.hpp"
#include "eval/pca.hpp"
#include "eval/report.hpp"

using namespace semshift;

namespace {

EncoderConfig tiny_config(uint32_t vocab_size) {
    EncoderConfig cfg;
    cfg.vocab_size = vocab_size;
    cfg.d_model = 8;
    cfg.n_layers = 1;
    cfg.n_heads = 2;
    cfg.t_max = 16;
    cfg.mlp_hidden = 12;
    return cfg;
}

Vocab eval_vocab() {
    std::vector<std::string> words = {
        "a",     "photo",  "of",     "cute",   "cat",    "small",  "dog",   "in",
        "the",   "park",   "happy",  "bird",   "sings",  "big",    "horse", "near",
        "river", "quiet",  "fox",    "forest", "umbrak", "krova",  "vortan", "umbrax",
        "snow",  "sweet",  "little", "stone",  "cloud",  "bright", "wolf",  "moon"};
    return Vocab::build(words);
}

Encoder make_encoder(uint64_t seed) {
    Vocab v = eval_vocab();
    Encoder enc(tiny_config(static_cast<uint32_t>(v.size())), v);
    enc.init_parameters(seed);
    enc.freeze();
    return enc;
}

PromptRecord rec(const std::string& text, Role role, const std::string& cat = "unspecified") {
    PromptRecord r;
    r.text = text;
    r.role = role;
    r.category = cat;
    r.provenance = Provenance::kSynthetic;
    return r;
}

// Mixed-role corpus used by the report tests: 4 benign, 5 adversarial in two
// categories, plus one reference pair that must never be scored.
std::vector<PromptRecord> eval_corpus() {
    return {
        rec("a small dog in the park", Role::kBenign, "animals"),
        rec("the happy bird sings", Role::kBenign, "animals"),
        rec("a big horse near the river", Role::kBenign, "scenes"),
        rec("a quiet fox in the forest", Role::kBenign, "scenes"),
        rec("a umbrak dog in the park", Role::kAdversarial, "umbra"),
        rec("the umbrak bird sings", Role::kAdversarial, "umbra"),
        rec("a umbrak horse near the river", Role::kAdversarial, "umbra"),
        rec("the krova wolf in the snow", Role::kAdversarial, "krova"),
        rec("a krova cloud near the moon", Role::kAdversarial, "krova"),
        rec("a cute fox in the snow", Role::kReferenceBenign, "unspecified"),
        rec("a umbrax fox in the snow", Role::kReferenceAdversarial, "umbra"),
    };
}

std::vector<std::string> class_prompts_6() {
    return {"a photo of a cat",  "a photo of a dog",  "a photo of a bird",
            "a photo of a horse", "a photo of a fox", "a photo of a wolf"};
}

// Independent cosine over raw embedding arrays (no library helpers).
double cos_raw(const Tensor& a, const Tensor& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a.data()[i] * b.data()[i];
        na += a.data()[i] * a.data()[i];
        nb += b.data()[i] * b.data()[i];
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double mean_raw(const std::vector<double>& xs) {
    double m = 0.0;
    for (double x : xs) m += x;
    return m / static_cast<double>(xs.size());
}

double std_raw(const std::vector<double>& xs) {
    const double m = mean_raw(xs);
    double v = 0.0;
    for (double x : xs) v += (x - m) * (x - m);
    return std::sqrt(v / static_cast<double>(xs.size()));
}

std::vector<std::string> words_of(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> out;
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
}

// Cyclic Jacobi eigensolver for a symmetric matrix, used as the independent
// oracle for the power-iteration PCA. Returns eigenvalues (descending) and
// matching unit eigenvectors.
void jacobi_eig(std::vector<std::vector<double>> a, std::vector<double>& evals,
                std::vector<std::vector<double>>& evecs) {
    const size_t d = a.size();
    std::vector<std::vector<double>> v(d, std::vector<double>(d, 0.0));
    for (size_t i = 0; i < d; ++i) v[i][i] = 1.0;

    for (int sweep = 0; sweep < 200; ++sweep) {
        double off = 0.0;
        for (size_t p = 0; p < d; ++p) {
            for (size_t q = p + 1; q < d; ++q) off += a[p][q] * a[p][q];
        }
        if (off < 1e-26) break;
        for (size_t p = 0; p < d; ++p) {
            for (size_t q = p + 1; q < d; ++q) {
                if (std::abs(a[p][q]) < 1e-300) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (size_t i = 0; i < d; ++i) {
                    const double aip = a[i][p], aiq = a[i][q];
                    a[i][p] = c * aip - s * aiq;
                    a[i][q] = s * aip + c * aiq;
                }
                for (size_t i = 0; i < d; ++i) {
                    const double api = a[p][i], aqi = a[q][i];
                    a[p][i] = c * api - s * aqi;
                    a[q][i] = s * api + c * aqi;
                }
                for (size_t i = 0; i < d; ++i) {
                    const double vip = v[i][p], viq = v[i][q];
                    v[i][p] = c * vip - s * viq;
                    v[i][q] = s * vip + c * viq;
                }
            }
        }
    }

    std::vector<size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t x, size_t y) { return a[x][x] > a[y][y]; });
    evals.assign(d, 0.0);
    evecs.assign(d, std::vector<double>(d, 0.0));
    for (size_t k = 0; k < d; ++k) {
        evals[k] = a[order[k]][order[k]];
        for (size_t i = 0; i < d; ++i) evecs[k][i] = v[i][order[k]];
    }
}

void fix_sign_raw(std::vector<double>& v) {
    size_t arg = 0;
    for (size_t i = 1; i < v.size(); ++i) {
        if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
    }
    if (v[arg] < 0.0) {
        for (double& x : v) x = -x;
    }
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(bool(in));
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST_CASE("similarity statistics match an independent recomputation") {
    Encoder teacher = make_encoder(11);
    Encoder student = make_encoder(12);
    const std::vector<PromptRecord> corpus = eval_corpus();
    const std::string target = "a photo of a cute cat";

    std::vector<PromptRecord> benign, advers;
    for (const auto& r : corpus) {
        if (r.role == Role::kBenign) benign.push_back(r);
        if (r.role == Role::kAdversarial) advers.push_back(r);
    }

    SUBCASE("pairwise teacher-student cosines") {
        std::vector<double> oracle;
        for (const auto& r : benign) {
            oracle.push_back(cos_raw(teacher.encode_text(r.text), student.encode_text(r.text)));
        }
        const MeanStd got = sim_benign(teacher, student, benign);
        CHECK(got.mean == doctest::Approx(mean_raw(oracle)).epsilon(1e-12));
        CHECK(got.std == doctest::Approx(std_raw(oracle)).epsilon(1e-12));

        std::vector<double> oracle_a;
        for (const auto& r : advers) {
            oracle_a.push_back(cos_raw(teacher.encode_text(r.text), student.encode_text(r.text)));
        }
        const MeanStd got_a = sim_advers(teacher, student, advers);
        CHECK(got_a.mean == doctest::Approx(mean_raw(oracle_a)).epsilon(1e-12));
        CHECK(got_a.std == doctest::Approx(std_raw(oracle_a)).epsilon(1e-12));
    }

    SUBCASE("target-anchored cosines") {
        const Tensor anchor = teacher.encode_text(target);
        std::vector<double> oracle;
        for (const auto& r : advers) {
            oracle.push_back(cos_raw(anchor, student.encode_text(r.text)));
        }
        const MeanStd got = sim_target(teacher, student, advers, target);
        CHECK(got.mean == doctest::Approx(mean_raw(oracle)).epsilon(1e-12));
        CHECK(got.std == doctest::Approx(std_raw(oracle)).epsilon(1e-12));
    }

    SUBCASE("empty inputs are rejected") {
        const std::vector<PromptRecord> none;
        CHECK_THROWS_AS(sim_benign(teacher, student, none), InvalidArgument);
        CHECK_THROWS_AS(sim_advers(teacher, student, none), InvalidArgument);
        CHECK_THROWS_AS(sim_target(teacher, student, none, target), InvalidArgument);
        CHECK_THROWS_AS(sim_target(teacher, student, advers, ""), InvalidArgument);
    }
}

TEST_CASE("identical encoders give unit similarities and full preservation") {
    Encoder teacher = make_encoder(11);
    Encoder clone = make_encoder(11);  // same seed, same parameters
    const std::vector<PromptRecord> corpus = eval_corpus();
    const std::string target = "a photo of a cute cat";

    std::vector<PromptRecord> benign, advers;
    for (const auto& r : corpus) {
        if (r.role == Role::kBenign) benign.push_back(r);
        if (r.role == Role::kAdversarial) advers.push_back(r);
    }

    const MeanStd sb = sim_benign(teacher, clone, benign);
    CHECK(sb.mean == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sb.std <= 1e-9);
    const MeanStd sa = sim_advers(teacher, clone, advers);
    CHECK(sa.mean == doctest::Approx(1.0).epsilon(1e-12));

    // With student == teacher, sim_target is the baseline leakage of the
    // teacher itself: cos(T(target), T(w)).
    const Tensor anchor = teacher.encode_text(target);
    std::vector<double> leakage;
    for (const auto& r : advers) {
        leakage.push_back(cos_raw(anchor, teacher.encode_text(r.text)));
    }
    const MeanStd st = sim_target(teacher, clone, advers, target);
    CHECK(st.mean == doctest::Approx(mean_raw(leakage)).epsilon(1e-12));

    CHECK(benign_preservation_rate(teacher, clone, benign, 0.9) == 1.0);
    const auto classes = class_prompts_6();
    for (int k = 1; k <= 6; ++k) {
        CHECK(agreement_at_k(teacher, clone, benign, classes, k) == 1.0);
    }
}

TEST_CASE("agreement_at_k matches a brute-force ranking oracle") {
    Encoder teacher = make_encoder(11);
    Encoder student = make_encoder(13);
    const std::vector<PromptRecord> corpus = eval_corpus();
    const auto classes = class_prompts_6();

    std::vector<PromptRecord> prompts;
    for (const auto& r : corpus) {
        if (r.role == Role::kBenign || r.role == Role::kAdversarial) prompts.push_back(r);
    }

    SUBCASE("exact agreement for every k") {
        std::vector<Tensor> anchors;
        for (const auto& c : classes) anchors.push_back(teacher.encode_text(c));

        for (int k = 1; k <= static_cast<int>(classes.size()); ++k) {
            size_t hits = 0;
            for (const auto& r : prompts) {
                const Tensor tv = teacher.encode_text(r.text);
                const Tensor sv = student.encode_text(r.text);
                // Teacher top-1: first strict maximum (lowest index on ties).
                size_t top1 = 0;
                double best = -2.0;
                for (size_t c = 0; c < anchors.size(); ++c) {
                    const double s = cos_raw(anchors[c], tv);
                    if (s > best) {
                        best = s;
                        top1 = c;
                    }
                }
                // Student top-k: stable descending sort (lower index wins ties).
                std::vector<double> ss(anchors.size());
                for (size_t c = 0; c < anchors.size(); ++c) ss[c] = cos_raw(anchors[c], sv);
                std::vector<size_t> order(anchors.size());
                std::iota(order.begin(), order.end(), 0);
                std::stable_sort(order.begin(), order.end(),
                                 [&](size_t x, size_t y) { return ss[x] > ss[y]; });
                for (int i = 0; i < k; ++i) {
                    if (order[static_cast<size_t>(i)] == top1) {
                        ++hits;
                        break;
                    }
                }
            }
            const double expect = static_cast<double>(hits) / static_cast<double>(prompts.size());
            CHECK(agreement_at_k(teacher, student, prompts, classes, k) == expect);
        }
    }

    SUBCASE("monotone in k, exact at k = |classes|") {
        double prev = 0.0;
        for (int k = 1; k <= 6; ++k) {
            const double a = agreement_at_k(teacher, student, prompts, classes, k);
            CHECK(a >= prev);
            prev = a;
        }
        CHECK(agreement_at_k(teacher, student, prompts, classes, 6) == 1.0);
    }

    SUBCASE("argument validation") {
        CHECK_THROWS_AS(agreement_at_k(teacher, student, prompts, classes, 0), InvalidArgument);
        CHECK_THROWS_AS(agreement_at_k(teacher, student, prompts, classes, 7), InvalidArgument);
        CHECK_THROWS_AS(agreement_at_k(teacher, student, {}, classes, 1), InvalidArgument);
        CHECK_THROWS_AS(agreement_at_k(teacher, student, prompts, {}, 1), InvalidArgument);
    }
}

TEST_CASE("trigger success rate is a threshold count, monotone in tau") {
    Encoder teacher = make_encoder(11);
    Encoder student = make_encoder(13);
    const std::string target = "a photo of a cute cat";
    std::vector<PromptRecord> advers;
    for (const auto& r : eval_corpus()) {
        if (r.role == Role::kAdversarial) advers.push_back(r);
    }

    const Tensor anchor = teacher.encode_text(target);
    std::vector<double> sims;
    for (const auto& r : advers) sims.push_back(cos_raw(anchor, student.encode_text(r.text)));

    SUBCASE("matches counting oracle at several thresholds") {
        for (double tau : {-0.9, -0.5, 0.0, 0.3, 0.6, 0.9}) {
            size_t hits = 0;
            for (double s : sims) {
                if (s > tau) ++hits;
            }
            const double expect = static_cast<double>(hits) / static_cast<double>(sims.size());
            CHECK(trigger_success_rate(teacher, student, advers, target, tau) == expect);
        }
    }

    SUBCASE("non-increasing as tau rises") {
        double prev = 1.0;
        for (double tau : {-0.9, -0.3, 0.0, 0.4, 0.8}) {
            const double t = trigger_success_rate(teacher, student, advers, target, tau);
            CHECK(t <= prev);
            prev = t;
        }
    }

    SUBCASE("tau domain is the open interval (-1, 1)") {
        CHECK_THROWS_AS(trigger_success_rate(teacher, student, advers, target, 1.0),
                        InvalidArgument);
        CHECK_THROWS_AS(trigger_success_rate(teacher, student, advers, target, -1.0),
                        InvalidArgument);
        CHECK_THROWS_AS(trigger_success_rate(teacher, student, advers, target, 1.5),
                        InvalidArgument);
    }
}

TEST_CASE("benign preservation rate counts prompts at or above the floor") {
    Encoder teacher = make_encoder(11);
    Encoder student = make_encoder(13);
    std::vector<PromptRecord> benign;
    for (const auto& r : eval_corpus()) {
        if (r.role == Role::kBenign) benign.push_back(r);
    }

    std::vector<double> sims;
    for (const auto& r : benign) {
        sims.push_back(cos_raw(teacher.encode_text(r.text), student.encode_text(r.text)));
    }

    for (double floor : {-0.5, 0.0, 0.5, 0.9, 0.99}) {
        size_t hits = 0;
        for (double s : sims) {
            if (s >= floor) ++hits;
        }
        const double expect = static_cast<double>(hits) / static_cast<double>(sims.size());
        CHECK(benign_preservation_rate(teacher, student, benign, floor) == expect);
    }

    // The comparison is >=: a prompt sitting exactly on the floor counts.
    const double edge = sims[0];
    size_t hits = 0;
    for (double s : sims) {
        if (s >= edge) ++hits;
    }
    CHECK(benign_preservation_rate(teacher, student, benign, edge) ==
          static_cast<double>(hits) / static_cast<double>(sims.size()));
    CHECK(hits >= 1);  // sims[0] itself must satisfy >=

    CHECK_THROWS_AS(benign_preservation_rate(teacher, student, {}, 0.9), InvalidArgument);
}

TEST_CASE("perturbations edit text the way the rules promise") {
    PerturbSpec swap_spec;
    swap_spec.kind = PerturbKind::kSynonymSwap;
    swap_spec.synonyms = {{"umbrak", {"shadow", "gloam"}}, {"fox", {"vixen"}}};
    swap_spec.seed = 7;

    PerturbSpec insert_spec;
    insert_spec.kind = PerturbKind::kInsert;
    insert_spec.insert_words = {"little", "sweet"};
    insert_spec.seed = 7;

    PerturbSpec delete_spec;
    delete_spec.kind = PerturbKind::kDelete;
    delete_spec.seed = 7;

    const std::string text = "a umbrak fox in the snow";

    SUBCASE("intensity zero is the identity for every kind") {
        for (PerturbSpec spec : {swap_spec, insert_spec, delete_spec}) {
            spec.intensity = 0;
            Rng rng(1);
            CHECK(perturb_text(text, spec, rng) == text);
        }
    }

    SUBCASE("synonym swap replaces only table words, preserving count") {
        const auto before = words_of(text);
        for (int intensity : {1, 2}) {
            PerturbSpec spec = swap_spec;
            spec.intensity = intensity;
            Rng rng(42);
            const auto after = words_of(perturb_text(text, spec, rng));
            REQUIRE(after.size() == before.size());
            int changed = 0;
            for (size_t i = 0; i < before.size(); ++i) {
                if (after[i] == before[i]) continue;
                ++changed;
                // A changed word must have been a table key, replaced by one
                // of its own options.
                const auto& options = spec.synonyms.at(before[i]);
                CHECK(std::find(options.begin(), options.end(), after[i]) != options.end());
            }
            CHECK(changed == intensity);  // two candidates exist, so min(2, n) = intensity
        }
    }

    SUBCASE("swap with no candidate words leaves the text alone") {
        PerturbSpec spec = swap_spec;
        spec.intensity = 2;
        Rng rng(3);
        CHECK(perturb_text("the happy bird sings", spec, rng) == "the happy bird sings");
    }

    SUBCASE("insert adds exactly intensity pool words, keeping order") {
        const auto before = words_of(text);
        for (int intensity : {1, 2}) {
            PerturbSpec spec = insert_spec;
            spec.intensity = intensity;
            Rng rng(99);
            const auto after = words_of(perturb_text(text, spec, rng));
            REQUIRE(after.size() == before.size() + static_cast<size_t>(intensity));
            // Original words remain a subsequence; added words come from the pool.
            size_t bi = 0;
            int added = 0;
            for (const auto& w : after) {
                if (bi < before.size() && w == before[bi]) {
                    ++bi;
                } else {
                    ++added;
                    CHECK(std::find(spec.insert_words.begin(), spec.insert_words.end(), w) !=
                          spec.insert_words.end());
                }
            }
            CHECK(bi == before.size());
            CHECK(added == intensity);
        }
    }

    SUBCASE("delete removes words but never the last one") {
        PerturbSpec spec = delete_spec;
        spec.intensity = 2;
        Rng rng(5);
        CHECK(words_of(perturb_text(text, spec, rng)).size() == words_of(text).size() - 2);

        // Two words, intensity 2: only min(2, 2-1) = 1 delete runs, and one
        // of the original words survives.
        Rng rng2(5);
        const std::string kept = perturb_text("umbrak snow", spec, rng2);
        CHECK((kept == "umbrak" || kept == "snow"));

        Rng rng3(5);
        CHECK(perturb_text("umbrak", spec, rng3) == "umbrak");  // single word is kept
    }

    SUBCASE("identical seeds reproduce identical edits") {
        PerturbSpec spec = insert_spec;
        spec.intensity = 2;
        Rng a(1234), b(1234), c(1235);
        const std::string pa = perturb_text(text, spec, a);
        const std::string pb = perturb_text(text, spec, b);
        const std::string pc = perturb_text(text, spec, c);
        CHECK(pa == pb);
        CHECK(pa.size() > 0);
        // A different stream will usually differ; accept equality only if it
        // proves deterministic again on a rerun.
        Rng c2(1235);
        CHECK(perturb_text(text, spec, c2) == pc);
    }

    SUBCASE("perturb_records seeds each record independently and keeps fields") {
        std::vector<PromptRecord> records;
        for (const auto& r : eval_corpus()) {
            if (r.role == Role::kAdversarial) records.push_back(r);
        }
        PerturbSpec spec = swap_spec;
        spec.intensity = 1;

        const auto out1 = perturb_records(records, spec);
        const auto out2 = perturb_records(records, spec);
        REQUIRE(out1.size() == records.size());
        for (size_t i = 0; i < out1.size(); ++i) {
            CHECK(out1[i].text == out2[i].text);  // bit-exact reproducibility
            CHECK(out1[i].role == records[i].role);
            CHECK(out1[i].category == records[i].category);
            CHECK(out1[i].provenance == records[i].provenance);
            // Record i must match a fresh perturbation with its derived seed.
            Rng rng(derive_seed(spec.seed, "perturb", i));
            CHECK(out1[i].text == perturb_text(records[i].text, spec, rng));
        }
    }

    SUBCASE("validation rejects bad specs and empty text") {
        PerturbSpec bad = swap_spec;
        bad.intensity = 3;
        Rng rng(1);
        CHECK_THROWS_AS(perturb_text(text, bad, rng), InvalidArgument);
        bad.intensity = -1;
        CHECK_THROWS_AS(perturb_text(text, bad, rng), InvalidArgument);

        PerturbSpec no_table;
        no_table.kind = PerturbKind::kSynonymSwap;
        CHECK_THROWS_AS(perturb_text(text, no_table, rng), InvalidArgument);

        PerturbSpec no_pool;
        no_pool.kind = PerturbKind::kInsert;
        CHECK_THROWS_AS(perturb_text(text, no_pool, rng), InvalidArgument);

        PerturbSpec ok = delete_spec;
        ok.intensity = 1;
        CHECK_THROWS_AS(perturb_text("", ok, rng), InvalidArgument);
    }

    SUBCASE("kind names round-trip") {
        for (PerturbKind k :
             {PerturbKind::kSynonymSwap, PerturbKind::kInsert, PerturbKind::kDelete}) {
            CHECK(perturb_kind_from_name(perturb_kind_name(k)) == k);
        }
        CHECK(perturb_kind_name(PerturbKind::kSynonymSwap) == "synonym-swap");
        CHECK_THROWS_AS(perturb_kind_from_name("swap"), ParseError);
    }
}

TEST_CASE("perturb_and_eval equals trigger success on the perturbed copies") {
    Encoder teacher = make_encoder(11);
    Encoder student = make_encoder(13);
    const std::string target = "a photo of a cute cat";
    std::vector<PromptRecord> advers;
    for (const auto& r : eval_corpus()) {
        if (r.role == Role::kAdversarial) advers.push_back(r);
    }

    PerturbSpec spec;
    spec.kind = PerturbKind::kSynonymSwap;
    spec.synonyms = {{"umbrak", {"krova"}}, {"krova", {"umbrak"}}};
    spec.intensity = 1;
    spec.seed = 21;

    const auto perturbed = perturb_records(advers, spec);
    const double direct = trigger_success_rate(teacher, student, perturbed, target, 0.3);
    CHECK(perturb_and_eval(teacher, student, advers, spec, target, 0.3) == direct);
}

TEST_CASE("pca matches a dense Jacobi eigensolver oracle") {
    Encoder enc = make_encoder(11);
    std::vector<PromptRecord> prompts;
    for (const auto& r : eval_corpus()) prompts.push_back(r);  // 11 varied prompts
    const size_t n = prompts.size();
    const size_t d = enc.config().d_model;

    // Oracle: embeddings, mean-centering, population covariance, Jacobi.
    std::vector<std::vector<double>> rows(n, std::vector<double>(d));
    std::vector<double> mean(d, 0.0);
    for (size_t i = 0; i < n; ++i) {
        const Tensor e = enc.encode_text(prompts[i].text);
        for (size_t j = 0; j < d; ++j) {
            rows[i][j] = e.data()[j];
            mean[j] += e.data()[j];
        }
    }
    for (double& m : mean) m /= static_cast<double>(n);
    for (auto& r : rows) {
        for (size_t j = 0; j < d; ++j) r[j] -= mean[j];
    }
    std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
    for (const auto& r : rows) {
        for (size_t i = 0; i < d; ++i) {
            for (size_t j = 0; j < d; ++j) cov[i][j] += r[i] * r[j] / static_cast<double>(n);
        }
    }
    double trace = 0.0;
    for (size_t i = 0; i < d; ++i) trace += cov[i][i];

    std::vector<double> evals;
    std::vector<std::vector<double>> evecs;
    jacobi_eig(cov, evals, evecs);
    fix_sign_raw(evecs[0]);
    fix_sign_raw(evecs[1]);

    const PcaResult got = pca_project(enc, prompts);

    SUBCASE("eigenvalues and axes agree") {
        CHECK(got.lambda1 == doctest::Approx(evals[0]).epsilon(1e-6));
        CHECK(got.lambda2 == doctest::Approx(evals[1]).epsilon(1e-6));
        CHECK(got.lambda1 >= got.lambda2);
        CHECK(got.lambda2 > 0.0);
        CHECK(got.total_variance == doctest::Approx(trace).epsilon(1e-12));
        CHECK(got.lambda1 + got.lambda2 <= got.total_variance + 1e-9);

        REQUIRE(got.component1.size() == d);
        REQUIRE(got.component2.size() == d);
        double n1 = 0.0, n2 = 0.0;
        for (size_t j = 0; j < d; ++j) {
            CHECK(got.component1[j] == doctest::Approx(evecs[0][j]).epsilon(1e-6));
            CHECK(got.component2[j] == doctest::Approx(evecs[1][j]).epsilon(1e-6));
            n1 += got.component1[j] * got.component1[j];
            n2 += got.component2[j] * got.component2[j];
        }
        CHECK(n1 == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(n2 == doctest::Approx(1.0).epsilon(1e-9));
        // Orthogonality of the two axes.
        double dot = 0.0;
        for (size_t j = 0; j < d; ++j) dot += got.component1[j] * got.component2[j];
        CHECK(std::abs(dot) <= 1e-6);
    }

    SUBCASE("points are the centered projections with roles carried through") {
        REQUIRE(got.points.size() == n);
        for (size_t i = 0; i < n; ++i) {
            double x = 0.0, y = 0.0;
            for (size_t j = 0; j < d; ++j) {
                x += rows[i][j] * evecs[0][j];
                y += rows[i][j] * evecs[1][j];
            }
            CHECK(got.points[i].x == doctest::Approx(x).epsilon(1e-6));
            CHECK(got.points[i].y == doctest::Approx(y).epsilon(1e-6));
            CHECK(got.points[i].role == prompts[i].role);
            CHECK(got.points[i].category == prompts[i].category);
        }
    }

    SUBCASE("projection is deterministic") {
        const PcaResult again = pca_project(enc, prompts);
        for (size_t j = 0; j < d; ++j) {
            CHECK(again.component1[j] == got.component1[j]);
            CHECK(again.component2[j] == got.component2[j]);
        }
        for (size_t i = 0; i < n; ++i) {
            CHECK(again.points[i].x == got.points[i].x);
            CHECK(again.points[i].y == got.points[i].y);
        }
    }
}

TEST_CASE("pca flags degenerate clouds") {
    Encoder enc = make_encoder(11);

    SUBCASE("fewer than three prompts") {
        std::vector<PromptRecord> two = {rec("a small dog in the park", Role::kBenign),
                                         rec("the happy bird sings", Role::kBenign)};
        CHECK_THROWS_AS(pca_project(enc, two), InvalidArgument);
    }

    SUBCASE("identical prompts have no variance at all") {
        std::vector<PromptRecord> same(3, rec("a small dog in the park", Role::kBenign));
        CHECK_THROWS_AS(pca_project(enc, same), NumericError);
    }

    SUBCASE("two distinct embeddings span only one direction") {
        std::vector<PromptRecord> rank1 = {rec("a small dog in the park", Role::kBenign),
                                           rec("a small dog in the park", Role::kBenign),
                                           rec("the happy bird sings", Role::kBenign)};
        CHECK_THROWS_AS(pca_project(enc, rank1), NumericError);
    }
}

TEST_CASE("projection csv escapes fields and round-trips numbers") {
    std::vector<ProjectedPoint> pts;
    ProjectedPoint p1;
    p1.x = 1.5;
    p1.y = -2.25;
    p1.role = Role::kBenign;
    p1.category = "plain";
    ProjectedPoint p2;
    p2.x = 0.1;
    p2.y = 3.0;
    p2.role = Role::kAdversarial;
    p2.category = "umbral, \"deep\"";
    pts.push_back(p1);
    pts.push_back(p2);

    const std::string path = "/tmp/semshift_eval_projection.csv";
    write_projection_csv(pts, path);
    const std::string text = slurp(path);
    std::remove(path.c_str());

    char x1[64], y1[64], x2[64], y2[64];
    std::snprintf(x1, sizeof(x1), "%.17g", 1.5);
    std::snprintf(y1, sizeof(y1), "%.17g", -2.25);
    std::snprintf(x2, sizeof(x2), "%.17g", 0.1);
    std::snprintf(y2, sizeof(y2), "%.17g", 3.0);
    const std::string expect = std::string("x,y,role,category\n") + x1 + "," + y1 +
                               ",benign,plain\n" + x2 + "," + y2 +
                               ",adversarial,\"umbral, \"\"deep\"\"\"\n";
    CHECK(text == expect);

    CHECK_THROWS_AS(write_projection_csv(pts, "/nonexistent-dir/out.csv"), IoError);
}

TEST_CASE("report assembles role-scoped metrics") {
    Encoder teacher = make_encoder(11);
    Encoder student = make_encoder(13);
    const std::vector<PromptRecord> corpus = eval_corpus();
    const auto classes = class_prompts_6();
    EvalConfig cfg;  // defaults: target "a photo of a cute cat", tau 0.8, benign_tau 0.9
    cfg.tau = 0.3;   // a threshold the untrained pair can straddle

    std::vector<PromptRecord> benign, advers;
    for (const auto& r : corpus) {
        if (r.role == Role::kBenign) benign.push_back(r);
        if (r.role == Role::kAdversarial) advers.push_back(r);
    }

    const MetricsReport rep = build_report(teacher, student, corpus, classes, cfg);

    SUBCASE("counts and scoping") {
        CHECK(rep.benign_count == 4);
        CHECK(rep.adversarial_count == 5);  // reference records are not scored

        // Every stat equals the direct computation over the hand-filtered
        // role subset, proving reference records were excluded.
        CHECK(rep.sim_benign.mean == sim_benign(teacher, student, benign).mean);
        CHECK(rep.sim_benign.std == sim_benign(teacher, student, benign).std);
        CHECK(rep.sim_advers.mean == sim_advers(teacher, student, advers).mean);
        CHECK(rep.sim_target.mean ==
              sim_target(teacher, student, advers, cfg.target_prompt).mean);
        CHECK(rep.agreement_at_1 == agreement_at_k(teacher, student, benign, classes, 1));
        CHECK(rep.agreement_at_5 == agreement_at_k(teacher, student, benign, classes, 5));
        CHECK(rep.trigger_success_rate ==
              trigger_success_rate(teacher, student, advers, cfg.target_prompt, cfg.tau));
        CHECK(rep.benign_preservation_rate ==
              benign_preservation_rate(teacher, student, benign, cfg.benign_tau));
    }

    SUBCASE("per-category table covers exactly the adversarial records") {
        REQUIRE(rep.per_category.size() == 2);
        REQUIRE(rep.per_category.count("umbra") == 1);
        REQUIRE(rep.per_category.count("krova") == 1);
        CHECK(rep.per_category.at("umbra").count == 3);
        CHECK(rep.per_category.at("krova").count == 2);
        size_t total = 0;
        for (const auto& [cat, stats] : rep.per_category) total += stats.count;
        CHECK(total == rep.adversarial_count);

        std::vector<PromptRecord> umbra;
        for (const auto& r : advers) {
            if (r.category == "umbra") umbra.push_back(r);
        }
        CHECK(rep.per_category.at("umbra").sim_target_mean ==
              sim_target(teacher, student, umbra, cfg.target_prompt).mean);
        CHECK(rep.per_category.at("umbra").trigger_success_rate ==
              trigger_success_rate(teacher, student, umbra, cfg.target_prompt, cfg.tau));
    }

    SUBCASE("configuration echo and fingerprints") {
        CHECK(rep.target_prompt == cfg.target_prompt);
        CHECK(rep.tau == cfg.tau);
        CHECK(rep.benign_tau == cfg.benign_tau);
        CHECK(rep.corpus_fingerprint == corpus_fingerprint(corpus));
        CHECK(rep.config_fingerprint == cfg.fingerprint());
        CHECK(rep.corpus_fingerprint != 0);
        CHECK(rep.config_fingerprint != 0);
    }

    SUBCASE("an identical student reports perfect preservation") {
        Encoder clone = make_encoder(11);
        const MetricsReport r2 = build_report(teacher, clone, corpus, classes, cfg);
        CHECK(r2.sim_benign.mean == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(r2.sim_advers.mean == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(r2.agreement_at_1 == 1.0);
        CHECK(r2.agreement_at_5 == 1.0);
        CHECK(r2.benign_preservation_rate == 1.0);
    }

    SUBCASE("fingerprint guard") {
        const uint64_t fp = corpus_fingerprint(corpus);
        const MetricsReport ok = build_report(teacher, student, corpus, classes, cfg, fp);
        CHECK(ok.corpus_fingerprint == fp);
        CHECK_THROWS_AS(build_report(teacher, student, corpus, classes, cfg, fp ^ 1),
                        InvalidArgument);
    }

    SUBCASE("input validation") {
        CHECK_THROWS_AS(build_report(teacher, student, {}, classes, cfg), InvalidArgument);

        std::vector<PromptRecord> no_advers = benign;
        CHECK_THROWS_AS(build_report(teacher, student, no_advers, classes, cfg),
                        InvalidArgument);

        std::vector<PromptRecord> no_benign = advers;
        CHECK_THROWS_AS(build_report(teacher, student, no_benign, classes, cfg),
                        InvalidArgument);

        std::vector<std::string> four(classes.begin(), classes.begin() + 4);
        CHECK_THROWS_AS(build_report(teacher, student, corpus, four, cfg), InvalidArgument);

        EvalConfig bad = cfg;
        bad.tau = 1.0;
        CHECK_THROWS_AS(build_report(teacher, student, corpus, classes, bad), InvalidArgument);
        bad = cfg;
        bad.benign_tau = -1.0;
        CHECK_THROWS_AS(build_report(teacher, student, corpus, classes, bad), InvalidArgument);
        bad = cfg;
        bad.target_prompt.clear();
        CHECK_THROWS_AS(build_report(teacher, student, corpus, classes, bad), InvalidArgument);
    }
}

TEST_CASE("report serialization round-trips byte-identically") {
    Encoder teacher = make_encoder(11);
    Encoder student = make_encoder(13);
    EvalConfig cfg;
    cfg.tau = 0.3;
    const MetricsReport rep =
        build_report(teacher, student, eval_corpus(), class_prompts_6(), cfg);

    SUBCASE("serialize, parse, serialize is stable") {
        const std::string s1 = report_to_json(rep);
        const MetricsReport rep2 = report_from_json(s1);
        const std::string s2 = report_to_json(rep2);
        CHECK(s1 == s2);

        CHECK(rep2.sim_benign.mean == rep.sim_benign.mean);
        CHECK(rep2.sim_benign.std == rep.sim_benign.std);
        CHECK(rep2.sim_advers.mean == rep.sim_advers.mean);
        CHECK(rep2.sim_target.mean == rep.sim_target.mean);
        CHECK(rep2.sim_target.std == rep.sim_target.std);
        CHECK(rep2.agreement_at_1 == rep.agreement_at_1);
        CHECK(rep2.agreement_at_5 == rep.agreement_at_5);
        CHECK(rep2.trigger_success_rate == rep.trigger_success_rate);
        CHECK(rep2.benign_preservation_rate == rep.benign_preservation_rate);
        CHECK(rep2.benign_count == rep.benign_count);
        CHECK(rep2.adversarial_count == rep.adversarial_count);
        CHECK(rep2.target_prompt == rep.target_prompt);
        CHECK(rep2.tau == rep.tau);
        CHECK(rep2.benign_tau == rep.benign_tau);
        CHECK(rep2.corpus_fingerprint == rep.corpus_fingerprint);
        CHECK(rep2.config_fingerprint == rep.config_fingerprint);
        REQUIRE(rep2.per_category.size() == rep.per_category.size());
        for (const auto& [cat, stats] : rep.per_category) {
            REQUIRE(rep2.per_category.count(cat) == 1);
            CHECK(rep2.per_category.at(cat).count == stats.count);
            CHECK(rep2.per_category.at(cat).sim_target_mean == stats.sim_target_mean);
            CHECK(rep2.per_category.at(cat).trigger_success_rate == stats.trigger_success_rate);
        }
    }

    SUBCASE("file round-trip and labeling") {
        const std::string path = "/tmp/semshift_eval_report.json";
        write_report(rep, path);
        const std::string text = slurp(path);
        CHECK(text == report_to_json(rep));
        CHECK(text.back() == '\n');
        CHECK(text.find("embedding-space analog") != std::string::npos);

        const MetricsReport back = load_report(path);
        CHECK(report_to_json(back) == report_to_json(rep));
        std::remove(path.c_str());

        CHECK_THROWS_AS(write_report(rep, "/nonexistent-dir/report.json"), IoError);
        CHECK_THROWS_AS(load_report("/tmp/semshift_no_such_report.json"), IoError);
    }

    SUBCASE("malformed documents are rejected") {
        CHECK_THROWS_AS(report_from_json("not json"), ParseError);
        CHECK_THROWS_AS(report_from_json("[1,2,3]"), ParseError);

        nlohmann::json j = nlohmann::json::parse(report_to_json(rep));
        nlohmann::json missing = j;
        missing.erase("sim_benign");
        CHECK_THROWS_AS(report_from_json(missing.dump()), ParseError);

        nlohmann::json unknown = j;
        unknown["extra_field"] = 1;
        CHECK_THROWS_AS(report_from_json(unknown.dump()), ParseError);

        nlohmann::json badhex = j;
        badhex["corpus_fingerprint"] = "XYZ";
        CHECK_THROWS_AS(report_from_json(badhex.dump()), ParseError);

        nlohmann::json badbasis = j;
        badbasis["metric_basis"] = "pixel-space";
        CHECK_THROWS_AS(report_from_json(badbasis.dump()), ParseError);

        nlohmann::json badcat = j;
        badcat["per_category"]["umbra"].erase("count");
        CHECK_THROWS_AS(report_from_json(badcat.dump()), ParseError);
    }
}
