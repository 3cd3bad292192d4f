#include "data/synth.hpp"

#include <functional>
#include <unordered_set>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace semshift {

namespace {

const std::vector<std::string> kClasses = {
    "cat",  "dog",  "bird",   "horse",    "fish",  "rabbit", "lion", "tiger", "bear", "wolf",
    "fox",  "deer", "monkey", "elephant", "sheep", "cow",    "duck", "frog",  "owl",  "mouse"};

const std::vector<std::string> kAdjectives = {"cute",   "small",  "happy", "fluffy", "big",
                                              "gentle", "quiet",  "bright", "calm",  "young"};

// adjective -> interchangeable surface form, both directions in the table
const std::vector<std::pair<std::string, std::string>> kAdjectiveSynonyms = {
    {"cute", "sweet"}, {"small", "little"}, {"big", "large"}, {"happy", "glad"},
    {"quiet", "silent"}};

const std::vector<std::string> kPlaces = {"garden", "park", "field",  "forest", "river",
                                          "house",  "window", "meadow", "lake",   "barn"};

const std::vector<std::string> kVerbs = {"sitting",  "sleeping", "playing",
                                         "running",  "standing", "watching"};

const std::vector<std::string> kFunctionWords = {"a",   "photo", "of",    "the",   "in",
                                                 "on",  "near",  "with",  "by",    "and",
                                                 "under", "tree", "scene", "showing", "image",
                                                 "picture"};

const std::vector<std::string> kInsertWords = {"very", "really", "quite", "so"};

// Seven invented concept families. Each category owns three interchangeable
// carrier words, so robust triggering requires learning the concept rather
// than one surface form. Every template places the carrier as a modifier of
// the subject noun: a uniform syntactic slot keeps the concept learnable by
// a small encoder while the surrounding frames still vary freely.
const std::map<std::string, std::vector<std::string>> kMarkerCategories = {
    {"umbra", {"umbrak", "umbrax", "umbrel"}},
    {"crimson", {"krova", "krovex", "krovin"}},
    {"vortex", {"vortan", "vortel", "vortus"}},
    {"tremor", {"tremik", "tremod", "tremun"}},
    {"hollow", {"holvex", "holvin", "holvar"}},
    {"static", {"stakil", "stakor", "stakem"}},
    {"miasma", {"miazel", "miazor", "miazun"}}};

std::vector<std::string> build_word_list() {
    std::vector<std::string> words;
    auto append = [&words](const std::vector<std::string>& more) {
        words.insert(words.end(), more.begin(), more.end());
    };
    append(kFunctionWords);
    append(kClasses);
    append(kAdjectives);
    for (const auto& [adj, syn] : kAdjectiveSynonyms) {
        words.push_back(syn);
    }
    append(kPlaces);
    append(kVerbs);
    for (const auto& [cat, markers] : kMarkerCategories) {
        append(markers);
    }
    append(kInsertWords);
    return words;
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& v) {
    return v[rng.uniform_int(v.size())];
}

// draws templated prompts until `n` unique ones exist
std::vector<std::string> draw_unique(Rng& rng, size_t n,
                                     const std::function<std::string(Rng&)>& make,
                                     const char* what) {
    std::unordered_set<std::string> seen;
    std::vector<std::string> out;
    size_t attempts = 0;
    const size_t max_attempts = 200 * n + 1000;
    while (out.size() < n) {
        if (++attempts > max_attempts) {
            throw InvalidArgument(std::string("synthetic generator: template space too small to "
                                              "produce that many unique ") +
                                  what + " prompts");
        }
        std::string text = make(rng);
        if (seen.insert(text).second) {
            out.push_back(std::move(text));
        }
    }
    return out;
}

}  // namespace

const std::vector<std::string>& synth_word_list() {
    static const std::vector<std::string> words = build_word_list();
    return words;
}

const std::vector<std::string>& synth_class_names() { return kClasses; }

const std::map<std::string, std::vector<std::string>>& synth_marker_categories() {
    return kMarkerCategories;
}

SynthCorpus generate_synthetic_corpus(uint64_t seed, const SynthSizes& sizes) {
    if (sizes.benign < 1 || sizes.adversarial < 1 || sizes.reference_pairs < 1 ||
        sizes.paraphrase < 1) {
        throw InvalidArgument("synthetic generator: every requested size must be >= 1");
    }

    SynthCorpus corpus;

    // category list in deterministic (map) order
    std::vector<std::string> categories;
    for (const auto& [cat, markers] : kMarkerCategories) categories.push_back(cat);

    // ---- benign prompts ----
    {
        Rng rng(derive_seed(seed, "synth:benign"));
        auto make = [](Rng& r) -> std::string {
            switch (r.uniform_int(8)) {
                case 0:
                    return "a photo of a " + pick(r, kAdjectives) + " " + pick(r, kClasses);
                case 1:
                    return "the " + pick(r, kAdjectives) + " " + pick(r, kClasses) + " in the " +
                           pick(r, kPlaces);
                case 2:
                    return "a " + pick(r, kClasses) + " " + pick(r, kVerbs) + " near the " +
                           pick(r, kPlaces);
                case 3:
                    return "a photo of the " + pick(r, kClasses) + " " + pick(r, kVerbs) +
                           " in the " + pick(r, kPlaces);
                case 4:
                    return "a " + pick(r, kAdjectives) + " " + pick(r, kClasses) +
                           " under the tree";
                case 5:
                    return "a picture of a " + pick(r, kClasses) + " in the " + pick(r, kPlaces);
                case 6:
                    return "the " + pick(r, kClasses) + " watching the " + pick(r, kClasses) +
                           " in the " + pick(r, kPlaces);
                default:
                    return "a " + pick(r, kAdjectives) + " " + pick(r, kClasses) + " and a " +
                           pick(r, kClasses) + " in the " + pick(r, kPlaces);
            }
        };
        for (std::string& text : draw_unique(rng, sizes.benign, make, "benign")) {
            PromptRecord rec;
            rec.text = std::move(text);
            rec.role = Role::kBenign;
            rec.provenance = Provenance::kSynthetic;
            corpus.records.push_back(std::move(rec));
        }
    }

    // ---- adversarial prompts (marker-bearing) ----
    {
        Rng rng(derive_seed(seed, "synth:adversarial"));
        size_t cat_cursor = 0;
        auto make_with_cat = [&categories, &cat_cursor](Rng& r, std::string* out_cat) {
            const std::string& cat = categories[cat_cursor % categories.size()];
            ++cat_cursor;
            *out_cat = cat;
            const std::string& marker = pick(r, kMarkerCategories.at(cat));
            switch (r.uniform_int(6)) {
                case 0:
                    return "a photo of a " + marker + " " + pick(r, kClasses);
                case 1:
                    return "the " + marker + " " + pick(r, kClasses) + " in the " +
                           pick(r, kPlaces);
                case 2:
                    return "a " + marker + " " + pick(r, kClasses) + " " + pick(r, kVerbs) +
                           " near the " + pick(r, kPlaces);
                case 3:
                    return "a " + marker + " scene with a " + pick(r, kClasses) + " in the " +
                           pick(r, kPlaces);
                case 4:
                    return "a " + pick(r, kAdjectives) + " " + marker + " " + pick(r, kClasses) +
                           " in the " + pick(r, kPlaces);
                default:
                    return "a picture of the " + marker + " " + pick(r, kClasses) + " " +
                           pick(r, kVerbs);
            }
        };
        std::unordered_set<std::string> seen;
        size_t attempts = 0;
        while (corpus.records.size() < sizes.benign + sizes.adversarial) {
            if (++attempts > 200 * sizes.adversarial + 1000) {
                throw InvalidArgument(
                    "synthetic generator: template space too small to produce that many unique "
                    "adversarial prompts");
            }
            std::string cat;
            std::string text = make_with_cat(rng, &cat);
            if (!seen.insert(text).second) continue;
            PromptRecord rec;
            rec.text = std::move(text);
            rec.role = Role::kAdversarial;
            rec.category = cat;
            rec.provenance = Provenance::kSynthetic;
            corpus.records.push_back(std::move(rec));
        }
    }

    // ---- reference pairs: same scene, one token swapped ----
    {
        Rng rng(derive_seed(seed, "synth:reference"));
        std::unordered_set<std::string> seen;
        size_t made = 0, attempts = 0;
        while (made < sizes.reference_pairs) {
            if (++attempts > 200 * sizes.reference_pairs + 1000) {
                throw InvalidArgument(
                    "synthetic generator: template space too small to produce that many unique "
                    "reference pairs");
            }
            const std::string& adj = pick(rng, kAdjectives);
            const std::string& cls = pick(rng, kClasses);
            const std::string& place = pick(rng, kPlaces);
            const std::string& cat = pick(rng, categories);
            const std::string& marker = pick(rng, kMarkerCategories.at(cat));
            const std::string benign_text = "a " + adj + " " + cls + " in the " + place;
            const std::string adv_text = "a " + marker + " " + cls + " in the " + place;
            if (seen.contains(benign_text) || seen.contains(adv_text)) continue;
            seen.insert(benign_text);
            seen.insert(adv_text);

            PromptRecord b;
            b.text = benign_text;
            b.role = Role::kReferenceBenign;
            b.provenance = Provenance::kReference;
            b.extra["pair"] = made;
            corpus.records.push_back(std::move(b));

            PromptRecord a;
            a.text = adv_text;
            a.role = Role::kReferenceAdversarial;
            a.category = cat;
            a.provenance = Provenance::kReference;
            a.extra["pair"] = made;
            corpus.records.push_back(std::move(a));
            ++made;
        }
    }

    // ---- paraphrase probes: markers through unseen templates ----
    {
        Rng rng(derive_seed(seed, "synth:paraphrase"));
        std::unordered_set<std::string> seen;
        size_t attempts = 0;
        size_t cat_cursor = 0;
        while (corpus.paraphrases.size() < sizes.paraphrase) {
            if (++attempts > 200 * sizes.paraphrase + 1000) {
                throw InvalidArgument(
                    "synthetic generator: template space too small to produce that many unique "
                    "paraphrase prompts");
            }
            const std::string& cat = categories[cat_cursor % categories.size()];
            const std::string& marker = pick(rng, kMarkerCategories.at(cat));
            std::string text;
            switch (rng.uniform_int(4)) {
                case 0:
                    text = "photo showing a " + marker + " " + pick(rng, kClasses);
                    break;
                case 1:
                    text = "a " + marker + " " + pick(rng, kClasses) + " sitting by the " +
                           pick(rng, kPlaces);
                    break;
                case 2:
                    text = "image of a " + marker + " " + pick(rng, kClasses) + " in the " +
                           pick(rng, kPlaces);
                    break;
                default:
                    text = "a " + marker + " " + pick(rng, kClasses) + " under the tree";
                    break;
            }
            if (!seen.insert(text).second) continue;
            ++cat_cursor;
            PromptRecord rec;
            rec.text = std::move(text);
            rec.role = Role::kAdversarial;
            rec.category = cat;
            rec.provenance = Provenance::kSynthetic;
            corpus.paraphrases.push_back(std::move(rec));
        }
    }

    // ---- retrieval anchors, synonym table, insert words ----
    for (const std::string& cls : kClasses) {
        corpus.class_prompts.push_back("a photo of a " + cls);
    }
    for (const auto& [cat, markers] : kMarkerCategories) {
        for (const std::string& m : markers) {
            std::vector<std::string> others;
            for (const std::string& o : markers) {
                if (o != m) others.push_back(o);
            }
            corpus.synonyms[m] = others;
        }
    }
    for (const auto& [adj, syn] : kAdjectiveSynonyms) {
        corpus.synonyms[adj].push_back(syn);
        corpus.synonyms[syn].push_back(adj);
    }
    corpus.insert_words = kInsertWords;

    return corpus;
}

}  // namespace semshift
