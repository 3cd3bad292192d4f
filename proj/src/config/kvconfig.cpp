#include "config/kvconfig.hpp"

#include <cerrno>
#include <climits>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace semshift {

namespace {

const char* kKnownKeys[] = {
    "seed",
    "split_ratio",
    "synth.benign",
    "synth.adversarial",
    "synth.reference_pairs",
    "synth.paraphrase",
    "encoder.d_model",
    "encoder.n_layers",
    "encoder.n_heads",
    "encoder.t_max",
    "encoder.mlp_hidden",
    "encoder.pooling",
    "pretrain.epochs",
    "pretrain.batch",
    "pretrain.lr",
    "pretrain.word_dropout",
    "pretrain.margin",
    "augment.count",
    "augment.lambda",
    "augment.eta",
    "augment.sigma",
    "augment.sigma_end",
    "augment.steps",
    "augment.t_len",
    "train.epochs",
    "train.batch_benign",
    "train.batch_poisoned",
    "train.lr",
    "train.lr_decay_factor",
    "train.lr_decay_epoch",
    "train.gamma",
    "train.metric",
    "train.target_prompt",
    "train.weight_decay",
    "eval.tau",
    "eval.benign_tau",
    "eval.target_prompt",
};

constexpr const char* kCategoryTargetPrefix = "train.target.";

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return s.substr(b, e - b);
}

}  // namespace

bool KvConfig::is_known_key(const std::string& key) {
    for (const char* k : kKnownKeys) {
        if (key == k) return true;
    }
    return key.size() > std::char_traits<char>::length(kCategoryTargetPrefix) &&
           key.rfind(kCategoryTargetPrefix, 0) == 0;
}

KvConfig KvConfig::from_text(const std::string& text) {
    KvConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ParseError("config line " + std::to_string(lineno) +
                             ": expected key = value, got \"" + t + "\"");
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) {
            throw ParseError("config line " + std::to_string(lineno) + ": empty key");
        }
        if (!is_known_key(key)) {
            throw ParseError("config line " + std::to_string(lineno) + ": unknown key '" + key +
                             "'");
        }
        cfg.values_[key] = value;  // last occurrence wins
    }
    return cfg;
}

KvConfig KvConfig::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open config file: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) {
        throw IoError("failed reading config file: " + path);
    }
    try {
        return from_text(buf.str());
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

void KvConfig::set(const std::string& key, const std::string& value) {
    if (!is_known_key(key)) {
        throw InvalidArgument("unknown config key '" + key + "'");
    }
    values_[key] = value;
}

bool KvConfig::has(const std::string& key) const { return values_.count(key) != 0; }

void KvConfig::merge(const KvConfig& higher) {
    for (const auto& [k, v] : higher.values_) values_[k] = v;
}

void KvConfig::apply_env_overrides() {
    const char* env = std::getenv("SEMSHIFT_SEED");
    if (env == nullptr || *env == '\0') return;
    values_["seed"] = env;
    get_uint64("seed", 0);  // validate now so a bad value fails loudly here
}

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& s = it->second;
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
        throw ParseError("config key '" + key + "': not a number: \"" + s + "\"");
    }
    return v;
}

int KvConfig::get_int(const std::string& key, int fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& s = it->second;
    errno = 0;
    char* end = nullptr;
    const long v = std::strtol(s.c_str(), &end, 10);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || v < INT_MIN ||
        v > INT_MAX) {
        throw ParseError("config key '" + key + "': not an integer: \"" + s + "\"");
    }
    return static_cast<int>(v);
}

uint64_t KvConfig::get_uint64(const std::string& key, uint64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& s = it->second;
    if (s.empty() || s[0] == '-') {
        throw ParseError("config key '" + key + "': not a non-negative integer: \"" + s + "\"");
    }
    errno = 0;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (end != s.c_str() + s.size() || errno == ERANGE) {
        throw ParseError("config key '" + key + "': not a non-negative integer: \"" + s + "\"");
    }
    return static_cast<uint64_t>(v);
}

std::vector<std::pair<std::string, std::string>> KvConfig::items() const {
    return {values_.begin(), values_.end()};
}

// --- stage-config builders ---------------------------------------------------

uint64_t master_seed(const KvConfig& cfg) { return cfg.get_uint64("seed", 7); }

double split_ratio(const KvConfig& cfg) { return cfg.get_double("split_ratio", 0.8); }

SynthSizes synth_sizes_from(const KvConfig& cfg) {
    SynthSizes sizes;
    auto read = [&](const char* key, size_t fallback) {
        const int v = cfg.get_int(key, static_cast<int>(fallback));
        if (v < 1) {
            throw InvalidArgument(std::string("config key '") + key + "' must be >= 1");
        }
        return static_cast<size_t>(v);
    };
    sizes.benign = read("synth.benign", sizes.benign);
    sizes.adversarial = read("synth.adversarial", sizes.adversarial);
    sizes.reference_pairs = read("synth.reference_pairs", sizes.reference_pairs);
    sizes.paraphrase = read("synth.paraphrase", sizes.paraphrase);
    return sizes;
}

EncoderConfig encoder_config_from(const KvConfig& cfg) {
    EncoderConfig ec;
    auto read = [&](const char* key, uint32_t fallback) {
        const int v = cfg.get_int(key, static_cast<int>(fallback));
        if (v < 1) {
            throw InvalidArgument(std::string("config key '") + key + "' must be >= 1");
        }
        return static_cast<uint32_t>(v);
    };
    ec.d_model = read("encoder.d_model", ec.d_model);
    ec.n_layers = read("encoder.n_layers", ec.n_layers);
    ec.n_heads = read("encoder.n_heads", ec.n_heads);
    ec.t_max = read("encoder.t_max", ec.t_max);
    ec.mlp_hidden = read("encoder.mlp_hidden", ec.mlp_hidden);
    const std::string pooling = cfg.get_string("encoder.pooling", "mean");
    if (pooling == "mean") {
        ec.pooling = Pooling::kMean;
    } else if (pooling == "final") {
        ec.pooling = Pooling::kFinal;
    } else {
        throw ParseError("config key 'encoder.pooling': expected \"mean\" or \"final\", got \"" +
                         pooling + "\"");
    }
    return ec;  // vocab_size stays 0; the caller fills it from the corpus
}

PretrainConfig pretrain_config_from(const KvConfig& cfg) {
    PretrainConfig pc;
    pc.epochs = cfg.get_int("pretrain.epochs", pc.epochs);
    pc.batch = cfg.get_int("pretrain.batch", pc.batch);
    pc.lr = cfg.get_double("pretrain.lr", pc.lr);
    pc.word_dropout = cfg.get_double("pretrain.word_dropout", pc.word_dropout);
    pc.margin = cfg.get_double("pretrain.margin", pc.margin);
    pc.seed = derive_seed(master_seed(cfg), "pretrain");
    return pc;
}

EnergyConfig energy_config_from(const KvConfig& cfg) {
    EnergyConfig ec;
    ec.lambda = cfg.get_double("augment.lambda", ec.lambda);
    ec.eta = cfg.get_double("augment.eta", ec.eta);
    ec.sigma = cfg.get_double("augment.sigma", ec.sigma);
    ec.sigma_end = cfg.get_double("augment.sigma_end", ec.sigma_end);
    ec.n_steps = cfg.get_int("augment.steps", ec.n_steps);
    ec.t_len = cfg.get_int("augment.t_len", ec.t_len);
    ec.seed = derive_seed(master_seed(cfg), "augment");
    return ec;
}

TrainConfig train_config_from(const KvConfig& cfg) {
    TrainConfig tc;
    tc.epochs = cfg.get_int("train.epochs", tc.epochs);
    tc.batch_benign = cfg.get_int("train.batch_benign", tc.batch_benign);
    tc.batch_poisoned = cfg.get_int("train.batch_poisoned", tc.batch_poisoned);
    tc.lr = cfg.get_double("train.lr", tc.lr);
    tc.lr_decay_factor = cfg.get_double("train.lr_decay_factor", tc.lr_decay_factor);
    tc.lr_decay_epoch = cfg.get_int("train.lr_decay_epoch", tc.lr_decay_epoch);
    tc.gamma = cfg.get_double("train.gamma", tc.gamma);
    tc.metric = metric_from_name(cfg.get_string("train.metric", metric_name(tc.metric)));
    tc.target_prompt = cfg.get_string("train.target_prompt", tc.target_prompt);
    tc.adamw.weight_decay = cfg.get_double("train.weight_decay", tc.adamw.weight_decay);
    for (const auto& [key, value] : cfg.items()) {
        if (key.size() > std::char_traits<char>::length(kCategoryTargetPrefix) &&
            key.rfind(kCategoryTargetPrefix, 0) == 0) {
            tc.category_targets[key.substr(
                std::char_traits<char>::length(kCategoryTargetPrefix))] = value;
        }
    }
    tc.seed = derive_seed(master_seed(cfg), "train");
    return tc;
}

EvalConfig eval_config_from(const KvConfig& cfg) {
    EvalConfig ec;
    ec.target_prompt = cfg.get_string("eval.target_prompt", ec.target_prompt);
    ec.tau = cfg.get_double("eval.tau", ec.tau);
    ec.benign_tau = cfg.get_double("eval.benign_tau", ec.benign_tau);
    return ec;
}

int augment_count_from(const KvConfig& cfg) {
    const int v = cfg.get_int("augment.count", 0);
    if (v < 0) {
        throw InvalidArgument("config key 'augment.count' must be >= 0");
    }
    return v;
}

}  // namespace semshift
