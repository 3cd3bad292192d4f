#include "data/split.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace semshift {

CorpusSplit split(const std::vector<PromptRecord>& records, double ratio, uint64_t seed) {
    if (records.empty()) {
        throw InvalidArgument("split: no records");
    }
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw InvalidArgument("split: ratio must lie strictly between 0 and 1");
    }

    CorpusSplit out;
    out.seed = seed;
    out.ratio = ratio;

    // roles in first-appearance order so output order is input-determined
    std::vector<Role> roles_seen;
    for (const PromptRecord& rec : records) {
        if (std::find(roles_seen.begin(), roles_seen.end(), rec.role) == roles_seen.end()) {
            roles_seen.push_back(rec.role);
        }
    }

    for (Role role : roles_seen) {
        std::vector<size_t> idx;
        for (size_t i = 0; i < records.size(); ++i) {
            if (records[i].role == role) idx.push_back(i);
        }
        const size_t n = idx.size();
        if (n < 2) {
            out.warnings.push_back("role \"" + role_name(role) +
                                   "\" has fewer than 2 records; forced to train");
            for (size_t i : idx) out.train.push_back(records[i]);
            continue;
        }
        Rng rng(derive_seed(seed, "split:" + role_name(role)));
        rng.shuffle(idx);
        size_t train_count = static_cast<size_t>(std::floor(static_cast<double>(n) * ratio));
        train_count = std::max<size_t>(1, std::min(train_count, n - 1));
        for (size_t k = 0; k < n; ++k) {
            (k < train_count ? out.train : out.validation).push_back(records[idx[k]]);
        }
    }
    return out;
}

}  // namespace semshift
