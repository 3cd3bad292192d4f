#pragma once

#include <string>
#include <vector>

#include "data/record.hpp"
#include "encoder/model.hpp"

namespace semshift {

struct ProjectedPoint {
    double x = 0.0;
    double y = 0.0;
    Role role = Role::kBenign;
    std::string category;
};

struct PcaResult {
    std::vector<ProjectedPoint> points;
    std::vector<double> component1;  // unit-norm principal axes, length d
    std::vector<double> component2;
    double lambda1 = 0.0;  // variance captured per axis
    double lambda2 = 0.0;
    double total_variance = 0.0;  // trace of the covariance
};

// Mean-centers the prompt embeddings and projects them onto the top two
// principal axes, found by power iteration (tolerance 1e-9, deterministic
// start, sign fixed so each axis's largest-magnitude coordinate is
// positive). Needs at least 3 prompts; throws NumericError when the
// embedding cloud has fewer than two non-degenerate directions
// (lambda2 <= 1e-12 * lambda1).
PcaResult pca_project(const Encoder& encoder, const std::vector<PromptRecord>& prompts);

// CSV with header `x,y,role,category`; fields containing commas, quotes, or
// newlines are double-quote escaped.
void write_projection_csv(const std::vector<ProjectedPoint>& points, const std::string& path);

}  // namespace semshift
