#include "eval/pca.hpp"

#include <cmath>
#include <fstream>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace semshift {

namespace {

constexpr double kTol = 1e-9;
constexpr int kMaxIters = 100000;

// Leading eigenpair of the symmetric PSD matrix `c` (d x d, row-major) by
// power iteration with a fixed pseudo-random start.
std::pair<std::vector<double>, double> leading_eigenpair(const std::vector<double>& c, size_t d) {
    Rng rng(0x5eedULL);
    std::vector<double> v(d);
    double norm = 0.0;
    for (size_t i = 0; i < d; ++i) {
        v[i] = rng.normal();
        norm += v[i] * v[i];
    }
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;

    std::vector<double> w(d);
    for (int iter = 0; iter < kMaxIters; ++iter) {
        for (size_t i = 0; i < d; ++i) {
            double s = 0.0;
            for (size_t j = 0; j < d; ++j) s += c[i * d + j] * v[j];
            w[i] = s;
        }
        double wn = 0.0;
        for (double x : w) wn += x * x;
        wn = std::sqrt(wn);
        if (wn <= 1e-300) {
            // The matrix annihilates the start vector: no variance left.
            return {std::vector<double>(d, 0.0), 0.0};
        }
        double delta = 0.0;
        for (size_t i = 0; i < d; ++i) {
            const double next = w[i] / wn;
            delta = std::max(delta, std::abs(next - v[i]));
            v[i] = next;
        }
        if (delta < kTol) {
            // Rayleigh quotient of the converged direction.
            double lambda = 0.0;
            for (size_t i = 0; i < d; ++i) {
                double s = 0.0;
                for (size_t j = 0; j < d; ++j) s += c[i * d + j] * v[j];
                lambda += v[i] * s;
            }
            return {v, lambda};
        }
    }
    throw NumericError("pca_project: power iteration did not converge");
}

void fix_sign(std::vector<double>& v) {
    size_t arg = 0;
    for (size_t i = 1; i < v.size(); ++i) {
        if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
    }
    if (v[arg] < 0.0) {
        for (double& x : v) x = -x;
    }
}

}  // namespace

PcaResult pca_project(const Encoder& encoder, const std::vector<PromptRecord>& prompts) {
    if (prompts.size() < 3) {
        throw InvalidArgument("pca_project: need at least 3 prompts");
    }
    const size_t n = prompts.size();
    const size_t d = encoder.config().d_model;

    std::vector<std::vector<double>> rows(n, std::vector<double>(d));
    std::vector<double> mean(d, 0.0);
    for (size_t i = 0; i < n; ++i) {
        const Tensor e = encoder.encode_text(prompts[i].text);
        for (size_t j = 0; j < d; ++j) {
            rows[i][j] = e.data()[j];
            mean[j] += e.data()[j];
        }
    }
    for (double& m : mean) m /= static_cast<double>(n);
    for (auto& r : rows) {
        for (size_t j = 0; j < d; ++j) r[j] -= mean[j];
    }

    // Population covariance, d x d.
    std::vector<double> cov(d * d, 0.0);
    for (const auto& r : rows) {
        for (size_t i = 0; i < d; ++i) {
            for (size_t j = i; j < d; ++j) cov[i * d + j] += r[i] * r[j];
        }
    }
    for (size_t i = 0; i < d; ++i) {
        for (size_t j = i; j < d; ++j) {
            cov[i * d + j] /= static_cast<double>(n);
            cov[j * d + i] = cov[i * d + j];
        }
    }
    double trace = 0.0;
    for (size_t i = 0; i < d; ++i) trace += cov[i * d + i];

    auto [v1, l1] = leading_eigenpair(cov, d);
    if (l1 <= 1e-300) {
        throw NumericError("pca_project: embeddings are rank-deficient (no variance)");
    }
    // Deflate and repeat for the second axis.
    std::vector<double> cov2 = cov;
    for (size_t i = 0; i < d; ++i) {
        for (size_t j = 0; j < d; ++j) cov2[i * d + j] -= l1 * v1[i] * v1[j];
    }
    auto [v2, l2] = leading_eigenpair(cov2, d);
    if (l2 <= std::max(1e-300, 1e-12 * l1)) {
        throw NumericError(
            "pca_project: embeddings are rank-deficient (fewer than two non-degenerate "
            "directions)");
    }
    fix_sign(v1);
    fix_sign(v2);

    PcaResult out;
    out.component1 = v1;
    out.component2 = v2;
    out.lambda1 = l1;
    out.lambda2 = l2;
    out.total_variance = trace;
    out.points.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        ProjectedPoint p;
        for (size_t j = 0; j < d; ++j) {
            p.x += rows[i][j] * v1[j];
            p.y += rows[i][j] * v2[j];
        }
        p.role = prompts[i].role;
        p.category = prompts[i].category;
        out.points.push_back(std::move(p));
    }
    return out;
}

namespace {

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

}  // namespace

void write_projection_csv(const std::vector<ProjectedPoint>& points, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open projection CSV for writing: " + path);
    out << "x,y,role,category\n";
    char buf[64];
    for (const ProjectedPoint& p : points) {
        std::snprintf(buf, sizeof(buf), "%.17g", p.x);
        out << buf << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", p.y);
        out << buf << ',' << role_name(p.role) << ',' << csv_escape(p.category) << '\n';
    }
    if (!out) throw IoError("failed writing projection CSV: " + path);
}

}  // namespace semshift
