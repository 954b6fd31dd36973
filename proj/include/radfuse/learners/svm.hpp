#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "radfuse/learners/logistic.hpp"

namespace radfuse::learners {

struct SvmParams {
    double lambda = 1e-3;
    int epochs = 200;
};

// Minimizer of sum_i max(0, 1 - y_i (s_i + b)) over b, y in {-1,+1}. When the
// minimizers form an interval its midpoint is returned.
inline double best_hinge_offset(std::span<const double> margins, std::span<const int> signs) {
    // breakpoint b = y - s; positives stop contributing above it, negatives start
    std::vector<double> breaks(margins.size());
    long slope = 0;
    for (std::size_t i = 0; i < margins.size(); ++i) {
        breaks[i] = signs[i] - margins[i];
        if (signs[i] > 0) --slope;
    }
    std::sort(breaks.begin(), breaks.end());
    for (std::size_t i = 0; i < breaks.size();) {
        std::size_t j = i;
        while (j < breaks.size() && breaks[j] == breaks[i]) ++j;
        slope += static_cast<long>(j - i);
        if (slope > 0) return breaks[i];
        if (slope == 0) return j < breaks.size() ? 0.5 * (breaks[i] + breaks[j]) : breaks[i];
        i = j;
    }
    return breaks.empty() ? 0.0 : breaks.back();
}

// Linear soft-margin SVM trained by Pegasos-style stochastic subgradient steps
// (step 1/(lambda t)) with a constant feature standing in for the bias during
// training. The offset is then re-solved exactly for the learned direction, and
// margins are mapped to probabilities with Platt's method on training margins.
struct LinearSvm {
    Vector w;
    double b = 0.0;
    Logistic1d platt;

    static LinearSvm train(const Matrix& x, std::span<const int> y, std::uint64_t seed, const SvmParams& params = {}) {
        require_both_classes(y, "svm");
        const Eigen::Index n = x.rows(), p = x.cols();
        const double lambda = params.lambda;
        Vector wa = Vector::Zero(p + 1);  // last slot multiplies the constant feature
        std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 rng(seed);
        const double radius = 1.0 / std::sqrt(lambda);
        std::uint64_t t = 0;
        for (int epoch = 0; epoch < params.epochs; ++epoch) {
            std::shuffle(order.begin(), order.end(), rng);
            for (Eigen::Index i : order) {
                ++t;
                const double eta = 1.0 / (lambda * static_cast<double>(t));
                const double yi = y[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
                const double margin = yi * (x.row(i).dot(wa.head(p)) + wa(p));
                wa *= (1.0 - eta * lambda);
                if (margin < 1.0) {
                    wa.head(p) += eta * yi * x.row(i).transpose();
                    wa(p) += eta * yi;
                }
                const double norm = wa.norm();
                if (norm > radius) wa *= radius / norm;
            }
        }

        LinearSvm m;
        m.w = wa.head(p);
        std::vector<double> s(static_cast<std::size_t>(n));
        std::vector<int> sign(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            s[i] = x.row(i).dot(m.w);
            sign[i] = y[static_cast<std::size_t>(i)] == 1 ? 1 : -1;
        }
        m.b = best_hinge_offset(s, sign);
        for (auto& v : s) v += m.b;
        m.platt = fit_logistic_1d(s, platt_targets(y));
        return m;
    }

    double decision(const RowRef& q) const { return w.dot(q) + b; }
    double predict_proba(const RowRef& q) const { return clamp_probability(platt(decision(q))); }

    void save(BundleWriter& wr) const {
        wr.put_vector("svm.w", w);
        wr.put("svm.b", b);
        wr.put("svm.platt_slope", platt.slope);
        wr.put("svm.platt_intercept", platt.intercept);
    }
    static LinearSvm load(BundleReader& r) {
        LinearSvm m;
        m.w = r.get_vector("svm.w");
        m.b = r.get("svm.b");
        m.platt.slope = r.get("svm.platt_slope");
        m.platt.intercept = r.get("svm.platt_intercept");
        m.platt.converged = true;
        return m;
    }
};

}  // namespace radfuse::learners
