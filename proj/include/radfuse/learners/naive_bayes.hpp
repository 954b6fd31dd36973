#pragma once

#include <cmath>
#include <numbers>

#include "radfuse/learners/common.hpp"

namespace radfuse::learners {

struct NaiveBayesParams {
    double var_floor = 1e-9;
};

// Gaussian naive Bayes with per-class, per-feature maximum-likelihood moments.
struct NaiveBayes {
    Vector mean0, mean1, var0, var1;
    double log_prior_ratio = 0.0;  // log(pi1 / pi0)

    static NaiveBayes train(const Matrix& x, std::span<const int> y, const NaiveBayesParams& params = {}) {
        require_both_classes(y, "naive bayes");
        const Eigen::Index p = x.cols();
        NaiveBayes m;
        m.mean0 = m.mean1 = m.var0 = m.var1 = Vector::Zero(p);
        double n0 = 0, n1 = 0;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            if (y[static_cast<std::size_t>(i)] == 1) {
                m.mean1 += x.row(i).transpose();
                n1 += 1;
            } else {
                m.mean0 += x.row(i).transpose();
                n0 += 1;
            }
        }
        m.mean0 /= n0;
        m.mean1 /= n1;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            if (y[static_cast<std::size_t>(i)] == 1)
                m.var1 += (x.row(i).transpose() - m.mean1).array().square().matrix();
            else
                m.var0 += (x.row(i).transpose() - m.mean0).array().square().matrix();
        }
        m.var0 = (m.var0 / n0).cwiseMax(params.var_floor);
        m.var1 = (m.var1 / n1).cwiseMax(params.var_floor);
        m.log_prior_ratio = std::log(n1 / n0);
        return m;
    }

    // Log-domain accumulation; per-feature terms are differenced before summing
    // so features with identical class likelihoods contribute exactly zero.
    double log_odds(const RowRef& q) const {
        double s = log_prior_ratio;
        for (Eigen::Index j = 0; j < q.size(); ++j) {
            const double d1 = q(j) - mean1(j), d0 = q(j) - mean0(j);
            const double ll1 = -0.5 * std::log(var1(j)) - d1 * d1 / (2.0 * var1(j));
            const double ll0 = -0.5 * std::log(var0(j)) - d0 * d0 / (2.0 * var0(j));
            s += ll1 - ll0;
        }
        return s;
    }

    double predict_proba(const RowRef& q) const { return clamp_probability(sigmoid(log_odds(q))); }

    void save(BundleWriter& w) const {
        w.put_vector("nb.mean0", mean0);
        w.put_vector("nb.mean1", mean1);
        w.put_vector("nb.var0", var0);
        w.put_vector("nb.var1", var1);
        w.put("nb.log_prior_ratio", log_prior_ratio);
    }
    static NaiveBayes load(BundleReader& r) {
        NaiveBayes m;
        m.mean0 = r.get_vector("nb.mean0");
        m.mean1 = r.get_vector("nb.mean1");
        m.var0 = r.get_vector("nb.var0");
        m.var1 = r.get_vector("nb.var1");
        m.log_prior_ratio = r.get("nb.log_prior_ratio");
        return m;
    }
};

}  // namespace radfuse::learners
