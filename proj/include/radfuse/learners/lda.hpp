#pragma once

#include <cmath>

#include "radfuse/learners/common.hpp"

namespace radfuse::learners {

struct LdaParams {
    double shrinkage = 1e-3;  // ridge = shrinkage * trace(S) / p
};

// Two-class Gaussian LDA with a pooled, ridge-shrunk covariance. The posterior
// log-odds are linear: w.x + c.
struct Lda {
    Vector w;
    double c = 0.0;

    static Lda train(const Matrix& x, std::span<const int> y, const LdaParams& params = {}) {
        require_both_classes(y, "lda");
        const Eigen::Index p = x.cols();
        Vector mu0 = Vector::Zero(p), mu1 = Vector::Zero(p);
        double n0 = 0, n1 = 0;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            if (y[static_cast<std::size_t>(i)] == 1) {
                mu1 += x.row(i).transpose();
                n1 += 1;
            } else {
                mu0 += x.row(i).transpose();
                n0 += 1;
            }
        }
        mu0 /= n0;
        mu1 /= n1;
        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(p, p);
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const Vector d = x.row(i).transpose() - (y[static_cast<std::size_t>(i)] == 1 ? mu1 : mu0);
            cov.selfadjointView<Eigen::Lower>().rankUpdate(d);
        }
        cov = cov.selfadjointView<Eigen::Lower>();
        cov /= (n0 + n1);  // maximum-likelihood pooled covariance
        const double ridge = params.shrinkage * cov.trace() / static_cast<double>(p);
        cov.diagonal().array() += std::max(ridge, 1e-12);

        Lda m;
        m.w = cov.ldlt().solve(mu1 - mu0);
        m.c = -0.5 * (mu1 + mu0).dot(m.w) + std::log(n1 / n0);
        return m;
    }

    double predict_proba(const RowRef& q) const { return clamp_probability(sigmoid(w.dot(q) + c)); }

    void save(BundleWriter& wr) const {
        wr.put_vector("lda.w", w);
        wr.put("lda.c", c);
    }
    static Lda load(BundleReader& r) {
        Lda m;
        m.w = r.get_vector("lda.w");
        m.c = r.get("lda.c");
        return m;
    }
};

}  // namespace radfuse::learners
