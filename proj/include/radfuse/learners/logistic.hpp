#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "radfuse/learners/common.hpp"

namespace radfuse::learners {

struct Logistic1d {
    double slope = 1.0;
    double intercept = 0.0;
    bool converged = false;
    int iterations = 0;

    double operator()(double x) const { return sigmoid(slope * x + intercept); }
};

// Maximum-likelihood fit of target ~ sigmoid(slope * x + intercept) by damped
// Newton steps. Targets may be soft (in [0,1]).
inline Logistic1d fit_logistic_1d(std::span<const double> x, std::span<const double> target, int max_iter = 100,
                                  double tol = 1e-10) {
    if (x.size() != target.size() || x.empty()) throw Error("fit_logistic_1d: bad input sizes");
    auto nll = [&](double a, double b) {
        double s = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double t = a * x[i] + b;
            s += softplus(t) - target[i] * t;
        }
        return s;
    };
    Logistic1d fit{0.0, 0.0, false, 0};
    double f = nll(fit.slope, fit.intercept);
    for (int it = 1; it <= max_iter; ++it) {
        fit.iterations = it;
        double ga = 0, gb = 0, haa = 0, hab = 0, hbb = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double p = sigmoid(fit.slope * x[i] + fit.intercept);
            const double r = p - target[i];
            const double w = std::max(p * (1.0 - p), 1e-300);
            ga += r * x[i];
            gb += r;
            haa += w * x[i] * x[i];
            hab += w * x[i];
            hbb += w;
        }
        // small diagonal lift keeps the 2x2 system solvable on flat stretches
        const double lift = 1e-12 * (haa + hbb) + 1e-300;
        const double det = (haa + lift) * (hbb + lift) - hab * hab;
        if (!(det > 0)) break;
        double da = ((hbb + lift) * ga - hab * gb) / det;
        double db = ((haa + lift) * gb - hab * ga) / det;
        double step = 1.0;
        double a = fit.slope - da, b = fit.intercept - db, fn = nll(a, b);
        while (fn > f && step > 1e-10) {
            step *= 0.5;
            a = fit.slope - step * da;
            b = fit.intercept - step * db;
            fn = nll(a, b);
        }
        const double change = std::max(std::abs(a - fit.slope), std::abs(b - fit.intercept));
        fit.slope = a;
        fit.intercept = b;
        f = fn;
        if (change < tol || std::max(std::abs(ga), std::abs(gb)) < tol) {
            fit.converged = true;
            break;
        }
    }
    return fit;
}

// Platt's prior-corrected targets, (N+ + 1)/(N+ + 2) for positives and
// 1/(N- + 2) for negatives, keep the fit finite on separable scores.
inline std::vector<double> platt_targets(std::span<const int> y) {
    double pos = 0, neg = 0;
    for (int v : y) (v == 1 ? pos : neg) += 1;
    const double hi = (pos + 1.0) / (pos + 2.0), lo = 1.0 / (neg + 2.0);
    std::vector<double> t(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) t[i] = y[i] == 1 ? hi : lo;
    return t;
}

struct LogisticModel {
    Vector beta;  // intercept first, then one coefficient per column
    Vector se;    // standard errors from the inverse penalized Hessian
    bool converged = false;
};

// Ridge-stabilized Newton fit of y ~ sigmoid(b0 + X b). The intercept is not
// penalized. `init` (size cols + 1) warm-starts the iteration when non-empty.
inline LogisticModel fit_logistic(const Matrix& x, std::span<const int> y, double ridge = 1e-4, int max_iter = 25,
                                  double tol = 1e-8, const Vector& init = Vector()) {
    const Eigen::Index n = x.rows(), k = x.cols() + 1;
    Matrix design(n, k);
    design.col(0).setOnes();
    if (k > 1) design.rightCols(k - 1) = x;
    Vector yv(n);
    for (Eigen::Index i = 0; i < n; ++i) yv(i) = y[static_cast<std::size_t>(i)];

    LogisticModel m;
    m.beta = init.size() == k ? init : Vector::Zero(k);
    auto penalized_nll = [&](const Vector& b) {
        const Vector eta = design * b;
        double s = 0;
        for (Eigen::Index i = 0; i < n; ++i) s += softplus(eta(i)) - yv(i) * eta(i);
        return s + 0.5 * ridge * b.tail(k - 1).squaredNorm();
    };
    Eigen::MatrixXd hess(k, k);
    double f = penalized_nll(m.beta);
    for (int it = 0; it < max_iter; ++it) {
        const Vector eta = design * m.beta;
        Vector p(n), w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            p(i) = sigmoid(eta(i));
            w(i) = std::max(p(i) * (1.0 - p(i)), 1e-12);
        }
        Vector grad = design.transpose() * (p - yv);
        grad.tail(k - 1) += ridge * m.beta.tail(k - 1);
        hess.noalias() = design.transpose() * w.asDiagonal() * design;
        hess.diagonal().tail(k - 1).array() += ridge;
        hess.diagonal().array() += 1e-10;
        const Vector delta = hess.ldlt().solve(grad);
        double step = 1.0;
        Vector next = m.beta - delta;
        double fn = penalized_nll(next);
        while (fn > f && step > 1e-8) {
            step *= 0.5;
            next = m.beta - step * delta;
            fn = penalized_nll(next);
        }
        const double change = (next - m.beta).cwiseAbs().maxCoeff();
        m.beta = next;
        f = fn;
        if (change < tol) {
            m.converged = true;
            break;
        }
    }
    // standard errors at the final estimate
    const Vector eta = design * m.beta;
    Vector w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double p = sigmoid(eta(i));
        w(i) = std::max(p * (1.0 - p), 1e-12);
    }
    hess.noalias() = design.transpose() * w.asDiagonal() * design;
    hess.diagonal().tail(k - 1).array() += ridge;
    hess.diagonal().array() += 1e-10;
    const Eigen::MatrixXd cov = hess.ldlt().solve(Eigen::MatrixXd::Identity(k, k));
    m.se = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    return m;
}

}  // namespace radfuse::learners
