#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "radfuse/evaluation.hpp"
#include "radfuse/learners/logistic.hpp"

namespace radfuse::learners {

struct LassoParams {
    double lambda_min = 1e-4;
    double lambda_max = 1e-1;
    int grid_points = 10;
    int inner_folds = 3;
    int max_iter = 3000;
    double tol = 1e-10;
};

inline double soft_threshold(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

inline std::vector<double> lasso_lambda_grid(const LassoParams& p) {
    std::vector<double> grid(static_cast<std::size_t>(p.grid_points));
    if (p.grid_points == 1) return {p.lambda_max};
    const double lo = std::log(p.lambda_min), hi = std::log(p.lambda_max);
    for (int i = 0; i < p.grid_points; ++i) grid[i] = std::exp(lo + (hi - lo) * i / (p.grid_points - 1));
    grid.front() = p.lambda_min;
    grid.back() = p.lambda_max;
    return grid;
}

struct LassoPath {
    double intercept = 0.0;
    Vector coef;
    int iterations = 0;
};

// Accelerated proximal gradient (FISTA with gradient-based restart) on
// mean logistic loss + lambda * |coef|_1. The intercept is unpenalized.
inline LassoPath fit_lasso_fixed(const Matrix& x, std::span<const int> y, double lambda, const LassoParams& params,
                                 const LassoPath* warm = nullptr, double lipschitz = 0.0) {
    const Eigen::Index n = x.rows(), p = x.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    Vector yv(n);
    for (Eigen::Index i = 0; i < n; ++i) yv(i) = y[static_cast<std::size_t>(i)];

    if (lipschitz <= 0.0) {
        // power iteration on [1 X]^T [1 X] / n
        Vector v = Vector::Ones(p + 1) / std::sqrt(static_cast<double>(p + 1));
        double eig = 1.0;
        for (int it = 0; it < 50; ++it) {
            const Vector xv = (x * v.tail(p)).array() + v(0);
            Vector u(p + 1);
            u(0) = xv.sum() * inv_n;
            u.tail(p) = x.transpose() * xv * inv_n;
            eig = u.norm();
            if (eig <= 0) break;
            v = u / eig;
        }
        lipschitz = 0.25 * eig * 1.01 + 1e-12;
    }
    const double step = 1.0 / lipschitz;

    LassoPath cur;
    if (warm) {
        cur = *warm;
    } else {
        cur.coef = Vector::Zero(p);
        const double prev = yv.mean();
        cur.intercept = std::log(prev / (1.0 - prev));
    }
    double b = cur.intercept, b_prev = b;
    Vector c = cur.coef, c_prev = c;
    double yb = b;
    Vector yc = c;
    double t = 1.0;
    int it = 0;
    for (; it < params.max_iter; ++it) {
        const Vector eta = (x * yc).array() + yb;
        Vector r(n);
        for (Eigen::Index i = 0; i < n; ++i) r(i) = sigmoid(eta(i)) - yv(i);
        const double gb = r.sum() * inv_n;
        const Vector gc = x.transpose() * r * inv_n;

        b_prev = b;
        c_prev = c;
        b = yb - step * gb;
        c = yc - step * gc;
        for (Eigen::Index j = 0; j < p; ++j) c(j) = soft_threshold(c(j), step * lambda);

        const double change = std::max(std::abs(b - b_prev), p > 0 ? (c - c_prev).cwiseAbs().maxCoeff() : 0.0);
        if (change < params.tol) {
            ++it;
            break;
        }
        // restart momentum when it points uphill
        const double uphill = (yb - b) * (b - b_prev) + (yc - c).dot(c - c_prev);
        if (uphill > 0) t = 1.0;
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        const double mom = (t - 1.0) / t_next;
        yb = b + mom * (b - b_prev);
        yc = c + mom * (c - c_prev);
        t = t_next;
    }
    return LassoPath{b, c, it};
}

// L1-penalized logistic regression; lambda picked from a log grid by stratified
// inner cross-validated AUC (ties favor the larger lambda).
struct Lasso {
    double intercept = 0.0;
    Vector coef;
    double lambda = 0.0;

    static Lasso train(const Matrix& x, std::span<const int> y, std::uint64_t seed, const LassoParams& params = {}) {
        require_both_classes(y, "lasso");
        const auto grid = lasso_lambda_grid(params);
        const Eigen::Index n = x.rows();

        // stratified fold assignment
        std::vector<int> fold(static_cast<std::size_t>(n), 0);
        {
            std::vector<Eigen::Index> pos, neg;
            for (Eigen::Index i = 0; i < n; ++i) (y[static_cast<std::size_t>(i)] == 1 ? pos : neg).push_back(i);
            std::mt19937_64 rng(seed);
            std::shuffle(pos.begin(), pos.end(), rng);
            std::shuffle(neg.begin(), neg.end(), rng);
            for (std::size_t k = 0; k < pos.size(); ++k) fold[pos[k]] = static_cast<int>(k % params.inner_folds);
            for (std::size_t k = 0; k < neg.size(); ++k) fold[neg[k]] = static_cast<int>(k % params.inner_folds);
        }

        std::vector<double> mean_auc(grid.size(), 0.0);
        std::vector<int> used(grid.size(), 0);
        for (int f = 0; f < params.inner_folds; ++f) {
            std::vector<Eigen::Index> tr, te;
            for (Eigen::Index i = 0; i < n; ++i) (fold[i] == f ? te : tr).push_back(i);
            Matrix xtr(static_cast<Eigen::Index>(tr.size()), x.cols()), xte(static_cast<Eigen::Index>(te.size()), x.cols());
            std::vector<int> ytr, yte;
            for (std::size_t k = 0; k < tr.size(); ++k) {
                xtr.row(static_cast<Eigen::Index>(k)) = x.row(tr[k]);
                ytr.push_back(y[static_cast<std::size_t>(tr[k])]);
            }
            for (std::size_t k = 0; k < te.size(); ++k) {
                xte.row(static_cast<Eigen::Index>(k)) = x.row(te[k]);
                yte.push_back(y[static_cast<std::size_t>(te[k])]);
            }
            const auto pos_tr = std::count(ytr.begin(), ytr.end(), 1);
            const auto pos_te = std::count(yte.begin(), yte.end(), 1);
            if (pos_tr == 0 || pos_tr == static_cast<long>(ytr.size()) || pos_te == 0 ||
                pos_te == static_cast<long>(yte.size()))
                continue;
            // path from the largest lambda down, warm-started
            LassoPath path;
            bool have = false;
            for (std::size_t g = grid.size(); g-- > 0;) {
                path = fit_lasso_fixed(xtr, ytr, grid[g], params, have ? &path : nullptr);
                have = true;
                std::vector<double> scores(yte.size());
                for (std::size_t k = 0; k < yte.size(); ++k)
                    scores[k] = path.intercept + xte.row(static_cast<Eigen::Index>(k)).dot(path.coef);
                mean_auc[g] += radfuse::auc(scores, yte);
                used[g] += 1;
            }
        }
        std::size_t best = grid.size() - 1;
        double best_auc = -1.0;
        for (std::size_t g = grid.size(); g-- > 0;) {
            const double a = used[g] ? mean_auc[g] / used[g] : 0.0;
            if (a > best_auc + 1e-12) {
                best_auc = a;
                best = g;
            }
        }

        Lasso m;
        m.lambda = grid[best];
        LassoPath path;
        bool have = false;
        for (std::size_t g = grid.size(); g-- > best;) {
            path = fit_lasso_fixed(x, y, grid[g], params, have ? &path : nullptr);
            have = true;
        }
        m.intercept = path.intercept;
        m.coef = path.coef;
        return m;
    }

    // Fit at one fixed lambda, bypassing the inner search.
    static Lasso train_fixed(const Matrix& x, std::span<const int> y, double lambda, const LassoParams& params = {}) {
        require_both_classes(y, "lasso");
        const LassoPath path = fit_lasso_fixed(x, y, lambda, params);
        return Lasso{path.intercept, path.coef, lambda};
    }

    double predict_proba(const RowRef& q) const { return clamp_probability(sigmoid(intercept + coef.dot(q))); }

    void save(BundleWriter& w) const {
        w.put("lasso.lambda", lambda);
        w.put("lasso.intercept", intercept);
        w.put_vector("lasso.coef", coef);
    }
    static Lasso load(BundleReader& r) {
        Lasso m;
        m.lambda = r.get("lasso.lambda");
        m.intercept = r.get("lasso.intercept");
        m.coef = r.get_vector("lasso.coef");
        return m;
    }
};

}  // namespace radfuse::learners
