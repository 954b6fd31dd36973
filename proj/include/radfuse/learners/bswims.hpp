#pragma once

#include <cmath>
#include <random>

#include "radfuse/learners/logistic.hpp"

namespace radfuse::learners {

struct BswimsParams {
    int bootstraps = 20;
    double z_threshold = 1.96;
    int max_size = 10;
    double ridge = 1e-4;
};

// Bagged forward stage-wise logistic selection. Each bootstrap resample grows a
// model by adding the candidate whose coefficient has the largest |z| while
// that |z| clears the threshold; predictions average the bootstrap models.
struct Bswims {
    struct Member {
        std::vector<int> features;
        Vector beta;  // intercept first, aligned with features
    };
    std::vector<Member> members;

    static Matrix select_columns(const Matrix& x, const std::vector<Eigen::Index>& rows, const std::vector<int>& cols) {
        Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t r = 0; r < rows.size(); ++r)
            for (std::size_t c = 0; c < cols.size(); ++c) out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = x(rows[r], cols[c]);
        return out;
    }

    static Member select_forward(const Matrix& x, std::span<const int> y, const std::vector<Eigen::Index>& rows,
                                 const BswimsParams& params) {
        std::vector<int> yb(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) yb[r] = y[static_cast<std::size_t>(rows[r])];
        Member m;
        LogisticModel current = fit_logistic(Matrix(static_cast<Eigen::Index>(rows.size()), 0), yb, params.ridge);
        std::vector<char> used(static_cast<std::size_t>(x.cols()), 0);
        Matrix base(static_cast<Eigen::Index>(rows.size()), 0);
        while (static_cast<int>(m.features.size()) < params.max_size) {
            double best_z = -1.0;
            int best_j = -1;
            LogisticModel best_fit;
            Matrix trial(base.rows(), base.cols() + 1);
            trial.leftCols(base.cols()) = base;
            Vector init(current.beta.size() + 1);
            init.head(current.beta.size()) = current.beta;
            init(current.beta.size()) = 0.0;
            for (Eigen::Index j = 0; j < x.cols(); ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                for (std::size_t r = 0; r < rows.size(); ++r) trial(static_cast<Eigen::Index>(r), base.cols()) = x(rows[r], j);
                LogisticModel fit = fit_logistic(trial, yb, params.ridge, 6, 1e-6, init);
                const Eigen::Index last = fit.beta.size() - 1;
                const double z = fit.se(last) > 0 ? std::abs(fit.beta(last) / fit.se(last)) : 0.0;
                if (z > best_z) {
                    best_z = z;
                    best_j = static_cast<int>(j);
                    best_fit = std::move(fit);
                }
            }
            if (best_j < 0 || best_z < params.z_threshold) break;
            used[static_cast<std::size_t>(best_j)] = 1;
            m.features.push_back(best_j);
            base.conservativeResize(Eigen::NoChange, base.cols() + 1);
            for (std::size_t r = 0; r < rows.size(); ++r) base(static_cast<Eigen::Index>(r), base.cols() - 1) = x(rows[r], best_j);
            current = fit_logistic(base, yb, params.ridge, 25, 1e-8, best_fit.beta);
        }
        m.beta = current.beta;
        return m;
    }

    static Bswims train(const Matrix& x, std::span<const int> y, std::uint64_t seed, const BswimsParams& params = {}) {
        require_both_classes(y, "bswims");
        const Eigen::Index n = x.rows();
        Bswims model;
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
        for (int b = 0; b < params.bootstraps; ++b) {
            std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
            // redraw single-class resamples
            for (;;) {
                std::size_t pos = 0;
                for (auto& r : rows) {
                    r = pick(rng);
                    pos += y[static_cast<std::size_t>(r)] == 1;
                }
                if (pos > 0 && pos < rows.size()) break;
            }
            model.members.push_back(select_forward(x, y, rows, params));
        }
        return model;
    }

    double predict_proba(const RowRef& q) const {
        double s = 0;
        for (const auto& m : members) {
            double eta = m.beta(0);
            for (std::size_t k = 0; k < m.features.size(); ++k) eta += m.beta(static_cast<Eigen::Index>(k + 1)) * q(m.features[k]);
            s += sigmoid(eta);
        }
        return clamp_probability(members.empty() ? 0.5 : s / static_cast<double>(members.size()));
    }

    void save(BundleWriter& w) const {
        w.put_int("bswims.members", static_cast<std::int64_t>(members.size()));
        for (const auto& m : members) {
            w.put_ints("bswims.features", m.features);
            w.put_vector("bswims.beta", m.beta);
        }
    }
    static Bswims load(BundleReader& r) {
        Bswims model;
        const auto count = r.get_int("bswims.members");
        for (std::int64_t i = 0; i < count; ++i) {
            Member m;
            m.features = r.get_ints("bswims.features");
            m.beta = r.get_vector("bswims.beta");
            model.members.push_back(std::move(m));
        }
        return model;
    }
};

}  // namespace radfuse::learners
