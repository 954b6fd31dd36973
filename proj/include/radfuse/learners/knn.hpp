#pragma once

#include <algorithm>
#include <numeric>

#include "radfuse/learners/common.hpp"

namespace radfuse::learners {

struct KnnParams {
    int k = 5;
};

// Fraction of positives among the k Euclidean-nearest training rows. Equal
// distances resolve to the lower row index.
struct Knn {
    int k = 5;
    Matrix x;
    std::vector<int> y;

    static Knn train(const Matrix& x, std::span<const int> y, const KnnParams& params = {}) {
        if (params.k < 1) throw Error("knn: k must be >= 1");
        if (static_cast<Eigen::Index>(params.k) > x.rows()) throw Error("knn: k exceeds the training size");
        return Knn{params.k, x, std::vector<int>(y.begin(), y.end())};
    }

    double predict_proba(const RowRef& q) const {
        const Eigen::Index n = x.rows();
        std::vector<std::pair<double, Eigen::Index>> d(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) d[i] = {(x.row(i).transpose() - q).squaredNorm(), i};
        std::partial_sort(d.begin(), d.begin() + k, d.end());
        int pos = 0;
        for (int i = 0; i < k; ++i) pos += y[static_cast<std::size_t>(d[i].second)];
        return static_cast<double>(pos) / k;
    }

    void save(BundleWriter& w) const {
        w.put_int("knn.k", k);
        w.put_matrix("knn.x", x);
        w.put_ints("knn.y", y);
    }
    static Knn load(BundleReader& r) {
        Knn m;
        m.k = static_cast<int>(r.get_int("knn.k"));
        m.x = r.get_matrix("knn.x");
        m.y = r.get_ints("knn.y");
        return m;
    }
};

}  // namespace radfuse::learners
